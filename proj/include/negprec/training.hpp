#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negprec/corpus.hpp"
#include "negprec/encoder.hpp"
#include "negprec/models.hpp"

namespace negprec {

/// Hyperparameters of one training run plus the encoder/model settings that
/// are held fixed across a grid.
struct TrainConfig {
  double learning_rate = 3e-4;
  double dropout = 0.2;
  Eigen::Index hidden = 50;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 10;
  std::uint64_t seed = 0;

  Eigen::Index input_width = 64;
  TokenizerConfig tokenizer;
  EncoderKind encoder = EncoderKind::HashedBow;
  std::optional<std::filesystem::path> vectors;
  double embedding_scale = 1.0;

  /// Throws UsageError on out-of-range values.
  void validate() const;
  /// Stable key=value rendering, used for logs and config hashes.
  std::string to_text() const;
};

struct HyperGrid {
  std::vector<double> learning_rates;
  std::vector<double> dropouts;
  std::vector<Eigen::Index> hidden_sizes;

  std::size_t size() const noexcept {
    return learning_rates.size() * dropouts.size() * hidden_sizes.size();
  }
  /// Learning rate outermost, hidden size innermost.
  std::vector<TrainConfig> expand(const TrainConfig& base) const;
};

/// 3 learning rates x 3 dropouts x 4 hidden sizes.
HyperGrid full_grid();
/// One learning rate, one dropout, hidden sizes 50 and 100.
HyperGrid desk_grid();

class KeyValueConfig;

/// Known keys: learning_rate, dropout, hidden, batch_size, max_epochs, seed,
/// d1, max_tokens, vocab_buckets, hash_seed, encoder, vectors,
/// embedding_scale, grid. learning_rate, dropout and hidden accept
/// comma-separated lists, which become grid axes; grid=full or grid=desk
/// selects a preset instead. The returned config holds the first grid point.
struct ParsedTrainConfig {
  TrainConfig config;
  HyperGrid grid;
};
ParsedTrainConfig parse_train_config(const KeyValueConfig& cfg, TrainConfig base = {});
inline constexpr std::string_view kTrainConfigKeys[] = {
    "learning_rate", "dropout",    "hidden",  "batch_size", "max_epochs",      "seed", "d1",
    "max_tokens",    "vocab_buckets", "hash_seed", "encoder", "vectors", "embedding_scale", "grid"};

/// Triples (outcome labels, claims, facts); claims are implied by the labels.
struct Dataset {
  std::vector<Example> examples;
  LabelMatrix labels;
  std::size_t size() const noexcept { return examples.size(); }
};

Dataset make_dataset(const std::vector<Case>& cases, const ArticleIndex& index,
                     const TokenizerConfig& tokenizer, Warnings* warnings = nullptr);

struct LossStats {
  std::size_t clamped = 0;  // gold probabilities that underflowed to 0
};

/// Mean over the selected cases of -sum_k log p(o_k, c_k | f). Dropout off.
/// `rows` empty means every case. Throws UsageError on an empty batch.
double nll_loss(const Model& model, const Dataset& data, std::span<const std::size_t> rows = {},
                LossStats* stats = nullptr);

/// Inverted dropout on encoder outputs.
struct DropoutSampler {
  double rate = 0.0;
  std::mt19937_64* rng = nullptr;
};

struct LossAndGradient {
  double loss = 0.0;
  Model gradient;
  LossStats stats;
};

LossAndGradient loss_and_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows = {},
                                  const DropoutSampler& dropout = {});

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
  AdamHyper hyper;
};

AdamState make_adam_state(const Model& model, AdamHyper hyper = {});

/// One bias-corrected Adam update of a flat tensor. `step` is 1-based.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, std::size_t step, double learning_rate, const AdamHyper& hyper);

/// Throws NumericError (parameters untouched) on a non-finite gradient.
void adam_step(Model& params, const Model& grads, AdamState& state, double learning_rate);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
  std::size_t clamped = 0;
};

struct TrainResult {
  Architecture architecture = Architecture::Joint;
  TrainConfig config;
  Model model;  // parameters of the selected epoch
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;
  double selected_validation_loss = 0.0;
};

/// Initial model for a configuration (deterministic in config.seed).
Model initial_model(Architecture arch, const TrainConfig& config, const ArticleIndex& index);

/// Up to max_epochs of shuffled mini-batch Adam; keeps the epoch with the
/// lowest validation loss (earliest on ties). NumericError on divergence.
TrainResult train(Architecture arch, const TrainConfig& config, const Dataset& train_data,
                  const Dataset& validation_data, const ArticleIndex& index);
TrainResult train(Architecture arch, const TrainConfig& config, const SplitSet& splits,
                  const ArticleIndex& index);

/// One JSON object per epoch followed by a summary record.
std::string training_log_jsonl(const TrainResult& result);

struct GridEntry {
  TrainConfig config;
  std::optional<double> validation_loss;  // empty when the run diverged
  std::string error;
};

struct GridResult {
  TrainResult best;
  std::vector<GridEntry> entries;
};

/// Trains every configuration and keeps the lowest validation loss (first on
/// ties). Diverged configurations are recorded; NumericError if all diverge.
GridResult grid_search(Architecture arch, const TrainConfig& base, const HyperGrid& grid, const Dataset& train_data,
                       const Dataset& validation_data, const ArticleIndex& index);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
};

/// Applied to the analytic gradient before comparison (mutation testing).
using GradientHook = std::function<void(Model& gradient)>;

/// Compares the analytic gradient of nll_loss (dropout off) against central
/// differences on a random sample of at least `min_coordinates` coordinates
/// (all, if fewer exist). Candidates are every head weight and the embedding
/// rows of tokens present in `data`. Relative error is
/// |a - n| / max(|a|, |n|, 1e-5).
GradientCheckResult gradient_check(const Model& model, const Dataset& data, double epsilon, std::uint64_t seed,
                                   std::size_t min_coordinates = 200, const GradientHook& corrupt = {});

}  // namespace negprec
