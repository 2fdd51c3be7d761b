#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "negprec/corpus.hpp"
#include "negprec/models.hpp"

namespace negprec {

/// One decision per (case, article). Three-way models store labels;
/// baselines store independent (pos?, neg?) pairs.
struct PredictionSet {
  std::vector<std::string> case_ids;
  ArticleIndex articles;
  bool baseline = false;
  std::vector<OutcomeLabel> labels;          // cases x K, three-way only
  std::vector<BaselineDecision> decisions;   // cases x K, baselines only

  std::size_t cases() const noexcept { return case_ids.size(); }
  /// Whether the prediction for (n, k) places the pair in class `cls`.
  /// Throws UsageError for the Null class of a baseline.
  bool predicts(std::size_t n, std::size_t k, OutcomeLabel cls) const;
};

PredictionSet predict(const Model& model, std::span<const Example> examples, double threshold = 0.5);

/// JSONL: {"case_id", "article", "pred": "pos"|"neg"|"null"} or, for
/// baselines, {"case_id", "article", "pos": bool, "neg": bool}.
std::string predictions_to_jsonl(const PredictionSet& preds);
void save_predictions(const std::filesystem::path& path, const PredictionSet& preds);
/// Cases keep their order of first appearance; every (case, article) pair
/// must occur exactly once.
PredictionSet load_predictions(const std::filesystem::path& path);

/// Reorders `preds` to match `case_ids` and `articles`. DataError if a pair
/// is missing.
PredictionSet align_predictions(const PredictionSet& preds, const std::vector<std::string>& case_ids,
                                const ArticleIndex& articles);

/// Keeps only the listed articles (which must all be present).
PredictionSet select_articles(const PredictionSet& preds, const ArticleIndex& subset);
LabelMatrix select_articles(const LabelMatrix& gold, const ArticleIndex& full, const ArticleIndex& subset);

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

Confusion confusion(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls);
/// 100 * 2PR / (P + R); 0 when P + R = 0.
double f1_from_confusion(const Confusion& c);
/// Pooled over every (case, article) pair. ShapeError if misaligned.
double micro_f1(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls);

/// Unweighted mean; empty if any class score is missing.
std::optional<double> all_score(std::optional<double> pos, std::optional<double> neg, std::optional<double> null);

struct RandomBaseline {
  std::array<double, 3> mean{};  // indexed by OutcomeLabel
  std::array<double, 3> sd{};
  std::size_t instantiations = 0;
};

/// Each instantiation draws every (case, article) label uniformly from
/// {POS, NEG, NULL}; per-class micro-F1 is averaged over instantiations.
RandomBaseline random_baseline(const LabelMatrix& gold, std::size_t instantiations = 100, std::uint64_t seed = 0);

enum class PermutationMode { Auto, Exhaustive, Sampled };

struct PermutationResult {
  double p_value = 1.0;
  bool exhaustive = false;
  std::size_t assignments = 0;
};

/// Two-tailed paired sign-flip test on |mean(a - b)|. Auto enumerates all
/// 2^n assignments when n <= 20 and samples `resamples` (>= 1000) otherwise.
PermutationResult permutation_test(std::span<const double> a, std::span<const double> b,
                                   std::size_t resamples = 10000, std::uint64_t seed = 0,
                                   PermutationMode mode = PermutationMode::Auto);

/// Per case: number of articles whose membership in `cls` is predicted
/// correctly. The paired unit for significance tests.
std::vector<double> per_case_scores(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls);

struct EvalReport {
  std::string model;
  std::string encoder;
  std::string corpus;
  std::string seed = "-";
  std::optional<double> f1_pos;
  std::optional<double> f1_neg;
  std::optional<double> f1_null;
  std::optional<double> f1_all;
  std::optional<RandomBaseline> random;
  std::map<std::string, double> p_values;
};

/// Scores predictions against gold; f1_null and f1_all only for three-way
/// predictions.
EvalReport evaluate(const PredictionSet& preds, const LabelMatrix& gold, std::string model, std::string encoder,
                    std::string corpus);

/// Header model,encoder,corpus,seed,pos,neg,null,all; "-" marks a missing
/// score. Numbers use the shortest round-trip representation.
std::string render_report_csv(const std::vector<EvalReport>& reports);
std::vector<EvalReport> parse_report_csv(std::string_view csv);
/// Fixed two-decimal table in the layout of the published results.
std::string render_report_table(const std::vector<EvalReport>& reports);

/// Published scores: 4 models x 3 encoders x 2 corpora.
std::vector<EvalReport> published_results_fixture();

struct AllScoreCheck {
  std::string label;
  double published = 0.0;
  double recomputed = 0.0;
  bool ok = false;
};

/// Recomputes All from the three class cells of every row that has one and
/// flags discrepancies above `tolerance`.
std::vector<AllScoreCheck> check_all_scores(const std::vector<EvalReport>& reports, double tolerance = 0.005);

}  // namespace negprec
