#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "negprec/corpus.hpp"
#include "negprec/encoder.hpp"

namespace negprec {

/// Simple: independent positive and negative classifiers over two encoders.
/// Mtl: the same two classifiers over one shared encoder.
/// Joint: per-article softmax over <+,y>, <-,y>, <null,n>.
/// ClaimOutcome: p(claim) and p(+ | claim) over two encoders, marginalized.
enum class Architecture { Simple, Mtl, Joint, ClaimOutcome };

inline constexpr std::array<Architecture, 4> kArchitectures = {
    Architecture::Simple, Architecture::Mtl, Architecture::Joint, Architecture::ClaimOutcome};

std::string_view to_string(Architecture arch);
Architecture parse_architecture(std::string_view text);

/// True for the architectures producing an OutcomeDistribution.
constexpr bool is_three_way(Architecture arch) {
  return arch == Architecture::Joint || arch == Architecture::ClaimOutcome;
}
constexpr std::size_t encoder_count(Architecture arch) {
  return (arch == Architecture::Simple || arch == Architecture::ClaimOutcome) ? 2 : 1;
}

struct ModelDims {
  Eigen::Index articles = 0;       // K
  Eigen::Index input = 64;         // d1
  Eigen::Index hidden = 50;        // d2
  Eigen::Index second_hidden = 50; // d3

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

/// sigma(out . relu(hidden * x)); hidden is h x d1, out has h entries.
struct SigmoidHead {
  Eigen::MatrixXd hidden;
  Eigen::VectorXd out;
};

/// softmax(out * relu(hidden * x)); hidden is d2 x d1, out is 3 x d2.
struct SoftmaxHead {
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd out;
};

/// Weights of one architecture. Encoder and head roles:
///   Simple        encoders[0] -> first (pos), encoders[1] -> second (neg)
///   Mtl           encoders[0] -> first (pos) and second (neg)
///   Joint         encoders[0] -> joint
///   ClaimOutcome  encoders[0] -> first (claim), encoders[1] -> second (+ | claim)
/// `first` heads have width d2, `second` heads d3.
struct Model {
  Architecture architecture = Architecture::Joint;
  ModelDims dims;
  TokenizerConfig tokenizer;
  ArticleIndex articles;
  std::vector<EncoderParams> encoders;
  std::vector<SigmoidHead> first;
  std::vector<SigmoidHead> second;
  std::vector<SoftmaxHead> joint;

  const EncoderParams& encoder_for_first() const { return encoders.front(); }
  const EncoderParams& encoder_for_second() const { return encoders.back(); }
};

struct ModelInit {
  EncoderKind encoder_kind = EncoderKind::HashedBow;
  std::shared_ptr<const VectorTable> vectors;  // required for Precomputed
  double embedding_scale = 1.0;                // uniform in [-scale, scale]
  std::uint64_t seed = 0;
};

/// Heads uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. dims.articles is
/// taken from `articles`; dims.input from the vector table for Precomputed.
Model make_model(Architecture arch, ModelDims dims, const TokenizerConfig& tokenizer,
                 const ArticleIndex& articles, const ModelInit& init);

/// Throws ShapeError if any tensor disagrees with the architecture and dims.
void validate(const Model& model);

/// Head parameters, encoders excluded.
std::size_t head_parameter_count(const Model& model);
std::size_t expected_head_parameter_count(Architecture arch, const ModelDims& dims);

/// Visits every trainable tensor (frozen encoders skipped) in a fixed order
/// as a flat span. Two models of identical shape visit aligned spans.
void for_each_parameter(Model& model, const std::function<void(std::span<double>)>& visit);
void for_each_parameter(const Model& model, const std::function<void(std::span<const double>)>& visit);

/// Same shapes and roles as `model`, every trainable tensor zero.
Model zeros_like(const Model& model);

Example make_example(const Case& c, const TokenizerConfig& tokenizer);
std::vector<Example> make_examples(const std::vector<Case>& cases, const TokenizerConfig& tokenizer);

/// Per-article (p_pos, p_neg, p_null).
struct OutcomeDistribution {
  std::vector<std::array<double, 3>> rows;
  std::size_t size() const noexcept { return rows.size(); }
};

/// Per-article independent probabilities of a positive and of a negative
/// outcome. They need not be coherent: both may exceed one half.
struct BaselineScores {
  std::vector<double> p_pos;
  std::vector<double> p_neg;
  std::size_t size() const noexcept { return p_pos.size(); }
};

struct ClaimOutcomeScores {
  std::vector<double> p_claim;
  std::vector<double> p_pos_given_claim;
};

double sigmoid(double x) noexcept;
/// log(sigmoid(x)) without overflow.
double log_sigmoid(double x) noexcept;

double sigmoid_head_logit(const SigmoidHead& head, const Eigen::VectorXd& encoding);
Eigen::Vector3d softmax_head_logits(const SoftmaxHead& head, const Eigen::VectorXd& encoding);
/// Max-shifted softmax.
Eigen::Vector3d softmax(const Eigen::Vector3d& logits);

BaselineScores simple_baseline_forward(const Model& model, const Example& example);
BaselineScores mtl_forward(const Model& model, const Example& example);
OutcomeDistribution joint_forward(const Model& model, const Example& example);
ClaimOutcomeScores claim_outcome_forward(const Model& model, const Example& example);

/// p_pos = q c, p_neg = (1 - q) c, p_null = 1 - c for claim probability c and
/// positive-given-claim probability q.
OutcomeDistribution marginalize(std::span<const double> p_claim, std::span<const double> p_pos_given_claim);

/// Joint or ClaimOutcome models only.
OutcomeDistribution outcome_distribution(const Model& model, const Example& example);
/// Simple or Mtl models only.
BaselineScores baseline_scores(const Model& model, const Example& example);

/// Per-article argmax; ties go to POS, then NEG, then NULL.
std::vector<OutcomeLabel> decide(const OutcomeDistribution& dist);
OutcomeLabel decide(const std::array<double, 3>& row);

struct BaselineDecision {
  bool pos = false;
  bool neg = false;
  friend bool operator==(BaselineDecision, BaselineDecision) = default;
};

/// Independent strict thresholding of p_pos and p_neg.
std::vector<BaselineDecision> decide_baseline(const BaselineScores& scores, double threshold = 0.5);

}  // namespace negprec
