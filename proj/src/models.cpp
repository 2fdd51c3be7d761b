#include "negprec/models.hpp"

#include <cmath>
#include <random>
#include <string>

#include "negprec/error.hpp"

namespace negprec {

namespace {

void check_architecture(const Model& model, Architecture expected) {
  if (model.architecture != expected) {
    throw ShapeError("model is '" + std::string(to_string(model.architecture)) + "', expected '" +
                     std::string(to_string(expected)) + "'");
  }
}

void check_heads(std::size_t count, const Model& model, const char* role) {
  if (count != static_cast<std::size_t>(model.dims.articles)) {
    throw ShapeError(std::string(role) + " heads: expected " + std::to_string(model.dims.articles) +
                     ", found " + std::to_string(count));
  }
}

void fill_uniform(double* data, Eigen::Index n, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < n; ++i) data[i] = dist(rng);
}

SigmoidHead make_sigmoid_head(Eigen::Index width, Eigen::Index input, std::mt19937_64& rng) {
  SigmoidHead h{Eigen::MatrixXd(width, input), Eigen::VectorXd(width)};
  fill_uniform(h.hidden.data(), h.hidden.size(), 1.0 / std::sqrt(static_cast<double>(input)), rng);
  fill_uniform(h.out.data(), h.out.size(), 1.0 / std::sqrt(static_cast<double>(width)), rng);
  return h;
}

SoftmaxHead make_softmax_head(Eigen::Index width, Eigen::Index input, std::mt19937_64& rng) {
  SoftmaxHead h{Eigen::MatrixXd(width, input), Eigen::MatrixXd(3, width)};
  fill_uniform(h.hidden.data(), h.hidden.size(), 1.0 / std::sqrt(static_cast<double>(input)), rng);
  fill_uniform(h.out.data(), h.out.size(), 1.0 / std::sqrt(static_cast<double>(width)), rng);
  return h;
}

void check_head(const SigmoidHead& h, Eigen::Index width, Eigen::Index input) {
  if (h.hidden.rows() != width || h.hidden.cols() != input || h.out.size() != width) {
    throw ShapeError("sigmoid head shape mismatch");
  }
  if (!h.hidden.allFinite() || !h.out.allFinite()) throw ShapeError("sigmoid head has non-finite weights");
}

void check_head(const SoftmaxHead& h, Eigen::Index width, Eigen::Index input) {
  if (h.hidden.rows() != width || h.hidden.cols() != input || h.out.rows() != 3 || h.out.cols() != width) {
    throw ShapeError("softmax head shape mismatch");
  }
  if (!h.hidden.allFinite() || !h.out.allFinite()) throw ShapeError("softmax head has non-finite weights");
}

template <typename ModelT, typename Visit>
void visit_parameters(ModelT& model, Visit&& visit) {
  auto span_of = [](auto& tensor) { return std::span(tensor.data(), static_cast<std::size_t>(tensor.size())); };
  for (auto& enc : model.encoders) {
    if (enc.trainable()) visit(span_of(enc.embedding));
  }
  for (auto& h : model.first) {
    visit(span_of(h.hidden));
    visit(span_of(h.out));
  }
  for (auto& h : model.second) {
    visit(span_of(h.hidden));
    visit(span_of(h.out));
  }
  for (auto& h : model.joint) {
    visit(span_of(h.hidden));
    visit(span_of(h.out));
  }
}

BaselineScores two_head_forward(const Model& model, const Example& example) {
  check_heads(model.first.size(), model, "positive");
  check_heads(model.second.size(), model, "negative");
  const Eigen::VectorXd x1 = encode(example, model.encoder_for_first());
  const Eigen::VectorXd x2 =
      model.encoders.size() == 1 ? x1 : encode(example, model.encoder_for_second());
  BaselineScores s;
  s.p_pos.reserve(model.first.size());
  s.p_neg.reserve(model.second.size());
  for (std::size_t k = 0; k < model.first.size(); ++k) {
    s.p_pos.push_back(sigmoid(sigmoid_head_logit(model.first[k], x1)));
    s.p_neg.push_back(sigmoid(sigmoid_head_logit(model.second[k], x2)));
  }
  return s;
}

}  // namespace

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::Simple: return "simple";
    case Architecture::Mtl: return "mtl";
    case Architecture::Joint: return "joint";
    case Architecture::ClaimOutcome: return "claim-outcome";
  }
  return "?";
}

Architecture parse_architecture(std::string_view text) {
  for (Architecture a : kArchitectures) {
    if (text == to_string(a)) return a;
  }
  if (text == "claim_outcome") return Architecture::ClaimOutcome;
  throw UsageError("unknown architecture '" + std::string(text) +
                   "' (expected simple, mtl, joint or claim-outcome)");
}

Model make_model(Architecture arch, ModelDims dims, const TokenizerConfig& tokenizer,
                 const ArticleIndex& articles, const ModelInit& init) {
  if (articles.empty()) throw ShapeError("model needs at least one article");
  if (dims.hidden < 1 || dims.second_hidden < 1) throw ShapeError("hidden widths must be >= 1");
  dims.articles = static_cast<Eigen::Index>(articles.size());

  Model m;
  m.architecture = arch;
  m.tokenizer = tokenizer;
  m.articles = articles;
  std::mt19937_64 rng(init.seed);

  for (std::size_t e = 0; e < encoder_count(arch); ++e) {
    if (init.encoder_kind == EncoderKind::Precomputed) {
      m.encoders.push_back(EncoderParams::precomputed(init.vectors));
    } else {
      if (dims.input < 1) throw ShapeError("encoder width must be >= 1");
      auto enc = EncoderParams::hashed_bow(static_cast<Eigen::Index>(tokenizer.vocab_buckets), dims.input);
      fill_uniform(enc.embedding.data(), enc.embedding.size(), init.embedding_scale, rng);
      m.encoders.push_back(std::move(enc));
    }
  }
  dims.input = m.encoders.front().width;
  m.dims = dims;

  const auto K = static_cast<std::size_t>(dims.articles);
  if (arch == Architecture::Joint) {
    for (std::size_t k = 0; k < K; ++k) m.joint.push_back(make_softmax_head(dims.hidden, dims.input, rng));
  } else {
    for (std::size_t k = 0; k < K; ++k) m.first.push_back(make_sigmoid_head(dims.hidden, dims.input, rng));
    for (std::size_t k = 0; k < K; ++k) {
      m.second.push_back(make_sigmoid_head(dims.second_hidden, dims.input, rng));
    }
  }
  return m;
}

void validate(const Model& model) {
  const auto& d = model.dims;
  if (d.articles != static_cast<Eigen::Index>(model.articles.size()) || d.articles < 1) {
    throw ShapeError("article count does not match the article index");
  }
  if (model.encoders.size() != encoder_count(model.architecture)) {
    throw ShapeError("wrong number of encoders for architecture " +
                     std::string(to_string(model.architecture)));
  }
  for (const auto& enc : model.encoders) {
    validate(enc);
    if (enc.width != d.input) throw ShapeError("encoder width differs from d1");
  }
  if (model.architecture == Architecture::Joint) {
    check_heads(model.joint.size(), model, "joint");
    if (!model.first.empty() || !model.second.empty()) throw ShapeError("joint model has sigmoid heads");
    for (const auto& h : model.joint) check_head(h, d.hidden, d.input);
  } else {
    check_heads(model.first.size(), model, "first");
    check_heads(model.second.size(), model, "second");
    if (!model.joint.empty()) throw ShapeError("two-classifier model has softmax heads");
    for (const auto& h : model.first) check_head(h, d.hidden, d.input);
    for (const auto& h : model.second) check_head(h, d.second_hidden, d.input);
  }
}

std::size_t head_parameter_count(const Model& model) {
  std::size_t n = 0;
  for (const auto& h : model.first) n += static_cast<std::size_t>(h.hidden.size() + h.out.size());
  for (const auto& h : model.second) n += static_cast<std::size_t>(h.hidden.size() + h.out.size());
  for (const auto& h : model.joint) n += static_cast<std::size_t>(h.hidden.size() + h.out.size());
  return n;
}

std::size_t expected_head_parameter_count(Architecture arch, const ModelDims& d) {
  const auto K = static_cast<std::size_t>(d.articles);
  const auto d1 = static_cast<std::size_t>(d.input);
  const auto d2 = static_cast<std::size_t>(d.hidden);
  const auto d3 = static_cast<std::size_t>(d.second_hidden);
  if (arch == Architecture::Joint) return K * (3 * d2 + d2 * d1);
  return K * (d2 + d2 * d1 + d3 + d3 * d1);
}

void for_each_parameter(Model& model, const std::function<void(std::span<double>)>& visit) {
  visit_parameters(model, visit);
}

void for_each_parameter(const Model& model, const std::function<void(std::span<const double>)>& visit) {
  visit_parameters(model, [&](std::span<const double> s) { visit(s); });
}

Model zeros_like(const Model& model) {
  Model z = model;
  for_each_parameter(z, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
  return z;
}

Example make_example(const Case& c, const TokenizerConfig& tokenizer) {
  return Example{c.case_id, tokenize(c.facts, tokenizer)};
}

std::vector<Example> make_examples(const std::vector<Case>& cases, const TokenizerConfig& tokenizer) {
  std::vector<Example> out;
  out.reserve(cases.size());
  for (const Case& c : cases) out.push_back(make_example(c, tokenizer));
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) noexcept {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double sigmoid_head_logit(const SigmoidHead& head, const Eigen::VectorXd& encoding) {
  if (head.hidden.cols() != encoding.size() || head.out.size() != head.hidden.rows()) {
    throw ShapeError("sigmoid head shape mismatch");
  }
  return head.out.dot((head.hidden * encoding).cwiseMax(0.0));
}

Eigen::Vector3d softmax_head_logits(const SoftmaxHead& head, const Eigen::VectorXd& encoding) {
  if (head.hidden.cols() != encoding.size() || head.out.cols() != head.hidden.rows() || head.out.rows() != 3) {
    throw ShapeError("softmax head shape mismatch");
  }
  return head.out * (head.hidden * encoding).cwiseMax(0.0);
}

Eigen::Vector3d softmax(const Eigen::Vector3d& logits) {
  const Eigen::Vector3d e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

BaselineScores simple_baseline_forward(const Model& model, const Example& example) {
  check_architecture(model, Architecture::Simple);
  return two_head_forward(model, example);
}

BaselineScores mtl_forward(const Model& model, const Example& example) {
  check_architecture(model, Architecture::Mtl);
  return two_head_forward(model, example);
}

OutcomeDistribution joint_forward(const Model& model, const Example& example) {
  check_architecture(model, Architecture::Joint);
  check_heads(model.joint.size(), model, "joint");
  const Eigen::VectorXd x = encode(example, model.encoders.front());
  OutcomeDistribution dist;
  dist.rows.reserve(model.joint.size());
  for (const auto& head : model.joint) {
    const Eigen::Vector3d p = softmax(softmax_head_logits(head, x));
    dist.rows.push_back({p[0], p[1], p[2]});
  }
  return dist;
}

ClaimOutcomeScores claim_outcome_forward(const Model& model, const Example& example) {
  check_architecture(model, Architecture::ClaimOutcome);
  check_heads(model.first.size(), model, "claim");
  check_heads(model.second.size(), model, "outcome");
  const Eigen::VectorXd x_claim = encode(example, model.encoder_for_first());
  const Eigen::VectorXd x_outcome = encode(example, model.encoder_for_second());
  ClaimOutcomeScores s;
  for (std::size_t k = 0; k < model.first.size(); ++k) {
    s.p_claim.push_back(sigmoid(sigmoid_head_logit(model.first[k], x_claim)));
    s.p_pos_given_claim.push_back(sigmoid(sigmoid_head_logit(model.second[k], x_outcome)));
  }
  return s;
}

OutcomeDistribution marginalize(std::span<const double> p_claim, std::span<const double> p_pos_given_claim) {
  if (p_claim.size() != p_pos_given_claim.size()) throw ShapeError("marginalize: length mismatch");
  OutcomeDistribution dist;
  dist.rows.reserve(p_claim.size());
  for (std::size_t k = 0; k < p_claim.size(); ++k) {
    const double c = p_claim[k];
    const double q = p_pos_given_claim[k];
    dist.rows.push_back({q * c, (1.0 - q) * c, 1.0 - c});
  }
  return dist;
}

OutcomeDistribution outcome_distribution(const Model& model, const Example& example) {
  if (model.architecture == Architecture::Joint) return joint_forward(model, example);
  const auto s = claim_outcome_forward(model, example);
  return marginalize(s.p_claim, s.p_pos_given_claim);
}

BaselineScores baseline_scores(const Model& model, const Example& example) {
  if (model.architecture == Architecture::Simple) return simple_baseline_forward(model, example);
  return mtl_forward(model, example);
}

OutcomeLabel decide(const std::array<double, 3>& row) {
  const auto [pos, neg, null] = row;
  if (pos >= neg && pos >= null) return OutcomeLabel::Pos;
  if (neg >= null) return OutcomeLabel::Neg;
  return OutcomeLabel::Null;
}

std::vector<OutcomeLabel> decide(const OutcomeDistribution& dist) {
  std::vector<OutcomeLabel> out;
  out.reserve(dist.size());
  for (const auto& row : dist.rows) out.push_back(decide(row));
  return out;
}

std::vector<BaselineDecision> decide_baseline(const BaselineScores& scores, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie in (0, 1)");
  if (scores.p_pos.size() != scores.p_neg.size()) throw ShapeError("baseline scores length mismatch");
  std::vector<BaselineDecision> out;
  out.reserve(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out.push_back({scores.p_pos[k] > threshold, scores.p_neg[k] > threshold});
  }
  return out;
}

}  // namespace negprec
