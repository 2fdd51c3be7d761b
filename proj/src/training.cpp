#include "negprec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "negprec/error.hpp"
#include "negprec/kv_config.hpp"

namespace negprec {

namespace {

constexpr double kClampProbability = 1e-12;

struct HeadCache {
  Eigen::VectorXd pre;
  Eigen::VectorXd act;
};

double forward(const SigmoidHead& h, const Eigen::VectorXd& x, HeadCache& c) {
  c.pre = h.hidden * x;
  c.act = c.pre.cwiseMax(0.0);
  return h.out.dot(c.act);
}

Eigen::Vector3d forward(const SoftmaxHead& h, const Eigen::VectorXd& x, HeadCache& c) {
  c.pre = h.hidden * x;
  c.act = c.pre.cwiseMax(0.0);
  return h.out * c.act;
}

void backward_hidden(const Eigen::MatrixXd& hidden, const Eigen::VectorXd& x, const HeadCache& c,
                     const Eigen::VectorXd& d_act, Eigen::MatrixXd& g_hidden, Eigen::VectorXd& dx) {
  const Eigen::VectorXd d_pre = d_act.cwiseProduct((c.pre.array() > 0.0).cast<double>().matrix());
  g_hidden.noalias() += d_pre * x.transpose();
  dx.noalias() += hidden.transpose() * d_pre;
}

void backward(const SigmoidHead& h, const Eigen::VectorXd& x, const HeadCache& c, double dz, SigmoidHead& g,
              Eigen::VectorXd& dx) {
  if (dz == 0.0) return;
  g.out += dz * c.act;
  backward_hidden(h.hidden, x, c, dz * h.out, g.hidden, dx);
}

void backward(const SoftmaxHead& h, const Eigen::VectorXd& x, const HeadCache& c, const Eigen::Vector3d& dz,
              SoftmaxHead& g, Eigen::VectorXd& dx) {
  g.out.noalias() += dz * c.act.transpose();
  backward_hidden(h.hidden, x, c, h.out.transpose() * dz, g.hidden, dx);
}

/// -log of a binary factor with logit z and 0/1 target. Sets dz to
/// d(-log p)/dz. An underflowed probability is clamped and has no gradient.
double binary_term(double z, bool target, double& dz, LossStats& stats) {
  const double logp = target ? log_sigmoid(z) : log_sigmoid(-z);
  if (std::exp(logp) == 0.0) {
    ++stats.clamped;
    dz = 0.0;
    return -std::log(kClampProbability);
  }
  dz = sigmoid(z) - (target ? 1.0 : 0.0);
  return -logp;
}

double categorical_term(const Eigen::Vector3d& z, int target, Eigen::Vector3d& dz, LossStats& stats) {
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  const double logp = z[target] - lse;
  if (std::exp(logp) == 0.0) {
    ++stats.clamped;
    dz.setZero();
    return -std::log(kClampProbability);
  }
  dz = (z.array() - lse).exp().matrix();
  dz[target] -= 1.0;
  return -logp;
}

/// Loss of one case; accumulates `scale` times its gradient into `grad`
/// when non-null.
double example_loss(const Model& model, const Example& ex, const LabelMatrix& labels, std::size_t row,
                    Model* grad, double scale, const DropoutSampler& dropout, LossStats& stats) {
  const std::size_t n_enc = model.encoders.size();
  std::vector<Eigen::VectorXd> xs(n_enc), masks(n_enc), dxs(n_enc);
  for (std::size_t e = 0; e < n_enc; ++e) {
    xs[e] = encode(ex, model.encoders[e]);
    if (dropout.rate > 0.0 && dropout.rng) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      masks[e].resize(xs[e].size());
      const double keep = 1.0 / (1.0 - dropout.rate);
      for (Eigen::Index i = 0; i < xs[e].size(); ++i) masks[e][i] = u(*dropout.rng) < dropout.rate ? 0.0 : keep;
      xs[e] = xs[e].cwiseProduct(masks[e]);
    }
    if (grad) dxs[e] = Eigen::VectorXd::Zero(xs[e].size());
  }
  const std::size_t first_enc = 0;
  const std::size_t second_enc = n_enc - 1;

  double loss = 0.0;
  HeadCache c1, c2;
  const auto K = static_cast<std::size_t>(model.dims.articles);
  for (std::size_t k = 0; k < K; ++k) {
    const OutcomeLabel gold = labels.at(row, k);
    switch (model.architecture) {
      case Architecture::Joint: {
        const Eigen::Vector3d z = forward(model.joint[k], xs[0], c1);
        Eigen::Vector3d dz;
        loss += categorical_term(z, static_cast<int>(gold), dz, stats);
        if (grad) backward(model.joint[k], xs[0], c1, scale * dz, grad->joint[k], dxs[0]);
        break;
      }
      case Architecture::ClaimOutcome: {
        const bool claimed = gold != OutcomeLabel::Null;
        double dz = 0.0;
        const double zc = forward(model.first[k], xs[first_enc], c1);
        loss += binary_term(zc, claimed, dz, stats);
        if (grad) backward(model.first[k], xs[first_enc], c1, scale * dz, grad->first[k], dxs[first_enc]);
        if (claimed) {
          const double zo = forward(model.second[k], xs[second_enc], c2);
          loss += binary_term(zo, gold == OutcomeLabel::Pos, dz, stats);
          if (grad) backward(model.second[k], xs[second_enc], c2, scale * dz, grad->second[k], dxs[second_enc]);
        }
        break;
      }
      case Architecture::Simple:
      case Architecture::Mtl: {
        double dz = 0.0;
        const double zp = forward(model.first[k], xs[first_enc], c1);
        loss += binary_term(zp, gold == OutcomeLabel::Pos, dz, stats);
        if (grad) backward(model.first[k], xs[first_enc], c1, scale * dz, grad->first[k], dxs[first_enc]);
        const double zn = forward(model.second[k], xs[second_enc], c2);
        loss += binary_term(zn, gold == OutcomeLabel::Neg, dz, stats);
        if (grad) backward(model.second[k], xs[second_enc], c2, scale * dz, grad->second[k], dxs[second_enc]);
        break;
      }
    }
  }
  if (grad) {
    for (std::size_t e = 0; e < n_enc; ++e) {
      if (!model.encoders[e].trainable()) continue;
      if (masks[e].size() > 0) dxs[e] = dxs[e].cwiseProduct(masks[e]);
      encode_backward(ex, model.encoders[e], dxs[e], grad->encoders[e].embedding);
    }
  }
  return loss;
}

std::vector<std::size_t> resolve_rows(const Dataset& data, std::span<const std::size_t> rows) {
  if (!rows.empty()) return {rows.begin(), rows.end()};
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return all;
}

void check_dataset(const Model& model, const Dataset& data) {
  if (data.labels.cases() != data.size() ||
      data.labels.articles() != static_cast<std::size_t>(model.dims.articles)) {
    throw ShapeError("dataset labels do not match the model's article count");
  }
}

std::vector<std::span<double>> parameter_spans(Model& m) {
  std::vector<std::span<double>> out;
  for_each_parameter(m, [&](std::span<double> s) { out.push_back(s); });
  return out;
}

std::vector<std::span<const double>> parameter_spans(const Model& m) {
  std::vector<std::span<const double>> out;
  for_each_parameter(m, [&](std::span<const double> s) { out.push_back(s); });
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw UsageError("learning_rate must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (hidden < 1) throw UsageError("hidden must be >= 1");
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
  if (input_width < 1) throw UsageError("d1 must be >= 1");
  if (tokenizer.max_tokens < 1 || tokenizer.vocab_buckets < 1) {
    throw UsageError("max_tokens and vocab_buckets must be >= 1");
  }
  if (encoder == EncoderKind::Precomputed && !vectors) {
    throw UsageError("precomputed encoder needs a vectors file");
  }
  if (!(embedding_scale > 0.0)) throw UsageError("embedding_scale must be > 0");
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "learning_rate=" << format_double(learning_rate) << '\n'
      << "dropout=" << format_double(dropout) << '\n'
      << "hidden=" << hidden << '\n'
      << "batch_size=" << batch_size << '\n'
      << "max_epochs=" << max_epochs << '\n'
      << "seed=" << seed << '\n'
      << "d1=" << input_width << '\n'
      << "max_tokens=" << tokenizer.max_tokens << '\n'
      << "vocab_buckets=" << tokenizer.vocab_buckets << '\n'
      << "hash_seed=" << tokenizer.hash_seed << '\n'
      << "encoder=" << to_string(encoder) << '\n'
      << "embedding_scale=" << format_double(embedding_scale) << '\n';
  if (vectors) out << "vectors=" << vectors->string() << '\n';
  return out.str();
}

std::vector<TrainConfig> HyperGrid::expand(const TrainConfig& base) const {
  std::vector<TrainConfig> out;
  for (double lr : learning_rates) {
    for (double dropout : dropouts) {
      for (Eigen::Index hidden : hidden_sizes) {
        TrainConfig c = base;
        c.learning_rate = lr;
        c.dropout = dropout;
        c.hidden = hidden;
        out.push_back(std::move(c));
      }
    }
  }
  return out;
}

HyperGrid full_grid() { return {{3e-4, 3e-5, 3e-6}, {0.2, 0.3, 0.4}, {50, 100, 200, 300}}; }

HyperGrid desk_grid() { return {{3e-4}, {0.2}, {50, 100}}; }

ParsedTrainConfig parse_train_config(const KeyValueConfig& cfg, TrainConfig base) {
  cfg.reject_unknown({std::begin(kTrainConfigKeys), std::end(kTrainConfigKeys)});
  TrainConfig c = base;
  if (auto v = cfg.get_unsigned("batch_size")) c.batch_size = *v;
  if (auto v = cfg.get_unsigned("max_epochs")) c.max_epochs = *v;
  if (auto v = cfg.get_unsigned("seed")) c.seed = *v;
  if (auto v = cfg.get_unsigned("d1")) c.input_width = static_cast<Eigen::Index>(*v);
  if (auto v = cfg.get_unsigned("max_tokens")) c.tokenizer.max_tokens = *v;
  if (auto v = cfg.get_unsigned("vocab_buckets")) c.tokenizer.vocab_buckets = *v;
  if (auto v = cfg.get_unsigned("hash_seed")) c.tokenizer.hash_seed = *v;
  if (auto v = cfg.get("encoder")) c.encoder = parse_encoder_kind(*v);
  if (auto v = cfg.get("vectors")) c.vectors = *v;
  if (auto v = cfg.get_double("embedding_scale")) c.embedding_scale = *v;

  HyperGrid grid{{c.learning_rate}, {c.dropout}, {c.hidden}};
  if (auto preset = cfg.get("grid")) {
    if (*preset == "full") {
      grid = full_grid();
    } else if (*preset == "desk") {
      grid = desk_grid();
    } else {
      throw UsageError(cfg.origin() + ": grid must be 'full' or 'desk'");
    }
  }
  if (cfg.contains("learning_rate")) grid.learning_rates = cfg.get_double_list("learning_rate");
  if (cfg.contains("dropout")) grid.dropouts = cfg.get_double_list("dropout");
  if (cfg.contains("hidden")) {
    grid.hidden_sizes.clear();
    for (auto h : cfg.get_unsigned_list("hidden")) grid.hidden_sizes.push_back(static_cast<Eigen::Index>(h));
  }
  if (grid.size() == 0) throw UsageError(cfg.origin() + ": empty hyperparameter grid");
  c.learning_rate = grid.learning_rates.front();
  c.dropout = grid.dropouts.front();
  c.hidden = grid.hidden_sizes.front();
  for (const auto& point : grid.expand(c)) point.validate();
  return {c, grid};
}

Dataset make_dataset(const std::vector<Case>& cases, const ArticleIndex& index, const TokenizerConfig& tokenizer,
                     Warnings* warnings) {
  Dataset d;
  d.examples = make_examples(cases, tokenizer);
  d.labels = build_label_matrix(cases, index, warnings);
  return d;
}

double nll_loss(const Model& model, const Dataset& data, std::span<const std::size_t> rows, LossStats* stats) {
  check_dataset(model, data);
  const auto selected = resolve_rows(data, rows);
  if (selected.empty()) throw UsageError("nll_loss: empty batch");
  LossStats local;
  double total = 0.0;
  for (std::size_t r : selected) total += example_loss(model, data.examples[r], data.labels, r, nullptr, 0.0, {}, local);
  if (stats) stats->clamped += local.clamped;
  return total / static_cast<double>(selected.size());
}

LossAndGradient loss_and_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows,
                                  const DropoutSampler& dropout) {
  check_dataset(model, data);
  const auto selected = resolve_rows(data, rows);
  if (selected.empty()) throw UsageError("loss_and_gradient: empty batch");
  LossAndGradient out{0.0, zeros_like(model), {}};
  const double scale = 1.0 / static_cast<double>(selected.size());
  for (std::size_t r : selected) {
    out.loss += example_loss(model, data.examples[r], data.labels, r, &out.gradient, scale, dropout, out.stats);
  }
  out.loss *= scale;
  return out;
}

AdamState make_adam_state(const Model& model, AdamHyper hyper) {
  AdamState s;
  s.hyper = hyper;
  for_each_parameter(model, [&](std::span<const double> p) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  });
  return s;
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                 std::span<double> second_moment, std::size_t step, double learning_rate, const AdamHyper& hyper) {
  if (grads.size() != params.size() || first_moment.size() != params.size() ||
      second_moment.size() != params.size()) {
    throw ShapeError("adam_update: size mismatch");
  }
  const double correction1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_moment[i] = hyper.beta1 * first_moment[i] + (1.0 - hyper.beta1) * g;
    second_moment[i] = hyper.beta2 * second_moment[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = first_moment[i] / correction1;
    const double v_hat = second_moment[i] / correction2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

void adam_step(Model& params, const Model& grads, AdamState& state, double learning_rate) {
  auto p = parameter_spans(params);
  const auto g = parameter_spans(grads);
  if (p.size() != g.size() || p.size() != state.first_moment.size()) throw ShapeError("adam_step: layout mismatch");
  for (std::size_t t = 0; t < g.size(); ++t) {
    for (std::size_t i = 0; i < g[t].size(); ++i) {
      if (!std::isfinite(g[t][i])) {
        throw NumericError("non-finite gradient in tensor " + std::to_string(t) + " at offset " +
                           std::to_string(i) + " (step " + std::to_string(state.step + 1) + ")");
      }
    }
  }
  ++state.step;
  for (std::size_t t = 0; t < p.size(); ++t) {
    adam_update(p[t], g[t], state.first_moment[t], state.second_moment[t], state.step, learning_rate, state.hyper);
  }
}

Model initial_model(Architecture arch, const TrainConfig& config, const ArticleIndex& index) {
  config.validate();
  ModelInit init;
  init.encoder_kind = config.encoder;
  init.embedding_scale = config.embedding_scale;
  init.seed = config.seed;
  if (config.encoder == EncoderKind::Precomputed) init.vectors = load_vector_table(*config.vectors);
  ModelDims dims;
  dims.input = config.input_width;
  dims.hidden = config.hidden;
  dims.second_hidden = config.hidden;
  return make_model(arch, dims, config.tokenizer, index, init);
}

TrainResult train(Architecture arch, const TrainConfig& config, const Dataset& train_data,
                  const Dataset& validation_data, const ArticleIndex& index) {
  config.validate();
  if (train_data.size() == 0 || validation_data.size() == 0) throw DataError("train and validation must be non-empty");
  TrainResult result;
  result.architecture = arch;
  result.config = config;
  Model model = initial_model(arch, config, index);
  AdamState adam = make_adam_state(model);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const DropoutSampler dropout{config.dropout, &rng};

  auto diverged = [&](const std::string& what) {
    return NumericError(what + " is not finite; architecture=" + std::string(to_string(arch)) + "\n" +
                        config.to_text());
  };

  std::vector<std::size_t> order(train_data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool have_best = false;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      auto lg = loss_and_gradient(model, train_data, batch, dropout);
      if (!std::isfinite(lg.loss)) throw diverged("training loss");
      weighted += lg.loss * static_cast<double>(batch.size());
      rec.clamped += lg.stats.clamped;
      try {
        adam_step(model, lg.gradient, adam, config.learning_rate);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + "; architecture=" + std::string(to_string(arch)) + "\n" +
                           config.to_text());
      }
    }
    rec.train_loss = weighted / static_cast<double>(order.size());
    LossStats vstats;
    rec.validation_loss = nll_loss(model, validation_data, {}, &vstats);
    if (!std::isfinite(rec.validation_loss)) throw diverged("validation loss");
    result.epochs.push_back(rec);
    if (!have_best || rec.validation_loss < result.selected_validation_loss) {
      have_best = true;
      result.selected_epoch = epoch;
      result.selected_validation_loss = rec.validation_loss;
      result.model = model;
    }
  }
  return result;
}

TrainResult train(Architecture arch, const TrainConfig& config, const SplitSet& splits, const ArticleIndex& index) {
  const Dataset train_data = make_dataset(splits.train, index, config.tokenizer);
  const Dataset validation_data = make_dataset(splits.validation, index, config.tokenizer);
  return train(arch, config, train_data, validation_data, index);
}

std::string training_log_jsonl(const TrainResult& result) {
  std::ostringstream out;
  for (const auto& e : result.epochs) {
    nlohmann::ordered_json rec;
    rec["epoch"] = e.epoch;
    rec["train_loss"] = e.train_loss;
    rec["validation_loss"] = e.validation_loss;
    rec["clamped"] = e.clamped;
    out << rec.dump() << '\n';
  }
  nlohmann::ordered_json summary;
  summary["architecture"] = std::string(to_string(result.architecture));
  summary["selected_epoch"] = result.selected_epoch;
  summary["validation_loss"] = result.selected_validation_loss;
  summary["learning_rate"] = result.config.learning_rate;
  summary["dropout"] = result.config.dropout;
  summary["hidden"] = result.config.hidden;
  summary["seed"] = result.config.seed;
  summary["config_hash"] = stable_hash(result.config.to_text());
  out << summary.dump() << '\n';
  return out.str();
}

GridResult grid_search(Architecture arch, const TrainConfig& base, const HyperGrid& grid, const Dataset& train_data,
                       const Dataset& validation_data, const ArticleIndex& index) {
  if (grid.size() == 0) throw UsageError("grid_search: empty grid");
  GridResult out;
  bool have_best = false;
  for (const TrainConfig& config : grid.expand(base)) {
    GridEntry entry{config, std::nullopt, {}};
    try {
      TrainResult r = train(arch, config, train_data, validation_data, index);
      entry.validation_loss = r.selected_validation_loss;
      if (!have_best || r.selected_validation_loss < out.best.selected_validation_loss) {
        have_best = true;
        out.best = std::move(r);
      }
    } catch (const NumericError& e) {
      entry.error = e.what();
    }
    out.entries.push_back(std::move(entry));
  }
  if (!have_best) throw NumericError("every grid configuration diverged for " + std::string(to_string(arch)));
  return out;
}

GradientCheckResult gradient_check(const Model& model, const Dataset& data, double epsilon, std::uint64_t seed,
                                   std::size_t min_coordinates, const GradientHook& corrupt) {
  if (!(epsilon > 0.0)) throw UsageError("gradient_check: epsilon must be > 0");
  auto analytic = loss_and_gradient(model, data).gradient;
  if (corrupt) corrupt(analytic);

  Model probe = model;
  auto params = parameter_spans(probe);
  const auto grads = parameter_spans(static_cast<const Model&>(analytic));

  std::size_t trainable_encoders = 0;
  for (const auto& enc : model.encoders) trainable_encoders += enc.trainable();
  std::unordered_set<std::uint32_t> touched;
  for (const auto& ex : data.examples) touched.insert(ex.tokens.ids.begin(), ex.tokens.ids.end());
  std::vector<std::uint32_t> rows(touched.begin(), touched.end());
  std::sort(rows.begin(), rows.end());

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (t < trainable_encoders) {
      const auto width = static_cast<std::size_t>(model.dims.input);
      for (std::uint32_t r : rows) {
        for (std::size_t c = 0; c < width; ++c) candidates.emplace_back(t, r * width + c);
      }
    } else {
      for (std::size_t i = 0; i < params[t].size(); ++i) candidates.emplace_back(t, i);
    }
  }
  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  if (candidates.size() > min_coordinates) candidates.resize(min_coordinates);

  GradientCheckResult result;
  for (auto [t, i] : candidates) {
    const double saved = params[t][i];
    params[t][i] = saved + epsilon;
    const double up = nll_loss(probe, data);
    params[t][i] = saved - epsilon;
    const double down = nll_loss(probe, data);
    params[t][i] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = grads[t][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-5});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
    ++result.coordinates;
  }
  return result;
}

}  // namespace negprec
