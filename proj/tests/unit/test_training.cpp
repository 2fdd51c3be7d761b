#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "negprec/error.hpp"
#include "negprec/kv_config.hpp"
#include "negprec/synth.hpp"
#include "negprec/training.hpp"

using namespace negprec;

namespace {

/// -sum_k log p(o_k, c_k | f), written out per architecture from the
/// forward passes.
double oracle_case_loss(const Model& m, const Example& ex, const std::vector<OutcomeLabel>& gold) {
  double loss = 0.0;
  if (is_three_way(m.architecture)) {
    const auto dist = outcome_distribution(m, ex);
    for (std::size_t k = 0; k < gold.size(); ++k) loss -= std::log(dist.rows[k][static_cast<int>(gold[k])]);
    return loss;
  }
  const auto s = baseline_scores(m, ex);
  for (std::size_t k = 0; k < gold.size(); ++k) {
    const bool pos = gold[k] == OutcomeLabel::Pos, neg = gold[k] == OutcomeLabel::Neg;
    loss -= std::log(pos ? s.p_pos[k] : 1 - s.p_pos[k]);
    loss -= std::log(neg ? s.p_neg[k] : 1 - s.p_neg[k]);
  }
  return loss;
}

std::vector<double> flatten(const Model& m) {
  std::vector<double> out;
  for_each_parameter(m, [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

Dataset separable(std::size_t n, std::uint64_t seed, ArticleIndex* index) {
  GenConfig g;
  g.articles = 3;
  g.vocab = 60;
  g.claim_strength = 1.0;
  g.outcome_strength = 1.0;
  g.distinguish_rate = 0.3;
  g.subtle_rate = 1.0;
  g.filler_tokens = 5;
  g.train_size = n;
  g.validation_size = n / 4;
  g.test_size = 1;
  g.seed = seed;
  const SplitSet s = generate_corpus(g);
  *index = testing::index_of(3);
  return make_dataset(s.train, *index, testing::small_tokenizer());
}

}  // namespace

TEST_CASE("loss equals the enumerated negative log-likelihood") {
  const Dataset data = testing::random_dataset(25, 4, 21);
  for (Architecture arch : kArchitectures) {
    const Model m = testing::random_model(arch, 4, 6, 5, 3, 2);
    double total = 0.0;
    for (std::size_t n = 0; n < data.size(); ++n) total += oracle_case_loss(m, data.examples[n], data.labels.row(n));
    CHECK(nll_loss(m, data) == doctest::Approx(total / data.size()).epsilon(1e-12));

    const std::vector<std::size_t> rows{3, 7};
    const double two = (oracle_case_loss(m, data.examples[3], data.labels.row(3)) +
                        oracle_case_loss(m, data.examples[7], data.labels.row(7))) / 2;
    CHECK(nll_loss(m, data, rows) == doctest::Approx(two).epsilon(1e-12));
    CHECK(loss_and_gradient(m, data).loss == doctest::Approx(nll_loss(m, data)).epsilon(1e-12));
  }
}

TEST_CASE("underflowed gold probabilities are clamped without gradient") {
  Model m = testing::random_model(Architecture::Joint, 1, 2, 2, 2, 0);
  m.encoders[0].embedding.setOnes();
  m.joint[0].hidden.setOnes();
  m.joint[0].out.setZero();
  m.joint[0].out.row(0).setConstant(-1e4);
  Dataset d;
  d.examples = {Example{"a", {{1, 2}}}};
  d.labels = LabelMatrix(1, 1);
  d.labels.set(0, 0, OutcomeLabel::Pos);
  LossStats stats;
  const double loss = nll_loss(m, d, {}, &stats);
  CHECK(stats.clamped == 1);
  CHECK(loss == doctest::Approx(-std::log(1e-12)));
  const auto lg = loss_and_gradient(m, d);
  CHECK(std::isfinite(lg.loss));
  for (double v : flatten(lg.gradient)) CHECK(v == 0.0);
}

TEST_CASE("adam update follows the bias-corrected recurrence") {
  std::vector<double> w{0.5, -1.0, 2.0}, m1(3, 0.0), m2(3, 0.0);
  std::vector<double> ow = w, om(3, 0.0), ov(3, 0.0);
  const AdamHyper h;
  const double lr = 0.01;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0, 1);
  for (std::size_t t = 1; t <= 25; ++t) {
    std::vector<double> grad{g(rng), g(rng), g(rng)};
    adam_update(w, grad, m1, m2, t, lr, h);
    for (std::size_t i = 0; i < 3; ++i) {
      om[i] = 0.9 * om[i] + 0.1 * grad[i];
      ov[i] = 0.999 * ov[i] + 0.001 * grad[i] * grad[i];
      const double mhat = om[i] / (1 - std::pow(0.9, static_cast<double>(t)));
      const double vhat = ov[i] / (1 - std::pow(0.999, static_cast<double>(t)));
      ow[i] -= lr * mhat / (std::sqrt(vhat) + 1e-8);
    }
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(w[i] == doctest::Approx(ow[i]).epsilon(1e-12));
  }
  // first step moves each weight by lr in the direction opposite its gradient
  std::vector<double> x{1.0, 1.0}, a(2, 0.0), b(2, 0.0);
  adam_update(x, std::vector<double>{3.0, -0.001}, a, b, 1, 0.1, h);
  CHECK(x[0] == doctest::Approx(0.9));
  CHECK(x[1] == doctest::Approx(1.1).epsilon(1e-4));
}

TEST_CASE("non-finite gradients abort the step") {
  Model m = testing::random_model(Architecture::Mtl, 2, 3, 2, 2, 0);
  const auto before = flatten(m);
  Model g = zeros_like(m);
  g.first[0].out[0] = std::nan("");
  AdamState state = make_adam_state(m);
  CHECK_THROWS_AS(adam_step(m, g, state, 1e-3), NumericError);
  CHECK(flatten(m) == before);
}

TEST_CASE("analytic gradients match central differences") {
  const Dataset data = testing::random_dataset(6, 3, 8);
  for (Architecture arch : kArchitectures) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Model m = testing::random_model(arch, 3, 6, 6, 6, seed);
      const auto r = gradient_check(m, data, 1e-5, seed);
      CAPTURE(to_string(arch));
      CHECK(r.coordinates >= 200);
      CHECK(r.max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("a corrupted gradient is caught") {
  const Dataset data = testing::random_dataset(6, 3, 8);
  for (Architecture arch : kArchitectures) {
    const Model m = testing::random_model(arch, 3, 5, 4, 3, 1);
    const auto r = gradient_check(m, data, 1e-5, 1, 200, [](Model& g) {
      for_each_parameter(g, [](std::span<double> s) {
        for (double& v : s) v *= 1.5;
      });
    });
    CHECK(r.max_relative_error > 1e-2);
  }
}

TEST_CASE("training lowers the loss on separable data") {
  ArticleIndex index;
  const Dataset train_data = separable(200, 3, &index);
  const Dataset val = separable(40, 4, &index);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.dropout = 0.0;
  cfg.hidden = 16;
  cfg.input_width = 16;
  cfg.max_epochs = 3;
  cfg.tokenizer = testing::small_tokenizer();
  for (Architecture arch : kArchitectures) {
    const auto r = train(arch, cfg, train_data, val, index);
    REQUIRE(r.epochs.size() == 3);
    CAPTURE(to_string(arch));
    CHECK(r.epochs[1].train_loss < r.epochs[0].train_loss);
    CHECK(r.epochs[2].train_loss < r.epochs[1].train_loss);
  }
}

TEST_CASE("training is deterministic and keeps the best validation epoch") {
  ArticleIndex index;
  const Dataset train_data = separable(120, 5, &index);
  const Dataset val = separable(40, 6, &index);
  TrainConfig cfg;
  cfg.learning_rate = 3e-2;
  cfg.hidden = 8;
  cfg.input_width = 8;
  cfg.max_epochs = 6;
  cfg.tokenizer = testing::small_tokenizer();
  const auto a = train(Architecture::ClaimOutcome, cfg, train_data, val, index);
  const auto b = train(Architecture::ClaimOutcome, cfg, train_data, val, index);
  CHECK(flatten(a.model) == flatten(b.model));
  CHECK(training_log_jsonl(a) == training_log_jsonl(b));

  std::size_t best = 0;
  for (std::size_t e = 1; e < a.epochs.size(); ++e) {
    if (a.epochs[e].validation_loss < a.epochs[best].validation_loss) best = e;
  }
  CHECK(a.selected_epoch == a.epochs[best].epoch);
  CHECK(a.selected_validation_loss == a.epochs[best].validation_loss);
  CHECK(nll_loss(a.model, val) == doctest::Approx(a.selected_validation_loss).epsilon(1e-12));

  cfg.seed = 1;
  CHECK(flatten(train(Architecture::ClaimOutcome, cfg, train_data, val, index).model) != flatten(a.model));
}

TEST_CASE("grid search trains every point and keeps the best") {
  ArticleIndex index;
  const Dataset train_data = separable(60, 7, &index);
  const Dataset val = separable(40, 8, &index);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.input_width = 8;
  cfg.tokenizer = testing::small_tokenizer();
  const HyperGrid grid{{1e-2, 1e-3}, {0.2}, {4, 8}};
  const auto r = grid_search(Architecture::Joint, cfg, grid, train_data, val, index);
  REQUIRE(r.entries.size() == 4);
  double best = r.entries[0].validation_loss.value();
  for (const auto& e : r.entries) best = std::min(best, e.validation_loss.value());
  CHECK(r.best.selected_validation_loss == best);
  CHECK(r.entries[1].config.hidden == 8);
  CHECK(r.entries[2].config.learning_rate == 1e-3);

  TrainConfig bad = cfg;
  bad.learning_rate = 1e300;
  bad.input_width = 4;
  CHECK_THROWS_AS(grid_search(Architecture::Joint, bad, HyperGrid{{1e300}, {0.0}, {4}}, train_data, val, index),
                  NumericError);
}

TEST_CASE("training config parsing") {
  const auto parsed = parse_train_config(
      KeyValueConfig::parse("learning_rate = 1e-3, 1e-4\nhidden=8,16,32\nmax_epochs=4\nvocab_buckets=4096\n"));
  CHECK(parsed.grid.size() == 6);
  CHECK(parsed.config.learning_rate == 1e-3);
  CHECK(parsed.config.max_epochs == 4);
  CHECK(parsed.config.tokenizer.vocab_buckets == 4096);

  CHECK(parse_train_config(KeyValueConfig::parse("grid=full")).grid.size() == 36);
  CHECK(parse_train_config(KeyValueConfig::parse("grid=desk")).grid.size() == 2);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse("lerning_rate=1")), UsageError);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse("dropout=1.5")), UsageError);
  CHECK_THROWS_AS(parse_train_config(KeyValueConfig::parse("batch_size=0")), UsageError);
}
