#include <doctest.h>

#include <cmath>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>

#include "helpers.hpp"
#include "negprec/error.hpp"
#include "negprec/models.hpp"

using namespace negprec;
using Rational = boost::multiprecision::cpp_rational;

namespace {

Example random_example(std::mt19937_64& rng, std::uint32_t buckets) {
  std::uniform_int_distribution<std::uint32_t> id(0, buckets - 1);
  std::uniform_int_distribution<int> len(0, 20);
  Example ex;
  ex.case_id = "x";
  for (int n = len(rng); n > 0; --n) ex.tokens.ids.push_back(id(rng));
  return ex;
}

/// Marginals by summing the joint probability of every configuration of K
/// articles, each article in {<+,y>, <-,y>, <null,n>}.
std::vector<std::array<double, 3>> enumerate_marginals(const std::vector<std::array<double, 3>>& per_article) {
  const std::size_t K = per_article.size();
  std::size_t configs = 1;
  for (std::size_t k = 0; k < K; ++k) configs *= 3;
  std::vector<std::array<double, 3>> marg(K, {0, 0, 0});
  for (std::size_t c = 0; c < configs; ++c) {
    double p = 1.0;
    std::size_t rest = c;
    std::vector<std::size_t> pick(K);
    for (std::size_t k = 0; k < K; ++k) {
      pick[k] = rest % 3;
      rest /= 3;
      p *= per_article[k][pick[k]];
    }
    for (std::size_t k = 0; k < K; ++k) marg[k][pick[k]] += p;
  }
  return marg;
}

OutcomeLabel argmax_first(const std::array<double, 3>& r) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i) {
    if (r[i] > r[best]) best = i;
  }
  return static_cast<OutcomeLabel>(best);
}

}  // namespace

TEST_CASE("architecture names round-trip") {
  for (Architecture a : kArchitectures) CHECK(parse_architecture(to_string(a)) == a);
  CHECK_THROWS_AS(parse_architecture("bert"), UsageError);
}

TEST_CASE("head parameter counts") {
  for (Architecture arch : kArchitectures) {
    const Model m = testing::random_model(arch, 5, 7, 4, 3, 1);
    CHECK(head_parameter_count(m) == expected_head_parameter_count(arch, m.dims));
  }
  ModelDims d{5, 7, 4, 3};
  CHECK(expected_head_parameter_count(Architecture::ClaimOutcome, d) == 5 * (4 + 4 * 7 + 3 + 3 * 7));
  CHECK(expected_head_parameter_count(Architecture::Joint, d) == 5 * (3 * 4 + 4 * 7));
}

TEST_CASE("encoder sharing per architecture") {
  CHECK(testing::random_model(Architecture::Simple, 2, 4, 3, 3, 0).encoders.size() == 2);
  CHECK(testing::random_model(Architecture::Mtl, 2, 4, 3, 3, 0).encoders.size() == 1);
  CHECK(testing::random_model(Architecture::Joint, 2, 4, 3, 3, 0).encoders.size() == 1);
  CHECK(testing::random_model(Architecture::ClaimOutcome, 2, 4, 3, 3, 0).encoders.size() == 2);
}

TEST_CASE("validate rejects mismatched shapes") {
  Model m = testing::random_model(Architecture::ClaimOutcome, 3, 4, 5, 6, 0);
  CHECK_NOTHROW(validate(m));
  m.second[1].hidden.resize(2, 4);
  CHECK_THROWS_AS(validate(m), ShapeError);
}

TEST_CASE("marginalization agrees with exact rational arithmetic") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const double c = trial % 97 == 0 ? 1.0 : u(rng);
    const double q = trial % 89 == 0 ? 0.0 : u(rng);
    const auto dist = marginalize(std::vector<double>{c}, std::vector<double>{q});
    const auto [pos, neg, null] = dist.rows[0];

    const Rational rc(c), rq(q);
    const Rational exact_pos = rq * rc, exact_neg = (1 - rq) * rc, exact_null = 1 - rc;
    REQUIRE(exact_pos + exact_neg + exact_null == 1);
    CHECK(pos == static_cast<double>(exact_pos));
    CHECK(std::abs(neg - static_cast<double>(exact_neg)) <= 4 * std::numeric_limits<double>::epsilon());
    CHECK(null == static_cast<double>(exact_null));
    CHECK(std::abs(pos + neg + null - 1.0) <= 1e-12);
    CHECK(pos <= c);
    CHECK(neg <= c);
  }
}

TEST_CASE("distributions are normalized for random parameters") {
  std::mt19937_64 rng(8);
  for (Architecture arch : {Architecture::Joint, Architecture::ClaimOutcome}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Model m = testing::random_model(arch, 4, 6, 5, 4, seed);
      for (int i = 0; i < 20; ++i) {
        const auto dist = outcome_distribution(m, random_example(rng, 97));
        for (const auto& r : dist.rows) {
          CHECK(std::abs(r[0] + r[1] + r[2] - 1.0) <= 1e-12);
          CHECK(r[0] >= 0.0);
          CHECK(r[1] >= 0.0);
          CHECK(r[2] >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("decide matches exhaustive enumeration") {
  std::mt19937_64 rng(31);
  std::size_t compared = 0;
  for (std::size_t K = 1; K <= 3; ++K) {
    for (Architecture arch : {Architecture::Joint, Architecture::ClaimOutcome}) {
      Model m = testing::random_model(arch, K, 4, 5, 5, K * 10 + (arch == Architecture::Joint));
      for (int i = 0; i < 200; ++i) {
        const Example ex = random_example(rng, 97);
        std::vector<std::array<double, 3>> per_article;
        if (arch == Architecture::Joint) {
          const Eigen::VectorXd x = encode(ex, m.encoders[0]);
          for (const auto& head : m.joint) {
            const Eigen::Vector3d l = softmax_head_logits(head, x);
            const Eigen::Vector3d e = (l.array() - l.maxCoeff()).exp();
            per_article.push_back({e[0] / e.sum(), e[1] / e.sum(), e[2] / e.sum()});
          }
        } else {
          const Eigen::VectorXd xc = encode(ex, m.encoders[0]);
          const Eigen::VectorXd xo = encode(ex, m.encoders[1]);
          for (std::size_t k = 0; k < K; ++k) {
            const double c = 1.0 / (1.0 + std::exp(-sigmoid_head_logit(m.first[k], xc)));
            const double q = 1.0 / (1.0 + std::exp(-sigmoid_head_logit(m.second[k], xo)));
            per_article.push_back({c * q, c * (1 - q), 1 - c});
          }
        }
        const auto marg = enumerate_marginals(per_article);
        const auto got = decide(outcome_distribution(m, ex));
        for (std::size_t k = 0; k < K; ++k) {
          REQUIRE(got[k] == argmax_first(marg[k]));
          ++compared;
        }
      }
    }
  }
  CHECK(compared == 2 * 200 * (1 + 2 + 3));
}

TEST_CASE("decision ties favour pos then neg") {
  CHECK(decide(std::array<double, 3>{0.4, 0.4, 0.2}) == OutcomeLabel::Pos);
  CHECK(decide(std::array<double, 3>{0.2, 0.4, 0.4}) == OutcomeLabel::Neg);
  CHECK(decide(std::array<double, 3>{1.0 / 3, 1.0 / 3, 1.0 / 3}) == OutcomeLabel::Pos);
  CHECK(decide(std::array<double, 3>{0.1, 0.2, 0.7}) == OutcomeLabel::Null);
}

TEST_CASE("baseline thresholds are strict and independent") {
  BaselineScores s{{0.5, 0.9, 0.1}, {0.6, 0.7, 0.5}};
  const auto d = decide_baseline(s);
  CHECK(d[0] == BaselineDecision{false, true});
  CHECK(d[1] == BaselineDecision{true, true});
  CHECK(d[2] == BaselineDecision{false, false});
  CHECK_THROWS_AS(decide_baseline(s, 1.0), UsageError);
  CHECK_THROWS_AS(decide_baseline(s, 0.0), UsageError);
}

TEST_CASE("numerically stable sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(log_sigmoid(3.0) == doctest::Approx(std::log(1.0 / (1.0 + std::exp(-3.0)))));
}

TEST_CASE("forward passes reject the wrong architecture") {
  const Model joint = testing::random_model(Architecture::Joint, 2, 4, 3, 3, 0);
  std::mt19937_64 rng(1);
  const Example ex = random_example(rng, 97);
  CHECK_THROWS(baseline_scores(joint, ex));
  CHECK_THROWS(claim_outcome_forward(joint, ex));
}
