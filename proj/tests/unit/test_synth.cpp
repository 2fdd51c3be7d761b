#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "negprec/error.hpp"
#include "negprec/evaluation.hpp"
#include "negprec/kv_config.hpp"
#include "negprec/synth.hpp"

using namespace negprec;

namespace {

GenConfig small(std::size_t train) {
  GenConfig g;
  g.train_size = train;
  g.validation_size = 20;
  g.test_size = 20;
  return g;
}

bool has_token(const std::string& facts, const std::string& token) {
  std::istringstream in(facts);
  std::string t;
  while (in >> t) {
    if (t == token) return true;
  }
  return false;
}

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("generation is reproducible from the seed") {
  const GenConfig g = small(100);
  CHECK(generate_corpus(g) == generate_corpus(g));
  GenConfig other = g;
  other.seed = 1;
  CHECK_FALSE(generate_corpus(other) == generate_corpus(g));
  const auto s = generate_corpus(g);
  CHECK(s.train.size() == 100);
  CHECK(s.train.front().case_id == "synth-train-000000");
  CHECK(s.test.back().case_id == "synth-test-000019");
}

TEST_CASE("violations stay inside claims") {
  const auto s = generate_corpus(small(2000));
  for (Split split : kSplits) {
    for (const Case& c : s[split]) {
      REQUIRE(std::includes(c.claims.begin(), c.claims.end(), c.violated.begin(), c.violated.end()));
      for (ArticleId a : c.claims) CHECK(a.is_core());
    }
  }
}

TEST_CASE("no claims means no outcomes") {
  GenConfig g = small(200);
  g.claim_rate = 0.0;
  const auto s = generate_corpus(g);
  for (const Case& c : s.train) {
    CHECK(c.claims.empty());
    CHECK(c.violated.empty());
  }
  const auto labels = build_label_matrix(s.train, testing::index_of(g.articles));
  for (std::size_t n = 0; n < labels.cases(); ++n) {
    for (auto l : labels.row(n)) CHECK(l == OutcomeLabel::Null);
  }
}

TEST_CASE("an oracle reading violation tokens is perfect without distinguishing") {
  GenConfig g = small(500);
  g.distinguish_rate = 0.0;
  g.outcome_strength = 1.0;
  const auto s = generate_corpus(g);
  const ArticleIndex index = testing::index_of(g.articles);
  const LabelMatrix gold = build_label_matrix(s.train, index);
  PredictionSet p;
  p.articles = index;
  for (const Case& c : s.train) {
    p.case_ids.push_back(c.case_id);
    for (std::size_t k = 0; k < g.articles; ++k) {
      p.labels.push_back(has_token(c.facts, signal_tokens(k).violation) ? OutcomeLabel::Pos : OutcomeLabel::Null);
    }
  }
  CHECK(micro_f1(p, gold, OutcomeLabel::Pos) == 100.0);
}

TEST_CASE("claim rate concentrates around its setting") {
  GenConfig g = small(10000);
  g.claim_rate = 0.3;
  const auto s = generate_corpus(g);
  const double n = 10000.0;
  const double sd = std::sqrt(n * 0.3 * 0.7);
  for (std::size_t k = 0; k < g.articles; ++k) {
    double claimed = 0;
    for (const Case& c : s.train) claimed += c.claims.count(ArticleId{static_cast<int>(k + 2)});
    CAPTURE(k);
    CHECK(std::abs(claimed - n * 0.3) < 3 * sd);
  }
}

TEST_CASE("article label processes are uncorrelated") {
  GenConfig g = small(10000);
  const auto s = generate_corpus(g);
  std::vector<std::vector<double>> claimed(g.articles), positive(g.articles);
  for (const Case& c : s.train) {
    for (std::size_t k = 0; k < g.articles; ++k) {
      const ArticleId a{static_cast<int>(k + 2)};
      claimed[k].push_back(c.claims.count(a));
      positive[k].push_back(c.violated.count(a));
    }
  }
  for (std::size_t i = 0; i < g.articles; ++i) {
    for (std::size_t j = i + 1; j < g.articles; ++j) {
      CHECK(std::abs(correlation(claimed[i], claimed[j])) < 0.05);
      CHECK(std::abs(correlation(positive[i], positive[j])) < 0.05);
    }
  }
}

TEST_CASE("generator config parsing and validation") {
  const auto g = parse_gen_config(KeyValueConfig::parse("articles=4\nvocab=200\ndistinguish_rate=0.25\nseed=9"));
  CHECK(g.articles == 4);
  CHECK(g.distinguish_rate == 0.25);
  CHECK(g.seed == 9);
  CHECK(parse_gen_config(KeyValueConfig::parse(gen_config_to_text(g))).seed == 9);
  CHECK_THROWS_AS(parse_gen_config(KeyValueConfig::parse("claim_rate=1.5")), UsageError);
  CHECK_THROWS_AS(parse_gen_config(KeyValueConfig::parse("articles=18")), UsageError);
  CHECK_THROWS_AS(parse_gen_config(KeyValueConfig::parse("train_size=0")), UsageError);
  CHECK_THROWS_AS(parse_gen_config(KeyValueConfig::parse("vocab=10")), UsageError);
  CHECK_THROWS_AS(parse_gen_config(KeyValueConfig::parse("colour=red")), UsageError);
}
