#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "helpers.hpp"
#include "negprec/encoder.hpp"
#include "negprec/error.hpp"

using namespace negprec;

TEST_CASE("tokenizer") {
  TokenizerConfig cfg;
  const auto a = tokenize("The Court, in Article-6 cases!", cfg);
  const auto b = tokenize("the court in article 6 CASES", cfg);
  CHECK(a.ids == b.ids);
  CHECK(a.size() == 6);
  for (auto id : a.ids) CHECK(id < cfg.vocab_buckets);

  CHECK(tokenize("", cfg).empty());
  CHECK(tokenize("  ,.;  ", cfg).empty());
  // non-ASCII bytes stay inside tokens
  CHECK(tokenize("Dvořáčková v. Slovakia", cfg).size() == 3);

  cfg.max_tokens = 2;
  CHECK(tokenize("one two three four", cfg).size() == 2);

  TokenizerConfig other;
  other.hash_seed = 1;
  CHECK(tokenize("court", other).ids != tokenize("court", TokenizerConfig{}).ids);
}

TEST_CASE("mean encoding is exactly order invariant") {
  std::mt19937_64 rng(3);
  EncoderParams p = EncoderParams::hashed_bow(50, 8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (Eigen::Index i = 0; i < p.embedding.size(); ++i) p.embedding.data()[i] = u(rng);

  std::uniform_int_distribution<std::uint32_t> id(0, 49);
  for (int trial = 0; trial < 200; ++trial) {
    Example ex;
    for (int n = 0; n < 1 + trial % 30; ++n) ex.tokens.ids.push_back(id(rng));
    const Eigen::VectorXd before = encode(ex, p);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(8);
    for (auto t : ex.tokens.ids) mean += p.embedding.row(t).transpose();
    mean /= static_cast<double>(ex.tokens.size());
    CHECK((before - mean).cwiseAbs().maxCoeff() < 1e-12);

    std::shuffle(ex.tokens.ids.begin(), ex.tokens.ids.end(), rng);
    const Eigen::VectorXd after = encode(ex, p);
    REQUIRE(before == after);
  }
  CHECK(encode(Example{}, p).isZero());
}

TEST_CASE("encode_backward spreads the gradient evenly") {
  EncoderParams p = EncoderParams::hashed_bow(10, 3);
  Example ex;
  ex.tokens.ids = {1, 4, 4, 7};
  EmbeddingMatrix grad = EmbeddingMatrix::Zero(10, 3);
  encode_backward(ex, p, Eigen::Vector3d(4, 8, -4), grad);
  CHECK(grad.row(1).isApprox(Eigen::RowVector3d(1, 2, -1)));
  CHECK(grad.row(4).isApprox(Eigen::RowVector3d(2, 4, -2)));
  CHECK(grad.row(0).isZero());
}

TEST_CASE("precomputed vectors") {
  const auto dir = testing::scratch_dir("vectors");
  std::ofstream(dir / "v.jsonl") << R"({"case_id":"a","vector":[1,2,3]})" "\n"
                                 << R"({"case_id":"b","vector":[0,0,1]})" "\n";
  auto table = load_vector_table(dir / "v.jsonl");
  const auto p = EncoderParams::precomputed(table);
  CHECK(p.width == 3);
  CHECK_FALSE(p.trainable());
  CHECK(encode(Example{"a", {}}, p) == Eigen::Vector3d(1, 2, 3));
  CHECK_THROWS_AS(encode(Example{"zzz", {}}, p), DataError);

  std::ofstream(dir / "bad.jsonl") << R"({"case_id":"a","vector":[1,2,3]})" "\n"
                                   << R"({"case_id":"b","vector":[0,1]})" "\n";
  CHECK_THROWS_AS(load_vector_table(dir / "bad.jsonl"), DataError);
  CHECK(parse_encoder_kind(to_string(EncoderKind::Precomputed)) == EncoderKind::Precomputed);
}
