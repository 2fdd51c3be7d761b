#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "negprec/corpus.hpp"
#include "negprec/models.hpp"
#include "negprec/training.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(NEGPREC_FIXTURES) / name;
}

/// Fresh empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::path(NEGPREC_SCRATCH) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline negprec::ArticleIndex index_of(std::size_t K) {
  std::vector<negprec::ArticleId> ids;
  for (std::size_t k = 0; k < K; ++k) ids.push_back(negprec::ArticleId{static_cast<int>(k + 2)});
  return negprec::ArticleIndex(ids);
}

inline negprec::TokenizerConfig small_tokenizer() {
  negprec::TokenizerConfig t;
  t.vocab_buckets = 97;
  t.max_tokens = 32;
  return t;
}

inline negprec::Model random_model(negprec::Architecture arch, std::size_t K, Eigen::Index d1, Eigen::Index d2,
                                   Eigen::Index d3, std::uint64_t seed) {
  negprec::ModelDims dims;
  dims.input = d1;
  dims.hidden = d2;
  dims.second_hidden = d3;
  negprec::ModelInit init;
  init.seed = seed;
  return negprec::make_model(arch, dims, small_tokenizer(), index_of(K), init);
}

/// Random facts over a small word list and random claims/violations.
inline std::vector<negprec::Case> random_cases(std::size_t n, std::size_t K, std::mt19937_64& rng) {
  static const char* words[] = {"court", "detention", "trial", "privacy", "torture", "speech",
                                "property", "family", "appeal", "delay", "police", "prison"};
  std::uniform_int_distribution<int> word(0, 11), len(1, 12);
  std::bernoulli_distribution coin(0.4);
  std::vector<negprec::Case> out;
  for (std::size_t i = 0; i < n; ++i) {
    negprec::Case c;
    c.case_id = "case-" + std::to_string(i);
    for (int w = len(rng); w > 0; --w) c.facts += std::string(words[word(rng)]) + " ";
    for (std::size_t k = 0; k < K; ++k) {
      if (!coin(rng)) continue;
      negprec::ArticleId a{static_cast<int>(k + 2)};
      c.claims.insert(a);
      if (coin(rng)) c.violated.insert(a);
    }
    out.push_back(std::move(c));
  }
  return out;
}

inline negprec::Dataset random_dataset(std::size_t n, std::size_t K, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return negprec::make_dataset(random_cases(n, K, rng), index_of(K), small_tokenizer());
}

}  // namespace testing
