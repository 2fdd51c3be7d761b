#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "negprec/corpus.hpp"

namespace negprec {

class KeyValueConfig;

/// Generator settings. Article k (0-based) is emitted as Article k + 2.
///
/// For each case and article: claimed ~ Bernoulli(claim_rate). The claim
/// token appears with probability claim_strength when claimed and
/// 1 - claim_strength otherwise. A claimed article is NEG with probability
/// distinguish_rate; NEG cases carry the article's distinguishing token with
/// probability subtle_rate. The violation token appears with probability
/// outcome_strength for POS and 1 - outcome_strength for NEG, never for
/// unclaimed articles.
struct GenConfig {
  std::size_t articles = 8;
  std::size_t vocab = 1000;
  double claim_rate = 0.3;
  double claim_strength = 0.95;
  double outcome_strength = 0.7;
  double distinguish_rate = 0.5;
  double subtle_rate = 0.3;
  std::size_t filler_tokens = 60;
  std::size_t train_size = 2000;
  std::size_t validation_size = 250;
  std::size_t test_size = 250;
  std::uint64_t seed = 0;

  /// UsageError unless rates are in [0, 1], sizes >= 1, 1 <= articles <= 17
  /// and vocab leaves room for filler beyond the 3 * articles signal tokens.
  void validate() const;
  std::size_t size(Split split) const;
};

inline constexpr const char* kGenConfigKeys[] = {
    "articles",      "vocab",          "claim_rate", "claim_strength", "outcome_strength",
    "distinguish_rate", "subtle_rate", "filler_tokens", "train_size", "validation_size",
    "test_size",     "seed"};

GenConfig parse_gen_config(const KeyValueConfig& cfg, GenConfig base = {});
std::string gen_config_to_text(const GenConfig& config);

/// Token strings used for article k (0-based).
struct SignalTokens {
  std::string claim;
  std::string violation;
  std::string distinguishing;
};
SignalTokens signal_tokens(std::size_t k);
std::string token_name(std::size_t id);

/// Bit-reproducible from config.seed; each case draws from its own seed.
SplitSet generate_corpus(const GenConfig& config);

}  // namespace negprec
