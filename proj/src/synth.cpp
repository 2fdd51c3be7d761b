#include "negprec/synth.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "negprec/error.hpp"
#include "negprec/kv_config.hpp"

namespace negprec {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_rate(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(name) + " must lie in [0, 1]");
}

Case generate_case(const GenConfig& cfg, Split split, std::size_t index) {
  std::mt19937_64 rng(mix(mix(cfg.seed) ^ mix((static_cast<std::uint64_t>(split) << 48) ^ index)));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t K = cfg.articles;
  std::uniform_int_distribution<std::size_t> filler(3 * K, cfg.vocab - 1);

  Case c;
  std::ostringstream id;
  id << "synth-" << to_string(split) << '-';
  id.width(6);
  id.fill('0');
  id << index;
  c.case_id = id.str();

  std::vector<std::string> tokens;
  for (std::size_t k = 0; k < K; ++k) {
    const ArticleId article{static_cast<int>(k + 2)};
    const auto sig = signal_tokens(k);
    const bool claimed = u(rng) < cfg.claim_rate;
    if (u(rng) < (claimed ? cfg.claim_strength : 1.0 - cfg.claim_strength)) tokens.push_back(sig.claim);
    if (!claimed) continue;
    c.claims.insert(article);
    const bool negative = u(rng) < cfg.distinguish_rate;
    if (negative && u(rng) < cfg.subtle_rate) tokens.push_back(sig.distinguishing);
    if (u(rng) < (negative ? 1.0 - cfg.outcome_strength : cfg.outcome_strength)) tokens.push_back(sig.violation);
    if (!negative) c.violated.insert(article);
  }
  for (std::size_t i = 0; i < cfg.filler_tokens; ++i) tokens.push_back(token_name(filler(rng)));
  std::shuffle(tokens.begin(), tokens.end(), rng);

  std::string facts;
  for (const auto& t : tokens) {
    if (!facts.empty()) facts += ' ';
    facts += t;
  }
  c.facts = std::move(facts);
  return c;
}

}  // namespace

void GenConfig::validate() const {
  check_rate(claim_rate, "claim_rate");
  check_rate(claim_strength, "claim_strength");
  check_rate(outcome_strength, "outcome_strength");
  check_rate(distinguish_rate, "distinguish_rate");
  check_rate(subtle_rate, "subtle_rate");
  if (articles < 1 || articles > 17) throw UsageError("articles must be between 1 and 17");
  if (vocab <= 3 * articles) throw UsageError("vocab must exceed 3 * articles");
  if (train_size < 1 || validation_size < 1 || test_size < 1) throw UsageError("split sizes must be >= 1");
}

std::size_t GenConfig::size(Split split) const {
  switch (split) {
    case Split::Train: return train_size;
    case Split::Validation: return validation_size;
    case Split::Test: return test_size;
  }
  return 0;
}

GenConfig parse_gen_config(const KeyValueConfig& cfg, GenConfig base) {
  cfg.reject_unknown(std::vector<std::string_view>(std::begin(kGenConfigKeys), std::end(kGenConfigKeys)));
  auto set_size = [&](const char* key, std::size_t& field) {
    if (auto v = cfg.get_unsigned(key)) field = static_cast<std::size_t>(*v);
  };
  auto set_rate = [&](const char* key, double& field) {
    if (auto v = cfg.get_double(key)) field = *v;
  };
  set_size("articles", base.articles);
  set_size("vocab", base.vocab);
  set_rate("claim_rate", base.claim_rate);
  set_rate("claim_strength", base.claim_strength);
  set_rate("outcome_strength", base.outcome_strength);
  set_rate("distinguish_rate", base.distinguish_rate);
  set_rate("subtle_rate", base.subtle_rate);
  set_size("filler_tokens", base.filler_tokens);
  set_size("train_size", base.train_size);
  set_size("validation_size", base.validation_size);
  set_size("test_size", base.test_size);
  if (auto v = cfg.get_unsigned("seed")) base.seed = *v;
  base.validate();
  return base;
}

std::string gen_config_to_text(const GenConfig& c) {
  std::ostringstream out;
  out << "articles=" << c.articles << '\n'
      << "vocab=" << c.vocab << '\n'
      << "claim_rate=" << format_double(c.claim_rate) << '\n'
      << "claim_strength=" << format_double(c.claim_strength) << '\n'
      << "outcome_strength=" << format_double(c.outcome_strength) << '\n'
      << "distinguish_rate=" << format_double(c.distinguish_rate) << '\n'
      << "subtle_rate=" << format_double(c.subtle_rate) << '\n'
      << "filler_tokens=" << c.filler_tokens << '\n'
      << "train_size=" << c.train_size << '\n'
      << "validation_size=" << c.validation_size << '\n'
      << "test_size=" << c.test_size << '\n'
      << "seed=" << c.seed << '\n';
  return out.str();
}

std::string token_name(std::size_t id) { return "w" + std::to_string(id); }

SignalTokens signal_tokens(std::size_t k) {
  return {token_name(3 * k), token_name(3 * k + 1), token_name(3 * k + 2)};
}

SplitSet generate_corpus(const GenConfig& config) {
  config.validate();
  SplitSet splits;
  for (Split s : kSplits) {
    auto& cases = splits[s];
    cases.reserve(config.size(s));
    for (std::size_t i = 0; i < config.size(s); ++i) cases.push_back(generate_case(config, s, i));
  }
  return splits;
}

}  // namespace negprec
