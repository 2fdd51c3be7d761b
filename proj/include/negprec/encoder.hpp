#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace negprec {

struct TokenizerConfig {
  std::size_t max_tokens = 512;
  std::size_t vocab_buckets = std::size_t{1} << 15;
  std::uint64_t hash_seed = 0x5eedULL;

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

/// Hashed token ids, each in [0, vocab_buckets).
struct TokenSequence {
  std::vector<std::uint32_t> ids;
  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
};

/// Lower-cases ASCII, splits on anything that is not an ASCII letter, digit
/// or a non-ASCII byte, hashes each token and keeps the first max_tokens.
TokenSequence tokenize(std::string_view text, const TokenizerConfig& config);

/// Model input: the case id (for precomputed lookups) and its hashed facts.
struct Example {
  std::string case_id;
  TokenSequence tokens;
};

enum class EncoderKind { HashedBow, Precomputed };
std::string_view to_string(EncoderKind kind);
EncoderKind parse_encoder_kind(std::string_view text);

using EmbeddingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorTable = std::map<std::string, Eigen::VectorXd, std::less<>>;

/// JSONL of {"case_id": str, "vector": [float]}. All vectors must share a width.
std::shared_ptr<const VectorTable> load_vector_table(const std::filesystem::path& path);

/// Parameters of one fact encoder. HashedBow owns a trainable
/// vocab_buckets x d1 embedding; Precomputed is a frozen lookup table.
struct EncoderParams {
  EncoderKind kind = EncoderKind::HashedBow;
  Eigen::Index width = 0;
  EmbeddingMatrix embedding;
  std::shared_ptr<const VectorTable> table;

  bool trainable() const noexcept { return kind == EncoderKind::HashedBow; }

  static EncoderParams hashed_bow(Eigen::Index vocab_buckets, Eigen::Index width);
  static EncoderParams precomputed(std::shared_ptr<const VectorTable> table);
};

/// Throws ShapeError on an invalid parameter set.
void validate(const EncoderParams& params);

/// HashedBow: mean of the embedding rows of the ids (zero for no ids).
/// Precomputed: the stored vector for example.case_id; DataError if absent.
Eigen::VectorXd encode(const Example& example, const EncoderParams& params);

/// Adds d(loss)/d(embedding) to `grad` given d(loss)/d(encoding).
/// No-op for Precomputed encoders.
void encode_backward(const Example& example, const EncoderParams& params,
                     const Eigen::VectorXd& grad_output, EmbeddingMatrix& grad);

}  // namespace negprec
