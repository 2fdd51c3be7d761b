#include "negprec/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "negprec/error.hpp"

namespace negprec {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

bool is_token_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

}  // namespace

TokenSequence tokenize(std::string_view text, const TokenizerConfig& config) {
  if (config.max_tokens == 0 || config.vocab_buckets == 0) {
    throw UsageError("tokenizer needs max_tokens >= 1 and vocab_buckets >= 1");
  }
  TokenSequence out;
  std::size_t i = 0;
  while (i < text.size() && out.ids.size() < config.max_tokens) {
    while (i < text.size() && !is_token_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i == text.size()) break;
    std::uint64_t h = kFnvOffset ^ config.hash_seed;
    while (i < text.size() && is_token_byte(static_cast<unsigned char>(text[i]))) {
      auto c = static_cast<unsigned char>(text[i]);
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      h = (h ^ c) * kFnvPrime;
      ++i;
    }
    out.ids.push_back(static_cast<std::uint32_t>(h % config.vocab_buckets));
  }
  return out;
}

std::string_view to_string(EncoderKind kind) {
  return kind == EncoderKind::HashedBow ? "hashed-bow" : "precomputed";
}

EncoderKind parse_encoder_kind(std::string_view text) {
  if (text == "hashed-bow" || text == "hashed_bow" || text == "HASHED_BOW") return EncoderKind::HashedBow;
  if (text == "precomputed" || text == "PRECOMPUTED") return EncoderKind::Precomputed;
  throw UsageError("unknown encoder kind '" + std::string(text) + "'");
}

std::shared_ptr<const VectorTable> load_vector_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vector file " + path.string());
  auto table = std::make_shared<VectorTable>();
  Eigen::Index width = -1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string origin = path.string() + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(origin + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.contains("case_id") || !record["case_id"].is_string() || !record.contains("vector") ||
        !record["vector"].is_array()) {
      throw DataError(origin + ": expected {\"case_id\": str, \"vector\": [float]}");
    }
    const auto& values = record["vector"];
    Eigen::VectorXd v(static_cast<Eigen::Index>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!values[i].is_number()) throw DataError(origin + ": non-numeric vector entry");
      v[static_cast<Eigen::Index>(i)] = values[i].get<double>();
    }
    if (!v.allFinite()) throw DataError(origin + ": non-finite vector entry");
    if (width < 0) width = v.size();
    if (v.size() != width || width == 0) throw DataError(origin + ": vector width mismatch");
    table->insert_or_assign(record["case_id"].get<std::string>(), std::move(v));
  }
  if (table->empty()) throw DataError("vector file " + path.string() + " is empty");
  return table;
}

EncoderParams EncoderParams::hashed_bow(Eigen::Index vocab_buckets, Eigen::Index width) {
  EncoderParams p;
  p.kind = EncoderKind::HashedBow;
  p.width = width;
  p.embedding = EmbeddingMatrix::Zero(vocab_buckets, width);
  return p;
}

EncoderParams EncoderParams::precomputed(std::shared_ptr<const VectorTable> table) {
  if (!table || table->empty()) throw ShapeError("precomputed encoder needs a non-empty table");
  EncoderParams p;
  p.kind = EncoderKind::Precomputed;
  p.width = table->begin()->second.size();
  p.table = std::move(table);
  return p;
}

void validate(const EncoderParams& params) {
  if (params.width < 1) throw ShapeError("encoder width must be >= 1");
  if (params.kind == EncoderKind::HashedBow) {
    if (params.embedding.cols() != params.width || params.embedding.rows() < 1) {
      throw ShapeError("embedding must be vocab_buckets x width");
    }
    if (!params.embedding.allFinite()) throw ShapeError("embedding has non-finite entries");
  } else if (!params.table || params.table->empty()) {
    throw ShapeError("precomputed encoder has no vector table");
  }
}

Eigen::VectorXd encode(const Example& example, const EncoderParams& params) {
  if (params.kind == EncoderKind::Precomputed) {
    auto it = params.table->find(example.case_id);
    if (it == params.table->end()) {
      throw DataError("missing precomputed embedding for case '" + example.case_id + "'");
    }
    if (it->second.size() != params.width) throw ShapeError("precomputed vector width mismatch");
    return it->second;
  }
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(params.width);
  if (example.tokens.empty()) return sum;
  // Summing in id order makes the result exactly invariant to token order.
  std::vector<std::uint32_t> ids = example.tokens.ids;
  std::sort(ids.begin(), ids.end());
  for (std::uint32_t id : ids) {
    if (id >= params.embedding.rows()) throw ShapeError("token id outside the embedding table");
    sum += params.embedding.row(id).transpose();
  }
  return sum / static_cast<double>(example.tokens.size());
}

void encode_backward(const Example& example, const EncoderParams& params,
                     const Eigen::VectorXd& grad_output, EmbeddingMatrix& grad) {
  if (params.kind != EncoderKind::HashedBow || example.tokens.empty()) return;
  const double scale = 1.0 / static_cast<double>(example.tokens.size());
  for (std::uint32_t id : example.tokens.ids) grad.row(id) += scale * grad_output.transpose();
}

}  // namespace negprec
