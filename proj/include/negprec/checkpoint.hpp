#pragma once

#include <filesystem>
#include <vector>

#include "negprec/models.hpp"

namespace negprec {

inline constexpr int kCheckpointVersion = 1;

/// Self-describing container: format tag, version, architecture, dims,
/// encoder kind, tokenizer settings, article index and every weight tensor.
/// Paths ending in ".json" are written as JSON, anything else as CBOR.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> checkpoint_to_cbor(const Model& model);
Model checkpoint_from_cbor(const std::vector<std::uint8_t>& bytes);

}  // namespace negprec
