#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "negprec/corpus.hpp"

namespace negprec {

/// Versioned list of regular expressions that locate claimed articles in a
/// judgment. Each pattern has exactly one capture group; the group holds an
/// article reference such as "6 § 1" or a list such as "2, 6, 8 and 14".
class PatternSet {
 public:
  /// Compiles every pattern case-insensitively. Throws UsageError if a
  /// pattern does not compile or lacks exactly one capture group.
  PatternSet(std::string name, std::vector<std::string> patterns);

  const std::string& name() const noexcept { return name_; }
  const std::vector<std::string>& patterns() const noexcept { return sources_; }
  const std::vector<std::regex>& compiled() const noexcept { return compiled_; }

 private:
  std::string name_;
  std::vector<std::string> sources_;
  std::vector<std::regex> compiled_;
};

inline constexpr std::string_view kDefaultPatternSetName = "echr-claims-v1";

PatternSet default_pattern_set();

/// Plain text, one pattern per line. Blank lines and lines starting with '#'
/// are ignored, except a "# name: <tag>" line which sets the version tag.
PatternSet load_pattern_file(const std::filesystem::path& path);

/// Article numbers (1..59) referenced in a captured group.
std::vector<int> parse_article_references(std::string_view captured);

/// Union of all captured article numbers in [1, 59].
ArticleSet extract_claims(std::string_view raw_text, const PatternSet& patterns);

/// Facts section of a judgment: text between a "THE FACTS" heading and the
/// following "THE LAW" heading (or end of text). Empty when no heading.
std::optional<std::string> facts_section(std::string_view judgment);

/// Raw judgment as stored in the raw directory (one JSON file per document):
/// {"case_id", "split", "text", optional "facts", optional "violated"}.
struct RawDocument {
  std::string case_id;
  std::optional<Split> split;
  std::string text;
  std::optional<std::string> facts;
  std::optional<ArticleSet> violated;
};

std::vector<RawDocument> load_raw_documents(const std::filesystem::path& raw_dir);

/// case_id -> violated articles, from JSONL {"case_id": str, "violated": [int]}.
std::map<std::string, ArticleSet> load_violations(const std::filesystem::path& path);

struct BuildSummary {
  std::size_t documents = 0;
  std::size_t emitted = 0;
  std::size_t extracted_claims = 0;   // article mentions found by the patterns
  std::size_t augmented_claims = 0;   // violated articles the patterns missed
  std::vector<std::string> skipped;   // one log line per skipped document
  std::string pattern_set;
};

/// Claims = extracted ∪ violated, facts = facts section only. Documents are
/// emitted in case_id order per split. Documents without a facts section,
/// split or violation record are skipped with a log line.
SplitSet build_outcome_corpus(const std::vector<RawDocument>& documents, const PatternSet& patterns,
                              const std::map<std::string, ArticleSet>& violations,
                              BuildSummary* summary = nullptr);

/// Loads raw_dir, builds the corpus and writes it to out_dir.
BuildSummary build_outcome_corpus(const std::filesystem::path& raw_dir, const PatternSet& patterns,
                                  const std::optional<std::filesystem::path>& violations_file,
                                  const std::filesystem::path& out_dir);

}  // namespace negprec
