#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace negprec {

/// A numbered Convention article. Articles 2 through 18 hold the
/// substantive rights; everything else concerns the court itself.
struct ArticleId {
  int number = 0;

  constexpr bool is_core() const noexcept { return number >= 2 && number <= 18; }
  friend constexpr auto operator<=>(ArticleId, ArticleId) = default;
};

using ArticleSet = std::set<ArticleId>;

struct Case {
  std::string case_id;
  std::string facts;
  ArticleSet claims;
  ArticleSet violated;

  friend bool operator==(const Case&, const Case&) = default;
};

enum class OutcomeLabel : unsigned char { Pos = 0, Neg = 1, Null = 2 };

inline constexpr std::array<OutcomeLabel, 3> kOutcomeLabels = {
    OutcomeLabel::Pos, OutcomeLabel::Neg, OutcomeLabel::Null};

std::string_view to_string(OutcomeLabel label);
/// Accepts "pos", "neg", "null" (case-insensitive). Throws DataError otherwise.
OutcomeLabel parse_outcome_label(std::string_view text);

/// Ordered list of the K articles a model predicts. Sorted, no duplicates.
class ArticleIndex {
 public:
  ArticleIndex() = default;
  /// Sorts and deduplicates.
  explicit ArticleIndex(std::vector<ArticleId> articles);

  std::size_t size() const noexcept { return articles_.size(); }
  bool empty() const noexcept { return articles_.empty(); }
  const std::vector<ArticleId>& articles() const noexcept { return articles_; }
  ArticleId operator[](std::size_t k) const { return articles_[k]; }

  /// Column of `article`, or size() when absent.
  std::size_t position(ArticleId article) const noexcept;
  bool contains(ArticleId article) const noexcept { return position(article) < size(); }

  friend bool operator==(const ArticleIndex&, const ArticleIndex&) = default;

 private:
  std::vector<ArticleId> articles_;
};

/// Cases x K grid of outcome labels. Claims are not stored separately: an
/// article is claimed exactly when its label is not Null.
class LabelMatrix {
 public:
  LabelMatrix() = default;
  LabelMatrix(std::size_t cases, std::size_t articles);

  std::size_t cases() const noexcept { return cases_; }
  std::size_t articles() const noexcept { return articles_; }

  OutcomeLabel at(std::size_t n, std::size_t k) const { return labels_[n * articles_ + k]; }
  void set(std::size_t n, std::size_t k, OutcomeLabel label) { labels_[n * articles_ + k] = label; }
  bool claimed(std::size_t n, std::size_t k) const { return at(n, k) != OutcomeLabel::Null; }

  std::vector<OutcomeLabel> row(std::size_t n) const;
  void set_row(std::size_t n, const std::vector<OutcomeLabel>& row);

  friend bool operator==(const LabelMatrix&, const LabelMatrix&) = default;

 private:
  std::size_t cases_ = 0;
  std::size_t articles_ = 0;
  std::vector<OutcomeLabel> labels_;
};

enum class Split { Train, Validation, Test };
inline constexpr std::array<Split, 3> kSplits = {Split::Train, Split::Validation, Split::Test};
std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct SplitSet {
  std::vector<Case> train;
  std::vector<Case> validation;
  std::vector<Case> test;

  const std::vector<Case>& operator[](Split split) const;
  std::vector<Case>& operator[](Split split);
  std::size_t total() const noexcept { return train.size() + validation.size() + test.size(); }

  friend bool operator==(const SplitSet&, const SplitSet&) = default;
};

/// Non-fatal problems found while reading or projecting data.
struct Warnings {
  std::vector<std::string> messages;
  void add(std::string message) { messages.push_back(std::move(message)); }
  bool empty() const noexcept { return messages.empty(); }
};

/// POS for violated articles, NEG for claimed but not violated, NULL for the
/// rest of the index. Throws DataError naming `case_id` if violated is not a
/// subset of claims. Ids outside the index are ignored.
std::vector<OutcomeLabel> derive_labels(const ArticleSet& claims, const ArticleSet& violated,
                                        const ArticleIndex& index, std::string_view case_id = {});
std::vector<OutcomeLabel> derive_labels(const Case& c, const ArticleIndex& index);

/// Labels for every case. Articles outside the index are dropped; one
/// warning per case that lost any.
LabelMatrix build_label_matrix(const std::vector<Case>& cases, const ArticleIndex& index,
                               Warnings* warnings = nullptr);

/// Parses one JSONL record. `origin` is used in error messages.
/// Non-integer article tokens and non-core articles are dropped with a warning.
Case parse_case_record(std::string_view line, std::string_view origin, Warnings* warnings = nullptr);
std::string serialize_case_record(const Case& c);

std::vector<Case> load_split_file(const std::filesystem::path& path, Warnings* warnings = nullptr);
void save_split_file(const std::filesystem::path& path, const std::vector<Case>& cases);

/// Reads train.jsonl, validation.jsonl and test.jsonl from `dir`.
/// Throws DataError on missing files, malformed records, empty splits,
/// label algebra violations and case ids shared between splits.
SplitSet load_corpus(const std::filesystem::path& dir, Warnings* warnings = nullptr);
void save_corpus(const std::filesystem::path& dir, const SplitSet& splits);

/// Core articles claimed somewhere in both validation and test.
/// Throws DataError when none survive.
ArticleIndex filter_articles(const SplitSet& splits);

struct ArticleHistogram {
  ArticleId article;
  std::size_t pos = 0;
  std::size_t neg = 0;
  std::size_t null = 0;
};

struct SplitStatistics {
  Split split = Split::Train;
  std::size_t cases = 0;
  std::size_t with_positive = 0;
  std::size_t with_negative = 0;
  std::size_t with_claim = 0;
  std::size_t without_claim = 0;
  std::vector<ArticleHistogram> per_article;
};

using CorpusStatistics = std::array<SplitStatistics, 3>;

CorpusStatistics split_stats(const SplitSet& splits, const ArticleIndex& index);
std::string render_stats(const CorpusStatistics& stats);
std::string stats_to_json(const CorpusStatistics& stats, const ArticleIndex& index);

}  // namespace negprec
