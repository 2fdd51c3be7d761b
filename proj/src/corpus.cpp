#include "negprec/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "negprec/error.hpp"

namespace negprec {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ArticleSet parse_article_list(const json& value, std::string_view field, std::string_view origin,
                              Warnings* warnings) {
  if (!value.is_array()) {
    throw DataError(std::string(origin) + ": field '" + std::string(field) + "' must be an array");
  }
  ArticleSet out;
  for (const auto& token : value) {
    if (!token.is_number_integer()) {
      if (warnings) {
        warnings->add(std::string(origin) + ": dropped non-integer article token " + token.dump() +
                      " in '" + std::string(field) + "'");
      }
      continue;
    }
    out.insert(ArticleId{token.get<int>()});
  }
  return out;
}

std::string describe(const ArticleSet& set) {
  std::string out = "{";
  for (auto it = set.begin(); it != set.end(); ++it) {
    if (it != set.begin()) out += ",";
    out += std::to_string(it->number);
  }
  return out + "}";
}

}  // namespace

std::string_view to_string(OutcomeLabel label) {
  switch (label) {
    case OutcomeLabel::Pos: return "pos";
    case OutcomeLabel::Neg: return "neg";
    case OutcomeLabel::Null: return "null";
  }
  return "?";
}

OutcomeLabel parse_outcome_label(std::string_view text) {
  const auto l = lower(text);
  if (l == "pos") return OutcomeLabel::Pos;
  if (l == "neg") return OutcomeLabel::Neg;
  if (l == "null") return OutcomeLabel::Null;
  throw DataError("unknown outcome label '" + std::string(text) + "'");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  const auto l = lower(text);
  if (l == "train") return Split::Train;
  if (l == "validation" || l == "dev" || l == "valid") return Split::Validation;
  if (l == "test") return Split::Test;
  throw DataError("unknown split '" + std::string(text) + "'");
}

const std::vector<Case>& SplitSet::operator[](Split split) const {
  switch (split) {
    case Split::Train: return train;
    case Split::Validation: return validation;
    case Split::Test: return test;
  }
  return train;
}

std::vector<Case>& SplitSet::operator[](Split split) {
  return const_cast<std::vector<Case>&>(std::as_const(*this)[split]);
}

ArticleIndex::ArticleIndex(std::vector<ArticleId> articles) : articles_(std::move(articles)) {
  std::sort(articles_.begin(), articles_.end());
  articles_.erase(std::unique(articles_.begin(), articles_.end()), articles_.end());
}

std::size_t ArticleIndex::position(ArticleId article) const noexcept {
  auto it = std::lower_bound(articles_.begin(), articles_.end(), article);
  if (it == articles_.end() || *it != article) return articles_.size();
  return static_cast<std::size_t>(it - articles_.begin());
}

LabelMatrix::LabelMatrix(std::size_t cases, std::size_t articles)
    : cases_(cases), articles_(articles), labels_(cases * articles, OutcomeLabel::Null) {}

std::vector<OutcomeLabel> LabelMatrix::row(std::size_t n) const {
  auto first = labels_.begin() + static_cast<std::ptrdiff_t>(n * articles_);
  return {first, first + static_cast<std::ptrdiff_t>(articles_)};
}

void LabelMatrix::set_row(std::size_t n, const std::vector<OutcomeLabel>& row) {
  if (row.size() != articles_) throw ShapeError("label row width mismatch");
  std::copy(row.begin(), row.end(), labels_.begin() + static_cast<std::ptrdiff_t>(n * articles_));
}

std::vector<OutcomeLabel> derive_labels(const ArticleSet& claims, const ArticleSet& violated,
                                        const ArticleIndex& index, std::string_view case_id) {
  if (!std::includes(claims.begin(), claims.end(), violated.begin(), violated.end())) {
    throw DataError("case '" + std::string(case_id) + "': violated " + describe(violated) +
                    " is not a subset of claims " + describe(claims));
  }
  std::vector<OutcomeLabel> row(index.size(), OutcomeLabel::Null);
  for (ArticleId a : claims) {
    const auto k = index.position(a);
    if (k == index.size()) continue;
    row[k] = violated.contains(a) ? OutcomeLabel::Pos : OutcomeLabel::Neg;
  }
  return row;
}

std::vector<OutcomeLabel> derive_labels(const Case& c, const ArticleIndex& index) {
  return derive_labels(c.claims, c.violated, index, c.case_id);
}

LabelMatrix build_label_matrix(const std::vector<Case>& cases, const ArticleIndex& index,
                               Warnings* warnings) {
  LabelMatrix labels(cases.size(), index.size());
  for (std::size_t n = 0; n < cases.size(); ++n) {
    const Case& c = cases[n];
    labels.set_row(n, derive_labels(c, index));
    if (warnings) {
      ArticleSet dropped;
      for (ArticleId a : c.claims) {
        if (!index.contains(a)) dropped.insert(a);
      }
      if (!dropped.empty()) {
        warnings->add("case '" + c.case_id + "': articles " + describe(dropped) +
                      " outside the article index dropped");
      }
    }
  }
  return labels;
}

Case parse_case_record(std::string_view line, std::string_view origin, Warnings* warnings) {
  json record;
  try {
    record = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string(origin) + ": malformed JSON (" + e.what() + ")");
  }
  if (!record.is_object()) throw DataError(std::string(origin) + ": record must be a JSON object");
  for (const char* field : {"case_id", "facts", "claims", "violated"}) {
    if (!record.contains(field)) {
      throw DataError(std::string(origin) + ": missing field '" + field + "'");
    }
  }
  if (!record["case_id"].is_string() || !record["facts"].is_string()) {
    throw DataError(std::string(origin) + ": 'case_id' and 'facts' must be strings");
  }
  Case c;
  c.case_id = record["case_id"].get<std::string>();
  if (c.case_id.empty()) throw DataError(std::string(origin) + ": empty case_id");
  c.facts = record["facts"].get<std::string>();
  c.claims = parse_article_list(record["claims"], "claims", origin, warnings);
  c.violated = parse_article_list(record["violated"], "violated", origin, warnings);

  if (!std::includes(c.claims.begin(), c.claims.end(), c.violated.begin(), c.violated.end())) {
    throw DataError(std::string(origin) + ": case '" + c.case_id + "': violated " +
                    describe(c.violated) + " is not a subset of claims " + describe(c.claims));
  }

  ArticleSet dropped;
  for (auto* set : {&c.claims, &c.violated}) {
    for (auto it = set->begin(); it != set->end();) {
      if (it->is_core()) {
        ++it;
      } else {
        dropped.insert(*it);
        it = set->erase(it);
      }
    }
  }
  if (warnings && !dropped.empty()) {
    warnings->add(std::string(origin) + ": case '" + c.case_id + "': non-core articles " +
                  describe(dropped) + " dropped");
  }
  return c;
}

std::string serialize_case_record(const Case& c) {
  ordered_json record;
  record["case_id"] = c.case_id;
  record["facts"] = c.facts;
  auto& claims = record["claims"] = ordered_json::array();
  for (ArticleId a : c.claims) claims.push_back(a.number);
  auto& violated = record["violated"] = ordered_json::array();
  for (ArticleId a : c.violated) violated.push_back(a.number);
  return record.dump();
}

std::vector<Case> load_split_file(const std::filesystem::path& path, Warnings* warnings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file " + path.string());
  std::vector<Case> cases;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string origin = path.string() + ":" + std::to_string(line_no);
    cases.push_back(parse_case_record(line, origin, warnings));
  }
  return cases;
}

void save_split_file(const std::filesystem::path& path, const std::vector<Case>& cases) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file " + path.string());
  for (const Case& c : cases) out << serialize_case_record(c) << '\n';
}

SplitSet load_corpus(const std::filesystem::path& dir, Warnings* warnings) {
  if (!std::filesystem::is_directory(dir)) {
    throw DataError("corpus directory " + dir.string() + " does not exist");
  }
  SplitSet splits;
  for (Split split : kSplits) {
    const auto path = dir / (std::string(to_string(split)) + ".jsonl");
    if (!std::filesystem::exists(path)) throw DataError("missing corpus file " + path.string());
    splits[split] = load_split_file(path, warnings);
    if (splits[split].empty()) {
      throw DataError("empty corpus: " + path.string() + " contains no cases");
    }
  }
  std::unordered_set<std::string> seen;
  for (Split split : kSplits) {
    for (const Case& c : splits[split]) {
      if (!seen.insert(c.case_id).second) {
        throw DataError("case id '" + c.case_id + "' appears more than once (" +
                        std::string(to_string(split)) + ")");
      }
    }
  }
  return splits;
}

void save_corpus(const std::filesystem::path& dir, const SplitSet& splits) {
  std::filesystem::create_directories(dir);
  for (Split split : kSplits) {
    save_split_file(dir / (std::string(to_string(split)) + ".jsonl"), splits[split]);
  }
}

ArticleIndex filter_articles(const SplitSet& splits) {
  auto claimed_core = [](const std::vector<Case>& cases) {
    ArticleSet out;
    for (const Case& c : cases) {
      for (ArticleId a : c.claims) {
        if (a.is_core()) out.insert(a);
      }
    }
    return out;
  };
  const ArticleSet validation = claimed_core(splits.validation);
  const ArticleSet test = claimed_core(splits.test);
  std::vector<ArticleId> kept;
  std::set_intersection(validation.begin(), validation.end(), test.begin(), test.end(),
                        std::back_inserter(kept));
  if (kept.empty()) {
    throw DataError("unusable corpus: no core article is claimed in both validation and test");
  }
  return ArticleIndex(std::move(kept));
}

CorpusStatistics split_stats(const SplitSet& splits, const ArticleIndex& index) {
  CorpusStatistics stats;
  for (std::size_t s = 0; s < kSplits.size(); ++s) {
    const Split split = kSplits[s];
    SplitStatistics& st = stats[s];
    st.split = split;
    st.per_article.resize(index.size());
    for (std::size_t k = 0; k < index.size(); ++k) st.per_article[k].article = index[k];
    for (const Case& c : splits[split]) {
      ++st.cases;
      const auto row = derive_labels(c, index);
      bool pos = false, neg = false;
      for (std::size_t k = 0; k < row.size(); ++k) {
        switch (row[k]) {
          case OutcomeLabel::Pos: pos = true; ++st.per_article[k].pos; break;
          case OutcomeLabel::Neg: neg = true; ++st.per_article[k].neg; break;
          case OutcomeLabel::Null: ++st.per_article[k].null; break;
        }
      }
      st.with_positive += pos;
      st.with_negative += neg;
      if (pos || neg) {
        ++st.with_claim;
      } else {
        ++st.without_claim;
      }
    }
  }
  return stats;
}

std::string render_stats(const CorpusStatistics& stats) {
  std::ostringstream out;
  out << std::left << std::setw(12) << "Outcome";
  for (const auto& st : stats) out << std::right << std::setw(12) << to_string(st.split);
  out << '\n';
  auto row = [&](const char* name, auto field) {
    out << std::left << std::setw(12) << name;
    for (const auto& st : stats) out << std::right << std::setw(12) << st.*field;
    out << '\n';
  };
  row("Positive", &SplitStatistics::with_positive);
  row("Negative", &SplitStatistics::with_negative);
  row("Claims", &SplitStatistics::with_claim);
  row("No claim", &SplitStatistics::without_claim);
  row("Cases", &SplitStatistics::cases);
  out << '\n' << std::left << std::setw(10) << "Article";
  for (const auto& st : stats) {
    out << std::right << std::setw(24) << (std::string(to_string(st.split)) + " pos/neg/null");
  }
  out << '\n';
  const std::size_t articles = stats[0].per_article.size();
  for (std::size_t k = 0; k < articles; ++k) {
    out << std::left << std::setw(10) << stats[0].per_article[k].article.number;
    for (const auto& st : stats) {
      const auto& h = st.per_article[k];
      out << std::right << std::setw(24)
          << (std::to_string(h.pos) + "/" + std::to_string(h.neg) + "/" + std::to_string(h.null));
    }
    out << '\n';
  }
  return out.str();
}

std::string stats_to_json(const CorpusStatistics& stats, const ArticleIndex& index) {
  ordered_json out;
  auto& articles = out["articles"] = ordered_json::array();
  for (ArticleId a : index.articles()) articles.push_back(a.number);
  for (const auto& st : stats) {
    ordered_json s;
    s["cases"] = st.cases;
    s["positive"] = st.with_positive;
    s["negative"] = st.with_negative;
    s["claims"] = st.with_claim;
    s["no_claim"] = st.without_claim;
    auto& hist = s["per_article"] = ordered_json::array();
    for (const auto& h : st.per_article) {
      hist.push_back({{"article", h.article.number}, {"pos", h.pos}, {"neg", h.neg}, {"null", h.null}});
    }
    out[std::string(to_string(st.split))] = std::move(s);
  }
  return out.dump(2);
}

}  // namespace negprec
