#include "negprec/claim_extraction.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "negprec/error.hpp"

namespace negprec {

namespace {

using json = nlohmann::json;

// Paragraph suffix after an article number: "§ 1", "§ 3 (c)", "§§ 1 and 3",
// "para. 2". "§" is matched as a grouped two-byte UTF-8 sequence.
constexpr const char* kParagraph =
    R"((?:\s*(?:(?:§){2}\s*\d+(?:\s*\([a-z]\))?(?:\s*(?:,|and)\s*\d+(?:\s*\([a-z]\))?)*)"
    R"(|(?:§|para(?:graph)?\.?)\s*\d+(?:\s*\([a-z]\))?))?)";

// An article number that is not the article of a protocol.
constexpr const char* kArticleNumber =
    R"(\d{1,2}(?!\d)(?!(?:\s*(?:§|para\S*)\s*\d+)?\s*of\s+(?:the\s+)?Protocol))";

constexpr const char* kSeparator =
    R"(\s*(?:,\s*and|,\s*or|,|and|or|,?\s*taken\s+(?:alone\s+and\s+)?(?:together|in\s+conjunction)\s+with|,?\s*in\s+conjunction\s+with)\s*(?:Articles?\s*)?)";

std::string item() { return std::string(kArticleNumber) + kParagraph; }

std::string article_list() {
  return item() + "(?:" + kSeparator + item() + ")*";
}

const std::regex& reference_regex() {
  static const std::regex re("(" + std::string(kArticleNumber) + ")" + kParagraph,
                             std::regex::ECMAScript | std::regex::icase);
  return re;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

ArticleSet article_set_from_json(const json& value, const std::string& origin) {
  if (!value.is_array()) throw DataError(origin + ": 'violated' must be an array of integers");
  ArticleSet out;
  for (const auto& v : value) {
    if (!v.is_number_integer()) throw DataError(origin + ": non-integer article in 'violated'");
    out.insert(ArticleId{v.get<int>()});
  }
  return out;
}

}  // namespace

PatternSet::PatternSet(std::string name, std::vector<std::string> patterns)
    : name_(std::move(name)), sources_(std::move(patterns)) {
  compiled_.reserve(sources_.size());
  for (const auto& source : sources_) {
    try {
      compiled_.emplace_back(source, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw UsageError("pattern does not compile: " + source + " (" + e.what() + ")");
    }
    if (compiled_.back().mark_count() != 1) {
      throw UsageError("pattern must have exactly one capture group: " + source);
    }
  }
}

PatternSet default_pattern_set() {
  const std::string list = "(" + article_list() + ")";
  return PatternSet(std::string(kDefaultPatternSetName),
                    {
                        R"(\bviolations?\s+of\s+Articles?\s+)" + list,
                        R"(\bcomplain(?:ed|s|ing)?\b[^.;]{0,200}?\bunder\s+Articles?\s+)" + list,
                        R"(\brel(?:ying|ied|ies|y)\s+on\s+Articles?\s+)" + list,
                        R"(\binvok(?:ed|ing|es|e)\s+Articles?\s+)" + list,
                    });
}

PatternSet load_pattern_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open pattern file " + path.string());
  std::string name = path.stem().string();
  std::vector<std::string> patterns;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      const std::string body = trim(std::string_view(t).substr(1));
      if (body.rfind("name:", 0) == 0) name = trim(std::string_view(body).substr(5));
      continue;
    }
    patterns.push_back(t);
  }
  if (patterns.empty()) throw UsageError("pattern file " + path.string() + " contains no patterns");
  return PatternSet(std::move(name), std::move(patterns));
}

std::vector<int> parse_article_references(std::string_view captured) {
  std::vector<int> out;
  const std::string text(captured);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), reference_regex());
       it != std::sregex_iterator(); ++it) {
    const int number = std::stoi((*it)[1].str());
    if (number >= 1 && number <= 59) out.push_back(number);
  }
  return out;
}

ArticleSet extract_claims(std::string_view raw_text, const PatternSet& patterns) {
  ArticleSet claims;
  const std::string text(raw_text);
  for (const auto& re : patterns.compiled()) {
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator();
         ++it) {
      for (int number : parse_article_references((*it)[1].str())) claims.insert(ArticleId{number});
    }
  }
  return claims;
}

std::optional<std::string> facts_section(std::string_view judgment) {
  constexpr std::string_view kFacts = "THE FACTS";
  constexpr std::string_view kLaw = "THE LAW";
  const auto start = judgment.find(kFacts);
  if (start == std::string_view::npos) return std::nullopt;
  const auto body = start + kFacts.size();
  const auto end = judgment.find(kLaw, body);
  std::string facts = trim(judgment.substr(body, end == std::string_view::npos ? end : end - body));
  if (facts.empty()) return std::nullopt;
  return facts;
}

std::vector<RawDocument> load_raw_documents(const std::filesystem::path& raw_dir) {
  if (!std::filesystem::is_directory(raw_dir)) {
    throw DataError("raw directory " + raw_dir.string() + " does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(raw_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<RawDocument> docs;
  for (const auto& file : files) {
    std::ifstream in(file);
    json record;
    try {
      record = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DataError(file.string() + ": malformed JSON (" + e.what() + ")");
    }
    const std::string origin = file.string();
    if (!record.contains("case_id") || !record["case_id"].is_string()) {
      throw DataError(origin + ": missing string field 'case_id'");
    }
    if (!record.contains("text") || !record["text"].is_string()) {
      throw DataError(origin + ": missing string field 'text'");
    }
    RawDocument doc;
    doc.case_id = record["case_id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    if (record.contains("split")) doc.split = parse_split(record["split"].get<std::string>());
    if (record.contains("facts") && record["facts"].is_string()) {
      doc.facts = record["facts"].get<std::string>();
    }
    if (record.contains("violated")) doc.violated = article_set_from_json(record["violated"], origin);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::map<std::string, ArticleSet> load_violations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open violations file " + path.string());
  std::map<std::string, ArticleSet> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string origin = path.string() + ":" + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(origin + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.contains("case_id") || !record["case_id"].is_string() || !record.contains("violated")) {
      throw DataError(origin + ": expected {\"case_id\": str, \"violated\": [int]}");
    }
    out[record["case_id"].get<std::string>()] = article_set_from_json(record["violated"], origin);
  }
  return out;
}

SplitSet build_outcome_corpus(const std::vector<RawDocument>& documents, const PatternSet& patterns,
                              const std::map<std::string, ArticleSet>& violations,
                              BuildSummary* summary) {
  BuildSummary local;
  BuildSummary& s = summary ? *summary : local;
  s.pattern_set = patterns.name();

  SplitSet splits;
  for (const RawDocument& doc : documents) {
    ++s.documents;
    if (!doc.split) {
      s.skipped.push_back(doc.case_id + ": no split assignment");
      continue;
    }
    std::optional<std::string> facts = doc.facts;
    if (!facts || trim(*facts).empty()) facts = facts_section(doc.text);
    if (!facts) {
      s.skipped.push_back(doc.case_id + ": no facts section");
      continue;
    }
    const ArticleSet* violated = nullptr;
    if (auto it = violations.find(doc.case_id); it != violations.end()) {
      violated = &it->second;
    } else if (doc.violated) {
      violated = &*doc.violated;
    } else {
      s.skipped.push_back(doc.case_id + ": no violation record");
      continue;
    }

    Case c;
    c.case_id = doc.case_id;
    c.facts = *facts;
    c.claims = extract_claims(doc.text, patterns);
    s.extracted_claims += c.claims.size();
    for (ArticleId a : *violated) {
      if (c.claims.insert(a).second) ++s.augmented_claims;
    }
    c.violated = *violated;
    splits[*doc.split].push_back(std::move(c));
    ++s.emitted;
  }
  for (Split split : kSplits) {
    auto& cases = splits[split];
    std::sort(cases.begin(), cases.end(),
              [](const Case& a, const Case& b) { return a.case_id < b.case_id; });
  }
  return splits;
}

BuildSummary build_outcome_corpus(const std::filesystem::path& raw_dir, const PatternSet& patterns,
                                  const std::optional<std::filesystem::path>& violations_file,
                                  const std::filesystem::path& out_dir) {
  const auto documents = load_raw_documents(raw_dir);
  std::map<std::string, ArticleSet> violations;
  if (violations_file) violations = load_violations(*violations_file);
  BuildSummary summary;
  const SplitSet splits = build_outcome_corpus(documents, patterns, violations, &summary);
  save_corpus(out_dir, splits);
  return summary;
}

}  // namespace negprec
