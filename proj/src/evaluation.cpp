#include "negprec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "negprec/error.hpp"
#include "negprec/kv_config.hpp"

namespace negprec {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_aligned(const PredictionSet& preds, const LabelMatrix& gold) {
  if (preds.cases() != gold.cases() || preds.articles.size() != gold.articles()) {
    throw ShapeError("predictions (" + std::to_string(preds.cases()) + " x " + std::to_string(preds.articles.size()) +
                     ") are not aligned with gold labels (" + std::to_string(gold.cases()) + " x " +
                     std::to_string(gold.articles()) + ")");
  }
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : "-"; }

std::optional<double> parse_cell(const std::string& s) {
  if (s == "-" || s.empty()) return std::nullopt;
  return parse_double(s, "report cell");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(line);
  while (std::getline(in, item, ',')) out.push_back(item);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

bool PredictionSet::predicts(std::size_t n, std::size_t k, OutcomeLabel cls) const {
  const std::size_t i = n * articles.size() + k;
  if (!baseline) return labels[i] == cls;
  switch (cls) {
    case OutcomeLabel::Pos: return decisions[i].pos;
    case OutcomeLabel::Neg: return decisions[i].neg;
    case OutcomeLabel::Null: break;
  }
  throw UsageError("baseline predictions have no null class");
}

PredictionSet predict(const Model& model, std::span<const Example> examples, double threshold) {
  PredictionSet p;
  p.articles = model.articles;
  p.baseline = !is_three_way(model.architecture);
  for (const Example& ex : examples) {
    p.case_ids.push_back(ex.case_id);
    if (p.baseline) {
      const auto d = decide_baseline(baseline_scores(model, ex), threshold);
      p.decisions.insert(p.decisions.end(), d.begin(), d.end());
    } else {
      const auto l = decide(outcome_distribution(model, ex));
      p.labels.insert(p.labels.end(), l.begin(), l.end());
    }
  }
  return p;
}

std::string predictions_to_jsonl(const PredictionSet& preds) {
  std::ostringstream out;
  const std::size_t K = preds.articles.size();
  for (std::size_t n = 0; n < preds.cases(); ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      nlohmann::ordered_json rec;
      rec["case_id"] = preds.case_ids[n];
      rec["article"] = preds.articles[k].number;
      if (preds.baseline) {
        rec["pos"] = preds.decisions[n * K + k].pos;
        rec["neg"] = preds.decisions[n * K + k].neg;
      } else {
        rec["pred"] = std::string(to_string(preds.labels[n * K + k]));
      }
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

void save_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write predictions " + path.string());
  out << predictions_to_jsonl(preds);
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions " + path.string());
  struct Record {
    std::size_t case_pos;
    int article;
    OutcomeLabel label;
    BaselineDecision decision;
  };
  std::vector<Record> records;
  std::vector<std::string> case_ids;
  std::unordered_map<std::string, std::size_t> case_pos;
  ArticleSet articles;
  std::optional<bool> baseline;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string origin = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(origin + ": malformed JSON (" + e.what() + ")");
    }
    if (!j.contains("case_id") || !j["case_id"].is_string() || !j.contains("article") ||
        !j["article"].is_number_integer()) {
      throw DataError(origin + ": expected case_id and integer article");
    }
    const bool is_baseline = !j.contains("pred");
    if (baseline && *baseline != is_baseline) throw DataError(origin + ": mixed prediction formats");
    baseline = is_baseline;
    Record r{};
    const auto id = j["case_id"].get<std::string>();
    auto [it, inserted] = case_pos.emplace(id, case_ids.size());
    if (inserted) case_ids.push_back(id);
    r.case_pos = it->second;
    r.article = j["article"].get<int>();
    if (is_baseline) {
      if (!j.contains("pos") || !j["pos"].is_boolean() || !j.contains("neg") || !j["neg"].is_boolean()) {
        throw DataError(origin + ": baseline record needs boolean 'pos' and 'neg'");
      }
      r.decision = {j["pos"].get<bool>(), j["neg"].get<bool>()};
    } else {
      r.label = parse_outcome_label(j["pred"].get<std::string>());
    }
    articles.insert(ArticleId{r.article});
    records.push_back(r);
  }
  if (records.empty()) throw DataError("predictions file " + path.string() + " is empty");

  PredictionSet p;
  p.case_ids = std::move(case_ids);
  p.articles = ArticleIndex(std::vector<ArticleId>(articles.begin(), articles.end()));
  p.baseline = *baseline;
  const std::size_t K = p.articles.size();
  std::vector<char> seen(p.cases() * K, 0);
  if (p.baseline) {
    p.decisions.resize(p.cases() * K);
  } else {
    p.labels.resize(p.cases() * K, OutcomeLabel::Null);
  }
  for (const auto& r : records) {
    const std::size_t i = r.case_pos * K + p.articles.position(ArticleId{r.article});
    if (seen[i]++) {
      throw DataError(path.string() + ": duplicate prediction for case '" + p.case_ids[r.case_pos] + "', article " +
                      std::to_string(r.article));
    }
    if (p.baseline) {
      p.decisions[i] = r.decision;
    } else {
      p.labels[i] = r.label;
    }
  }
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
    throw DataError(path.string() + ": some (case, article) pairs have no prediction");
  }
  return p;
}

PredictionSet align_predictions(const PredictionSet& preds, const std::vector<std::string>& case_ids,
                                const ArticleIndex& articles) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t n = 0; n < preds.cases(); ++n) pos.emplace(preds.case_ids[n], n);
  PredictionSet out;
  out.case_ids = case_ids;
  out.articles = articles;
  out.baseline = preds.baseline;
  const std::size_t K = preds.articles.size();
  for (const auto& id : case_ids) {
    auto it = pos.find(id);
    if (it == pos.end()) throw DataError("no predictions for case '" + id + "'");
    for (ArticleId a : articles.articles()) {
      const std::size_t k = preds.articles.position(a);
      if (k == K) throw DataError("no predictions for article " + std::to_string(a.number));
      const std::size_t i = it->second * K + k;
      if (preds.baseline) {
        out.decisions.push_back(preds.decisions[i]);
      } else {
        out.labels.push_back(preds.labels[i]);
      }
    }
  }
  return out;
}

PredictionSet select_articles(const PredictionSet& preds, const ArticleIndex& subset) {
  return align_predictions(preds, preds.case_ids, subset);
}

LabelMatrix select_articles(const LabelMatrix& gold, const ArticleIndex& full, const ArticleIndex& subset) {
  LabelMatrix out(gold.cases(), subset.size());
  for (std::size_t j = 0; j < subset.size(); ++j) {
    const std::size_t k = full.position(subset[j]);
    if (k == full.size()) throw DataError("article " + std::to_string(subset[j].number) + " not in the index");
    for (std::size_t n = 0; n < gold.cases(); ++n) out.set(n, j, gold.at(n, k));
  }
  return out;
}

Confusion confusion(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls) {
  check_aligned(preds, gold);
  Confusion c;
  for (std::size_t n = 0; n < gold.cases(); ++n) {
    for (std::size_t k = 0; k < gold.articles(); ++k) {
      const bool predicted = preds.predicts(n, k, cls);
      const bool actual = gold.at(n, k) == cls;
      c.tp += predicted && actual;
      c.fp += predicted && !actual;
      c.fn += !predicted && actual;
    }
  }
  return c;
}

double f1_from_confusion(const Confusion& c) {
  if (c.tp == 0) return 0.0;
  const double tp = static_cast<double>(c.tp);
  const double precision = tp / static_cast<double>(c.tp + c.fp);
  const double recall = tp / static_cast<double>(c.tp + c.fn);
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

double micro_f1(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls) {
  return f1_from_confusion(confusion(preds, gold, cls));
}

std::optional<double> all_score(std::optional<double> pos, std::optional<double> neg, std::optional<double> null) {
  if (!pos || !neg || !null) return std::nullopt;
  return (*pos + *neg + *null) / 3.0;
}

RandomBaseline random_baseline(const LabelMatrix& gold, std::size_t instantiations, std::uint64_t seed) {
  if (instantiations < 1) throw UsageError("random_baseline needs at least one instantiation");
  RandomBaseline out;
  out.instantiations = instantiations;
  std::array<std::vector<double>, 3> scores;
  PredictionSet preds;
  preds.articles = ArticleIndex([&] {
    std::vector<ArticleId> ids;
    for (std::size_t k = 0; k < gold.articles(); ++k) ids.push_back(ArticleId{static_cast<int>(k)});
    return ids;
  }());
  preds.case_ids.resize(gold.cases());
  preds.labels.resize(gold.cases() * gold.articles());
  for (std::size_t i = 0; i < instantiations; ++i) {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(i)));
    std::uniform_int_distribution<int> pick(0, 2);
    for (auto& l : preds.labels) l = static_cast<OutcomeLabel>(pick(rng));
    for (OutcomeLabel cls : kOutcomeLabels) {
      scores[static_cast<std::size_t>(cls)].push_back(micro_f1(preds, gold, cls));
    }
  }
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& s = scores[c];
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(s.size());
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    out.mean[c] = mean;
    out.sd[c] = s.size() > 1 ? std::sqrt(var / static_cast<double>(s.size() - 1)) : 0.0;
  }
  return out;
}

PermutationResult permutation_test(std::span<const double> a, std::span<const double> b, std::size_t resamples,
                                   std::uint64_t seed, PermutationMode mode) {
  if (a.size() != b.size()) throw ShapeError("permutation_test: score vectors differ in length");
  const std::size_t n = a.size();
  if (n == 0) throw UsageError("permutation_test: no paired scores");
  std::vector<double> d(n);
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = a[i] - b[i];
    scale += std::abs(d[i]);
  }
  // Statistics are compared as |sum| (n is fixed), with a tolerance for
  // rounding when different sign patterns give the same value.
  double observed = 0.0;
  for (double v : d) observed += v;
  observed = std::abs(observed);
  const double threshold = observed - 1e-9 * std::max(scale, 1.0);

  const bool exhaustive = mode == PermutationMode::Exhaustive || (mode == PermutationMode::Auto && n <= 20);
  PermutationResult r;
  r.exhaustive = exhaustive;
  std::size_t hits = 0;
  if (exhaustive) {
    if (n > 30) throw UsageError("permutation_test: exhaustive mode limited to 30 pairs");
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += ((mask >> i) & 1U) ? -d[i] : d[i];
      hits += std::abs(s) >= threshold;
    }
    r.assignments = static_cast<std::size_t>(total);
  } else {
    if (resamples < 1000) throw UsageError("permutation_test: at least 1000 resamples required");
    std::mt19937_64 rng(seed);
    for (std::size_t t = 0; t < resamples; ++t) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += (rng() & 1U) ? -d[i] : d[i];
      hits += std::abs(s) >= threshold;
    }
    r.assignments = resamples;
  }
  r.p_value = static_cast<double>(hits) / static_cast<double>(r.assignments);
  return r;
}

std::vector<double> per_case_scores(const PredictionSet& preds, const LabelMatrix& gold, OutcomeLabel cls) {
  check_aligned(preds, gold);
  std::vector<double> out(gold.cases(), 0.0);
  for (std::size_t n = 0; n < gold.cases(); ++n) {
    for (std::size_t k = 0; k < gold.articles(); ++k) {
      out[n] += preds.predicts(n, k, cls) == (gold.at(n, k) == cls) ? 1.0 : 0.0;
    }
  }
  return out;
}

EvalReport evaluate(const PredictionSet& preds, const LabelMatrix& gold, std::string model, std::string encoder,
                    std::string corpus) {
  EvalReport r;
  r.model = std::move(model);
  r.encoder = std::move(encoder);
  r.corpus = std::move(corpus);
  r.f1_pos = micro_f1(preds, gold, OutcomeLabel::Pos);
  r.f1_neg = micro_f1(preds, gold, OutcomeLabel::Neg);
  if (!preds.baseline) r.f1_null = micro_f1(preds, gold, OutcomeLabel::Null);
  r.f1_all = all_score(r.f1_pos, r.f1_neg, r.f1_null);
  return r;
}

std::string render_report_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "model,encoder,corpus,seed,pos,neg,null,all\n";
  for (const auto& r : reports) {
    for (const auto* text : {&r.model, &r.encoder, &r.corpus, &r.seed}) {
      if (text->find_first_of(",\n") != std::string::npos) throw UsageError("report labels may not contain commas");
    }
    out << r.model << ',' << r.encoder << ',' << r.corpus << ',' << r.seed << ',' << cell(r.f1_pos) << ','
        << cell(r.f1_neg) << ',' << cell(r.f1_null) << ',' << cell(r.f1_all) << '\n';
  }
  return out.str();
}

std::vector<EvalReport> parse_report_csv(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  std::vector<EvalReport> out;
  if (!std::getline(in, line)) return out;
  if (line != "model,encoder,corpus,seed,pos,neg,null,all") throw DataError("unexpected report header: " + line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) throw DataError("report row must have 8 fields: " + line);
    EvalReport r;
    r.model = f[0];
    r.encoder = f[1];
    r.corpus = f[2];
    r.seed = f[3];
    r.f1_pos = parse_cell(f[4]);
    r.f1_neg = parse_cell(f[5]);
    r.f1_null = parse_cell(f[6]);
    r.f1_all = parse_cell(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string render_report_table(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Model" << std::setw(14) << "Encoder" << std::setw(20) << "Corpus"
      << std::setw(6) << "Seed" << std::right << std::setw(8) << "Pos" << std::setw(8) << "Neg" << std::setw(8)
      << "Null" << std::setw(8) << "All" << '\n';
  auto num = [](const std::optional<double>& v) {
    std::ostringstream s;
    if (v) {
      s << std::fixed << std::setprecision(2) << *v;
    } else {
      s << "-";
    }
    return s.str();
  };
  for (const auto& r : reports) {
    out << std::left << std::setw(16) << r.model << std::setw(14) << r.encoder << std::setw(20) << r.corpus
        << std::setw(6) << r.seed << std::right << std::setw(8) << num(r.f1_pos) << std::setw(8) << num(r.f1_neg)
        << std::setw(8) << num(r.f1_null) << std::setw(8) << num(r.f1_all) << '\n';
    if (r.random) {
      out << "  random baseline:";
      for (OutcomeLabel cls : kOutcomeLabels) {
        const auto c = static_cast<std::size_t>(cls);
        out << ' ' << to_string(cls) << ' ' << num(r.random->mean[c]) << " +- " << num(r.random->sd[c]);
      }
      out << '\n';
    }
    for (const auto& [pair, p] : r.p_values) out << "  p(" << pair << ") = " << format_double(p) << '\n';
  }
  return out.str();
}

std::vector<EvalReport> published_results_fixture() {
  struct Row {
    const char* model;
    const char* encoder;
    const char* corpus;
    double pos, neg, null, all;  // null/all < 0 means "-"
  };
  static constexpr Row rows[] = {
      {"claim-outcome", "BERT", "outcome", 74.80, 24.01, 95.53, 64.78},
      {"claim-outcome", "L-BERT", "outcome", 74.90, 21.83, 95.49, 64.07},
      {"claim-outcome", "Longformer", "outcome", 74.23, 20.55, 95.17, 63.32},
      {"joint", "BERT", "outcome", 76.24, 17.43, 95.46, 63.04},
      {"joint", "L-BERT", "outcome", 76.96, 21.93, 95.71, 64.87},
      {"joint", "Longformer", "outcome", 77.15, 16.24, 95.49, 62.96},
      {"mtl", "BERT", "outcome", 75.75, 12.90, -1, -1},
      {"mtl", "L-BERT", "outcome", 76.73, 9.44, -1, -1},
      {"mtl", "Longformer", "outcome", 75.83, 12.34, -1, -1},
      {"simple", "BERT", "outcome", 75.06, 6.62, -1, -1},
      {"simple", "L-BERT", "outcome", 74.85, 10.09, -1, -1},
      {"simple", "Longformer", "outcome", 74.12, 6.72, -1, -1},
      {"claim-outcome", "BERT", "echr", 63.85, 14.65, 97.15, 58.55},
      {"claim-outcome", "L-BERT", "echr", 64.47, 13.05, 97.14, 58.22},
      {"claim-outcome", "Longformer", "echr", 63.53, 14.84, 97.21, 58.53},
      {"joint", "BERT", "echr", 65.15, 1.87, 97.07, 54.70},
      {"joint", "L-BERT", "echr", 67.08, 0.94, 97.19, 55.07},
      {"joint", "Longformer", "echr", 65.94, 0.95, 97.11, 54.67},
      {"mtl", "BERT", "echr", 63.21, 0.95, -1, -1},
      {"mtl", "L-BERT", "echr", 65.00, 0.95, -1, -1},
      {"mtl", "Longformer", "echr", 63.36, 0.47, -1, -1},
      {"simple", "BERT", "echr", 65.04, 0.00, -1, -1},
      {"simple", "L-BERT", "echr", 65.51, 0.00, -1, -1},
      {"simple", "Longformer", "echr", 63.92, 1.81, -1, -1},
  };
  std::vector<EvalReport> out;
  for (const Row& row : rows) {
    EvalReport r;
    r.model = row.model;
    r.encoder = row.encoder;
    r.corpus = row.corpus;
    r.f1_pos = row.pos;
    r.f1_neg = row.neg;
    if (row.null >= 0) r.f1_null = row.null;
    if (row.all >= 0) r.f1_all = row.all;
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<AllScoreCheck> check_all_scores(const std::vector<EvalReport>& reports, double tolerance) {
  std::vector<AllScoreCheck> out;
  for (const auto& r : reports) {
    if (!r.f1_all) continue;
    const auto recomputed = all_score(r.f1_pos, r.f1_neg, r.f1_null);
    AllScoreCheck c;
    c.label = r.model + "/" + r.encoder + "/" + r.corpus;
    c.published = *r.f1_all;
    c.recomputed = recomputed.value_or(std::nan(""));
    c.ok = recomputed && std::abs(*recomputed - *r.f1_all) <= tolerance;
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace negprec
