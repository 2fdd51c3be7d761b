// Command-line front end. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "negprec/checkpoint.hpp"
#include "negprec/claim_extraction.hpp"
#include "negprec/corpus.hpp"
#include "negprec/error.hpp"
#include "negprec/evaluation.hpp"
#include "negprec/experiment.hpp"
#include "negprec/kv_config.hpp"
#include "negprec/synth.hpp"
#include "negprec/training.hpp"

namespace fs = std::filesystem;
using namespace negprec;

namespace {

void print_warnings(const Warnings& w) {
  for (const auto& m : w.messages) std::cerr << "warning: " << m << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

ArticleIndex parse_article_list(const std::vector<int>& numbers) {
  std::vector<ArticleId> ids;
  for (int n : numbers) ids.push_back(ArticleId{n});
  return ArticleIndex(std::move(ids));
}

struct Options {
  std::string raw, patterns, violations;
  std::string corpus, config, out, log, manifest;
  std::string arch, ckpt, predictions, split = "test";
  std::string a, b, cls = "neg";
  std::vector<int> articles;
  std::optional<std::uint64_t> seed;
  std::size_t resamples = 10000;
  std::size_t random_instantiations = 100;
  double threshold = 0.5;
  bool json = false;
};

int cmd_extract(const Options& o) {
  const PatternSet patterns = o.patterns.empty() ? default_pattern_set() : load_pattern_file(o.patterns);
  std::optional<fs::path> violations;
  if (!o.violations.empty()) violations = o.violations;
  const BuildSummary s = build_outcome_corpus(o.raw, patterns, violations, o.out);
  for (const auto& line : s.skipped) std::cerr << "skipped: " << line << '\n';
  std::cout << "pattern set " << s.pattern_set << ": " << s.emitted << " of " << s.documents
            << " documents emitted, " << s.extracted_claims << " extracted claims, " << s.augmented_claims
            << " claims added from violations\n";
  return 0;
}

int cmd_stats(const Options& o) {
  Warnings w;
  const SplitSet splits = load_corpus(o.corpus, &w);
  print_warnings(w);
  const ArticleIndex index = filter_articles(splits);
  const auto stats = split_stats(splits, index);
  std::cout << (o.json ? stats_to_json(stats, index) + "\n" : render_stats(stats));
  return 0;
}

int cmd_synth(const Options& o) {
  GenConfig base;
  GenConfig cfg = parse_gen_config(KeyValueConfig::load(o.config), base);
  if (o.seed) cfg.seed = *o.seed;
  save_corpus(o.out, generate_corpus(cfg));
  write_text(fs::path(o.out) / "generator.cfg", gen_config_to_text(cfg));
  std::cout << "wrote " << cfg.train_size + cfg.validation_size + cfg.test_size << " cases to " << o.out << '\n';
  return 0;
}

int cmd_train(const Options& o) {
  const Architecture arch = parse_architecture(o.arch);
  TrainConfig base;
  if (o.seed) base.seed = *o.seed;
  ParsedTrainConfig parsed{base, HyperGrid{{base.learning_rate}, {base.dropout}, {base.hidden}}};
  if (!o.config.empty()) parsed = parse_train_config(KeyValueConfig::load(o.config), base);
  if (o.seed) parsed.config.seed = *o.seed;

  Warnings w;
  const SplitSet splits = load_corpus(o.corpus, &w);
  print_warnings(w);
  const ArticleIndex index = filter_articles(splits);
  const Dataset train_data = make_dataset(splits.train, index, parsed.config.tokenizer);
  const Dataset validation_data = make_dataset(splits.validation, index, parsed.config.tokenizer);
  const GridResult grid = grid_search(arch, parsed.config, parsed.grid, train_data, validation_data, index);
  for (const auto& e : grid.entries) {
    if (!e.validation_loss) std::cerr << "diverged: " << stable_hash(e.config.to_text()) << ": " << e.error << '\n';
  }
  save_checkpoint(o.out, grid.best.model);
  const std::string log = training_log_jsonl(grid.best);
  if (!o.log.empty()) write_text(o.log, log);
  std::cout << "selected epoch " << grid.best.selected_epoch << ", validation loss "
            << format_double(grid.best.selected_validation_loss) << ", checkpoint " << o.out << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  const Model model = load_checkpoint(o.ckpt);
  Warnings w;
  const SplitSet splits = load_corpus(o.corpus, &w);
  print_warnings(w);
  const auto& cases = splits[parse_split(o.split)];
  const Dataset data = make_dataset(cases, model.articles, model.tokenizer);
  PredictionSet preds = predict(model, data.examples, o.threshold);
  if (!o.predictions.empty()) save_predictions(o.predictions, preds);

  LabelMatrix gold = data.labels;
  if (!o.articles.empty()) {
    const ArticleIndex subset = parse_article_list(o.articles);
    gold = select_articles(gold, model.articles, subset);
    preds = select_articles(preds, subset);
  }
  EvalReport report = evaluate(preds, gold, std::string(to_string(model.architecture)),
                               std::string(to_string(model.encoders.front().kind)), fs::path(o.corpus).filename());
  report.random = random_baseline(gold, o.random_instantiations, o.seed.value_or(0));
  if (o.seed) report.seed = std::to_string(*o.seed);
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "report.csv", render_report_csv({report}));
    write_text(fs::path(o.out) / "report.txt", render_report_table({report}));
  }
  std::cout << render_report_table({report});
  return 0;
}

int cmd_significance(const Options& o) {
  Warnings w;
  const SplitSet splits = load_corpus(o.corpus, &w);
  print_warnings(w);
  const auto& cases = splits[parse_split(o.split)];
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.case_id);
  PredictionSet a = load_predictions(o.a);
  PredictionSet b = load_predictions(o.b);
  const ArticleIndex index = o.articles.empty() ? a.articles : parse_article_list(o.articles);
  a = align_predictions(a, ids, index);
  b = align_predictions(b, ids, index);
  const LabelMatrix gold = build_label_matrix(cases, index);
  const OutcomeLabel cls = parse_outcome_label(o.cls);
  const auto sa = per_case_scores(a, gold, cls);
  const auto sb = per_case_scores(b, gold, cls);
  const auto r = permutation_test(sa, sb, o.resamples, o.seed.value_or(0));
  std::cout << "class " << to_string(cls) << ": F1 " << format_double(micro_f1(a, gold, cls)) << " vs "
            << format_double(micro_f1(b, gold, cls)) << ", p = " << format_double(r.p_value) << " ("
            << (r.exhaustive ? "exhaustive, " : "sampled, ") << r.assignments << " assignments)\n";
  return 0;
}

int cmd_run(const Options& o) {
  ExperimentManifest m = load_manifest(o.manifest);
  if (!o.out.empty()) m.out = o.out;
  if (o.seed) m.seeds = {*o.seed};
  const ExperimentResult r = run_experiment(m);
  std::cout << render_report_table(r.reports) << "bundle written to " << r.out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outcome prediction with positive, negative and null outcomes"};
  app.require_subcommand(1);
  Options o;

  auto* extract = app.add_subcommand("extract", "Build an outcome corpus from raw judgments");
  extract->add_option("--raw", o.raw, "Directory of raw judgment JSON files")->required();
  extract->add_option("--patterns", o.patterns, "Pattern file (default: built-in set)");
  extract->add_option("--violations", o.violations, "JSONL file of violated articles");
  extract->add_option("--out", o.out, "Output corpus directory")->required();

  auto* stats = app.add_subcommand("stats", "Print per-split label statistics");
  stats->add_option("--corpus", o.corpus, "Corpus directory")->required();
  stats->add_flag("--json", o.json, "Emit JSON");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("--config", o.config, "Generator config (key=value)")->required();
  synth->add_option("--out", o.out, "Output corpus directory")->required();
  synth->add_option("--seed", o.seed, "Override the generator seed");

  auto* train = app.add_subcommand("train", "Train one architecture with grid search");
  train->add_option("--arch", o.arch, "simple, mtl, joint or claim-outcome")->required();
  train->add_option("--corpus", o.corpus, "Corpus directory")->required();
  train->add_option("--config", o.config, "Training config (key=value)");
  train->add_option("--out", o.out, "Checkpoint path (.json for JSON, otherwise CBOR)")->required();
  train->add_option("--log", o.log, "Training log (JSONL)");
  train->add_option("--seed", o.seed, "Training seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  eval->add_option("--corpus", o.corpus, "Corpus directory")->required();
  eval->add_option("--out", o.out, "Report directory");
  eval->add_option("--predictions", o.predictions, "Write predictions (JSONL)");
  eval->add_option("--articles", o.articles, "Restrict scoring to these articles")->delimiter(',');
  eval->add_option("--split", o.split, "Split to evaluate");
  eval->add_option("--threshold", o.threshold, "Baseline decision threshold");
  eval->add_option("--random-instantiations", o.random_instantiations, "Random baseline draws");
  eval->add_option("--seed", o.seed, "Random baseline seed");

  auto* sig = app.add_subcommand("significance", "Paired permutation test between two prediction files");
  sig->add_option("--a", o.a, "Predictions of the first system")->required();
  sig->add_option("--b", o.b, "Predictions of the second system")->required();
  sig->add_option("--corpus", o.corpus, "Corpus directory")->required();
  sig->add_option("--split", o.split, "Split the predictions cover");
  sig->add_option("--class", o.cls, "pos, neg or null");
  sig->add_option("--articles", o.articles, "Restrict to these articles")->delimiter(',');
  sig->add_option("--resamples", o.resamples, "Sampled sign flips (when more than 20 cases)");
  sig->add_option("--seed", o.seed, "Sampling seed");

  auto* run = app.add_subcommand("run", "Run an experiment manifest");
  run->add_option("--manifest", o.manifest, "Manifest (key=value)")->required();
  run->add_option("--out", o.out, "Override the output directory");
  run->add_option("--seed", o.seed, "Run a single seed instead of the manifest's list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*extract) return cmd_extract(o);
    if (*stats) return cmd_stats(o);
    if (*synth) return cmd_synth(o);
    if (*train) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    if (*sig) return cmd_significance(o);
    if (*run) return cmd_run(o);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
