#include "negprec/experiment.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "negprec/checkpoint.hpp"
#include "negprec/error.hpp"
#include "negprec/kv_config.hpp"
#include "negprec/synth.hpp"

namespace negprec {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestKeys[] = {
    "corpus", "synth", "corpus_name", "architectures", "seeds", "out", "random_instantiations",
    "significance_resamples", "significance_class", "threshold"};

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

/// Runs `body`, rethrowing failures with the same type and a stage prefix.
template <typename F>
auto stage(const std::string& name, const std::string& context, F&& body) {
  const std::string prefix = "stage '" + name + "'" + (context.empty() ? "" : " (" + context + ")") + ": ";
  try {
    return body();
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const UsageError& e) {
    throw UsageError(prefix + e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string run_name(Architecture arch, std::uint64_t seed) {
  return std::string(to_string(arch)) + "-seed" + std::to_string(seed);
}

}  // namespace

ExperimentManifest parse_manifest(const KeyValueConfig& cfg, const fs::path& base_dir) {
  std::vector<std::string_view> known(std::begin(kManifestKeys), std::end(kManifestKeys));
  for (auto key : kTrainConfigKeys) {
    if (key != "seed") known.push_back(key);
  }
  cfg.reject_unknown(known);

  ExperimentManifest m;
  if (cfg.contains("corpus") == cfg.contains("synth")) {
    throw UsageError(cfg.origin() + ": exactly one of 'corpus' or 'synth' is required");
  }
  if (auto v = cfg.get("corpus")) m.corpus = resolve(base_dir, *v);
  if (auto v = cfg.get("synth")) m.synth = resolve(base_dir, *v);
  m.corpus_name = cfg.get("corpus_name").value_or(m.corpus ? m.corpus->filename().string() : "synthetic");
  if (m.corpus_name.empty()) m.corpus_name = "corpus";

  for (const auto& a : cfg.get_list("architectures")) m.architectures.push_back(parse_architecture(a));
  if (m.architectures.empty()) throw UsageError(cfg.origin() + ": 'architectures' must list at least one model");
  m.seeds = cfg.get_unsigned_list("seeds");
  if (m.seeds.empty()) throw UsageError(cfg.origin() + ": 'seeds' must list at least one seed");
  m.out = resolve(base_dir, cfg.require("out"));

  if (auto v = cfg.get_unsigned("random_instantiations")) m.random_instantiations = *v;
  if (auto v = cfg.get_unsigned("significance_resamples")) m.significance_resamples = *v;
  if (auto v = cfg.get("significance_class")) m.significance_class = parse_outcome_label(*v);
  if (auto v = cfg.get_double("threshold")) m.threshold = *v;
  if (!(m.threshold > 0.0 && m.threshold < 1.0)) throw UsageError(cfg.origin() + ": threshold must lie in (0, 1)");
  if (m.random_instantiations < 1) throw UsageError(cfg.origin() + ": random_instantiations must be >= 1");

  KeyValueConfig train_cfg = KeyValueConfig::parse("", cfg.origin());
  for (const auto& [key, value] : cfg.values()) {
    for (auto k : kTrainConfigKeys) {
      if (k == key) train_cfg.set(key, key == "vectors" ? resolve(base_dir, value).string() : value);
    }
  }
  auto parsed = parse_train_config(train_cfg);
  m.train = parsed.config;
  m.grid = parsed.grid;
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  return parse_manifest(KeyValueConfig::load(path), path.parent_path());
}

ExperimentResult run_experiment(const ExperimentManifest& m) {
  ExperimentResult result;
  result.out = m.out;

  SplitSet splits = stage("corpus", m.corpus_name, [&] {
    if (m.corpus) {
      if (!fs::is_directory(*m.corpus)) throw DataError("corpus directory " + m.corpus->string() + " not found");
      return load_corpus(*m.corpus);
    }
    if (!fs::is_regular_file(*m.synth)) throw DataError("generator config " + m.synth->string() + " not found");
    return generate_corpus(parse_gen_config(KeyValueConfig::load(*m.synth)));
  });
  if (m.train.vectors && !fs::is_regular_file(*m.train.vectors)) {
    throw DataError("stage 'corpus': vector table " + m.train.vectors->string() + " not found");
  }
  const ArticleIndex index = stage("corpus", m.corpus_name, [&] { return filter_articles(splits); });

  fs::create_directories(m.out / "checkpoints");
  fs::create_directories(m.out / "predictions");

  std::ostringstream log;
  {
    nlohmann::ordered_json rec;
    rec["stage"] = "corpus";
    rec["name"] = m.corpus_name;
    rec["source"] = m.corpus ? m.corpus->string() : m.synth->string();
    std::vector<int> ids;
    for (ArticleId a : index.articles()) ids.push_back(a.number);
    rec["articles"] = ids;
    rec["train"] = splits.train.size();
    rec["validation"] = splits.validation.size();
    rec["test"] = splits.test.size();
    log << rec.dump() << '\n';
  }

  const Dataset train_data = make_dataset(splits.train, index, m.train.tokenizer);
  const Dataset validation_data = make_dataset(splits.validation, index, m.train.tokenizer);
  const Dataset test_data = make_dataset(splits.test, index, m.train.tokenizer);
  std::vector<std::string> test_ids;
  for (const auto& c : splits.test) test_ids.push_back(c.case_id);

  // predictions[seed position][architecture position]
  std::vector<std::vector<PredictionSet>> predictions(m.seeds.size());
  for (std::size_t si = 0; si < m.seeds.size(); ++si) {
    const std::uint64_t seed = m.seeds[si];
    for (Architecture arch : m.architectures) {
      const std::string name = run_name(arch, seed);
      TrainConfig base = m.train;
      base.seed = seed;
      const std::string context = "architecture=" + std::string(to_string(arch)) + ", seed=" + std::to_string(seed) +
                                  ", config=" + stable_hash(base.to_text());

      GridResult grid = stage("train", context, [&] {
        return grid_search(arch, base, m.grid, train_data, validation_data, index);
      });
      nlohmann::ordered_json rec;
      rec["stage"] = "train";
      rec["run"] = name;
      nlohmann::ordered_json entries = nlohmann::ordered_json::array();
      for (const auto& e : grid.entries) {
        nlohmann::ordered_json j;
        j["config_hash"] = stable_hash(e.config.to_text());
        j["learning_rate"] = e.config.learning_rate;
        j["dropout"] = e.config.dropout;
        j["hidden"] = e.config.hidden;
        if (e.validation_loss) {
          j["validation_loss"] = *e.validation_loss;
        } else {
          j["validation_loss"] = nullptr;
          j["error"] = e.error;
        }
        entries.push_back(std::move(j));
      }
      rec["grid"] = std::move(entries);
      rec["selected_config_hash"] = stable_hash(grid.best.config.to_text());
      rec["selected_epoch"] = grid.best.selected_epoch;
      nlohmann::ordered_json epochs = nlohmann::ordered_json::array();
      for (const auto& e : grid.best.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"train_loss", e.train_loss},
                          {"validation_loss", e.validation_loss},
                          {"clamped", e.clamped}});
      }
      rec["epochs"] = std::move(epochs);
      log << rec.dump() << '\n';

      stage("checkpoint", context, [&] {
        save_checkpoint(m.out / "checkpoints" / (name + ".cbor"), grid.best.model);
        return 0;
      });
      PredictionSet preds = stage("evaluate", context, [&] {
        return predict(grid.best.model, test_data.examples, m.threshold);
      });
      save_predictions(m.out / "predictions" / (name + ".jsonl"), preds);
      EvalReport report = evaluate(preds, test_data.labels, std::string(to_string(arch)),
                                   std::string(to_string(m.train.encoder)), m.corpus_name);
      report.seed = std::to_string(seed);
      result.reports.push_back(report);
      predictions[si].push_back(std::move(preds));
    }
  }

  result.random = stage("random_baseline", m.corpus_name, [&] {
    return random_baseline(test_data.labels, m.random_instantiations, m.seeds.front());
  });

  stage("significance", "class=" + std::string(to_string(m.significance_class)), [&] {
    for (std::size_t si = 0; si < m.seeds.size(); ++si) {
      for (std::size_t i = 0; i < m.architectures.size(); ++i) {
        for (std::size_t j = i + 1; j < m.architectures.size(); ++j) {
          const auto a = per_case_scores(predictions[si][i], test_data.labels, m.significance_class);
          const auto b = per_case_scores(predictions[si][j], test_data.labels, m.significance_class);
          SignificanceEntry e;
          e.a = std::string(to_string(m.architectures[i]));
          e.b = std::string(to_string(m.architectures[j]));
          e.seed = m.seeds[si];
          e.cls = m.significance_class;
          e.result = permutation_test(a, b, m.significance_resamples, m.seeds[si]);
          result.reports[si * m.architectures.size() + i].p_values[e.b] = e.result.p_value;
          result.reports[si * m.architectures.size() + j].p_values[e.a] = e.result.p_value;
          result.significance.push_back(std::move(e));
        }
      }
    }
    return 0;
  });

  write_file(m.out / "report.csv", render_report_csv(result.reports));
  write_file(m.out / "report.txt", render_report_table(result.reports));
  {
    std::ostringstream csv;
    csv << "class,mean,sd,instantiations\n";
    for (OutcomeLabel cls : kOutcomeLabels) {
      const auto c = static_cast<std::size_t>(cls);
      csv << to_string(cls) << ',' << format_double(result.random.mean[c]) << ','
          << format_double(result.random.sd[c]) << ',' << result.random.instantiations << '\n';
    }
    write_file(m.out / "random_baseline.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "a,b,seed,class,p_value,exhaustive,assignments\n";
    for (const auto& e : result.significance) {
      csv << e.a << ',' << e.b << ',' << e.seed << ',' << to_string(e.cls) << ',' << format_double(e.result.p_value)
          << ',' << (e.result.exhaustive ? "true" : "false") << ',' << e.result.assignments << '\n';
    }
    write_file(m.out / "significance.csv", csv.str());
  }
  for (const auto& r : result.reports) {
    nlohmann::ordered_json rec;
    rec["stage"] = "evaluate";
    rec["run"] = r.model + "-seed" + r.seed;
    rec["pos"] = r.f1_pos.value_or(0.0);
    rec["neg"] = r.f1_neg.value_or(0.0);
    rec["null"] = r.f1_null ? nlohmann::ordered_json(*r.f1_null) : nlohmann::ordered_json(nullptr);
    rec["all"] = r.f1_all ? nlohmann::ordered_json(*r.f1_all) : nlohmann::ordered_json(nullptr);
    log << rec.dump() << '\n';
  }
  write_file(m.out / "run_log.jsonl", log.str());
  return result;
}

}  // namespace negprec
