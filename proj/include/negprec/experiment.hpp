#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "negprec/corpus.hpp"
#include "negprec/evaluation.hpp"
#include "negprec/models.hpp"
#include "negprec/training.hpp"

namespace negprec {

class KeyValueConfig;

/// Manifest keys:
///   corpus=<dir> or synth=<generator config file> (exactly one)
///   corpus_name, architectures, seeds, out
///   random_instantiations, significance_resamples, significance_class,
///   threshold
///   plus every training key except seed (see parse_train_config).
/// Relative paths resolve against the manifest's directory.
struct ExperimentManifest {
  std::optional<std::filesystem::path> corpus;
  std::optional<std::filesystem::path> synth;
  std::string corpus_name;
  std::vector<Architecture> architectures;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out;
  TrainConfig train;
  HyperGrid grid;
  std::size_t random_instantiations = 100;
  std::size_t significance_resamples = 10000;
  OutcomeLabel significance_class = OutcomeLabel::Neg;
  double threshold = 0.5;
};

ExperimentManifest parse_manifest(const KeyValueConfig& cfg, const std::filesystem::path& base_dir = {});
ExperimentManifest load_manifest(const std::filesystem::path& path);

struct SignificanceEntry {
  std::string a;
  std::string b;
  std::uint64_t seed = 0;
  OutcomeLabel cls = OutcomeLabel::Neg;
  PermutationResult result;
};

struct ExperimentResult {
  std::vector<EvalReport> reports;  // one per architecture x seed
  RandomBaseline random;
  std::vector<SignificanceEntry> significance;
  std::filesystem::path out;
};

/// Writes to manifest.out:
///   report.csv, report.txt, random_baseline.csv, significance.csv,
///   run_log.jsonl, checkpoints/<arch>-seed<s>.cbor,
///   predictions/<arch>-seed<s>.jsonl
/// Everything is a function of the manifest and seeds. A failing stage is
/// rethrown with the stage name and run configuration prepended.
ExperimentResult run_experiment(const ExperimentManifest& manifest);

}  // namespace negprec
