#include <doctest.h>

#include <fstream>
#include <random>

#include <json.hpp>

#include "helpers.hpp"
#include "negprec/checkpoint.hpp"
#include "negprec/error.hpp"

using namespace negprec;

namespace {

std::vector<double> flatten(const Model& m) {
  std::vector<double> out;
  for_each_parameter(m, [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
  return out;
}

}  // namespace

TEST_CASE("checkpoints round-trip exactly in both encodings") {
  const auto dir = testing::scratch_dir("checkpoints");
  const Dataset data = testing::random_dataset(10, 3, 4);
  for (Architecture arch : kArchitectures) {
    const Model m = testing::random_model(arch, 3, 5, 4, 6, 12);
    for (const char* name : {"m.json", "m.cbor"}) {
      save_checkpoint(dir / name, m);
      const Model back = load_checkpoint(dir / name);
      CHECK(back.architecture == arch);
      CHECK(back.dims == m.dims);
      CHECK(back.tokenizer == m.tokenizer);
      CHECK(back.articles == m.articles);
      CHECK(flatten(back) == flatten(m));
      CHECK(nll_loss(back, data) == nll_loss(m, data));
    }
  }
}

TEST_CASE("precomputed encoders are stored with the checkpoint") {
  auto table = std::make_shared<VectorTable>();
  (*table)["a"] = Eigen::Vector3d(0.5, -1, 2);
  (*table)["b"] = Eigen::Vector3d(1, 1, 1);
  ModelDims dims;
  dims.hidden = 4;
  dims.second_hidden = 4;
  ModelInit init;
  init.encoder_kind = EncoderKind::Precomputed;
  init.vectors = table;
  const Model m = make_model(Architecture::ClaimOutcome, dims, testing::small_tokenizer(), testing::index_of(2), init);
  CHECK(m.dims.input == 3);
  const Model back = checkpoint_from_cbor(checkpoint_to_cbor(m));
  const Example ex{"a", {}};
  const auto d1 = outcome_distribution(m, ex);
  const auto d2 = outcome_distribution(back, ex);
  CHECK(d1.rows == d2.rows);
}

TEST_CASE("damaged checkpoints are data errors") {
  const auto dir = testing::scratch_dir("bad_checkpoints");
  const Model m = testing::random_model(Architecture::Joint, 2, 3, 2, 2, 0);
  save_checkpoint(dir / "m.json", m);

  nlohmann::json j;
  std::ifstream(dir / "m.json") >> j;
  j["version"] = 99;
  std::ofstream(dir / "v.json") << j.dump();
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "v.json"), doctest::Contains("version"), DataError);

  std::ofstream(dir / "t.json") << "{\"format\": ";
  CHECK_THROWS_AS(load_checkpoint(dir / "t.json"), DataError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.cbor"), DataError);

  auto bytes = checkpoint_to_cbor(m);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(checkpoint_from_cbor(bytes), DataError);
}
