#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(NEGPREC_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("exit codes") {
  const auto dir = testing::scratch_dir("cli");
  CHECK(run("--help") == 0);
  CHECK(run("") == 1);
  CHECK(run("train --arch simple") == 1);
  CHECK(run("stats --corpus " + (dir / "absent").string()) == 2);
  CHECK(run("stats --corpus " + testing::fixture("corpus").string()) == 0);
  CHECK(run("train --arch nonsense --corpus " + testing::fixture("corpus").string() + " --out x.cbor") == 1);

  std::ofstream(dir / "diverge.cfg") << "learning_rate=1e300\nd1=4\nhidden=4\nmax_epochs=2\nvocab_buckets=64\n";
  CHECK(run("train --arch joint --corpus " + testing::fixture("corpus").string() + " --config " +
            (dir / "diverge.cfg").string() + " --out " + (dir / "d.cbor").string()) == 3);
}

TEST_CASE("extract, synth, train, eval and significance from the command line") {
  const auto dir = testing::scratch_dir("cli_pipeline");
  CHECK(run("extract --raw " + testing::fixture("raw").string() + " --violations " +
            testing::fixture("violations.jsonl").string() + " --out " + (dir / "extracted").string()) == 0);
  CHECK(fs::is_regular_file(dir / "extracted" / "train.jsonl"));

  std::ofstream(dir / "gen.cfg") << "articles=3\nvocab=60\ntrain_size=40\nvalidation_size=20\ntest_size=20\n";
  const std::string corpus = (dir / "corpus").string();
  REQUIRE(run("synth --config " + (dir / "gen.cfg").string() + " --out " + corpus + " --seed 2") == 0);

  std::ofstream(dir / "train.cfg") << "d1=8\nhidden=8\nmax_epochs=2\nvocab_buckets=128\nlearning_rate=1e-2\n";
  for (const char* arch : {"joint", "mtl"}) {
    REQUIRE(run(std::string("train --arch ") + arch + " --corpus " + corpus + " --config " +
                (dir / "train.cfg").string() + " --out " + (dir / (std::string(arch) + ".cbor")).string() +
                " --log " + (dir / (std::string(arch) + ".log")).string()) == 0);
    REQUIRE(run("eval --ckpt " + (dir / (std::string(arch) + ".cbor")).string() + " --corpus " + corpus +
                " --out " + (dir / arch).string() + " --predictions " +
                (dir / (std::string(arch) + ".jsonl")).string()) == 0);
  }
  CHECK(fs::is_regular_file(dir / "joint" / "report.csv"));
  CHECK(run("significance --a " + (dir / "joint.jsonl").string() + " --b " + (dir / "mtl.jsonl").string() +
            " --corpus " + corpus + " --class pos") == 0);
  CHECK(run("eval --ckpt " + (dir / "joint.cbor").string() + " --corpus " + corpus + " --articles 2,3") == 0);
}
