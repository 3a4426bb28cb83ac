#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_util.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

namespace {

const std::string small =
    " --set data.subjects=3 --set data.concepts=20 --set data.images_per_concept=2"
    " --set data.trials_per_image=2 --set data.channels=4 --set data.time_samples=8"
    " --set data.val_fraction=0.2";

const std::string small_train =
    " --set model.d_common=8 --set train.epochs=3 --set loss.t_c=2 --set train.batch_size=16";

int run(const std::string& args, const std::filesystem::path& log) {
  const std::string cmd = std::string("\"") + SAMGA_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("gen-data, train, eval and analyze succeed end to end") {
  test_util::TempDir dir;
  const auto log = dir.path / "log.txt";
  const auto data = dir.path / "data";
  const auto runp = dir.path / "run";
  REQUIRE(run("gen-data --out " + data.string() + small, log) == 0);
  REQUIRE(run("train --quiet --data " + data.string() + " --out " + runp.string() + " --split-mode loso --subject 0" +
                  small_train,
              log) == 0);
  CHECK(std::filesystem::exists(runp / "checkpoint.bin"));
  CHECK(std::filesystem::exists(runp / "report.json"));
  CHECK(run("eval --run " + runp.string() + " --data " + data.string() + " --k 1,5,10", log) == 0);
  CHECK(run("analyze --run " + runp.string() + " --data " + data.string() + " --report routing", log) == 0);
  CHECK(std::filesystem::exists(runp / "routing_deviation.csv"));
  CHECK(run("analyze --run " + runp.string() + " --data " + data.string() + " --report similarity", log) == 0);
  CHECK(std::filesystem::exists(runp / "category_sim.csv"));
  CHECK(run("analyze --run " + runp.string() + " --data " + data.string() + " --report layerwise", log) == 5);
}

TEST_CASE("gen-data is deterministic") {
  test_util::TempDir dir;
  const auto log = dir.path / "log.txt";
  REQUIRE(run("gen-data --out " + (dir.path / "a").string() + small, log) == 0);
  REQUIRE(run("gen-data --out " + (dir.path / "b").string() + small, log) == 0);
  for (const auto& e : std::filesystem::directory_iterator(dir.path / "a")) {
    CAPTURE(e.path().filename().string());
    CHECK(test_util::slurp(e.path()) == test_util::slurp(dir.path / "b" / e.path().filename()));
  }
}

TEST_CASE("configuration errors exit with code 2") {
  test_util::TempDir dir;
  const auto log = dir.path / "log.txt";
  CHECK(run("gen-data --out " + (dir.path / "x").string() + " --set data.layer_ids=[]", log) == 2);
  CHECK(test_util::slurp(log).find("data.layer_ids") != std::string::npos);
  CHECK(run("gen-data --out " + (dir.path / "x").string() + " --set data.no_such_key=1", log) == 2);
  CHECK(run("bogus-command", log) == 2);
  REQUIRE(run("gen-data --out " + (dir.path / "d").string() + small, log) == 0);
  CHECK(run("ablate --data " + (dir.path / "d").string() + " --out " + (dir.path / "ab").string() +
                " --variants fancy --seeds 0",
            log) == 2);
  CHECK(test_util::slurp(log).find("learned") != std::string::npos);
  CHECK(run("train --quiet --data " + (dir.path / "d").string() + " --out " + (dir.path / "r").string() +
                " --split-mode intra --subject 7",
            log) == 2);
}

TEST_CASE("missing inputs exit with codes 3 and 5") {
  test_util::TempDir dir;
  const auto log = dir.path / "log.txt";
  CHECK(run("train --quiet --data " + (dir.path / "nothing").string() + " --out " + (dir.path / "r").string(), log) ==
        3);
  REQUIRE(run("gen-data --out " + (dir.path / "d").string() + small, log) == 0);
  CHECK(run("eval --run " + (dir.path / "no_run").string() + " --data " + (dir.path / "d").string(), log) == 5);
}

TEST_CASE("gradcheck exits 0 when clean and 1 on a corrupted block") {
  test_util::TempDir dir;
  const auto log = dir.path / "log.txt";
  CHECK(run("gradcheck --objective both", log) == 0);
  CHECK(run("gradcheck --corrupt-block router.b", log) == 1);
  CHECK(test_util::slurp(log).find("router.b") != std::string::npos);
  CHECK(run("--json gradcheck --freeze-shared", log) == 0);
  CHECK(test_util::slurp(log).find("SKIPPED") != std::string::npos);
}
