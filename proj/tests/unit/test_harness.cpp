#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "amrkit/harness.hpp"
#include "amrkit/io.hpp"

using namespace amrkit;
namespace fs = std::filesystem;

namespace {

// Tiny run: a few samples, one epoch, short attacks.
RunConfig tiny(const fs::path& out) {
  RunConfig c = parse_config(
      "[data]\nsamples_per_class = 6\n"
      "[train]\nepochs = 1\nbatch_size = 4\nattack_steps = 2\n"
      "[attack pgd20]\nsteps = 2\n"
      "[curve]\neps = 0,8\n"
      "[experiment]\namr_counts = 1,2\nlambdas = 0.5,1\n");
  c.out = out.string();
  return c;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("amrkit_" + tag + "_" + std::to_string(getpid()))) {
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("train, eval, curve and report-weights produce their files") {
  TempDir tmp("cmds");
  RunConfig c = tiny(tmp.path);
  c.model.num_amr = 1;
  c.train.mode = TrainMode::Amr;
  harness::cmd_train(c, false);
  for (const char* f : {"config.ini", "train_log.csv", "checkpoint/model.json", "checkpoint/model.bin"})
    CHECK(fs::exists(tmp.path / f));
  CHECK(parse_config(io::read_file(tmp.path / "config.ini")) == c);
  CHECK(lines(io::read_file(tmp.path / "train_log.csv")) == 2);

  harness::cmd_eval(c, tmp.path / "checkpoint", std::nullopt, false);
  const auto reports = nlohmann::json::parse(io::read_file(tmp.path / "reports.json"));
  REQUIRE(reports.is_array());
  CHECK(reports.size() == 1);
  CHECK(lines(io::read_file(tmp.path / "reports.csv")) == 2);

  // self-baseline: RI = 0
  RunConfig again = c;
  again.out = (tmp.path / "ri").string();
  harness::cmd_eval(again, tmp.path / "checkpoint", tmp.path / "reports.json", false);
  const auto ri = nlohmann::json::parse(io::read_file(tmp.path / "ri" / "reports.json"));
  CHECK(report_from_json(ri[0]).ri.value() == 0.0);

  harness::cmd_curve(c, tmp.path / "checkpoint", false);
  CHECK(lines(io::read_file(tmp.path / "curve.csv")) == 3);

  harness::cmd_report_weights(c, tmp.path / "checkpoint", false);
  CHECK(io::read_file(tmp.path / "amr_weights.csv").rfind("amr,block,mean_W_R,mean_W_s\n1,3,", 0) == 0);
  CHECK(lines(io::read_file(tmp.path / "amr_channels.csv")) == 17);
}

TEST_CASE("existing outputs are refused without force") {
  TempDir tmp("force");
  const RunConfig c = tiny(tmp.path);
  harness::cmd_train(c, false);
  CHECK_THROWS_WITH_AS(harness::cmd_train(c, false), doctest::Contains("--force"), std::invalid_argument);
  CHECK_NOTHROW(harness::cmd_train(c, true));
}

TEST_CASE("diagnostics: missing baseline, missing checkpoint, S=0 weight report, amr without AMR") {
  TempDir tmp("diag");
  RunConfig c = tiny(tmp.path);
  harness::cmd_train(c, false);
  CHECK_THROWS_WITH_AS(harness::cmd_eval(c, tmp.path / "checkpoint", tmp.path / "nope.json", true),
                       doctest::Contains("baseline report not found"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::cmd_eval(c, tmp.path / "missing", std::nullopt, true),
                       doctest::Contains("no checkpoint"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(harness::cmd_report_weights(c, tmp.path / "checkpoint", true),
                       doctest::Contains("S = 0"), std::invalid_argument);
  c.train.mode = TrainMode::Amr;
  CHECK_THROWS_AS(harness::cmd_train(c, true), std::invalid_argument);
  CHECK_THROWS_AS(harness::cmd_experiment(c, "bogus", true), std::invalid_argument);
}

TEST_CASE("zero-epoch checkpoint equals the initialization") {
  TempDir tmp("init");
  RunConfig c = tiny(tmp.path);
  c.train.config.epochs = 0;
  harness::cmd_train(c, false);
  const auto data = harness::load_data(c);
  CHECK(load_checkpoint(tmp.path / "checkpoint") == FusionModel(c.model_spec(data.train, 0)));
}

TEST_CASE("recipes: row layout") {
  const RunConfig c = tiny("x");
  CHECK(harness::recipe_rows(c, "defense-comparison").size() == 5);
  const auto count = harness::recipe_rows(c, "amr-count-ablation");
  REQUIRE(count.size() == 4);
  CHECK(count[1].mode == TrainMode::Adversarial);
  CHECK(count[3].num_amr == 2);
  const auto lam = harness::recipe_rows(c, "lambda-sweep");
  REQUIRE(lam.size() == 3);
  CHECK(lam[2].lambda == 1.0);
}

TEST_CASE("experiment: five defense rows, None RI zero, reruns byte-identical") {
  TempDir a("expa"), b("expb");
  harness::cmd_experiment(tiny(a.path), "defense-comparison", false);
  harness::cmd_experiment(tiny(b.path), "defense-comparison", false);
  const std::string csv = io::read_file(a.path / "defense-comparison.csv");
  CHECK(lines(csv) == 6);
  const auto j = nlohmann::json::parse(io::read_file(a.path / "defense-comparison.json"));
  REQUIRE(j.size() == 5);
  CHECK(j[0]["model"] == "None");
  CHECK(report_from_json(j[0]).ri.value() == 0.0);
  CHECK(csv == io::read_file(b.path / "defense-comparison.csv"));
  CHECK(io::read_file(a.path / "defense-comparison.json") == io::read_file(b.path / "defense-comparison.json"));
}

TEST_CASE("generate-data writes a loadable dataset usable through [data] path") {
  TempDir tmp("gen");
  RunConfig c = tiny(tmp.path);
  harness::cmd_generate_data(c, false);
  const Dataset d = load_dataset(tmp.path / "dataset");
  CHECK(d.size() == 24);
  RunConfig from_disk = c;
  from_disk.data.path = (tmp.path / "dataset").string();
  const auto split_disk = harness::load_data(from_disk);
  const auto split_synth = harness::load_data(c);
  REQUIRE(split_disk.train.size() == split_synth.train.size());
  CHECK(split_disk.train.samples[0].dense == split_synth.train.samples[0].dense);
}
