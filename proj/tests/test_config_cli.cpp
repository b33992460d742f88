#include "doctest.h"
#include "foal/cli.hpp"
#include "foal/trainer.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace foal;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("foal_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("config round-trip and strictness") {
  RunConfig c;
  c.train.hp.lambda = 0.1;
  c.data.source_domain = "14res";
  RunConfig back = run_config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));

  auto j = to_json(c);
  j["train"]["hp"]["lamda"] = 0.3;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  j = to_json(c);
  j["train"]["hp"]["tau"] = "twenty";
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  j = to_json(c);
  j["train"]["batch_size"] = 2.5;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  j = to_json(c);
  j["train"]["selection_split"] = "everything";
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
}

TEST_CASE("overrides by dotted path or unique leaf") {
  RunConfig c;
  RunConfig o = with_overrides(c, {"lambda=0", "train.hp.tau=10", "adversarial=true", "alpha=5", "kind=toy"});
  CHECK(o.train.hp.lambda == 0.0);
  CHECK(o.train.hp.tau == 10.0);
  CHECK(o.train.adversarial);
  CHECK(o.train.hp.alpha == 5);
  CHECK_THROWS_AS(with_overrides(c, {"seed=3"}), ConfigError);
  CHECK(with_overrides(c, {"train.seed=3"}).train.seed == 3);
  CHECK_THROWS_AS(with_overrides(c, {"nosuchkey=1"}), ConfigError);
  CHECK_THROWS_AS(with_overrides(c, {"lambda"}), ConfigError);
  CHECK_THROWS_AS(with_overrides(c, {"lambda=high"}), ConfigError);
  CHECK_THROWS_AS(with_overrides(c, {"alpha=1.5"}), ConfigError);
  CHECK_THROWS_AS(with_overrides(c, {"lambda=-1"}), ConfigError);
}

TEST_CASE("stats exit codes") {
  auto dir = fresh_dir("stats");
  auto file = (dir / "split.txt").string();
  std::ofstream(file) << "a b####[([0], [1], 'POS'), ([1], [0], 'NEU')]\nx y z####[([2], [0], 'NEG')]\n";

  Run ok = cli_run({"stats", file, "--expect", "2,1,1,1"});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("2") != std::string::npos);

  Run wrong = cli_run({"stats", file, "--expect", "2,2,1,1"});
  CHECK(wrong.code == 1);
  CHECK((wrong.out + wrong.err).find("positive") != std::string::npos);

  CHECK(cli_run({"stats", (dir / "missing.txt").string()}).code == 2);
  CHECK(cli_run({"stats", file, "--expect", "1,2"}).code == 2);
  CHECK(cli_run({"frobnicate"}).code == 2);
  CHECK(cli_run({"--help"}).code == 0);

  Run json = cli_run({"stats", file, "--json"});
  CHECK(json.code == 0);
  CHECK(nlohmann::json::parse(json.out)["num_sentences"] == 2);
  CHECK(cli::parse_expected_stats("1266,1692,166,480") == Stats{1266, 1692, 166, 480});
}

TEST_CASE("synth, train, eval and analyze end to end") {
  auto dir = fresh_dir("e2e");
  REQUIRE(cli_run({"synth", "--out", dir.string(), "--n-train", "8", "--n-dev", "4", "--n-test", "6"}).code == 0);
  auto config = (dir / "config.json").string();
  REQUIRE(fs::exists(config));
  REQUIRE(fs::exists(dir / "source_train.txt"));

  auto run_dir = (dir / "run").string();
  Run t = cli_run({"train", "--config", config, "--run-dir", run_dir, "--set", "max_steps=4", "hidden_size=8",
                   "ffn_hidden=6", "lambda=0.3", "tau=20", "t=0.93"});
  REQUIRE(t.code == 0);
  CHECK(fs::exists(fs::path(run_dir) / "best.ckpt"));
  CHECK(fs::exists(fs::path(run_dir) / "last.ckpt"));
  CHECK(fs::exists(fs::path(run_dir) / "metrics.jsonl"));
  RunConfig saved = load_run_config((fs::path(run_dir) / "config.json").string());
  CHECK(saved.train.max_steps == 4);
  CHECK(saved.encoder.hidden_size == 8);

  auto ckpt = (fs::path(run_dir) / "last.ckpt").string();
  Run e = cli_run({"eval", "--checkpoint", ckpt, "--split", "target_test"});
  CHECK(e.code == 0);
  CHECK(e.out.find("f1") != std::string::npos);
  CHECK(fs::exists(fs::path(run_dir) / "eval_target_test.json"));

  auto analysis = (dir / "analysis").string();
  Run a = cli_run({"analyze", "--checkpoint", ckpt, "--out", analysis, "--dump-features",
                   (dir / "features.jsonl").string()});
  CHECK(a.code == 0);
  CHECK(fs::exists(fs::path(analysis) / "discrepancy.json"));
  CHECK(fs::exists(dir / "features.jsonl"));

  Run resumed = cli_run({"train", "--config", config, "--run-dir", (dir / "run2").string(), "--resume", ckpt, "--set",
                         "max_steps=6", "hidden_size=8", "ffn_hidden=6"});
  CHECK(resumed.code == 0);
  Run mismatch = cli_run({"train", "--config", config, "--run-dir", (dir / "run3").string(), "--resume", ckpt});
  CHECK(mismatch.code == 2);
  CHECK(mismatch.err.find("mismatch") != std::string::npos);

  Run adv = cli_run({"train", "--config", config, "--run-dir", (dir / "adv").string(), "--set", "max_steps=6",
                     "hidden_size=8", "ffn_hidden=6", "adversarial=true", "alpha=5"});
  CHECK(adv.code == 0);

  CHECK(cli_run({"eval", "--checkpoint", (dir / "nope.ckpt").string()}).code == 2);
  CHECK(cli_run({"train", "--config", config, "--set", "nosuch=1"}).code == 2);
}
