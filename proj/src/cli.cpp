#include "foal/cli.hpp"

#include "foal/eval.hpp"
#include "foal/trainer.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace foal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

Stats parse_expected_stats(const std::string& text) {
  std::vector<std::size_t> v;
  std::stringstream in(text);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    try {
      std::size_t pos = 0;
      long long x = std::stoll(cell, &pos);
      if (pos != cell.size() || x < 0) throw std::invalid_argument(cell);
      v.push_back(static_cast<std::size_t>(x));
    } catch (const std::exception&) {
      throw ConfigError("--expect wants four non-negative integers S,POS,NEU,NEG; got '" + text + "'");
    }
  }
  if (v.size() != 4) throw ConfigError("--expect wants four comma-separated counts; got '" + text + "'");
  return Stats{v[0], v[1], v[2], v[3]};
}

TransferPair load_transfer_pair(const DataConfig& d) {
  auto load = [](const std::string& path, const std::string& domain) {
    return path.empty() ? std::vector<Sentence>{} : load_split(path, domain);
  };
  DomainSplits src{d.source_domain, load(d.source_train, d.source_domain), load(d.source_dev, d.source_domain),
                   load(d.source_test, d.source_domain)};
  DomainSplits tgt{d.target_domain, load(d.target_train, d.target_domain), load(d.target_dev, d.target_domain),
                   load(d.target_test, d.target_domain)};
  return build_transfer_pair(src, tgt);
}

namespace {

json stats_json(const Stats& s) {
  return {{"num_sentences", s.num_sentences},
          {"num_positive", s.num_positive},
          {"num_neutral", s.num_neutral},
          {"num_negative", s.num_negative}};
}

int cmd_stats(const std::string& path, const std::string& domain, const std::string& expect, bool as_json,
              std::ostream& out, std::ostream& err) {
  if (!fs::exists(path)) {
    err << "error: dataset file '" << path << "' does not exist\n";
    return kUsageError;
  }
  Stats st = dataset_statistics(load_split(path, domain));
  if (as_json) {
    out << stats_json(st).dump(2) << '\n';
  } else {
    out << "num_sentences " << st.num_sentences << "\nnum_positive " << st.num_positive << "\nnum_neutral "
        << st.num_neutral << "\nnum_negative " << st.num_negative << '\n';
  }
  if (!expect.empty()) {
    Stats want = parse_expected_stats(expect);
    if (!(want == st)) {
      err << "statistics mismatch for " << path << ":\n";
      auto diff = [&](const char* k, std::size_t got, std::size_t exp) {
        if (got != exp) err << "  " << k << ": expected " << exp << ", got " << got << '\n';
      };
      diff("num_sentences", st.num_sentences, want.num_sentences);
      diff("num_positive", st.num_positive, want.num_positive);
      diff("num_neutral", st.num_neutral, want.num_neutral);
      diff("num_negative", st.num_negative, want.num_negative);
      return kExpectationFailed;
    }
    out << "matches expected statistics\n";
  }
  return kOk;
}

int cmd_synth(const std::string& dir, std::uint64_t seed, int n_train, int n_dev, int n_test, double shift,
              std::ostream& out) {
  SyntheticSpec spec;
  spec.n_sentences = n_train + n_dev + n_test;
  spec.domain_shift = shift;
  SyntheticCorpus c = generate_synthetic_corpus(seed, spec);
  fs::create_directories(dir);
  auto slice = [](const std::vector<Sentence>& v, int from, int count) {
    return std::vector<Sentence>(v.begin() + from, v.begin() + from + count);
  };
  RunConfig cfg;
  auto write = [&](const std::vector<Sentence>& all, const std::string& prefix, std::string& train, std::string& dev,
                   std::string& test) {
    train = fs::absolute(fs::path(dir) / (prefix + "_train.txt")).string();
    dev = fs::absolute(fs::path(dir) / (prefix + "_dev.txt")).string();
    test = fs::absolute(fs::path(dir) / (prefix + "_test.txt")).string();
    save_split(train, slice(all, 0, n_train));
    save_split(dev, slice(all, n_train, n_dev));
    save_split(test, slice(all, n_train + n_dev, n_test));
  };
  cfg.data.source_domain = spec.source_domain;
  cfg.data.target_domain = spec.target_domain;
  write(c.source, "source", cfg.data.source_train, cfg.data.source_dev, cfg.data.source_test);
  write(c.target, "target", cfg.data.target_train, cfg.data.target_dev, cfg.data.target_test);
  if (n_dev == 0) {
    cfg.data.source_dev.clear();
    cfg.data.target_dev.clear();
    cfg.train.selection_split = "source_train";
  }
  cfg.run_dir = fs::absolute(fs::path(dir) / "run").string();
  save_run_config((fs::path(dir) / "config.json").string(), cfg);
  out << "wrote synthetic corpus (" << n_train << "/" << n_dev << "/" << n_test << " per domain) and config.json to "
      << dir << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, const std::vector<std::string>& sets, const std::string& run_dir_flag,
              const std::string& resume, std::ostream& out) {
  RunConfig cfg = with_overrides(load_run_config(config_path), sets);
  if (!run_dir_flag.empty()) cfg.run_dir = run_dir_flag;
  TransferPair pair = load_transfer_pair(cfg.data);

  fs::path run_dir(cfg.run_dir);
  fs::create_directories(run_dir);
  save_run_config((run_dir / "config.json").string(), cfg);
  std::ofstream metrics(run_dir / "metrics.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  if (!metrics) throw std::ios_base::failure("cannot write metrics log in " + run_dir.string());

  TrainOptions opts;
  opts.metrics_log = &metrics;
  opts.progress = &out;
  opts.checkpoint_dir = run_dir.string();
  if (!resume.empty()) {
    TrainState state = load_checkpoint(resume);
    auto schedule_free = [](const RunConfig& c) {
      auto t = to_json(c).at("train");
      t.erase("max_steps");
      t.erase("epochs");
      return t;
    };
    if (schedule_free(state.config) != schedule_free(cfg) ||
        to_json(state.config).at("model") != to_json(cfg).at("model") ||
        to_json(state.config).at("encoder") != to_json(cfg).at("encoder")) {
      throw ConfigError(
          "checkpoint/config mismatch: resume with the configuration the checkpoint was trained with (only max_steps "
          "and epochs may change)");
    }
    state.config = cfg;
    opts.resume = std::move(state);
  }
  if (cfg.train.adversarial && cfg.train.hp.lambda > 0.0) {
    out << "note: adversarial baseline ignores the contrastive weight lambda\n";
  }
  TrainResult r = train(pair, cfg, std::move(opts));
  out << "pair " << pair.id << ": " << r.last.step << " steps";
  if (cfg.train.selection_split != "none") out << ", best " << cfg.train.selection_split << " F1 " << r.best.selection_f1;
  out << "\ncheckpoint " << (run_dir / "best.ckpt").string() << '\n';
  return kOk;
}

std::vector<Sentence> resolve_split(const RunConfig& cfg, const std::string& split) {
  const DataConfig& d = cfg.data;
  auto load = [&](const std::string& path, const std::string& domain) {
    if (path.empty()) throw ConfigError("split '" + split + "' has no file in the checkpoint configuration");
    return load_split(path, domain);
  };
  if (split == "source_train") return load(d.source_train, d.source_domain);
  if (split == "source_dev") return load(d.source_dev, d.source_domain);
  if (split == "source_test") return load(d.source_test, d.source_domain);
  if (split == "target_train") return load(d.target_train, d.target_domain);
  if (split == "target_dev") return load(d.target_dev, d.target_domain);
  if (split == "target_test") return load(d.target_test, d.target_domain);
  if (fs::exists(split)) return load_split(split, "");
  throw ConfigError("unknown split '" + split + "'");
}

int cmd_eval(const std::string& checkpoint, const std::string& split, const std::string& out_path, std::ostream& out) {
  TrainState state = load_checkpoint(checkpoint);
  std::vector<Sentence> data = resolve_split(state.config, split);
  EvalReport r = evaluate(state.model, data);
  json j = to_json(r);
  j["split"] = split;
  j["checkpoint"] = checkpoint;
  std::string path = out_path.empty() ? (fs::path(checkpoint).parent_path() / ("eval_" + fs::path(split).stem().string() + ".json")).string() : out_path;
  std::ofstream f(path);
  if (!f) throw std::ios_base::failure("cannot write report '" + path + "'");
  f << j.dump(2) << '\n';
  out << "precision " << r.precision << "\nrecall " << r.recall << "\nf1 " << r.f1 << "\n(" << r.num_correct << " correct / "
      << r.num_pred << " predicted / " << r.num_gold << " gold)\nreport " << path << '\n';
  return kOk;
}

int cmd_analyze(const std::string& checkpoint, const std::string& source, const std::string& target,
                const std::string& out_dir_flag, const std::string& dump, std::ostream& out) {
  TrainState state = load_checkpoint(checkpoint);
  std::vector<Sentence> src = resolve_split(state.config, source);
  std::vector<Sentence> tgt = resolve_split(state.config, target);
  DiscrepancyReport r = discrepancy_report(state.model, src, tgt);
  fs::path dir = out_dir_flag.empty() ? fs::path(checkpoint).parent_path() : fs::path(out_dir_flag);
  if (!dir.empty()) fs::create_directories(dir);
  json j = to_json(r);
  j["source"] = source;
  j["target"] = target;
  {
    std::ofstream f(dir / "discrepancy.json");
    if (!f) throw std::ios_base::failure("cannot write discrepancy report in " + dir.string());
    f << j.dump(2) << '\n';
  }
  {
    std::ofstream f(dir / "discrepancy.txt");
    print_table(f, r);
  }
  if (!dump.empty()) {
    std::ofstream f(dump);
    if (!f) throw std::ios_base::failure("cannot write feature dump '" + dump + "'");
    dump_features(f, extract_features(state.model, src), "source");
    dump_features(f, extract_features(state.model, tgt), "target");
  }
  print_table(out, r);
  for (const auto& n : r.notes) out << "note: " << n << '\n';
  out << "report " << (dir / "discrepancy.json").string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cross-domain aspect sentiment triplet extraction with fine-grained contrastive learning", "foal"};
  app.require_subcommand(1);

  std::string path, domain, expect;
  bool as_json = false;
  auto* stats = app.add_subcommand("stats", "Print triplet statistics of a dataset split");
  stats->add_option("path", path, "Dataset file")->required();
  stats->add_option("--domain", domain, "Domain tag");
  stats->add_option("--expect", expect, "Expected S,POS,NEU,NEG; exit 1 on mismatch");
  stats->add_flag("--json", as_json, "Emit JSON");

  std::string out_dir;
  std::uint64_t seed = 0;
  int n_train = 20, n_dev = 10, n_test = 20;
  double shift = 0.5;
  auto* synth = app.add_subcommand("synth", "Write a synthetic two-domain corpus and a run config");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--seed", seed, "Generator seed");
  synth->add_option("--n-train", n_train, "Training sentences per domain")->check(CLI::NonNegativeNumber);
  synth->add_option("--n-dev", n_dev, "Development sentences per domain")->check(CLI::NonNegativeNumber);
  synth->add_option("--n-test", n_test, "Test sentences per domain")->check(CLI::NonNegativeNumber);
  synth->add_option("--domain-shift", shift, "Probability of domain-specific filler words")->check(CLI::Range(0.0, 1.0));

  std::string config, run_dir, resume;
  std::vector<std::string> sets;
  auto* trn = app.add_subcommand("train", "Train a model");
  trn->add_option("--config", config, "Run configuration (JSON)")->required();
  trn->add_option("--set", sets, "Overrides, key=value (dotted path or unique leaf name)")->expected(1, -1);
  trn->add_option("--run-dir", run_dir, "Output directory (overrides run_dir)");
  trn->add_option("--resume", resume, "Checkpoint to resume from");

  std::string checkpoint, split = "target_test", report;
  auto* ev = app.add_subcommand("eval", "Exact-match F1 of a checkpoint on a split");
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--split", split, "source_{train,dev,test}, target_{dev,test}, or a dataset path");
  ev->add_option("--out", report, "Report path (JSON)");

  std::string source = "source_test", target = "target_test", analysis_dir, dump;
  auto* an = app.add_subcommand("analyze", "MMD discrepancy report of a checkpoint");
  an->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  an->add_option("--source", source, "Labeled source split name or path");
  an->add_option("--target", target, "Labeled target split name or path");
  an->add_option("--out", analysis_dir, "Output directory");
  an->add_option("--dump-features", dump, "Write every feature as JSON lines");

  std::vector<std::string> argv_store{"foal"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (stats->parsed()) return cmd_stats(path, domain, expect, as_json, out, err);
    if (synth->parsed()) return cmd_synth(out_dir, seed, n_train, n_dev, n_test, shift, out);
    if (trn->parsed()) return cmd_train(config, sets, run_dir, resume, out);
    if (ev->parsed()) return cmd_eval(checkpoint, split, report, out);
    if (an->parsed()) return cmd_analyze(checkpoint, source, target, analysis_dir, dump, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kUsageError;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const EncoderError& e) {
    err << "encoder error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::ios_base::failure& e) {
    err << "I/O error: " << e.what() << '\n';
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kUsageError;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << '\n';
    return kExpectationFailed;
  }
  return kUsageError;
}

}  // namespace foal::cli
