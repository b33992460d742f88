#pragma once

// Run configuration: one JSON document holding data paths, encoder and model
// architecture, hyper-parameters and training settings. Flags on the command
// line are applied as `key=value` overrides on top of the file.

#include "foal/encoder.hpp"
#include "foal/model.hpp"
#include "foal/objectives.hpp"

#include "json.hpp"

#include <string>
#include <vector>

namespace foal {

struct DataConfig {
  std::string source_domain;
  std::string source_train;
  std::string source_dev;
  std::string source_test;
  std::string target_domain;
  std::string target_train;
  std::string target_dev;
  std::string target_test;
};

struct TrainConfig {
  Hyperparams hp;
  int batch_size = 4;
  int epochs = 10;
  long max_steps = -1;  // < 0: epochs * ceil(|source_train| / batch_size)
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  std::string selection_split = "source_dev";  // source_dev | target_dev | source_train | none
  int contrastive_warmup_steps = 0;
  bool adversarial = false;
  double adv_weight = 1.0;
  int discriminator_hidden = 100;

  void validate() const;
};

struct RunConfig {
  std::string run_dir = "runs/default";
  DataConfig data;
  EncoderConfig encoder;
  ModelConfig model;
  TrainConfig train;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Strict: unknown keys and wrong value types raise ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

RunConfig load_run_config(const std::string& path);
void save_run_config(const std::string& path, const RunConfig& c);

/// Applies `key=value` to the document. `key` is a dotted path
/// (`train.hp.lambda`) or a leaf name that is unique in the document
/// (`lambda`). The value is parsed as JSON when possible, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);
RunConfig with_overrides(const RunConfig& base, const std::vector<std::string>& assignments);

}  // namespace foal
