#include "foal/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace foal {

using nlohmann::json;

void TrainConfig::validate() const {
  hp.validate();
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (contrastive_warmup_steps < 0) throw ConfigError("contrastive_warmup_steps must be >= 0");
  if (adv_weight < 0.0) throw ConfigError("adv_weight must be >= 0");
  if (discriminator_hidden < 1) throw ConfigError("discriminator_hidden must be >= 1");
  static const std::set<std::string> kSplits{"source_dev", "target_dev", "source_train", "none"};
  if (!kSplits.count(selection_split)) throw ConfigError("unknown selection_split '" + selection_split + "'");
}

void RunConfig::validate() const {
  train.validate();
  if (encoder.hidden_size < 1) throw ConfigError("encoder.hidden_size must be >= 1");
  if (encoder.kind != "toy" && encoder.kind != "pretrained") throw ConfigError("unknown encoder kind '" + encoder.kind + "'");
  if (model.width_dim < 1 || model.distance_dim < 1 || model.ffn_hidden < 1) throw ConfigError("model sizes must be >= 1");
  if (model.activation != "tanh" && model.activation != "relu") throw ConfigError("activation must be tanh or relu");
}

json to_json(const RunConfig& c) {
  const Hyperparams& hp = c.train.hp;
  return json{
      {"run_dir", c.run_dir},
      {"data",
       {{"source_domain", c.data.source_domain},
        {"source_train", c.data.source_train},
        {"source_dev", c.data.source_dev},
        {"source_test", c.data.source_test},
        {"target_domain", c.data.target_domain},
        {"target_train", c.data.target_train},
        {"target_dev", c.data.target_dev},
        {"target_test", c.data.target_test}}},
      {"encoder",
       {{"kind", c.encoder.kind},
        {"hidden_size", c.encoder.hidden_size},
        {"pretrained_name", c.encoder.pretrained_name},
        {"seed", c.encoder.seed},
        {"buckets", c.encoder.buckets},
        {"lowercase", c.encoder.lowercase}}},
      {"model",
       {{"width_dim", c.model.width_dim},
        {"distance_dim", c.model.distance_dim},
        {"ffn_hidden", c.model.ffn_hidden},
        {"activation", c.model.activation},
        {"inject_gold_pairs", c.model.inject_gold_pairs},
        {"seed", c.model.seed}}},
      {"train",
       {{"hp",
         {{"tau", hp.tau},
          {"t", hp.t},
          {"lambda", hp.lambda},
          {"z", hp.z},
          {"alpha", hp.alpha},
          {"max_width", hp.max_width},
          {"distance_buckets", hp.distance_buckets},
          {"encoder_lr", hp.encoder_lr},
          {"classifier_lr", hp.classifier_lr},
          {"mean_reduce", hp.mean_reduce}}},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"max_steps", c.train.max_steps},
        {"seed", c.train.seed},
        {"weight_decay", c.train.weight_decay},
        {"selection_split", c.train.selection_split},
        {"contrastive_warmup_steps", c.train.contrastive_warmup_steps},
        {"adversarial", c.train.adversarial},
        {"adv_weight", c.train.adv_weight},
        {"discriminator_hidden", c.train.discriminator_hidden}}},
  };
}

namespace {

// Reads the keys of one object, rejecting anything it was not asked about.
class StrictObject {
 public:
  StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected boolean");
      } else if constexpr (std::is_arithmetic_v<T>) {
        if (!it->is_number()) throw ConfigError("expected number");
        if constexpr (std::is_integral_v<T>) {
          if (!it->is_number_integer()) throw ConfigError("expected integer");
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("expected string");
      }
      out = it->get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
  }

  StrictObject child(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = j_.find(key);
    return StrictObject(it == j_.end() ? kEmpty : *it, where() + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown configuration key " + where() + "." + it.key());
    }
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  StrictObject root(j, "");
  root.get("run_dir", c.run_dir);
  {
    auto d = root.child("data");
    d.get("source_domain", c.data.source_domain);
    d.get("source_train", c.data.source_train);
    d.get("source_dev", c.data.source_dev);
    d.get("source_test", c.data.source_test);
    d.get("target_domain", c.data.target_domain);
    d.get("target_train", c.data.target_train);
    d.get("target_dev", c.data.target_dev);
    d.get("target_test", c.data.target_test);
    d.finish();
  }
  {
    auto e = root.child("encoder");
    e.get("kind", c.encoder.kind);
    e.get("hidden_size", c.encoder.hidden_size);
    e.get("pretrained_name", c.encoder.pretrained_name);
    e.get("seed", c.encoder.seed);
    e.get("buckets", c.encoder.buckets);
    e.get("lowercase", c.encoder.lowercase);
    e.finish();
  }
  {
    auto m = root.child("model");
    m.get("width_dim", c.model.width_dim);
    m.get("distance_dim", c.model.distance_dim);
    m.get("ffn_hidden", c.model.ffn_hidden);
    m.get("activation", c.model.activation);
    m.get("inject_gold_pairs", c.model.inject_gold_pairs);
    m.get("seed", c.model.seed);
    m.finish();
  }
  {
    auto t = root.child("train");
    {
      auto h = t.child("hp");
      Hyperparams& hp = c.train.hp;
      h.get("tau", hp.tau);
      h.get("t", hp.t);
      h.get("lambda", hp.lambda);
      h.get("z", hp.z);
      h.get("alpha", hp.alpha);
      h.get("max_width", hp.max_width);
      h.get("distance_buckets", hp.distance_buckets);
      h.get("encoder_lr", hp.encoder_lr);
      h.get("classifier_lr", hp.classifier_lr);
      h.get("mean_reduce", hp.mean_reduce);
      h.finish();
    }
    t.get("batch_size", c.train.batch_size);
    t.get("epochs", c.train.epochs);
    t.get("max_steps", c.train.max_steps);
    t.get("seed", c.train.seed);
    t.get("weight_decay", c.train.weight_decay);
    t.get("selection_split", c.train.selection_split);
    t.get("contrastive_warmup_steps", c.train.contrastive_warmup_steps);
    t.get("adversarial", c.train.adversarial);
    t.get("adv_weight", c.train.adv_weight);
    t.get("discriminator_hidden", c.train.discriminator_hidden);
    t.finish();
  }
  root.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const std::string& path, const RunConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write config '" + path + "'");
  out << to_json(c).dump(2) << '\n';
}

namespace {

void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      collect_leaves(*it, path, out);
    } else {
      out.push_back(path);
    }
  }
}

std::string leaf_name(const std::string& path) {
  auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

}  // namespace

void apply_override(json& doc, const std::string& assignment) {
  auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  std::string key = assignment.substr(0, eq);
  std::string raw = assignment.substr(eq + 1);

  std::vector<std::string> leaves;
  collect_leaves(doc, "", leaves);
  std::string path;
  if (key.find('.') != std::string::npos) {
    if (std::find(leaves.begin(), leaves.end(), key) == leaves.end()) throw ConfigError("unknown configuration key '" + key + "'");
    path = key;
  } else {
    std::vector<std::string> hits;
    for (const auto& l : leaves)
      if (leaf_name(l) == key) hits.push_back(l);
    if (hits.empty()) throw ConfigError("unknown configuration key '" + key + "'");
    if (hits.size() > 1) {
      std::string all;
      for (const auto& h : hits) all += (all.empty() ? "" : ", ") + h;
      throw ConfigError("ambiguous key '" + key + "' (matches " + all + ")");
    }
    path = hits.front();
  }

  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  json::json_pointer ptr("/" + [&] {
    std::string p = path;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
  }());
  const json& current = doc.at(ptr);
  if (current.is_string() && !value.is_string()) value = raw;
  bool compatible = (current.is_number() && value.is_number()) || (current.type() == value.type());
  if (!compatible) throw ConfigError("override '" + assignment + "' has the wrong type for " + path);
  if (current.is_number_integer() && !value.is_number_integer()) {
    throw ConfigError("override '" + assignment + "': " + path + " expects an integer");
  }
  doc[ptr] = value;
}

RunConfig with_overrides(const RunConfig& base, const std::vector<std::string>& assignments) {
  json doc = to_json(base);
  for (const auto& a : assignments) apply_override(doc, a);
  return run_config_from_json(doc);
}

}  // namespace foal
