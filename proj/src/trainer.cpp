#include "foal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace foal {

using ad::Matrix;
using ad::Var;
using nlohmann::json;

// ---- optimizer ----------------------------------------------------------------

double AdamW::Rates::of(ad::ParamGroup g) const {
  switch (g) {
    case ad::ParamGroup::Encoder: return encoder;
    case ad::ParamGroup::Classifier: return classifier;
    case ad::ParamGroup::Discriminator: return discriminator;
  }
  return classifier;
}

void AdamW::step(const std::vector<ad::Parameter*>& params, const Rates& rates) {
  for (ad::Parameter* p : params) {
    Slot& s = slots_[p->name];
    if (s.m.size() == 0) {
      s.m = Matrix::Zero(p->value.rows(), p->value.cols());
      s.v = Matrix::Zero(p->value.rows(), p->value.cols());
    }
    const double lr = rates.of(p->group);
    s.t += 1;
    p->value *= 1.0 - lr * weight_decay_;
    s.m = beta1_ * s.m + (1.0 - beta1_) * p->grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p->grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
    p->value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  }
}

// ---- pseudo labels -------------------------------------------------------------

PseudoLabel pseudo_label(const Eigen::RowVectorXd& probs) {
  if (probs.size() == 0) throw std::invalid_argument("pseudo_label: empty distribution");
  PseudoLabel out{0, probs(0)};
  for (Eigen::Index c = 1; c < probs.size(); ++c) {
    if (probs(c) > out.confidence) out = {static_cast<int>(c), probs(c)};
  }
  return out;
}

PseudoLabels assign_pseudo_labels(const SentenceForward& f) {
  PseudoLabels out;
  out.phrase_rows = f.phrase_rows();
  for (int row : out.phrase_rows) out.phrase.push_back(pseudo_label(f.span_probs.row(row)));
  for (Eigen::Index i = 0; i < f.pair_probs.rows(); ++i) out.pair.push_back(pseudo_label(f.pair_probs.row(i)));
  return out;
}

std::pair<FeatureBank, FeatureBank> assign_pseudo_labels(Model& model, const Sentence& sentence) {
  ad::Tape tape;
  SentenceForward f = model.forward(tape, sentence);
  PseudoLabels pl = assign_pseudo_labels(f);
  FeatureBank phrase{Granularity::Phrase, {}, {}};
  FeatureBank pair{Granularity::Pair, {}, {}};
  const Matrix& reps = f.span_reps.value();
  for (std::size_t k = 0; k < pl.phrase_rows.size(); ++k) {
    phrase.target.push_back(LabeledFeature::target(reps.row(pl.phrase_rows[k]), pl.phrase[k].label, pl.phrase[k].confidence));
  }
  const Matrix& preps = f.pair_reps.value();
  for (std::size_t k = 0; k < pl.pair.size(); ++k) {
    pair.target.push_back(LabeledFeature::target(preps.row(static_cast<Eigen::Index>(k)), pl.pair[k].label, pl.pair[k].confidence));
  }
  return {std::move(phrase), std::move(pair)};
}

// ---- state ------------------------------------------------------------------------

TrainState::TrainState(const RunConfig& c)
    : config(c),
      model(c.encoder, c.model, c.train.hp),
      optimizer(c.train.weight_decay),
      rng(c.train.seed) {
  config.validate();
  if (c.train.adversarial) {
    discriminator.emplace(c.encoder.hidden_size, c.train.discriminator_hidden, ad::parse_activation(c.model.activation),
                          c.model.seed + 101);
  }
}

std::vector<ad::Parameter*> TrainState::all_parameters() {
  auto out = model.parameters();
  if (discriminator) {
    for (auto* p : discriminator->parameters()) out.push_back(p);
  }
  return out;
}

AdamW::Rates TrainState::rates() const {
  return {config.train.hp.encoder_lr, config.train.hp.classifier_lr, config.train.hp.classifier_lr};
}

json to_json(const StepMetrics& m) {
  return {{"step", m.step},
          {"kind", m.kind},
          {"l_aste", m.l_aste},
          {"l_contra", m.l_contra},
          {"l_domain", m.l_domain},
          {"l_total", m.l_total},
          {"contrastive_terms", m.contrastive_terms},
          {"lr", {{"encoder", m.lr_encoder}, {"classifier", m.lr_classifier}}}};
}

// ---- steps ------------------------------------------------------------------------

Var batch_aste_loss(ad::Tape& tape, Model& model, const Batch& batch, std::vector<SentenceForward>* forwards) {
  Var total = tape.constant(Matrix::Zero(1, 1));
  for (const Sentence* s : batch) {
    if (!s->labeled()) throw TrainingError("source batch contains an unlabeled sentence");
    const auto& gold = s->gold();
    ForwardOptions opts{&gold, model.config().inject_gold_pairs};
    SentenceForward f = model.forward(tape, *s, opts);
    Var loss = aste_loss(f.span_log_probs, gold_span_labels(f.spans, gold), f.pair_log_probs, gold_pair_labels(f.pairs, gold));
    total = ad::add(total, loss);
    if (forwards) forwards->push_back(std::move(f));
  }
  return total;
}

namespace {

std::string describe_batch(const Batch& batch, const char* role) {
  std::ostringstream out;
  for (const Sentence* s : batch) {
    out << "  [" << role << "] ";
    for (int i = 0; i < s->size(); ++i) out << (i ? " " : "") << s->tokens()[i];
    out << '\n';
  }
  return out.str();
}

void require_finite(double v, const char* what, const Batch& source, const Batch& target, long step) {
  if (std::isfinite(v)) return;
  throw TrainingError(std::string("non-finite ") + what + " at step " + std::to_string(step) + "\n" +
                      describe_batch(source, "source") + describe_batch(target, "target"));
}

struct Banks {
  std::vector<Var> source_phrase, source_pair, target_phrase, target_pair;
  std::vector<int> source_phrase_labels, source_pair_labels, target_phrase_labels, target_pair_labels;
  std::vector<double> target_phrase_conf, target_pair_conf;
};

Var stack_or_empty(ad::Tape& tape, const std::vector<Var>& parts) {
  if (parts.empty()) return tape.constant(Matrix(0, 0));
  return ad::concat_rows(parts);
}

}  // namespace

Objective build_objective(ad::Tape& tape, Model& model, const Batch& source_batch, const Batch& target_batch,
                          const Hyperparams& hp, bool use_contrastive) {
  Objective o;
  std::vector<SentenceForward> forwards;
  o.aste = batch_aste_loss(tape, model, source_batch, &forwards);
  o.total = o.aste;
  o.contra = tape.constant(Matrix::Zero(1, 1));
  if (target_batch.empty()) return o;

  Banks b;
  for (std::size_t k = 0; k < source_batch.size(); ++k) {
    const SentenceForward& f = forwards[k];
    const auto& gold = source_batch[k]->gold();
    auto span_labels = gold_span_labels(f.spans, gold);
    auto rows = f.phrase_rows();
    b.source_phrase.push_back(ad::gather_rows(f.span_reps, rows));
    for (int r : rows) b.source_phrase_labels.push_back(span_labels[static_cast<std::size_t>(r)]);
    if (!f.pairs.empty()) {
      b.source_pair.push_back(f.pair_reps);
      auto pl = gold_pair_labels(f.pairs, gold);
      b.source_pair_labels.insert(b.source_pair_labels.end(), pl.begin(), pl.end());
    }
  }
  for (const Sentence* s : target_batch) {
    SentenceForward f = model.forward(tape, *s);
    PseudoLabels pl = assign_pseudo_labels(f);
    b.target_phrase.push_back(ad::gather_rows(f.span_reps, pl.phrase_rows));
    for (const auto& p : pl.phrase) {
      b.target_phrase_labels.push_back(p.label);
      b.target_phrase_conf.push_back(p.confidence);
    }
    if (!f.pairs.empty()) {
      b.target_pair.push_back(f.pair_reps);
      for (const auto& p : pl.pair) {
        b.target_pair_labels.push_back(p.label);
        b.target_pair_conf.push_back(p.confidence);
      }
    }
  }
  Matrix phrase_mask = positive_mask(b.source_phrase_labels, b.target_phrase_labels, b.target_phrase_conf, hp.t);
  Matrix pair_mask = positive_mask(b.source_pair_labels, b.target_pair_labels, b.target_pair_conf, hp.t);
  Var phrase = contrastive_loss(tape, stack_or_empty(tape, b.source_phrase), stack_or_empty(tape, b.target_phrase),
                                phrase_mask, hp.tau, hp.mean_reduce);
  Var pairs = contrastive_loss(tape, stack_or_empty(tape, b.source_pair), stack_or_empty(tape, b.target_pair),
                               pair_mask, hp.tau, hp.mean_reduce);
  o.contra = ad::add(phrase, pairs);
  o.contrastive_terms = static_cast<std::size_t>(2.0 * (phrase_mask.sum() + pair_mask.sum()));
  if (use_contrastive && hp.lambda > 0.0) o.total = ad::add(o.aste, ad::scale(o.contra, hp.lambda));
  return o;
}

StepMetrics train_step(TrainState& state, const Batch& source_batch, const Batch& target_batch) {
  if (state.config.train.adversarial) return at_train_step(state, source_batch, target_batch);
  const Hyperparams& hp = state.config.train.hp;
  if (source_batch.empty()) throw TrainingError("train_step: empty source batch");
  if (target_batch.empty() && hp.lambda > 0.0) throw TrainingError("train_step: empty target batch with lambda > 0");

  Model& model = state.model;
  model.zero_grad();
  ad::Tape tape;
  Objective o = build_objective(tape, model, source_batch, target_batch, hp,
                                state.step >= state.config.train.contrastive_warmup_steps);
  StepMetrics m;
  m.step = state.step;
  m.l_aste = o.aste.scalar();
  m.l_contra = o.contra.scalar();
  m.contrastive_terms = o.contrastive_terms;
  m.l_total = o.total.scalar();
  require_finite(m.l_total, "loss", source_batch, target_batch, state.step);
  tape.backward(o.total);
  state.optimizer.step(model.parameters(), state.rates());
  m.lr_encoder = hp.encoder_lr;
  m.lr_classifier = hp.classifier_lr;
  ++state.step;
  return m;
}

// ---- checkpoints ------------------------------------------------------------------

namespace {

json encode_matrix(const Matrix& m) {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(m.size()) * sizeof(double));
  if (!bytes.empty()) std::memcpy(bytes.data(), m.data(), bytes.size());
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", json::binary(std::move(bytes))}};
}

Matrix decode_matrix(const json& j) {
  Matrix m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  const auto& bytes = j.at("data").get_binary();
  if (bytes.size() != static_cast<std::size_t>(m.size()) * sizeof(double)) throw ConfigError("corrupt matrix in checkpoint");
  if (!bytes.empty()) std::memcpy(m.data(), bytes.data(), bytes.size());
  return m;
}

constexpr const char* kCheckpointFormat = "foal-checkpoint-1";

}  // namespace

json checkpoint_json(const TrainState& state) {
  TrainState& s = const_cast<TrainState&>(state);  // parameters() is non-const; nothing is modified
  json params = json::object();
  for (auto* p : s.all_parameters()) params[p->name] = encode_matrix(p->value);
  json slots = json::object();
  for (const auto& [name, slot] : state.optimizer.slots()) {
    slots[name] = {{"t", slot.t}, {"m", encode_matrix(slot.m)}, {"v", encode_matrix(slot.v)}};
  }
  std::ostringstream rng;
  rng << state.rng;
  return {{"format", kCheckpointFormat},
          {"config", to_json(state.config)},
          {"step", state.step},
          {"generator_steps", state.generator_steps},
          {"discriminator_steps", state.discriminator_steps},
          {"rng", rng.str()},
          {"selection_f1", state.selection_f1},
          {"loader",
           {{"source_order", state.loader.source_order},
            {"source_cursor", state.loader.source_cursor},
            {"target_order", state.loader.target_order},
            {"target_cursor", state.loader.target_cursor},
            {"epoch", state.loader.epoch}}},
          {"params", params},
          {"optimizer", slots}};
}

TrainState restore_checkpoint(const json& doc) {
  if (doc.value("format", "") != kCheckpointFormat) throw ConfigError("not a checkpoint (format tag missing)");
  TrainState state(run_config_from_json(doc.at("config")));
  const json& params = doc.at("params");
  for (auto* p : state.all_parameters()) {
    if (!params.contains(p->name)) throw ConfigError("checkpoint/config mismatch: missing parameter " + p->name);
    Matrix v = decode_matrix(params.at(p->name));
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw ConfigError("checkpoint/config mismatch: shape of " + p->name);
    }
    p->value = std::move(v);
    p->zero_grad();
  }
  for (const auto& [name, slot] : doc.at("optimizer").items()) {
    AdamW::Slot s;
    s.t = slot.at("t").get<long>();
    s.m = decode_matrix(slot.at("m"));
    s.v = decode_matrix(slot.at("v"));
    state.optimizer.slots()[name] = std::move(s);
  }
  state.step = doc.at("step").get<long>();
  state.generator_steps = doc.at("generator_steps").get<long>();
  state.discriminator_steps = doc.at("discriminator_steps").get<long>();
  state.selection_f1 = doc.at("selection_f1").get<double>();
  std::istringstream rng(doc.at("rng").get<std::string>());
  rng >> state.rng;
  const json& l = doc.at("loader");
  state.loader.source_order = l.at("source_order").get<std::vector<int>>();
  state.loader.source_cursor = l.at("source_cursor").get<std::size_t>();
  state.loader.target_order = l.at("target_order").get<std::vector<int>>();
  state.loader.target_cursor = l.at("target_cursor").get<std::size_t>();
  state.loader.epoch = l.at("epoch").get<int>();
  return state;
}

void save_checkpoint(const std::string& path, const TrainState& state) {
  std::vector<std::uint8_t> bytes = json::to_cbor(checkpoint_json(state));
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write checkpoint '" + tmp + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::ios_base::failure("write failed for '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open checkpoint '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json doc = json::from_cbor(bytes, true, false);
  if (doc.is_discarded()) throw ConfigError("checkpoint '" + path + "' is corrupt");
  return restore_checkpoint(doc);
}

// ---- loop -----------------------------------------------------------------------

long planned_steps(const TrainConfig& cfg, std::size_t source_sentences) {
  if (cfg.max_steps >= 0) return cfg.max_steps;
  long per_epoch = static_cast<long>((source_sentences + cfg.batch_size - 1) / cfg.batch_size);
  return per_epoch * cfg.epochs;
}

namespace {

std::vector<int> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  std::shuffle(v.begin(), v.end(), rng);
  return v;
}

const std::vector<Sentence>* selection_split(const TransferPair& pair, const std::string& name) {
  if (name == "source_dev") return &pair.source_dev;
  if (name == "target_dev") return &pair.target_dev;
  if (name == "source_train") return &pair.source_train;
  return nullptr;
}

}  // namespace

TrainResult train(const TransferPair& pair, const RunConfig& config, TrainOptions opts) {
  config.validate();
  const TrainConfig& tc = config.train;
  if (pair.source_train.empty()) throw ConfigError("source training split is empty");
  if (pair.target_train.empty() && (tc.hp.lambda > 0.0 || tc.adversarial)) {
    throw ConfigError("target training split is empty but the objective needs target batches");
  }
  const std::vector<Sentence>* select = selection_split(pair, tc.selection_split);
  if (select != nullptr && select->empty()) {
    throw ConfigError("selection split '" + tc.selection_split + "' is empty");
  }

  TrainState state = opts.resume ? std::move(*opts.resume) : TrainState(config);
  if (!opts.resume) {
    state.loader.source_order = shuffled(pair.source_train.size(), state.rng);
    state.loader.target_order = shuffled(pair.target_train.size(), state.rng);
  }
  if (state.loader.source_order.size() != pair.source_train.size() ||
      state.loader.target_order.size() != pair.target_train.size()) {
    throw ConfigError("resumed checkpoint does not match the dataset sizes");
  }

  const long total = planned_steps(tc, pair.source_train.size());
  std::optional<std::filesystem::path> dir;
  if (!opts.checkpoint_dir.empty()) {
    dir = opts.checkpoint_dir;
    std::filesystem::create_directories(*dir);
  }

  TrainResult result{state, state, {}};
  bool have_best = false;

  auto end_of_epoch = [&]() {
    if (select != nullptr) {
      double f1 = evaluate(state.model, *select).f1;
      result.selection_history.push_back(f1);
      if (opts.progress) *opts.progress << "epoch " << state.loader.epoch << " step " << state.step << " selection F1 " << f1 << '\n';
      if (!have_best || f1 > state.selection_f1) {
        state.selection_f1 = f1;
        have_best = true;
        result.best = state;
        if (dir) save_checkpoint((*dir / "best.ckpt").string(), state);
      }
    }
    if (dir) save_checkpoint((*dir / "last.ckpt").string(), state);
  };

  while (state.step < total) {
    if (state.loader.source_cursor >= state.loader.source_order.size()) {
      state.loader.source_order = shuffled(pair.source_train.size(), state.rng);
      state.loader.source_cursor = 0;
    }
    Batch source_batch, target_batch;
    for (int k = 0; k < tc.batch_size && state.loader.source_cursor < state.loader.source_order.size(); ++k) {
      source_batch.push_back(&pair.source_train[static_cast<std::size_t>(state.loader.source_order[state.loader.source_cursor++])]);
    }
    if (!pair.target_train.empty()) {
      for (std::size_t k = 0; k < source_batch.size(); ++k) {
        if (state.loader.target_cursor >= state.loader.target_order.size()) {
          state.loader.target_order = shuffled(pair.target_train.size(), state.rng);
          state.loader.target_cursor = 0;
        }
        target_batch.push_back(&pair.target_train[static_cast<std::size_t>(state.loader.target_order[state.loader.target_cursor++])]);
      }
    }

    StepMetrics m = train_step(state, source_batch, target_batch);
    if (opts.metrics_log) *opts.metrics_log << to_json(m).dump() << '\n';

    bool epoch_done = state.loader.source_cursor >= state.loader.source_order.size();
    if (epoch_done) ++state.loader.epoch;
    if (epoch_done || state.step == total) end_of_epoch();
  }

  if (!have_best) {
    result.best = state;
    if (dir && select == nullptr) save_checkpoint((*dir / "best.ckpt").string(), state);
  }
  if (dir && total == 0) save_checkpoint((*dir / "last.ckpt").string(), state);
  result.last = std::move(state);
  return result;
}

}  // namespace foal
