#include "foal/adversarial.hpp"

#include "foal/trainer.hpp"

#include <cmath>

namespace foal {

using ad::Matrix;
using ad::Var;

Discriminator::Discriminator(int hidden_size, int discriminator_hidden, ad::Activation act, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ffn = FeedForward("discriminator", hidden_size, discriminator_hidden, 2, act, rng);
  for (auto* p : ffn.parameters()) p->group = ad::ParamGroup::Discriminator;
}

std::vector<ad::Parameter*> Discriminator::parameters() { return ffn.parameters(); }

Var domain_loss(ad::Tape& tape, Discriminator& disc, Var source_tokens, Var target_tokens) {
  const Eigen::Index n = source_tokens.rows() + target_tokens.rows();
  if (source_tokens.rows() == 0 || target_tokens.rows() == 0) {
    throw std::invalid_argument("domain_loss: both domains must contribute tokens");
  }
  Var tokens = ad::concat_rows({source_tokens, target_tokens});
  std::vector<int> labels(static_cast<std::size_t>(n), static_cast<int>(DomainLabel::Target));
  std::fill(labels.begin(), labels.begin() + source_tokens.rows(), static_cast<int>(DomainLabel::Source));
  Var logp = ad::log_softmax_rows(disc.ffn.logits(tape, tokens));
  return ad::scale(ad::pick_sum(logp, labels), -1.0 / static_cast<double>(n));
}

double domain_loss(const Discriminator& disc, const Matrix& source_tokens, const Matrix& target_tokens) {
  Discriminator copy = disc;
  ad::Tape tape;
  return domain_loss(tape, copy, tape.constant(source_tokens), tape.constant(target_tokens)).scalar();
}

bool is_generator_step(long step, int alpha) {
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  return step % (alpha + 1) < alpha;
}

StepMetrics at_train_step(TrainState& state, const Batch& source_batch, const Batch& target_batch) {
  if (!state.discriminator) throw TrainingError("adversarial step without a discriminator");
  if (source_batch.empty() || target_batch.empty()) throw TrainingError("adversarial step needs both domains");
  const TrainConfig& tc = state.config.train;
  Model& model = state.model;
  Discriminator& disc = *state.discriminator;
  model.zero_grad();
  for (auto* p : disc.parameters()) p->zero_grad();

  StepMetrics m;
  m.step = state.step;
  m.lr_encoder = tc.hp.encoder_lr;
  m.lr_classifier = tc.hp.classifier_lr;
  ad::Tape tape;

  if (is_generator_step(state.step, tc.hp.alpha)) {
    std::vector<SentenceForward> forwards;
    Var aste = batch_aste_loss(tape, model, source_batch, &forwards);
    std::vector<Var> src, tgt;
    for (const auto& f : forwards) src.push_back(f.tokens);
    for (const Sentence* s : target_batch) tgt.push_back(model.encoder().encode(tape, *s));
    Var dl = domain_loss(tape, disc, ad::gradient_reversal(ad::concat_rows(src), 1.0),
                         ad::gradient_reversal(ad::concat_rows(tgt), 1.0));
    Var total = ad::add(aste, ad::scale(dl, tc.adv_weight));
    m.kind = "generator";
    m.l_aste = aste.scalar();
    m.l_domain = dl.scalar();
    m.l_total = total.scalar();
    if (!std::isfinite(m.l_total)) throw TrainingError("non-finite generator loss at step " + std::to_string(state.step));
    tape.backward(total);
    state.optimizer.step(model.parameters(), state.rates());
    ++state.generator_steps;
  } else {
    std::vector<Var> src, tgt;
    for (const Sentence* s : source_batch) src.push_back(tape.constant(model.encoder().encode(*s)));
    for (const Sentence* s : target_batch) tgt.push_back(tape.constant(model.encoder().encode(*s)));
    Var dl = domain_loss(tape, disc, ad::concat_rows(src), ad::concat_rows(tgt));
    m.kind = "discriminator";
    m.l_domain = dl.scalar();
    m.l_total = m.l_domain;
    if (!std::isfinite(m.l_total)) throw TrainingError("non-finite discriminator loss at step " + std::to_string(state.step));
    tape.backward(dl);
    state.optimizer.step(disc.parameters(), state.rates());
    ++state.discriminator_steps;
  }
  ++state.step;
  return m;
}

}  // namespace foal
