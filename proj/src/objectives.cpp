#include "foal/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace foal {

using ad::Matrix;
using ad::Var;

void Hyperparams::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("t must be in [0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (!(z > 0.0 && z <= 1.0)) throw ConfigError("z must be in (0, 1]");
  if (alpha < 1) throw ConfigError("alpha must be >= 1");
  if (max_width < 1) throw ConfigError("max_width must be >= 1");
  if (!(encoder_lr > 0.0) || !(classifier_lr > 0.0)) throw ConfigError("learning rates must be positive");
  if (distance_buckets.empty() || distance_buckets.front() != 0) throw ConfigError("distance buckets must start at 0");
  for (std::size_t i = 1; i < distance_buckets.size(); ++i) {
    if (distance_buckets[i] <= distance_buckets[i - 1]) throw ConfigError("distance buckets must increase");
  }
}

double aste_loss(const Matrix& span_probs, const std::vector<int>& span_labels, const Matrix& pair_probs,
                 const std::vector<int>& pair_labels) {
  auto nll = [](const Matrix& p, const std::vector<int>& y) {
    if (static_cast<Eigen::Index>(y.size()) != p.rows()) throw std::invalid_argument("aste_loss: label count mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] < 0 || y[i] >= p.cols()) throw std::out_of_range("aste_loss: label out of range");
      s -= std::log(std::max(p(static_cast<Eigen::Index>(i), y[i]), kLogEpsilon));
    }
    return s;
  };
  return nll(span_probs, span_labels) + nll(pair_probs, pair_labels);
}

Var aste_loss(Var span_log_probs, const std::vector<int>& span_labels, Var pair_log_probs,
              const std::vector<int>& pair_labels) {
  Var spans = ad::pick_sum(span_log_probs, span_labels);
  Var pairs = ad::pick_sum(pair_log_probs, pair_labels);
  return ad::scale(ad::add(spans, pairs), -1.0);
}

int indicator(const LabeledFeature& s, const LabeledFeature& t, double threshold) {
  if (s.domain != Domain::Source || t.domain != Domain::Target) {
    throw std::invalid_argument("indicator: expects (source, target) features");
  }
  return (s.label == t.label && t.confidence > threshold) ? 1 : 0;
}

double similarity(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double tau) {
  if (x.size() != y.size()) throw std::invalid_argument("similarity: dimension mismatch");
  double nx = x.norm(), ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0)) throw ad::DegenerateInput("cosine similarity undefined for a zero vector");
  return std::exp(x.dot(y) / (nx * ny) / tau);
}

Matrix positive_mask(const std::vector<int>& source_labels, const std::vector<int>& target_labels,
                     const std::vector<double>& target_confidence, double t) {
  if (target_labels.size() != target_confidence.size()) throw std::invalid_argument("positive_mask: size mismatch");
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(source_labels.size()), static_cast<Eigen::Index>(target_labels.size()));
  for (std::size_t i = 0; i < source_labels.size(); ++i)
    for (std::size_t j = 0; j < target_labels.size(); ++j)
      if (source_labels[i] == target_labels[j] && target_confidence[j] > t) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
  return m;
}

Var contrastive_loss(ad::Tape& tape, Var source, Var target, const Matrix& mask, double tau, bool mean_reduce) {
  if (!(tau > 0.0)) throw std::invalid_argument("contrastive_loss: tau must be > 0");
  if (source.rows() == 0 || target.rows() == 0) return tape.constant(Matrix::Zero(1, 1));
  if (source.cols() != target.cols()) throw std::invalid_argument("contrastive_loss: feature dimensions differ");
  if (mask.rows() != source.rows() || mask.cols() != target.rows()) throw std::invalid_argument("contrastive_loss: mask shape");

  Var cos = ad::matmul(ad::normalize_rows(source), ad::transpose(ad::normalize_rows(target)));
  Var logits = ad::scale(cos, 1.0 / tau);
  Var source_to_target = ad::weighted_sum(ad::log_softmax_rows(logits), mask);
  Var target_to_source = ad::weighted_sum(ad::log_softmax_rows(ad::transpose(logits)), mask.transpose());
  Var loss = ad::scale(ad::add(source_to_target, target_to_source), -1.0);
  if (mean_reduce) {
    double terms = 2.0 * mask.sum();
    if (terms > 0.0) loss = ad::scale(loss, 1.0 / terms);
  }
  return loss;
}

Var contrastive_loss(ad::Tape& tape, Var source, Var target, const std::vector<int>& source_labels,
                     const std::vector<int>& target_labels, const std::vector<double>& target_confidence, double t,
                     double tau, bool mean_reduce) {
  return contrastive_loss(tape, source, target, positive_mask(source_labels, target_labels, target_confidence, t), tau,
                          mean_reduce);
}

namespace {

struct Unpacked {
  Matrix vectors;
  std::vector<int> labels;
  std::vector<double> confidence;
};

Unpacked unpack(const std::vector<LabeledFeature>& feats, Domain expected) {
  Unpacked u;
  if (feats.empty()) return u;
  const Eigen::Index dim = feats.front().vector.size();
  u.vectors.resize(static_cast<Eigen::Index>(feats.size()), dim);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (feats[i].domain != expected) throw std::invalid_argument("contrastive_loss: feature in the wrong domain list");
    if (feats[i].vector.size() != dim) throw std::invalid_argument("contrastive_loss: feature dimensions differ");
    u.vectors.row(static_cast<Eigen::Index>(i)) = feats[i].vector;
    u.labels.push_back(feats[i].label);
    u.confidence.push_back(feats[i].confidence);
  }
  return u;
}

}  // namespace

double contrastive_loss(const std::vector<LabeledFeature>& source, const std::vector<LabeledFeature>& target, double t,
                        double tau, bool mean_reduce) {
  if (source.empty() || target.empty()) return 0.0;
  Unpacked s = unpack(source, Domain::Source);
  Unpacked tg = unpack(target, Domain::Target);
  ad::Tape tape;
  return contrastive_loss(tape, tape.constant(s.vectors), tape.constant(tg.vectors), s.labels, tg.labels,
                          tg.confidence, t, tau, mean_reduce)
      .scalar();
}

std::size_t contrastive_term_count(const std::vector<LabeledFeature>& source, const std::vector<LabeledFeature>& target,
                                   double t) {
  std::size_t n = 0;
  for (const auto& s : source)
    for (const auto& x : target) n += static_cast<std::size_t>(indicator(s, x, t));
  return 2 * n;
}

double total_contrastive(const FeatureBank& phrase_bank, const FeatureBank& pair_bank, double t, double tau,
                         bool mean_reduce) {
  if (phrase_bank.granularity != Granularity::Phrase || pair_bank.granularity != Granularity::Pair) {
    throw std::invalid_argument("total_contrastive: banks passed at the wrong granularity");
  }
  return contrastive_loss(phrase_bank.source, phrase_bank.target, t, tau, mean_reduce) +
         contrastive_loss(pair_bank.source, pair_bank.target, t, tau, mean_reduce);
}

double final_loss(double l_aste, double l_contra, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("final_loss: lambda must be >= 0");
  return l_aste + lambda * l_contra;
}

}  // namespace foal
