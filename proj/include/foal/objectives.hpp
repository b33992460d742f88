#pragma once

// Training objectives: span/pair negative log-likelihood, the bidirectional
// cross-domain contrastive loss with pseudo-label gating, and their weighted
// combination.
//
// Contrastive loss for source features S and target features T:
//
//   L(S, T) = - sum_{i in S} sum_{j in T} c_ij * log( d(x_i, x_j) / sum_{k in T} d(x_i, x_k) )
//             - sum_{i in T} sum_{j in S} c_ji * log( d(x_i, x_j) / sum_{k in S} d(x_i, x_k) )
//
// with d(x, y) = exp(cos(x, y) / tau). c is a 0/1 selection mask: a term
// with c = 0 is dropped rather than evaluated as log(0).

#include "foal/autodiff.hpp"
#include "foal/pair.hpp"

#include <string>
#include <vector>

namespace foal {

enum class Domain { Source, Target };
enum class Granularity { Phrase, Pair };

struct LabeledFeature {
  Eigen::RowVectorXd vector;
  int label = 0;
  Domain domain = Domain::Source;
  double confidence = 1.0;
  bool is_pseudo = false;

  static LabeledFeature source(Eigen::RowVectorXd v, int label) { return {std::move(v), label, Domain::Source, 1.0, false}; }
  static LabeledFeature target(Eigen::RowVectorXd v, int label, double confidence) {
    return {std::move(v), label, Domain::Target, confidence, true};
  }
};

struct FeatureBank {
  Granularity granularity = Granularity::Phrase;
  std::vector<LabeledFeature> source;
  std::vector<LabeledFeature> target;
};

struct Hyperparams {
  double tau = 20.0;
  double t = 0.93;
  double lambda = 0.3;
  double z = 0.5;
  int alpha = 5;
  int max_width = 8;
  std::vector<int> distance_buckets{0, 1, 2, 3, 4, 5, 8, 16, 32};
  double encoder_lr = 5e-5;
  double classifier_lr = 1e-3;
  bool mean_reduce = false;

  void validate() const;
};

inline constexpr double kLogEpsilon = 1e-12;

// ---- ASTE negative log-likelihood -----------------------------------------

/// -sum log P(gold) over spans and pairs; probabilities clamped at 1e-12.
double aste_loss(const ad::Matrix& span_probs, const std::vector<int>& span_labels, const ad::Matrix& pair_probs,
                 const std::vector<int>& pair_labels);
/// Graph form over log-probabilities (rows from log_softmax_rows).
ad::Var aste_loss(ad::Var span_log_probs, const std::vector<int>& span_labels, ad::Var pair_log_probs,
                  const std::vector<int>& pair_labels);

// ---- contrastive -----------------------------------------------------------

/// 1 iff the labels agree and the target confidence is strictly above t.
int indicator(const LabeledFeature& source_feat, const LabeledFeature& target_feat, double t);

double similarity(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y, double tau);

/// |S| x |T| matrix of indicator values.
ad::Matrix positive_mask(const std::vector<int>& source_labels, const std::vector<int>& target_labels,
                         const std::vector<double>& target_confidence, double t);

/// Graph form. Rows of `source` and `target` are features. An empty side
/// yields 0.
ad::Var contrastive_loss(ad::Tape& tape, ad::Var source, ad::Var target, const ad::Matrix& mask, double tau,
                         bool mean_reduce = false);
ad::Var contrastive_loss(ad::Tape& tape, ad::Var source, ad::Var target, const std::vector<int>& source_labels,
                         const std::vector<int>& target_labels, const std::vector<double>& target_confidence,
                         double t, double tau, bool mean_reduce = false);

double contrastive_loss(const std::vector<LabeledFeature>& source, const std::vector<LabeledFeature>& target,
                        double t, double tau, bool mean_reduce = false);

/// Number of surviving (masked-in) terms over both directions.
std::size_t contrastive_term_count(const std::vector<LabeledFeature>& source,
                                   const std::vector<LabeledFeature>& target, double t);

double total_contrastive(const FeatureBank& phrase_bank, const FeatureBank& pair_bank, double t, double tau,
                         bool mean_reduce = false);

double final_loss(double l_aste, double l_contra, double lambda);

}  // namespace foal
