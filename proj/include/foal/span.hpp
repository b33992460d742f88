#pragma once

// Span enumeration, span representations [h_start; h_end; f_width], span type
// classification and dual-channel pruning.

#include "foal/autodiff.hpp"
#include "foal/data.hpp"

#include <array>
#include <random>
#include <vector>

namespace foal {

enum class SpanLabel { Aspect = 0, Opinion = 1, Invalid = 2 };
inline constexpr int kSpanClasses = 3;

/// All spans of width <= max_width in lexicographic (start, end) order.
std::vector<Span> enumerate_spans(int n, int max_width);

/// Row of the width table used for `span`: exact widths, overflow clamped.
int width_bucket(const Span& span, int max_width);

/// One hidden layer feed-forward classifier: act(x W1 + b1) W2 + b2.
struct FeedForward {
  ad::Parameter w1, b1, w2, b2;
  ad::Activation activation = ad::Activation::Tanh;

  FeedForward() = default;
  FeedForward(const std::string& name, int in, int hidden, int out, ad::Activation act, std::mt19937_64& rng);

  int input_size() const { return static_cast<int>(w1.value.rows()); }
  int output_size() const { return static_cast<int>(w2.value.cols()); }

  ad::Var logits(ad::Tape& tape, ad::Var x);
  /// Softmax probabilities for a single input row, parameters frozen.
  Eigen::RowVectorXd probabilities(const Eigen::RowVectorXd& x) const;
  std::vector<ad::Parameter*> parameters() { return {&w1, &b1, &w2, &b2}; }
};

Eigen::RowVectorXd span_representation(const ad::Matrix& token_embeddings, const Span& span,
                                       const ad::Matrix& width_table);
/// Batched form: one row per span.
ad::Var span_representations(ad::Var token_embeddings, const std::vector<Span>& spans, ad::Var width_table);

std::array<double, kSpanClasses> classify_span(const Eigen::RowVectorXd& rep, const FeedForward& ffn);

struct SpanScore {
  Span span;
  Eigen::RowVectorXd representation;
  std::array<double, kSpanClasses> probs{};
};

struct PrunedIndices {
  std::vector<int> aspect;   // indices into the scored list, best first
  std::vector<int> opinion;
};

/// Keeps ceil(n * z) spans per channel ranked by P(Aspect) and P(Opinion).
/// Ties keep the original (lexicographic) order.
PrunedIndices prune_indices(const ad::Matrix& probs, int n, double z);

struct PrunedSpans {
  std::vector<Span> aspect;
  std::vector<Span> opinion;
};

PrunedSpans prune_spans(const std::vector<SpanScore>& scored, int n, double z);

int pruned_count(int n, double z, int available);

}  // namespace foal
