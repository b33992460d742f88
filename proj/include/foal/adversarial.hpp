#pragma once

// Domain-adversarial baseline: a token-level domain discriminator trained
// through a gradient reversal operation. The generator (encoder + task heads)
// takes `alpha` steps for every discriminator step.

#include "foal/autodiff.hpp"
#include "foal/span.hpp"

#include <random>

namespace foal {

enum class DomainLabel { Source = 0, Target = 1 };

struct Discriminator {
  FeedForward ffn;  // d -> hidden -> 2

  Discriminator() = default;
  Discriminator(int hidden_size, int discriminator_hidden, ad::Activation act, std::uint64_t seed);

  std::vector<ad::Parameter*> parameters();
  /// Domain distribution for a single token vector.
  Eigen::RowVectorXd probabilities(const Eigen::RowVectorXd& h) const { return ffn.probabilities(h); }
};

/// Mean negative log-likelihood of the true domain over every token row.
ad::Var domain_loss(ad::Tape& tape, Discriminator& disc, ad::Var source_tokens, ad::Var target_tokens);
double domain_loss(const Discriminator& disc, const ad::Matrix& source_tokens, const ad::Matrix& target_tokens);

/// Position `step` (0-based) of an alpha:1 schedule: the first alpha steps of
/// every cycle of alpha + 1 are generator steps, the last one trains the
/// discriminator.
bool is_generator_step(long step, int alpha);

}  // namespace foal
