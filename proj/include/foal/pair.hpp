#pragma once

// Aspect-opinion pair formation, distance bucketing, pair representations
// [s_aspect; s_opinion; f_distance] and relation classification.

#include "foal/span.hpp"

#include <array>
#include <vector>

namespace foal {

enum class Relation { Positive = 0, Negative = 1, Neutral = 2, Invalid = 3 };
inline constexpr int kRelationClasses = 4;

inline Relation to_relation(Sentiment s) { return static_cast<Relation>(static_cast<int>(s)); }

struct PairKey {
  Span aspect;
  Span opinion;
  friend bool operator==(const PairKey&, const PairKey&) = default;
};

/// Cartesian product ordered by (aspect rank, opinion rank).
std::vector<PairKey> form_pairs(const std::vector<Span>& aspects, const std::vector<Span>& opinions);

/// Token gap between the nearest boundaries; 0 when the spans overlap.
int pair_distance(const PairKey& key);

/// Ordered distance ranges given by their inclusive lower bounds; the first
/// bound must be 0. Default {0, 1, 2, 3, 4, 5-7, 8-15, 16-31, 32+}.
class DistanceBuckets {
 public:
  DistanceBuckets();
  explicit DistanceBuckets(std::vector<int> lower_bounds);

  int bucket(int distance) const;
  int count() const { return static_cast<int>(bounds_.size()); }
  const std::vector<int>& lower_bounds() const { return bounds_; }

 private:
  std::vector<int> bounds_;
};

Eigen::RowVectorXd pair_representation(const Eigen::RowVectorXd& aspect_rep, const Eigen::RowVectorXd& opinion_rep,
                                       const PairKey& key, const ad::Matrix& distance_table,
                                       const DistanceBuckets& buckets);

/// Batched form: rows of `span_reps` indexed by the aspect/opinion positions.
ad::Var pair_representations(ad::Var span_reps, const std::vector<int>& aspect_rows,
                             const std::vector<int>& opinion_rows, const std::vector<PairKey>& keys,
                             ad::Var distance_table, const DistanceBuckets& buckets);

std::array<double, kRelationClasses> classify_pair(const Eigen::RowVectorXd& rep, const FeedForward& ffn);

}  // namespace foal
