#include "foal/pair.hpp"

#include <algorithm>

namespace foal {

using ad::Matrix;
using ad::Var;

std::vector<PairKey> form_pairs(const std::vector<Span>& aspects, const std::vector<Span>& opinions) {
  std::vector<PairKey> out;
  out.reserve(aspects.size() * opinions.size());
  for (const Span& a : aspects)
    for (const Span& o : opinions) out.push_back({a, o});
  return out;
}

int pair_distance(const PairKey& key) {
  const Span& a = key.aspect;
  const Span& o = key.opinion;
  if (a.end < o.start) return o.start - a.end;
  if (o.end < a.start) return a.start - o.end;
  return 0;
}

DistanceBuckets::DistanceBuckets() : bounds_{0, 1, 2, 3, 4, 5, 8, 16, 32} {}

DistanceBuckets::DistanceBuckets(std::vector<int> lower_bounds) : bounds_(std::move(lower_bounds)) {
  if (bounds_.empty() || bounds_.front() != 0) throw std::invalid_argument("distance buckets must start at 0");
  for (std::size_t i = 1; i < bounds_.size(); ++i) {
    if (bounds_[i] <= bounds_[i - 1]) throw std::invalid_argument("distance bucket bounds must increase");
  }
}

int DistanceBuckets::bucket(int distance) const {
  if (distance < 0) throw std::invalid_argument("negative pair distance");
  auto it = std::upper_bound(bounds_.begin(), bounds_.end(), distance);
  return static_cast<int>(it - bounds_.begin()) - 1;
}

Eigen::RowVectorXd pair_representation(const Eigen::RowVectorXd& aspect_rep, const Eigen::RowVectorXd& opinion_rep,
                                       const PairKey& key, const Matrix& distance_table,
                                       const DistanceBuckets& buckets) {
  if (aspect_rep.size() != opinion_rep.size()) throw std::invalid_argument("pair_representation: span widths differ");
  int b = buckets.bucket(pair_distance(key));
  Eigen::RowVectorXd out(aspect_rep.size() * 2 + distance_table.cols());
  out << aspect_rep, opinion_rep, distance_table.row(b);
  return out;
}

Var pair_representations(Var span_reps, const std::vector<int>& aspect_rows, const std::vector<int>& opinion_rows,
                         const std::vector<PairKey>& keys, Var distance_table, const DistanceBuckets& buckets) {
  if (aspect_rows.size() != keys.size() || opinion_rows.size() != keys.size()) {
    throw std::invalid_argument("pair_representations: index count mismatch");
  }
  std::vector<int> dist;
  for (const auto& k : keys) dist.push_back(buckets.bucket(pair_distance(k)));
  return ad::concat_cols({ad::gather_rows(span_reps, aspect_rows), ad::gather_rows(span_reps, opinion_rows),
                          ad::gather_rows(distance_table, dist)});
}

std::array<double, kRelationClasses> classify_pair(const Eigen::RowVectorXd& rep, const FeedForward& ffn) {
  if (ffn.output_size() != kRelationClasses) throw std::invalid_argument("classify_pair: classifier must have 4 outputs");
  Eigen::RowVectorXd p = ffn.probabilities(rep);
  return {p(0), p(1), p(2), p(3)};
}

}  // namespace foal
