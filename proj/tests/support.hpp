#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They are written as direct loops over the definitions and share no code with
// the library beyond its data types.

#include "foal/autodiff.hpp"
#include "foal/data.hpp"
#include "foal/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <vector>

namespace foal::testing {

inline double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  double dot = 0, na = 0, nb = 0;
  for (Eigen::Index k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Term-by-term double loop over both directions; terms whose indicator is 0
/// are skipped, denominators run over every feature of the opposite domain.
inline double brute_contrastive(const ad::Matrix& S, const std::vector<int>& ls, const ad::Matrix& T,
                                const std::vector<int>& lt, const std::vector<double>& conf, double t, double tau) {
  auto d = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) { return std::exp(cosine(a, b) / tau); };
  double loss = 0.0;
  for (Eigen::Index i = 0; i < S.rows(); ++i) {
    for (Eigen::Index j = 0; j < T.rows(); ++j) {
      bool fire = ls[static_cast<std::size_t>(i)] == lt[static_cast<std::size_t>(j)] && conf[static_cast<std::size_t>(j)] > t;
      if (!fire) continue;
      double den_st = 0.0;
      for (Eigen::Index k = 0; k < T.rows(); ++k) den_st += d(S.row(i), T.row(k));
      loss -= std::log(d(S.row(i), T.row(j)) / den_st);
      double den_ts = 0.0;
      for (Eigen::Index k = 0; k < S.rows(); ++k) den_ts += d(T.row(j), S.row(k));
      loss -= std::log(d(T.row(j), S.row(i)) / den_ts);
    }
  }
  return loss;
}

/// -sum log p over rows, probabilities given directly.
inline double brute_nll(const ad::Matrix& probs, const std::vector<int>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) s -= std::log(probs(static_cast<Eigen::Index>(i), labels[i]));
  return s;
}

struct BruteF1 {
  std::size_t pred = 0, gold = 0, correct = 0;
  double p = 0, r = 0, f1 = 0;
};

inline BruteF1 brute_f1(const std::vector<std::vector<Triplet>>& pred, const std::vector<std::vector<Triplet>>& gold) {
  BruteF1 o;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    std::vector<Triplet> ps, gs;
    for (const auto& x : pred[s])
      if (std::find(ps.begin(), ps.end(), x) == ps.end()) ps.push_back(x);
    for (const auto& x : gold[s])
      if (std::find(gs.begin(), gs.end(), x) == gs.end()) gs.push_back(x);
    o.pred += ps.size();
    o.gold += gs.size();
    for (const auto& x : ps)
      for (const auto& y : gs)
        if (x.aspect.start == y.aspect.start && x.aspect.end == y.aspect.end && x.opinion.start == y.opinion.start &&
            x.opinion.end == y.opinion.end && x.sentiment == y.sentiment)
          ++o.correct;
  }
  o.p = o.pred ? static_cast<double>(o.correct) / static_cast<double>(o.pred) : 0.0;
  o.r = o.gold ? static_cast<double>(o.correct) / static_cast<double>(o.gold) : 0.0;
  o.f1 = (o.p + o.r) > 0 ? 2 * o.p * o.r / (o.p + o.r) : 0.0;
  return o;
}

/// Biased squared-MMD estimate from the three kernel double sums, square-rooted.
inline double brute_mmd(const ad::Matrix& X, const ad::Matrix& Y, double sigma) {
  auto k = [&](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
    double d2 = 0;
    for (Eigen::Index c = 0; c < a.size(); ++c) d2 += (a[c] - b[c]) * (a[c] - b[c]);
    return std::exp(-d2 / (2 * sigma * sigma));
  };
  double xx = 0, yy = 0, xy = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j) xx += k(X.row(i), X.row(j));
  for (Eigen::Index i = 0; i < Y.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.rows(); ++j) yy += k(Y.row(i), Y.row(j));
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.rows(); ++j) xy += k(X.row(i), Y.row(j));
  const double m = static_cast<double>(X.rows()), n = static_cast<double>(Y.rows());
  return std::sqrt(std::max(0.0, xx / (m * m) + yy / (n * n) - 2 * xy / (m * n)));
}

/// Median of all pairwise Euclidean distances within the pooled set.
inline double brute_median_distance(const ad::Matrix& X, const ad::Matrix& Y) {
  ad::Matrix Z(X.rows() + Y.rows(), X.cols());
  Z << X, Y;
  std::vector<double> d;
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < Z.rows(); ++j) d.push_back((Z.row(i) - Z.row(j)).norm());
  if (d.empty()) return 1.0;
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  const double med = n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
  return med > 0 ? med : 1.0;
}

inline ad::Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  ad::Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

struct GroupError {
  std::string group;
  std::size_t coordinates = 0;
  double analytic_norm = 0.0;
  double rel_error = 0.0;
};

/// Central differences of `loss` over selected coordinates of every parameter.
/// Coordinates with a nonzero analytic gradient are all taken for small
/// tensors; large tables are sampled. Errors are grouped by `group_of`.
inline std::vector<GroupError> gradient_check(const std::vector<ad::Parameter*>& params,
                                              const std::function<double()>& loss,
                                              const std::function<std::string(const ad::Parameter&)>& group_of,
                                              double eps = 1e-6, std::size_t max_per_param = 400) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> acc;
  std::mt19937_64 rng(11);
  for (ad::Parameter* p : params) {
    std::vector<Eigen::Index> coords;
    for (Eigen::Index k = 0; k < p->value.size(); ++k)
      if (p->grad(k) != 0.0) coords.push_back(k);
    if (coords.size() > max_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_per_param);
    }
    auto& [an, nu] = acc[group_of(*p)];
    for (Eigen::Index k : coords) {
      const double keep = p->value(k);
      p->value(k) = keep + eps;
      const double up = loss();
      p->value(k) = keep - eps;
      const double down = loss();
      p->value(k) = keep;
      an.push_back(p->grad(k));
      nu.push_back((up - down) / (2 * eps));
    }
  }
  std::vector<GroupError> out;
  for (auto& [g, v] : acc) {
    double diff = 0, na = 0, nn = 0;
    for (std::size_t i = 0; i < v.first.size(); ++i) {
      diff += (v.first[i] - v.second[i]) * (v.first[i] - v.second[i]);
      na += v.first[i] * v.first[i];
      nn += v.second[i] * v.second[i];
    }
    const double denom = std::max(std::sqrt(na), std::sqrt(nn));
    out.push_back({g, v.first.size(), std::sqrt(na), denom > 0 ? std::sqrt(diff) / denom : 0.0});
  }
  return out;
}

}  // namespace foal::testing
