#include "foal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

namespace foal {

using ad::Matrix;

EvalReport exact_match_f1(const std::vector<std::vector<Triplet>>& pred, const std::vector<std::vector<Triplet>>& gold) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("exact_match_f1: " + std::to_string(pred.size()) + " predicted sentences vs " +
                                std::to_string(gold.size()) + " gold");
  }
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    std::set<Triplet> p(pred[i].begin(), pred[i].end());
    std::set<Triplet> g(gold[i].begin(), gold[i].end());
    r.num_pred += p.size();
    r.num_gold += g.size();
    for (const auto& t : p) r.num_correct += g.count(t);
  }
  r.precision = r.num_pred ? static_cast<double>(r.num_correct) / static_cast<double>(r.num_pred) : 0.0;
  r.recall = r.num_gold ? static_cast<double>(r.num_correct) / static_cast<double>(r.num_gold) : 0.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"counts", {{"num_pred", r.num_pred}, {"num_gold", r.num_gold}, {"num_correct", r.num_correct}}}};
}

EvalReport evaluate(Model& model, const std::vector<Sentence>& sentences) {
  std::vector<std::vector<Triplet>> pred, gold;
  pred.reserve(sentences.size());
  gold.reserve(sentences.size());
  for (const auto& s : sentences) {
    pred.push_back(model.decode(s));
    gold.push_back(s.gold());
  }
  return exact_match_f1(pred, gold);
}

// ---- MMD -------------------------------------------------------------------------

namespace {

Matrix squared_distances(const Matrix& a, const Matrix& b) {
  Eigen::VectorXd na = a.rowwise().squaredNorm();
  Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Matrix d = (-2.0 * a * b.transpose()).colwise() + na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

void check_sets(const Matrix& x, const Matrix& y) {
  if (x.rows() == 0 || y.rows() == 0) throw std::invalid_argument("mmd: empty sample");
  if (x.cols() != y.cols()) throw std::invalid_argument("mmd: dimension mismatch");
}

}  // namespace

double median_heuristic_bandwidth(const Matrix& x, const Matrix& y) {
  check_sets(x, y);
  Matrix pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  Matrix d2 = squared_distances(pooled, pooled);
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back(std::sqrt(d2(i, j)));
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  double med = *mid;
  if (dist.size() % 2 == 0) {
    double lower = *std::max_element(dist.begin(), mid);
    med = 0.5 * (med + lower);
  }
  return med > 0.0 ? med : 1.0;
}

double rbf_kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double sigma) {
  return std::exp(-(a - b).squaredNorm() / (2.0 * sigma * sigma));
}

double mmd(const Matrix& x, const Matrix& y, std::optional<double> sigma) {
  check_sets(x, y);
  double s = sigma ? *sigma : median_heuristic_bandwidth(x, y);
  if (!(s > 0.0)) throw std::invalid_argument("mmd: bandwidth must be > 0");
  const double g = -1.0 / (2.0 * s * s);
  auto mean_kernel = [g](const Matrix& a, const Matrix& b) {
    return (squared_distances(a, b) * g).array().exp().mean();
  };
  double m2 = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
  return std::sqrt(std::max(m2, 0.0));
}

// ---- discrepancy -------------------------------------------------------------------

Matrix ClassedFeatures::matrix() const {
  if (vectors.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(vectors.size()), vectors.front().size());
  for (std::size_t i = 0; i < vectors.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vectors[i];
  return m;
}

Matrix ClassedFeatures::matrix_of(int label) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == label) idx.push_back(i);
  if (idx.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Eigen::Index>(idx.size()), vectors.front().size());
  for (std::size_t k = 0; k < idx.size(); ++k) m.row(static_cast<Eigen::Index>(k)) = vectors[idx[k]];
  return m;
}

DomainFeatures extract_features(Model& model, const std::vector<Sentence>& sentences) {
  DomainFeatures out;
  for (const auto& s : sentences) {
    if (!s.labeled()) throw std::invalid_argument("extract_features: sentence has no gold labels");
    const auto& gold = s.gold();
    ad::Tape tape;
    ForwardOptions opts{&gold, true};
    SentenceForward f = model.forward(tape, s, opts);
    auto span_labels = gold_span_labels(f.spans, gold);
    const Matrix& reps = f.span_reps.value();
    for (int row : f.phrase_rows()) {
      out.phrase.vectors.push_back(reps.row(row));
      out.phrase.labels.push_back(span_labels[static_cast<std::size_t>(row)]);
    }
    auto pair_labels = gold_pair_labels(f.pairs, gold);
    const Matrix& preps = f.pair_reps.value();
    for (Eigen::Index i = 0; i < preps.rows(); ++i) {
      out.pair.vectors.push_back(preps.row(i));
      out.pair.labels.push_back(pair_labels[static_cast<std::size_t>(i)]);
    }
  }
  return out;
}

LevelDiscrepancy level_discrepancy(const ClassedFeatures& source, const ClassedFeatures& target, int num_classes,
                                   const std::string& level, std::vector<std::string>& notes) {
  LevelDiscrepancy d;
  if (source.vectors.empty() || target.vectors.empty()) {
    notes.push_back(level + ": a domain has no features, discrepancy left at 0");
    return d;
  }
  d.domain_mmd = mmd(source.matrix(), target.matrix());

  double intra = 0.0;
  int intra_n = 0;
  std::vector<Matrix> pooled(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    Matrix s = source.matrix_of(c), t = target.matrix_of(c);
    if (s.rows() > 0 && t.rows() > 0) {
      intra += mmd(s, t);
      ++intra_n;
    } else {
      notes.push_back(level + ": class " + std::to_string(c) + " empty in " + (s.rows() == 0 ? "source" : "target") +
                      ", skipped for intra-class");
    }
    if (s.rows() + t.rows() > 0) {
      Matrix p(s.rows() + t.rows(), s.rows() > 0 ? s.cols() : t.cols());
      if (s.rows() > 0) p.topRows(s.rows()) = s;
      if (t.rows() > 0) p.bottomRows(t.rows()) = t;
      pooled[static_cast<std::size_t>(c)] = std::move(p);
    }
  }
  d.intra_class_mmd = intra_n ? intra / intra_n : 0.0;

  double inter = 0.0;
  int inter_n = 0;
  for (int a = 0; a < num_classes; ++a) {
    for (int b = a + 1; b < num_classes; ++b) {
      const Matrix& pa = pooled[static_cast<std::size_t>(a)];
      const Matrix& pb = pooled[static_cast<std::size_t>(b)];
      if (pa.rows() == 0 || pb.rows() == 0) continue;
      inter += mmd(pa, pb);
      ++inter_n;
    }
  }
  d.inter_class_mmd = inter_n ? inter / inter_n : 0.0;
  return d;
}

DiscrepancyReport discrepancy_report(Model& model, const std::vector<Sentence>& source,
                                     const std::vector<Sentence>& target) {
  DomainFeatures s = extract_features(model, source);
  DomainFeatures t = extract_features(model, target);
  DiscrepancyReport r;
  r.phrase = level_discrepancy(s.phrase, t.phrase, kSpanClasses, "phrase", r.notes);
  r.pair = level_discrepancy(s.pair, t.pair, kRelationClasses, "pair", r.notes);
  return r;
}

nlohmann::json to_json(const DiscrepancyReport& r) {
  auto level = [](const LevelDiscrepancy& d) {
    return nlohmann::json{{"domain_mmd", d.domain_mmd}, {"intra_class_mmd", d.intra_class_mmd},
                          {"inter_class_mmd", d.inter_class_mmd}};
  };
  return {{"phrase", level(r.phrase)},
          {"pair", level(r.pair)},
          {"kernel", "rbf"},
          {"bandwidth", "median-heuristic"},
          {"estimator", "biased-v-statistic-sqrt"},
          {"notes", r.notes}};
}

void print_table(std::ostream& out, const DiscrepancyReport& r) {
  out << std::left << std::setw(14) << "discrepancy" << std::setw(12) << "phrase" << "pair" << '\n';
  auto row = [&](const char* name, double a, double b) {
    out << std::left << std::setw(14) << name << std::setw(12) << std::fixed << std::setprecision(4) << a << b << '\n';
  };
  row("domain", r.phrase.domain_mmd, r.pair.domain_mmd);
  row("intra-class", r.phrase.intra_class_mmd, r.pair.intra_class_mmd);
  row("inter-class", r.phrase.inter_class_mmd, r.pair.inter_class_mmd);
  out.unsetf(std::ios::floatfield);
}

void dump_features(std::ostream& out, const DomainFeatures& feats, const std::string& domain) {
  auto emit = [&](const ClassedFeatures& f, const char* granularity) {
    for (std::size_t i = 0; i < f.vectors.size(); ++i) {
      std::vector<double> v(f.vectors[i].data(), f.vectors[i].data() + f.vectors[i].size());
      nlohmann::json rec{{"vector", v}, {"granularity", granularity}, {"class", f.labels[i]}, {"domain", domain}};
      out << rec.dump() << '\n';
    }
  };
  emit(feats.phrase, "phrase");
  emit(feats.pair, "pair");
}

}  // namespace foal
