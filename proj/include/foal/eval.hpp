#pragma once

// Exact-match triplet F1 and MMD-based representation discrepancy analysis.

#include "foal/model.hpp"

#include "json.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace foal {

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t num_pred = 0;
  std::size_t num_gold = 0;
  std::size_t num_correct = 0;
};

/// Micro-averaged exact-match scores. Duplicate triplets within a sentence
/// count once. Throws std::invalid_argument when the lists are not aligned.
EvalReport exact_match_f1(const std::vector<std::vector<Triplet>>& pred, const std::vector<std::vector<Triplet>>& gold);

nlohmann::json to_json(const EvalReport& r);

/// Decodes every sentence and scores against its gold triplets.
EvalReport evaluate(Model& model, const std::vector<Sentence>& sentences);

// ---- MMD ---------------------------------------------------------------------

/// Median of the pairwise Euclidean distances between distinct rows of the
/// pooled sample; 1 when every distance is 0.
double median_heuristic_bandwidth(const ad::Matrix& x, const ad::Matrix& y);

double rbf_kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b, double sigma);

/// sqrt of the biased (V-statistic) squared MMD with an RBF kernel. The
/// bandwidth defaults to the median heuristic over the pooled sample.
double mmd(const ad::Matrix& x, const ad::Matrix& y, std::optional<double> sigma = std::nullopt);

// ---- discrepancy analysis ------------------------------------------------------

struct LevelDiscrepancy {
  double domain_mmd = 0.0;
  double intra_class_mmd = 0.0;
  double inter_class_mmd = 0.0;
};

struct DiscrepancyReport {
  LevelDiscrepancy phrase;
  LevelDiscrepancy pair;
  std::vector<std::string> notes;  // skipped classes and similar
};

nlohmann::json to_json(const DiscrepancyReport& r);
void print_table(std::ostream& out, const DiscrepancyReport& r);

/// Representation vectors grouped by class for one domain.
struct ClassedFeatures {
  std::vector<Eigen::RowVectorXd> vectors;
  std::vector<int> labels;
  ad::Matrix matrix() const;
  ad::Matrix matrix_of(int label) const;
};

struct DomainFeatures {
  ClassedFeatures phrase;
  ClassedFeatures pair;
};

/// Phrase features: pruned candidates plus gold spans; pair features: their
/// Cartesian product. Labels are gold, so the sentences must be labeled.
DomainFeatures extract_features(Model& model, const std::vector<Sentence>& sentences);

LevelDiscrepancy level_discrepancy(const ClassedFeatures& source, const ClassedFeatures& target, int num_classes,
                                   const std::string& level, std::vector<std::string>& notes);

DiscrepancyReport discrepancy_report(Model& model, const std::vector<Sentence>& source,
                                     const std::vector<Sentence>& target);

/// One JSON record per feature: {vector, granularity, class, domain}.
void dump_features(std::ostream& out, const DomainFeatures& feats, const std::string& domain);

}  // namespace foal
