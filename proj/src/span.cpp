#include "foal/span.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace foal {

using ad::Matrix;
using ad::Var;

std::vector<Span> enumerate_spans(int n, int max_width) {
  if (n < 1) throw std::invalid_argument("enumerate_spans: n must be >= 1");
  if (max_width < 1) throw std::invalid_argument("enumerate_spans: max_width must be >= 1");
  std::vector<Span> out;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n && j - i + 1 <= max_width; ++j) out.push_back({i, j});
  }
  return out;
}

int width_bucket(const Span& span, int max_width) {
  return std::min(span.width(), max_width) - 1;
}

namespace {
Matrix init_uniform(std::mt19937_64& rng, int rows, int cols) {
  double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}
}  // namespace

FeedForward::FeedForward(const std::string& name, int in, int hidden, int out, ad::Activation act,
                         std::mt19937_64& rng)
    : w1(name + ".w1", ad::ParamGroup::Classifier, init_uniform(rng, in, hidden)),
      b1(name + ".b1", ad::ParamGroup::Classifier, Matrix::Zero(1, hidden)),
      w2(name + ".w2", ad::ParamGroup::Classifier, init_uniform(rng, hidden, out)),
      b2(name + ".b2", ad::ParamGroup::Classifier, Matrix::Zero(1, out)),
      activation(act) {}

Var FeedForward::logits(ad::Tape& tape, Var x) {
  if (x.cols() != input_size()) throw std::invalid_argument("FeedForward: input width mismatch");
  Var hidden = ad::activate(ad::add_row(ad::matmul(x, tape.param(w1)), tape.param(b1)), activation);
  return ad::add_row(ad::matmul(hidden, tape.param(w2)), tape.param(b2));
}

Eigen::RowVectorXd FeedForward::probabilities(const Eigen::RowVectorXd& x) const {
  if (x.size() != input_size()) throw std::invalid_argument("FeedForward: input width mismatch");
  Eigen::RowVectorXd h = x * w1.value + b1.value.row(0);
  h = activation == ad::Activation::Tanh ? Eigen::RowVectorXd(h.array().tanh()) : Eigen::RowVectorXd(h.cwiseMax(0.0));
  Eigen::RowVectorXd z = h * w2.value + b2.value.row(0);
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

Eigen::RowVectorXd span_representation(const Matrix& h, const Span& span, const Matrix& width_table) {
  if (span.start < 0 || span.start > span.end || span.end >= h.rows()) {
    throw std::out_of_range("span_representation: span outside sentence");
  }
  const int max_width = static_cast<int>(width_table.rows());
  Eigen::RowVectorXd out(2 * h.cols() + width_table.cols());
  out << h.row(span.start), h.row(span.end), width_table.row(width_bucket(span, max_width));
  return out;
}

Var span_representations(Var h, const std::vector<Span>& spans, Var width_table) {
  const int max_width = static_cast<int>(width_table.rows());
  std::vector<int> starts, ends, widths;
  for (const Span& s : spans) {
    if (s.start < 0 || s.start > s.end || s.end >= h.rows()) {
      throw std::out_of_range("span_representations: span outside sentence");
    }
    starts.push_back(s.start);
    ends.push_back(s.end);
    widths.push_back(width_bucket(s, max_width));
  }
  return ad::concat_cols({ad::gather_rows(h, starts), ad::gather_rows(h, ends), ad::gather_rows(width_table, widths)});
}

std::array<double, kSpanClasses> classify_span(const Eigen::RowVectorXd& rep, const FeedForward& ffn) {
  if (ffn.output_size() != kSpanClasses) throw std::invalid_argument("classify_span: classifier must have 3 outputs");
  Eigen::RowVectorXd p = ffn.probabilities(rep);
  return {p(0), p(1), p(2)};
}

int pruned_count(int n, double z, int available) {
  if (!(z > 0.0 && z <= 1.0)) throw std::invalid_argument("pruning ratio z must be in (0, 1]");
  int k = static_cast<int>(std::ceil(n * z - 1e-9));
  return std::min(std::max(k, 0), available);
}

namespace {
std::vector<int> top_k(const Matrix& probs, int column, int k) {
  std::vector<int> order(static_cast<std::size_t>(probs.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs(a, column) > probs(b, column); });
  order.resize(static_cast<std::size_t>(k));
  return order;
}
}  // namespace

PrunedIndices prune_indices(const Matrix& probs, int n, double z) {
  int k = pruned_count(n, z, static_cast<int>(probs.rows()));
  return {top_k(probs, static_cast<int>(SpanLabel::Aspect), k), top_k(probs, static_cast<int>(SpanLabel::Opinion), k)};
}

PrunedSpans prune_spans(const std::vector<SpanScore>& scored, int n, double z) {
  Matrix probs(static_cast<Eigen::Index>(scored.size()), kSpanClasses);
  for (std::size_t i = 0; i < scored.size(); ++i)
    for (int c = 0; c < kSpanClasses; ++c) probs(static_cast<Eigen::Index>(i), c) = scored[i].probs[c];
  PrunedIndices idx = prune_indices(probs, n, z);
  PrunedSpans out;
  for (int i : idx.aspect) out.aspect.push_back(scored[i].span);
  for (int i : idx.opinion) out.opinion.push_back(scored[i].span);
  return out;
}

}  // namespace foal
