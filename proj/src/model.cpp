#include "foal/model.hpp"

#include <algorithm>
#include <map>

namespace foal {

using ad::Matrix;
using ad::Var;

std::vector<int> SentenceForward::phrase_rows() const {
  std::vector<int> rows(aspect_rows);
  rows.insert(rows.end(), opinion_rows.begin(), opinion_rows.end());
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

std::vector<int> gold_span_labels(const std::vector<Span>& spans, const std::vector<Triplet>& gold) {
  std::set<Span> aspects, opinions;
  for (const auto& t : gold) {
    aspects.insert(t.aspect);
    opinions.insert(t.opinion);
  }
  std::vector<int> out;
  out.reserve(spans.size());
  for (const Span& s : spans) {
    SpanLabel l = aspects.count(s) ? SpanLabel::Aspect : opinions.count(s) ? SpanLabel::Opinion : SpanLabel::Invalid;
    out.push_back(static_cast<int>(l));
  }
  return out;
}

std::vector<int> gold_pair_labels(const std::vector<PairKey>& pairs, const std::vector<Triplet>& gold) {
  std::vector<int> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    Relation r = Relation::Invalid;
    for (const auto& t : gold) {
      if (t.aspect == p.aspect && t.opinion == p.opinion) {
        r = to_relation(t.sentiment);
        break;
      }
    }
    out.push_back(static_cast<int>(r));
  }
  return out;
}

int argmax_row(const Matrix& probs, Eigen::Index row) {
  int best = 0;
  for (Eigen::Index c = 1; c < probs.cols(); ++c) {
    if (probs(row, c) > probs(row, best)) best = static_cast<int>(c);
  }
  return best;
}

namespace {
Matrix small_normal(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 0.1);
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = g(rng);
  return m;
}
}  // namespace

Model::Model(const EncoderConfig& encoder, const ModelConfig& model, const Hyperparams& hp)
    : config_(model), encoder_(encoder), max_width_(hp.max_width), z_(hp.z), buckets_(hp.distance_buckets) {
  hp.validate();
  if (model.width_dim < 1 || model.distance_dim < 1 || model.ffn_hidden < 1) {
    throw ConfigError("model dimensions must be positive");
  }
  std::mt19937_64 rng(model.seed * 0x9e3779b97f4a7c15ULL + 17);
  auto act = ad::parse_activation(model.activation);
  const int d = encoder_.hidden_size();
  width_table_ = ad::Parameter("width_embedding", ad::ParamGroup::Classifier, small_normal(rng, max_width_, model.width_dim));
  distance_table_ =
      ad::Parameter("distance_embedding", ad::ParamGroup::Classifier, small_normal(rng, buckets_.count(), model.distance_dim));
  const int span_in = 2 * d + model.width_dim;
  span_ffn_ = FeedForward("span_ffn", span_in, model.ffn_hidden, kSpanClasses, act, rng);
  pair_ffn_ = FeedForward("pair_ffn", 2 * span_in + model.distance_dim, model.ffn_hidden, kRelationClasses, act, rng);
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out = encoder_.parameters();
  out.push_back(&width_table_);
  out.push_back(&distance_table_);
  for (auto* p : span_ffn_.parameters()) out.push_back(p);
  for (auto* p : pair_ffn_.parameters()) out.push_back(p);
  return out;
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

SentenceForward Model::forward(ad::Tape& tape, const Sentence& sentence, const ForwardOptions& opts) {
  SentenceForward f;
  const int n = sentence.size();
  f.tokens = encoder_.encode(tape, sentence);
  f.spans = enumerate_spans(n, max_width_);
  f.span_reps = span_representations(f.tokens, f.spans, tape.param(width_table_));
  f.span_log_probs = ad::log_softmax_rows(span_ffn_.logits(tape, f.span_reps));
  f.span_probs = f.span_log_probs.value().array().exp().matrix();

  PrunedIndices pruned = prune_indices(f.span_probs, n, z_);
  f.aspect_rows = std::move(pruned.aspect);
  f.opinion_rows = std::move(pruned.opinion);

  if (opts.inject_gold && opts.gold != nullptr) {
    std::map<Span, int> row_of;
    for (std::size_t i = 0; i < f.spans.size(); ++i) row_of.emplace(f.spans[i], static_cast<int>(i));
    auto inject = [&](std::vector<int>& rows, const Span& s) {
      auto it = row_of.find(s);
      if (it == row_of.end()) return;  // wider than max_width, unreachable
      if (std::find(rows.begin(), rows.end(), it->second) == rows.end()) rows.push_back(it->second);
    };
    for (const auto& t : *opts.gold) {
      inject(f.aspect_rows, t.aspect);
      inject(f.opinion_rows, t.opinion);
    }
  }

  for (int a : f.aspect_rows) {
    for (int o : f.opinion_rows) {
      f.pairs.push_back({f.spans[a], f.spans[o]});
      f.pair_aspect_rows.push_back(a);
      f.pair_opinion_rows.push_back(o);
    }
  }
  f.pair_reps = pair_representations(f.span_reps, f.pair_aspect_rows, f.pair_opinion_rows, f.pairs,
                                     tape.param(distance_table_), buckets_);
  f.pair_log_probs = ad::log_softmax_rows(pair_ffn_.logits(tape, f.pair_reps));
  f.pair_probs = f.pair_log_probs.value().array().exp().matrix();
  return f;
}

std::vector<Triplet> Model::decode(const Sentence& sentence) {
  ad::Tape tape;
  SentenceForward f = forward(tape, sentence);
  std::set<Triplet> out;
  for (std::size_t i = 0; i < f.pairs.size(); ++i) {
    int r = argmax_row(f.pair_probs, static_cast<Eigen::Index>(i));
    if (r == static_cast<int>(Relation::Invalid)) continue;
    out.insert(Triplet{f.pairs[i].aspect, f.pairs[i].opinion, static_cast<Sentiment>(r)});
  }
  return {out.begin(), out.end()};
}

}  // namespace foal
