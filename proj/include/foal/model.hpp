#pragma once

// The span-based extraction model: encoder -> span module -> pruning ->
// pair module, plus decoding and the gold label alignment used for training.

#include "foal/encoder.hpp"
#include "foal/objectives.hpp"
#include "foal/pair.hpp"
#include "foal/span.hpp"

#include <set>

namespace foal {

struct ModelConfig {
  int width_dim = 20;
  int distance_dim = 20;
  int ffn_hidden = 150;
  std::string activation = "tanh";
  bool inject_gold_pairs = true;
  std::uint64_t seed = 0;
};

struct ForwardOptions {
  /// Gold triplets of a labeled sentence; used only for candidate injection.
  const std::vector<Triplet>* gold = nullptr;
  bool inject_gold = false;
};

struct SentenceForward {
  ad::Var tokens;
  std::vector<Span> spans;
  ad::Var span_reps;
  ad::Var span_log_probs;
  ad::Matrix span_probs;
  std::vector<int> aspect_rows;   // candidate rows into `spans`
  std::vector<int> opinion_rows;
  std::vector<PairKey> pairs;
  std::vector<int> pair_aspect_rows;
  std::vector<int> pair_opinion_rows;
  ad::Var pair_reps;
  ad::Var pair_log_probs;
  ad::Matrix pair_probs;

  /// Sorted union of the aspect and opinion candidate rows.
  std::vector<int> phrase_rows() const;
};

/// Gold span class for each span: Aspect, Opinion, else Invalid.
std::vector<int> gold_span_labels(const std::vector<Span>& spans, const std::vector<Triplet>& gold);
/// Gold relation for each pair: the triplet sentiment, else Invalid.
std::vector<int> gold_pair_labels(const std::vector<PairKey>& pairs, const std::vector<Triplet>& gold);

/// Lowest index among the maxima.
int argmax_row(const ad::Matrix& probs, Eigen::Index row);

class Model {
 public:
  Model(const EncoderConfig& encoder, const ModelConfig& model, const Hyperparams& hp);

  SentenceForward forward(ad::Tape& tape, const Sentence& sentence, const ForwardOptions& opts = {});
  /// Triplets whose argmax relation is not Invalid, sorted.
  std::vector<Triplet> decode(const Sentence& sentence);

  std::vector<ad::Parameter*> parameters();
  void zero_grad();

  Encoder& encoder() { return encoder_; }
  FeedForward& span_ffn() { return span_ffn_; }
  FeedForward& pair_ffn() { return pair_ffn_; }
  ad::Parameter& width_table() { return width_table_; }
  ad::Parameter& distance_table() { return distance_table_; }
  const DistanceBuckets& buckets() const { return buckets_; }
  int max_width() const { return max_width_; }
  double z() const { return z_; }
  const ModelConfig& config() const { return config_; }

 private:
  ModelConfig config_;
  Encoder encoder_;
  int max_width_;
  double z_;
  DistanceBuckets buckets_;
  ad::Parameter width_table_;
  ad::Parameter distance_table_;
  FeedForward span_ffn_;
  FeedForward pair_ffn_;
};

}  // namespace foal
