#pragma once

// Contextual token encoder.
//
// Two lookup front-ends share one trainable context layer:
//   toy        - fixed seeded hash embedding: the scaled sum of the bucket vectors
//                of the word and of its character 3- and 4-grams (with
//                boundary marks); h_i = tanh([e_{i-1}; e_i; e_{i+1}] W + b);
//   pretrained - WordPiece tokenization against an exported vocabulary and a
//                trainable subword embedding table, with a residual context
//                layer h_i = e_i + tanh([e_{i-1}; e_i; e_{i+1}] W + b), pooled
//                back to words by taking the first subword of every word.
// Windows are zero padded at the edges.

#include "foal/autodiff.hpp"
#include "foal/data.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace foal {

struct EncoderConfig {
  std::string kind = "toy";  // "toy" | "pretrained"
  int hidden_size = 64;
  std::string pretrained_name;  // hub identifier or directory, pretrained only
  std::uint64_t seed = 0;
  int buckets = 4096;  // toy only
  bool lowercase = true;  // pretrained only
};

class EncoderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Greedy longest-match-first WordPiece tokenizer.
class WordPieceVocab {
 public:
  WordPieceVocab() = default;
  explicit WordPieceVocab(std::vector<std::string> pieces);

  static WordPieceVocab load(const std::string& path);

  std::size_t size() const { return pieces_.size(); }
  int id(const std::string& piece) const;  // -1 when absent
  const std::string& piece(int id) const { return pieces_.at(id); }

  /// Subword ids for one pre-tokenized word; never empty.
  std::vector<int> tokenize_word(const std::string& word, bool lowercase) const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  int unk_ = -1;
};

/// Directory holding vocab.txt and embeddings.txt for a pretrained identifier.
/// An existing directory path is used as-is; otherwise the identifier is
/// looked up under $FOAL_MODEL_HUB (default ~/.cache/foal/hub).
std::string resolve_pretrained(const std::string& identifier);

/// Word vector = vector of the word's first subword. Throws EncoderError when
/// a word has no subword.
ad::Matrix align_subwords(int word_count, const ad::Matrix& subword_vectors,
                          const std::vector<std::vector<int>>& word_to_subword);
ad::Var align_subwords(ad::Var subword_vectors, const std::vector<std::vector<int>>& word_to_subword);

class Encoder {
 public:
  explicit Encoder(const EncoderConfig& config);

  const EncoderConfig& config() const { return config_; }
  int hidden_size() const { return config_.hidden_size; }

  /// n x d contextual representations recorded on `tape`.
  ad::Var encode(ad::Tape& tape, const Sentence& sentence);
  /// Frozen-parameter convenience wrapper.
  ad::Matrix encode(const Sentence& sentence) const;

  /// Trainable parameters. The toy hash embedding is fixed; the pretrained
  /// subword table is trained.
  std::vector<ad::Parameter*> parameters();

 private:
  ad::Var lookup(ad::Tape& tape, const Sentence& sentence);
  int bucket(const std::string& token) const;
  Eigen::RowVectorXd toy_embedding(const std::string& word) const;

  EncoderConfig config_;
  WordPieceVocab vocab_;
  int cls_ = -1;
  int sep_ = -1;
  ad::Parameter embedding_;
  ad::Parameter conv_weight_;
  ad::Parameter conv_bias_;
};

}  // namespace foal
