#pragma once

// Sentences, gold triplets, the ASTE triplet file format, transfer pairs and
// the synthetic two-domain corpus generator.

#include <atomic>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace foal {

struct Span {
  int start = 0;  // inclusive
  int end = 0;    // inclusive

  int width() const { return end - start + 1; }
  friend bool operator==(const Span&, const Span&) = default;
  friend auto operator<=>(const Span&, const Span&) = default;
};

enum class Sentiment { Positive = 0, Negative = 1, Neutral = 2 };

const char* sentiment_tag(Sentiment s);  // "POS" / "NEG" / "NEU"

struct Triplet {
  Span aspect;
  Span opinion;
  Sentiment sentiment = Sentiment::Positive;

  friend bool operator==(const Triplet&, const Triplet&) = default;
  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tokenized review. Gold triplets are held behind an accessor so that
/// reads on stripped (unlabeled) sentences can be counted.
class Sentence {
 public:
  Sentence() = default;
  Sentence(std::vector<std::string> tokens, std::string domain, std::vector<Triplet> gold = {});

  const std::vector<std::string>& tokens() const { return tokens_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& domain() const { return domain_; }
  void set_domain(std::string d) { domain_ = std::move(d); }

  bool labeled() const { return !stripped_; }
  const std::vector<Triplet>& gold() const;
  void strip_gold();

  /// Number of gold() calls made on stripped sentences, process wide.
  static std::uint64_t stripped_gold_reads();
  static void reset_stripped_gold_reads();

  friend bool operator==(const Sentence& a, const Sentence& b) {
    return a.tokens_ == b.tokens_ && a.domain_ == b.domain_ && a.gold_ == b.gold_ && a.stripped_ == b.stripped_;
  }

 private:
  std::vector<std::string> tokens_;
  std::string domain_;
  std::vector<Triplet> gold_;
  bool stripped_ = false;
  static std::atomic<std::uint64_t> stripped_reads_;
};

/// Parses `<tokens>####[(<aspect idx>, <opinion idx>, '<POS|NEG|NEU>'), ...]`.
Sentence parse_dataset_line(const std::string& line, const std::string& domain = {});
/// Canonical serialization; parse_dataset_line(serialize_sentence(s)) == s.
std::string serialize_sentence(const Sentence& s);

std::vector<Sentence> load_split(const std::string& path, const std::string& domain);
void save_split(const std::string& path, const std::vector<Sentence>& sentences);

struct Stats {
  std::size_t num_sentences = 0;
  std::size_t num_positive = 0;
  std::size_t num_neutral = 0;
  std::size_t num_negative = 0;
  friend bool operator==(const Stats&, const Stats&) = default;
};

Stats dataset_statistics(const std::vector<Sentence>& sentences);

struct DomainSplits {
  std::string domain;
  std::vector<Sentence> train;
  std::vector<Sentence> dev;
  std::vector<Sentence> test;
};

struct TransferPair {
  std::string id;  // e.g. "14res->14lap"
  std::string source_domain;
  std::string target_domain;
  std::vector<Sentence> source_train;
  std::vector<Sentence> source_dev;
  std::vector<Sentence> target_train;  // gold stripped
  std::vector<Sentence> target_dev;    // labeled, only read when selection uses it
  std::vector<Sentence> target_test;   // labeled, evaluation only
};

TransferPair build_transfer_pair(const DomainSplits& source, const DomainSplits& target);

struct SyntheticSpec {
  int n_sentences = 20;        // per domain
  int aspect_vocab = 12;       // per domain
  int opinion_vocab = 6;       // per polarity, per domain
  int filler_vocab = 10;       // per domain-specific filler list
  double domain_shift = 0.5;   // probability a filler token is domain specific
  /// Opinion words end in a polarity suffix shared by both domains, so that
  /// sentiment is recognisable from word form across the disjoint lexicons.
  bool polarity_suffixes = true;
  std::string source_domain = "synsrc";
  std::string target_domain = "syntgt";
};

struct SyntheticCorpus {
  std::vector<Sentence> source;
  std::vector<Sentence> target;
  std::vector<std::string> source_aspects;
  std::vector<std::string> target_aspects;
};

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticSpec& spec);

}  // namespace foal
