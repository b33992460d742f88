#include "foal/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace foal {

std::atomic<std::uint64_t> Sentence::stripped_reads_{0};

const char* sentiment_tag(Sentiment s) {
  switch (s) {
    case Sentiment::Positive: return "POS";
    case Sentiment::Negative: return "NEG";
    case Sentiment::Neutral: return "NEU";
  }
  return "?";
}

Sentence::Sentence(std::vector<std::string> tokens, std::string domain, std::vector<Triplet> gold)
    : tokens_(std::move(tokens)), domain_(std::move(domain)), gold_(std::move(gold)) {
  if (tokens_.empty()) throw ParseError("sentence has no tokens");
  const int n = size();
  for (const Triplet& t : gold_) {
    for (const Span& s : {t.aspect, t.opinion}) {
      if (s.start < 0 || s.start > s.end || s.end >= n) {
        throw ParseError("triplet span (" + std::to_string(s.start) + "," + std::to_string(s.end) +
                         ") outside sentence of " + std::to_string(n) + " tokens");
      }
    }
  }
}

const std::vector<Triplet>& Sentence::gold() const {
  if (stripped_) stripped_reads_.fetch_add(1, std::memory_order_relaxed);
  return gold_;
}

void Sentence::strip_gold() {
  gold_.clear();
  stripped_ = true;
}

std::uint64_t Sentence::stripped_gold_reads() { return stripped_reads_.load(); }
void Sentence::reset_stripped_gold_reads() { stripped_reads_.store(0); }

namespace {

class Cursor {
 public:
  explicit Cursor(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip_ws();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  void expect(char c) {
    skip_ws();
    if (pos_ >= s_.size() || s_[pos_] != c) {
      throw ParseError(std::string("expected '") + c + "' at column " + std::to_string(pos_));
    }
    ++pos_;
  }
  int integer() {
    skip_ws();
    std::size_t begin = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (begin == pos_) throw ParseError("expected token index at column " + std::to_string(begin));
    if (pos_ - begin > 6) throw ParseError("token index too large at column " + std::to_string(begin));
    return std::stoi(std::string(s_.substr(begin, pos_ - begin)));
  }
  std::string quoted() {
    skip_ws();
    if (pos_ >= s_.size() || (s_[pos_] != '\'' && s_[pos_] != '"')) {
      throw ParseError("expected quoted polarity at column " + std::to_string(pos_));
    }
    char q = s_[pos_++];
    std::size_t begin = pos_;
    while (pos_ < s_.size() && s_[pos_] != q) ++pos_;
    if (pos_ >= s_.size()) throw ParseError("unterminated polarity string");
    std::string out(s_.substr(begin, pos_ - begin));
    ++pos_;
    return out;
  }
  bool at_end() {
    skip_ws();
    return pos_ >= s_.size();
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

Span parse_index_run(Cursor& c, int n, const char* role) {
  std::vector<int> idx;
  c.expect('[');
  if (!c.peek(']')) {
    idx.push_back(c.integer());
    while (c.peek(',')) {
      c.expect(',');
      idx.push_back(c.integer());
    }
  }
  c.expect(']');
  if (idx.empty()) throw ParseError(std::string("empty ") + role + " index list");
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (idx[k] != idx[k - 1] + 1) {
      throw ParseError(std::string("non-contiguous ") + role + " indices " + std::to_string(idx[k - 1]) + ", " +
                       std::to_string(idx[k]));
    }
  }
  if (idx.back() >= n) {
    throw ParseError(std::string(role) + " index " + std::to_string(idx.back()) + " out of range for " +
                     std::to_string(n) + " tokens");
  }
  return Span{idx.front(), idx.back()};
}

Sentiment parse_polarity(const std::string& tag) {
  if (tag == "POS") return Sentiment::Positive;
  if (tag == "NEG") return Sentiment::Negative;
  if (tag == "NEU") return Sentiment::Neutral;
  throw ParseError("unknown polarity tag '" + tag + "'");
}

}  // namespace

Sentence parse_dataset_line(const std::string& line, const std::string& domain) {
  static const std::string kSep = "####";
  auto sep = line.find(kSep);
  if (sep == std::string::npos) throw ParseError("missing '####' separator");
  if (line.find(kSep, sep + kSep.size()) != std::string::npos) throw ParseError("more than one '####' separator");

  std::vector<std::string> tokens;
  {
    std::istringstream in(line.substr(0, sep));
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
  }
  if (tokens.empty()) throw ParseError("empty sentence");
  const int n = static_cast<int>(tokens.size());

  std::string rest = line.substr(sep + kSep.size());
  Cursor c(rest);
  std::vector<Triplet> triplets;
  c.expect('[');
  if (!c.peek(']')) {
    while (true) {
      c.expect('(');
      Triplet t;
      t.aspect = parse_index_run(c, n, "aspect");
      c.expect(',');
      t.opinion = parse_index_run(c, n, "opinion");
      c.expect(',');
      t.sentiment = parse_polarity(c.quoted());
      c.expect(')');
      triplets.push_back(t);
      if (!c.peek(',')) break;
      c.expect(',');
    }
  }
  c.expect(']');
  if (!c.at_end()) throw ParseError("trailing characters after triplet list");
  return Sentence(std::move(tokens), domain, std::move(triplets));
}

std::string serialize_sentence(const Sentence& s) {
  std::ostringstream out;
  for (int i = 0; i < s.size(); ++i) out << (i ? " " : "") << s.tokens()[i];
  out << "####[";
  const auto& gold = s.gold();
  auto run = [&](const Span& sp) {
    out << '[';
    for (int k = sp.start; k <= sp.end; ++k) out << (k > sp.start ? ", " : "") << k;
    out << ']';
  };
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (k) out << ", ";
    out << '(';
    run(gold[k].aspect);
    out << ", ";
    run(gold[k].opinion);
    out << ", '" << sentiment_tag(gold[k].sentiment) << "')";
  }
  out << ']';
  return out.str();
}

std::vector<Sentence> load_split(const std::string& path, const std::string& domain) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open dataset file '" + path + "'");
  std::vector<Sentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(parse_dataset_line(line, domain));
    } catch (const ParseError& e) {
      throw ParseError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_split(const std::string& path, const std::vector<Sentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw std::ios_base::failure("cannot write dataset file '" + path + "'");
  for (const auto& s : sentences) out << serialize_sentence(s) << '\n';
  if (!out) throw std::ios_base::failure("write failed for '" + path + "'");
}

Stats dataset_statistics(const std::vector<Sentence>& sentences) {
  Stats st;
  st.num_sentences = sentences.size();
  for (const auto& s : sentences) {
    for (const auto& t : s.gold()) {
      switch (t.sentiment) {
        case Sentiment::Positive: ++st.num_positive; break;
        case Sentiment::Neutral: ++st.num_neutral; break;
        case Sentiment::Negative: ++st.num_negative; break;
      }
    }
  }
  return st;
}

TransferPair build_transfer_pair(const DomainSplits& source, const DomainSplits& target) {
  if (source.domain.empty() || target.domain.empty()) throw ConfigError("transfer pair needs two domain tags");
  if (source.domain == target.domain) {
    throw ConfigError("source and target domain are both '" + source.domain + "'");
  }
  TransferPair p;
  p.id = source.domain + "->" + target.domain;
  p.source_domain = source.domain;
  p.target_domain = target.domain;
  auto retag = [](std::vector<Sentence> v, const std::string& d) {
    for (auto& s : v) s.set_domain(d);
    return v;
  };
  p.source_train = retag(source.train, source.domain);
  p.source_dev = retag(source.dev, source.domain);
  p.target_train = retag(target.train, target.domain);
  for (auto& s : p.target_train) s.strip_gold();
  p.target_dev = retag(target.dev, target.domain);
  p.target_test = retag(target.test, target.domain);
  return p;
}

// ---- synthetic corpus ------------------------------------------------------

namespace {

const std::vector<std::string>& shared_fillers() {
  static const std::vector<std::string> words = {"the", "was", "is", "and", "but", "i",
                                                 "found", "really", "here", "overall", "very", "my"};
  return words;
}

class WordFactory {
 public:
  explicit WordFactory(std::mt19937_64& rng) : rng_(rng) {
    for (const auto& w : shared_fillers()) used_.insert(w);
  }

  std::string make(const std::string& suffix = {}) {
    static const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh"};
    static const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
    std::uniform_int_distribution<int> onset(0, 15), vowel(0, 6), syll(2, 3);
    for (;;) {
      std::string w;
      int k = syll(rng_);
      for (int i = 0; i < k; ++i) w += std::string(kOnsets[onset(rng_)]) + kVowels[vowel(rng_)];
      w += suffix;
      if (used_.insert(w).second) return w;
    }
  }

 private:
  std::mt19937_64& rng_;
  std::set<std::string> used_;
};

struct Lexicon {
  std::vector<std::vector<std::string>> aspects;  // each entry 1 or 2 tokens
  std::vector<std::string> opinions[3];           // indexed by Sentiment
  std::vector<std::string> fillers;
};

Lexicon make_lexicon(WordFactory& words, std::mt19937_64& rng, const SyntheticSpec& spec) {
  Lexicon lex;
  std::bernoulli_distribution two_word(0.3);
  for (int i = 0; i < spec.aspect_vocab; ++i) {
    std::vector<std::string> a{words.make()};
    if (two_word(rng)) a.push_back(words.make());
    lex.aspects.push_back(a);
  }
  static const char* kPolaritySuffix[] = {"vell", "grim", "mezz"};  // indexed by Sentiment
  for (int p = 0; p < 3; ++p) {
    const std::string suffix = spec.polarity_suffixes ? kPolaritySuffix[p] : "";
    for (int i = 0; i < spec.opinion_vocab; ++i) lex.opinions[p].push_back(words.make(suffix));
  }
  for (int i = 0; i < spec.filler_vocab; ++i) lex.fillers.push_back(words.make());
  return lex;
}

class SentenceBuilder {
 public:
  void word(const std::string& w) { tokens.push_back(w); }
  Span phrase(const std::vector<std::string>& ws) {
    int start = static_cast<int>(tokens.size());
    for (const auto& w : ws) tokens.push_back(w);
    return Span{start, static_cast<int>(tokens.size()) - 1};
  }
  std::vector<std::string> tokens;
  std::vector<Triplet> triplets;
};

std::vector<Sentence> generate_domain(std::mt19937_64& rng, const Lexicon& lex, const SyntheticSpec& spec,
                                      const std::string& domain) {
  std::uniform_int_distribution<std::size_t> pick_aspect(0, lex.aspects.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_op(0, lex.opinions[0].size() - 1);
  std::uniform_int_distribution<std::size_t> pick_shared(0, shared_fillers().size() - 1);
  std::uniform_int_distribution<std::size_t> pick_filler(0, lex.fillers.empty() ? 0 : lex.fillers.size() - 1);
  std::discrete_distribution<int> pick_pol({0.55, 0.3, 0.15});
  std::uniform_int_distribution<int> pick_template(0, 3);
  std::bernoulli_distribution domain_filler(spec.domain_shift), add_prefix(0.5);

  auto filler = [&]() -> std::string {
    if (!lex.fillers.empty() && domain_filler(rng)) return lex.fillers[pick_filler(rng)];
    return shared_fillers()[pick_shared(rng)];
  };
  auto opinion = [&](Sentiment& s) {
    s = static_cast<Sentiment>(pick_pol(rng));
    return lex.opinions[static_cast<int>(s)][pick_op(rng)];
  };

  std::vector<Sentence> out;
  for (int k = 0; k < spec.n_sentences; ++k) {
    SentenceBuilder b;
    if (add_prefix(rng)) b.word(filler());
    Sentiment s1, s2;
    switch (pick_template(rng)) {
      case 0: {  // the A was O
        b.word("the");
        Span a = b.phrase(lex.aspects[pick_aspect(rng)]);
        b.word("was");
        Span o = b.phrase({opinion(s1)});
        b.triplets.push_back({a, o, s1});
        break;
      }
      case 1: {  // really O A here
        b.word("really");
        Span o = b.phrase({opinion(s1)});
        Span a = b.phrase(lex.aspects[pick_aspect(rng)]);
        b.word(filler());
        b.triplets.push_back({a, o, s1});
        break;
      }
      case 2: {  // the A is O but the A2 is O2
        b.word("the");
        Span a1 = b.phrase(lex.aspects[pick_aspect(rng)]);
        b.word("is");
        Span o1 = b.phrase({opinion(s1)});
        b.word("but");
        b.word("the");
        Span a2 = b.phrase(lex.aspects[pick_aspect(rng)]);
        b.word("is");
        Span o2 = b.phrase({opinion(s2)});
        b.triplets.push_back({a1, o1, s1});
        b.triplets.push_back({a2, o2, s2});
        break;
      }
      default: {  // i found the A O and F
        b.word("i");
        b.word("found");
        b.word("the");
        Span a = b.phrase(lex.aspects[pick_aspect(rng)]);
        Span o = b.phrase({opinion(s1)});
        b.word("and");
        b.word(filler());
        b.triplets.push_back({a, o, s1});
        break;
      }
    }
    std::sort(b.triplets.begin(), b.triplets.end());
    out.emplace_back(std::move(b.tokens), domain, std::move(b.triplets));
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(std::uint64_t seed, const SyntheticSpec& spec) {
  if (spec.n_sentences < 0 || spec.aspect_vocab < 1 || spec.opinion_vocab < 1 || spec.filler_vocab < 0 ||
      spec.domain_shift < 0.0 || spec.domain_shift > 1.0) {
    throw ConfigError("invalid synthetic corpus spec");
  }
  if (spec.source_domain == spec.target_domain) throw ConfigError("synthetic domains must differ");
  std::mt19937_64 rng(seed);
  WordFactory words(rng);
  Lexicon src = make_lexicon(words, rng, spec);
  Lexicon tgt = make_lexicon(words, rng, spec);

  SyntheticCorpus c;
  c.source = generate_domain(rng, src, spec, spec.source_domain);
  c.target = generate_domain(rng, tgt, spec, spec.target_domain);
  auto flatten = [](const Lexicon& l) {
    std::vector<std::string> v;
    for (const auto& a : l.aspects) v.insert(v.end(), a.begin(), a.end());
    return v;
  };
  c.source_aspects = flatten(src);
  c.target_aspects = flatten(tgt);
  return c;
}

}  // namespace foal
