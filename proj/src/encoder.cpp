#include "foal/encoder.hpp"

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace foal {

namespace fs = std::filesystem;
using ad::Matrix;
using ad::Var;

// ---- WordPiece -------------------------------------------------------------

WordPieceVocab::WordPieceVocab(std::vector<std::string> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t i = 0; i < pieces_.size(); ++i) index_.emplace(pieces_[i], static_cast<int>(i));
  unk_ = id("[UNK]");
}

WordPieceVocab WordPieceVocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EncoderError("cannot open vocabulary '" + path + "'");
  std::vector<std::string> pieces;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pieces.push_back(line);
  }
  if (pieces.empty()) throw EncoderError("empty vocabulary '" + path + "'");
  return WordPieceVocab(std::move(pieces));
}

int WordPieceVocab::id(const std::string& piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? -1 : it->second;
}

std::vector<int> WordPieceVocab::tokenize_word(const std::string& word, bool lowercase) const {
  std::string w = word;
  if (lowercase) {
    for (char& ch : w) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  // Split ASCII punctuation into standalone pieces, as BERT's basic tokenizer does.
  std::vector<std::string> chunks;
  std::string cur;
  for (char ch : w) {
    if (std::ispunct(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) chunks.push_back(cur);
      chunks.emplace_back(1, ch);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) chunks.push_back(cur);

  std::vector<int> out;
  for (const auto& chunk : chunks) {
    std::vector<int> pieces;
    std::size_t start = 0;
    bool bad = chunk.size() > 100;
    while (!bad && start < chunk.size()) {
      std::size_t end = chunk.size();
      int found = -1;
      while (start < end) {
        std::string sub = chunk.substr(start, end - start);
        if (start > 0) sub = "##" + sub;
        found = id(sub);
        if (found >= 0) break;
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (bad) {
      if (unk_ < 0) throw EncoderError("vocabulary has no [UNK] entry for '" + chunk + "'");
      out.push_back(unk_);
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  if (out.empty()) {
    if (unk_ < 0) throw EncoderError("vocabulary has no [UNK] entry for '" + word + "'");
    out.push_back(unk_);
  }
  return out;
}

std::string resolve_pretrained(const std::string& identifier) {
  if (identifier.empty()) throw EncoderError("pretrained encoder needs a model identifier");
  std::error_code ec;
  if (fs::is_directory(identifier, ec)) return identifier;
  fs::path hub;
  if (const char* env = std::getenv("FOAL_MODEL_HUB")) {
    hub = env;
  } else if (const char* home = std::getenv("HOME")) {
    hub = fs::path(home) / ".cache" / "foal" / "hub";
  }
  fs::path dir = hub / identifier;
  if (hub.empty() || !fs::is_directory(dir, ec)) {
    throw EncoderError("unknown pretrained model '" + identifier + "'");
  }
  return dir.string();
}

namespace {

Matrix load_embedding_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EncoderError("cannot open embedding table '" + path + "'");
  long rows = 0, cols = 0;
  if (!(in >> rows >> cols) || rows <= 0 || cols <= 0) throw EncoderError("bad embedding header in '" + path + "'");
  Matrix m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    for (long c = 0; c < cols; ++c) {
      if (!(in >> m(r, c))) throw EncoderError("truncated embedding table '" + path + "'");
    }
  }
  return m;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Matrix xavier(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = u(rng);
  return m;
}

}  // namespace

// ---- alignment --------------------------------------------------------------

namespace {
std::vector<int> first_subwords(int word_count, Eigen::Index subword_count,
                                const std::vector<std::vector<int>>& map) {
  if (static_cast<int>(map.size()) != word_count) {
    throw EncoderError("subword map covers " + std::to_string(map.size()) + " words, expected " +
                       std::to_string(word_count));
  }
  std::vector<int> rows;
  for (int w = 0; w < word_count; ++w) {
    if (map[w].empty()) throw EncoderError("word " + std::to_string(w) + " has no subword");
    int first = map[w].front();
    if (first < 0 || first >= subword_count) throw EncoderError("subword index out of range for word " + std::to_string(w));
    rows.push_back(first);
  }
  return rows;
}
}  // namespace

Matrix align_subwords(int word_count, const Matrix& subword_vectors, const std::vector<std::vector<int>>& map) {
  auto rows = first_subwords(word_count, subword_vectors.rows(), map);
  Matrix out(word_count, subword_vectors.cols());
  for (int w = 0; w < word_count; ++w) out.row(w) = subword_vectors.row(rows[w]);
  return out;
}

Var align_subwords(Var subword_vectors, const std::vector<std::vector<int>>& map) {
  auto rows = first_subwords(static_cast<int>(map.size()), subword_vectors.rows(), map);
  return ad::gather_rows(subword_vectors, rows);
}

// ---- encoder ----------------------------------------------------------------

Encoder::Encoder(const EncoderConfig& config) : config_(config) {
  if (config_.hidden_size <= 0) throw EncoderError("hidden_size must be positive");
  const int d = config_.hidden_size;
  std::mt19937_64 rng(splitmix64(config_.seed));

  Matrix table;
  if (config_.kind == "toy") {
    if (config_.buckets <= 0) throw EncoderError("toy encoder needs a positive bucket count");
    std::normal_distribution<double> g(0.0, 0.5);
    table.resize(config_.buckets, d);
    for (Eigen::Index c = 0; c < table.cols(); ++c)
      for (Eigen::Index r = 0; r < table.rows(); ++r) table(r, c) = g(rng);
  } else if (config_.kind == "pretrained") {
    fs::path dir = resolve_pretrained(config_.pretrained_name);
    vocab_ = WordPieceVocab::load((dir / "vocab.txt").string());
    table = load_embedding_table((dir / "embeddings.txt").string());
    if (static_cast<std::size_t>(table.rows()) != vocab_.size()) {
      throw EncoderError("embedding rows do not match vocabulary size for '" + config_.pretrained_name + "'");
    }
    if (table.cols() != d) {
      throw EncoderError("pretrained embeddings have width " + std::to_string(table.cols()) +
                         " but hidden_size is " + std::to_string(d));
    }
    cls_ = vocab_.id("[CLS]");
    sep_ = vocab_.id("[SEP]");
  } else {
    throw EncoderError("unknown encoder kind '" + config_.kind + "'");
  }
  embedding_ = ad::Parameter("encoder.embedding", ad::ParamGroup::Encoder, std::move(table));
  conv_weight_ = ad::Parameter("encoder.conv_weight", ad::ParamGroup::Encoder, xavier(rng, 3 * d, d));
  conv_bias_ = ad::Parameter("encoder.conv_bias", ad::ParamGroup::Encoder, Matrix::Zero(1, d));
}

int Encoder::bucket(const std::string& token) const {
  std::uint64_t h = 1469598103934665603ULL ^ splitmix64(config_.seed);
  for (unsigned char ch : token) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return static_cast<int>(splitmix64(h) % static_cast<std::uint64_t>(config_.buckets));
}

Eigen::RowVectorXd Encoder::toy_embedding(const std::string& word) const {
  Eigen::RowVectorXd v = embedding_.value.row(bucket(word));
  const std::string marked = "<" + word + ">";
  int units = 1;
  for (std::size_t len = 3; len <= 4; ++len) {
    for (std::size_t i = 0; i + len <= marked.size(); ++i) {
      v += embedding_.value.row(bucket(marked.substr(i, len)));
      ++units;
    }
  }
  return v / std::sqrt(static_cast<double>(units));
}

Var Encoder::encode(ad::Tape& tape, const Sentence& sentence) {
  const int n = sentence.size();
  if (n == 0) throw std::invalid_argument("encode: empty sentence");

  std::vector<int> ids;
  std::vector<std::vector<int>> word_map;
  if (config_.kind == "toy") {
    ids.resize(static_cast<std::size_t>(n));
  } else {
    if (cls_ >= 0) ids.push_back(cls_);
    for (const auto& tok : sentence.tokens()) {
      std::vector<int> positions;
      for (int piece : vocab_.tokenize_word(tok, config_.lowercase)) {
        positions.push_back(static_cast<int>(ids.size()));
        ids.push_back(piece);
      }
      word_map.push_back(std::move(positions));
    }
    if (sep_ >= 0) ids.push_back(sep_);
  }

  Var e;
  if (config_.kind == "toy") {
    Matrix rows(n, config_.hidden_size);
    for (int i = 0; i < n; ++i) rows.row(i) = toy_embedding(sentence.tokens()[static_cast<std::size_t>(i)]);
    e = tape.constant(std::move(rows));
  } else {
    e = ad::gather_rows(tape.param(embedding_), ids);
  }
  std::vector<int> prev(ids.size()), next(ids.size());
  const int m = static_cast<int>(ids.size());
  for (int i = 0; i < m; ++i) {
    prev[i] = i - 1;
    next[i] = i + 1 < m ? i + 1 : -1;
  }
  Var window = ad::concat_cols({ad::gather_rows(e, prev), e, ad::gather_rows(e, next)});
  Var mixed = ad::tanh(ad::add_row(ad::matmul(window, tape.param(conv_weight_)), tape.param(conv_bias_)));
  if (config_.kind == "toy") return mixed;
  return align_subwords(ad::add(e, mixed), word_map);
}

std::vector<ad::Parameter*> Encoder::parameters() {
  if (config_.kind == "toy") return {&conv_weight_, &conv_bias_};
  return {&embedding_, &conv_weight_, &conv_bias_};
}

Matrix Encoder::encode(const Sentence& sentence) const {
  ad::Tape tape;
  return const_cast<Encoder*>(this)->encode(tape, sentence).value();
}

}  // namespace foal
