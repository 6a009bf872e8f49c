#include "cedst/embeddings.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

namespace cedst {

namespace {

const char* kReserved[] = {"<pad>", "<go>", "<unk>"};

std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// Deterministic standard normals via a seeded generator and Box-Muller.
struct NormalGen {
  std::mt19937_64 rng;
  explicit NormalGen(std::uint64_t seed) : rng(seed) {}
  double operator()() {
    const double u1 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
    const double u2 = (static_cast<double>(rng() >> 11) + 0.5) / 9007199254740992.0;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

}  // namespace

Vocabulary Vocabulary::build(const Corpus& c) {
  std::map<std::string, std::size_t> counts;
  auto count_all = [&](const std::vector<std::string>& toks) {
    for (const auto& t : toks) ++counts[t];
  };
  for (const auto& [name, dialogues] : c.splits)
    for (const auto& d : dialogues)
      for (const auto& t : d.turns) {
        count_all(t.user_utterance);
        for (const auto& a : t.system_actions) count_all(a.tokens());
      }
  for (const auto& slot : c.ontology.slots) {
    count_all(tokenize(slot.name));
    for (const auto& v : slot.values) count_all(tokenize(v));
    for (const auto& v : slot.specials) count_all(tokenize(v));
  }

  Vocabulary v;
  for (const char* r : kReserved) {
    v.index_[r] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(r);
    counts.erase(r);
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(counts.begin(), counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, n] : ordered) {
    v.index_[tok] = static_cast<int>(v.tokens_.size());
    v.tokens_.push_back(tok);
  }
  return v;
}

int Vocabulary::index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkIndex : it->second;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto& t : tokens_) {
    h = fnv1a(t, h);
    h = fnv1a("\n", h);
  }
  return h;
}

EmbeddingTable EmbeddingTable::load_pretrained(const std::filesystem::path& path,
                                               const Vocabulary& vocab, int ngram_dim,
                                               std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::unordered_map<std::string, std::vector<double>> vectors;
  int dim = -1;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string tok;
    iss >> tok;
    std::vector<double> vec;
    double x;
    while (iss >> x) vec.push_back(x);
    if (vec.empty())
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed line");
    if (dim < 0) dim = static_cast<int>(vec.size());
    if (static_cast<int>(vec.size()) != dim)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": dimension mismatch (" + std::to_string(vec.size()) + " vs " +
                       std::to_string(dim) + ")");
    vectors[canonicalize(tok)] = std::move(vec);
  }
  if (dim < 0) throw ParseError(path.string() + ": no vectors");

  // One fixed vector per hash bucket, unit-variance, seeded.
  Mat buckets(ngram_dim, ngram_dim);
  NormalGen gen(seed);
  for (int j = 0; j < ngram_dim; ++j)
    for (int i = 0; i < ngram_dim; ++i) buckets(i, j) = gen();

  EmbeddingTable table;
  table.dim = dim + ngram_dim;
  table.source = EmbeddingSource::PretrainedCharNgram;
  table.rows = Mat::Zero(vocab.size(), table.dim);
  for (int i = 0; i < vocab.size(); ++i) {
    if (i == kPadIndex) continue;  // PAD pinned to zeros
    const std::string& tok = vocab.token(i);
    auto it = vectors.find(tok);
    if (it != vectors.end())
      for (int j = 0; j < dim; ++j) table.rows(i, j) = it->second[j];
    Eigen::VectorXd suffix = Eigen::VectorXd::Zero(ngram_dim);
    int n_grams = 0;
    for (int n = 2; n <= 4; ++n) {
      if (static_cast<int>(tok.size()) < n) continue;
      for (std::size_t at = 0; at + n <= tok.size(); ++at) {
        const int bucket = static_cast<int>(fnv1a(tok.substr(at, n)) % ngram_dim);
        suffix += buckets.col(bucket);
        ++n_grams;
      }
    }
    if (n_grams > 0) suffix /= static_cast<double>(n_grams);
    table.rows.row(i).segment(dim, ngram_dim) = suffix.transpose();
  }
  return table;
}

EmbeddingTable EmbeddingTable::seeded_random(const Vocabulary& vocab, int dim,
                                             std::uint64_t seed) {
  EmbeddingTable table;
  table.dim = dim;
  table.source = EmbeddingSource::SeededRandom;
  table.rows = Mat::Zero(vocab.size(), dim);
  NormalGen gen(seed);
  for (int i = 0; i < vocab.size(); ++i) {
    if (i == kPadIndex) continue;
    for (int j = 0; j < dim; ++j) table.rows(i, j) = 0.4 * gen();
  }
  return table;
}

Mat embed(const std::vector<std::string>& tokens, const Vocabulary& vocab,
          const EmbeddingTable& table) {
  Mat out(static_cast<int>(tokens.size()), table.dim);
  for (std::size_t t = 0; t < tokens.size(); ++t)
    out.row(t) = table.rows.row(vocab.index(tokens[t]));
  return out;
}

}  // namespace cedst
