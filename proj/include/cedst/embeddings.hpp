#pragma once

#include "cedst/corpus.hpp"
#include "cedst/tape.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace cedst {

inline constexpr int kPadIndex = 0;
inline constexpr int kGoIndex = 1;
inline constexpr int kUnkIndex = 2;

class Vocabulary {
 public:
  static Vocabulary build(const Corpus& c);

  int index(const std::string& token) const;  // UNK index for unseen tokens
  const std::string& token(int index) const { return tokens_.at(index); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // FNV-1a over the token list; checkpoints refuse to load on mismatch.
  std::uint64_t hash() const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

enum class EmbeddingSource { PretrainedCharNgram, SeededRandom };

// Fixed word representations; rows are never updated by training.
struct EmbeddingTable {
  int dim = 0;
  Mat rows;  // |V| x dim
  EmbeddingSource source = EmbeddingSource::SeededRandom;

  // Concatenation of pretrained vectors (zero when absent from the file)
  // and hashed character n-gram vectors (n in {2,3,4}).
  static EmbeddingTable load_pretrained(const std::filesystem::path& path,
                                        const Vocabulary& vocab, int ngram_dim,
                                        std::uint64_t seed = 42);
  static EmbeddingTable seeded_random(const Vocabulary& vocab, int dim, std::uint64_t seed);
};

// Row t is the table row of tokens[t]; a |tokens| x dim matrix.
Mat embed(const std::vector<std::string>& tokens, const Vocabulary& vocab,
          const EmbeddingTable& table);

}  // namespace cedst
