#include "cedst/embeddings.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <fstream>

using namespace cedst;

namespace {

Corpus mini_corpus() { return load_woz(testutil::fixture("woz_mini.json")); }

double cosine(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("vocabulary reserves pad/go/unk and orders by frequency") {
  Corpus c = mini_corpus();
  Vocabulary v = Vocabulary::build(c);
  CHECK(v.token(kPadIndex) == "<pad>");
  CHECK(v.token(kGoIndex) == "<go>");
  CHECK(v.token(kUnkIndex) == "<unk>");
  CHECK(v.index("no-such-token-anywhere") == kUnkIndex);
  CHECK(v.index("thai") > kUnkIndex);
  // Ontology values are covered even when never uttered.
  CHECK(v.index("postcode") > kUnkIndex);

  // "the" appears more often than "thai" in the fixture, so it sorts first.
  CHECK(v.index("the") < v.index("thai"));

  Vocabulary v2 = Vocabulary::build(c);
  CHECK(v.hash() == v2.hash());
  CHECK(v.tokens() == v2.tokens());

  Corpus other = c;
  other.ontology.slots[0].values.push_back("west");
  CHECK(Vocabulary::build(other).hash() != v.hash());
}

TEST_CASE("pretrained loader concatenates file vectors and ngram features") {
  Corpus c = mini_corpus();
  Vocabulary v = Vocabulary::build(c);
  const int ngram_dim = 16;
  EmbeddingTable t = EmbeddingTable::load_pretrained(testutil::fixture("vectors.txt"), v,
                                                     ngram_dim, 42);
  CHECK(t.dim == 3 + ngram_dim);
  CHECK(t.rows.rows() == v.size());

  // Tokens present in the file keep their vectors bit-exactly.
  Eigen::RowVectorXd thai = t.rows.row(v.index("thai"));
  CHECK(thai(0) == 0.1);
  CHECK(thai(1) == 0.2);
  CHECK(thai(2) == 0.3);
  // Absent tokens get a zero prefix but a nonzero ngram suffix.
  Eigen::RowVectorXd seafood = t.rows.row(v.index("seafood"));
  CHECK(seafood.head(3).norm() == 0.0);
  CHECK(seafood.tail(ngram_dim).norm() > 0.0);
  // PAD is pinned to zeros.
  CHECK(t.rows.row(kPadIndex).norm() == 0.0);

  // Shared character ngrams make morphological neighbours similar.
  Corpus c2 = c;
  c2.ontology.slots[2].values.push_back("moderately");
  c2.ontology.slots[2].values.push_back("xzqv");
  Vocabulary v2 = Vocabulary::build(c2);
  EmbeddingTable t2 = EmbeddingTable::load_pretrained(testutil::fixture("vectors.txt"), v2,
                                                      ngram_dim, 42);
  const double near = cosine(t2.rows.row(v2.index("moderately")).tail(ngram_dim),
                             t2.rows.row(v2.index("moderate")).tail(ngram_dim));
  const double far = cosine(t2.rows.row(v2.index("xzqv")).tail(ngram_dim),
                            t2.rows.row(v2.index("moderate")).tail(ngram_dim));
  CHECK(near > 0.5);
  CHECK(near > far);

  // Same seed, same table.
  EmbeddingTable t3 = EmbeddingTable::load_pretrained(testutil::fixture("vectors.txt"), v,
                                                      ngram_dim, 42);
  CHECK(t3.rows == t.rows);
}

TEST_CASE("pretrained loader rejects malformed files") {
  Corpus c = mini_corpus();
  Vocabulary v = Vocabulary::build(c);
  const auto tmp = std::filesystem::temp_directory_path();
  {
    std::ofstream out(tmp / "cedst_vec_bad.txt");
    out << "thai 0.1 0.2\nchinese 0.1\n";  // dimension mismatch
  }
  CHECK_THROWS_AS(EmbeddingTable::load_pretrained(tmp / "cedst_vec_bad.txt", v, 8),
                  ParseError);
  {
    std::ofstream out(tmp / "cedst_vec_nan.txt");
    out << "thai\n";  // token with no numbers
  }
  CHECK_THROWS_AS(EmbeddingTable::load_pretrained(tmp / "cedst_vec_nan.txt", v, 8),
                  ParseError);
}

TEST_CASE("seeded random table is reproducible with a zero pad row") {
  Corpus c = mini_corpus();
  Vocabulary v = Vocabulary::build(c);
  EmbeddingTable a = EmbeddingTable::seeded_random(v, 12, 7);
  EmbeddingTable b = EmbeddingTable::seeded_random(v, 12, 7);
  EmbeddingTable other = EmbeddingTable::seeded_random(v, 12, 8);
  CHECK(a.rows == b.rows);
  CHECK(a.rows != other.rows);
  CHECK(a.rows.row(kPadIndex).norm() == 0.0);
}

TEST_CASE("embed maps tokens to table rows with unk fallback") {
  Corpus c = mini_corpus();
  Vocabulary v = Vocabulary::build(c);
  EmbeddingTable t = EmbeddingTable::seeded_random(v, 6, 1);
  Mat m = embed({"thai", "wombat", "<pad>"}, v, t);
  REQUIRE(m.rows() == 3);
  CHECK(m.row(0) == t.rows.row(v.index("thai")));
  CHECK(m.row(1) == t.rows.row(kUnkIndex));
  CHECK(m.row(2).norm() == 0.0);
  CHECK(embed({}, v, t).rows() == 0);
}
