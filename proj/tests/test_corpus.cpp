#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "support.hpp"

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/errors.hpp"

using namespace ctxinfo;

TEST_CASE("sidecar rows map onto token fields") {
  auto corpus = testing::sidecar("Pierre\tPROPN\tENT1\ts0\nVinken\tPROPN\tENT1\ts0\n");
  REQUIRE(corpus.documents.size() == 1);
  const auto& doc = corpus.documents[0];
  REQUIRE(doc.size() == 2);
  CHECK(doc.tokens[0].surface == "Pierre");
  CHECK(doc.tokens[0].pos == Pos::PROPN);
  CHECK(doc.tokens[0].entity_span == "ENT1");
  CHECK(doc.tokens[1].entity_span == "ENT1");
  CHECK(doc.tokens[1].sentence_index == 0);
}

TEST_CASE("empty stream gives an empty corpus") {
  CHECK(testing::sidecar("").documents.empty());
  CHECK(testing::plain("").documents.empty());
}

TEST_CASE("vinken fixture: one document, two sentences") {
  auto corpus = testing::vinken();
  REQUIRE(corpus.documents.size() == 1);
  const auto& doc = corpus.documents[0];
  // Punctuation split: 18 + 13 words.
  CHECK(doc.size() == 31);
  CHECK(doc.sentence_count() == 2);
  CHECK(doc.tokens[2].surface == ",");
  CHECK(doc.tokens[2].pos == Pos::PUNCT);
  CHECK(doc.tokens[18].sentence_index == 1);

  auto text = testing::vinken_plain();
  REQUIRE(text.documents.size() == 1);
  CHECK(text.documents[0].size() == 26);
  CHECK(text.documents[0].sentence_count() == 2);
  CHECK_FALSE(text.annotated);
  CHECK(text.documents[0].tokens[0].pos == Pos::OTHER);
}

TEST_CASE("blank lines separate documents") {
  auto corpus = testing::sidecar("a\tDET\t-\ts0\n\nb\tNOUN\t-\ts0\nc\tNOUN\t-\ts1\n");
  REQUIRE(corpus.documents.size() == 2);
  CHECK(corpus.documents[1].sentence_count() == 2);
  CHECK(corpus.documents[0].doc_id != corpus.documents[1].doc_id);
}

TEST_CASE("sidecar round trip is byte-identical") {
  const std::string original = testing::slurp(testing::fixture("vinken.tsv")) +
                               "\nx\tX\t-\tq7\ny\tSYM\tE\tq7\n";
  auto corpus = testing::sidecar(original);
  std::ostringstream out;
  write_sidecar(out, corpus);
  CHECK(out.str() == original);
}

TEST_CASE("ingest errors") {
  SUBCASE("malformed row names the line") {
    try {
      testing::sidecar("a\tDET\t-\ts0\nbroken row\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }
  SUBCASE("unknown tag is named") {
    try {
      testing::sidecar("a\tNOUNISH\t-\ts0\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("NOUNISH") != std::string::npos);
    }
  }
  SUBCASE("overlapping entity spans") {
    CHECK_THROWS_AS(testing::sidecar("a\tNOUN\tE1\ts0\nb\tNOUN\tE2\ts0\n"
                                     "c\tNOUN\tE1\ts0\n"),
                    ParseError);
  }
  SUBCASE("reserved tokens are rejected") {
    CHECK_THROWS_AS(testing::sidecar("<pad>\tX\t-\ts0\n"), ParseError);
    CHECK_THROWS_AS(testing::plain("a <sep> b\n"), ParseError);
  }
  SUBCASE("sentence ids may not resume") {
    CHECK_THROWS_AS(testing::sidecar("a\tNOUN\t-\ts0\nb\tNOUN\t-\ts1\n"
                                     "c\tNOUN\t-\ts0\n"),
                    ParseError);
  }
  SUBCASE("file errors carry the path") {
    try {
      const auto dir = testing::scratch("corpus");
      std::ofstream(dir / "bad.tsv") << "x\tBAD\t-\ts\n";
      load_corpus_file((dir / "bad.tsv").string(), false, Split::train);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("bad.tsv") != std::string::npos);
      CHECK(e.line() == 1);
    }
  }
}

TEST_CASE("vocabulary counts the training split only") {
  auto corpus = testing::plain("a a b\n");
  auto vocab = build_vocabulary(corpus);
  CHECK(vocab.total_tokens == 3);
  CHECK(vocab.count("a") == 2);
  CHECK(vocab.count("b") == 1);
  CHECK(vocab.count("zzz") == 0);

  auto held_out = testing::plain("a a b\n", Split::validation);
  CHECK(build_vocabulary(held_out).total_tokens == 0);
}

namespace {
Vocabulary counts(std::initializer_list<std::pair<const char*, std::uint64_t>> c) {
  Vocabulary v;
  for (auto [w, n] : c) {
    v.type_counts[w] = n;
    v.total_tokens += n;
  }
  return v;
}
}  // namespace

TEST_CASE("frequency partition examples") {
  auto p = partition_frequency(counts({{"the", 80}, {"cat", 15}, {"zyx", 5}}), 0.8);
  CHECK(p.common == std::set<std::string, std::less<>>{"the"});
  CHECK(p.rare == std::set<std::string, std::less<>>{"cat", "zyx"});

  auto q = partition_frequency(counts({{"a", 50}, {"b", 50}}), 0.8);
  CHECK(q.common.size() == 2);
  CHECK(q.rare.empty());

  // Ties go lexicographically: "a" enters the prefix before "b".
  auto r = partition_frequency(counts({{"b", 50}, {"a", 50}}), 0.5);
  CHECK(r.common == std::set<std::string, std::less<>>{"a"});

  CHECK(p.is_common("the"));
  CHECK_FALSE(p.is_common("never-seen"));
}

TEST_CASE("frequency partition errors") {
  CHECK_THROWS(partition_frequency(Vocabulary{}, 0.8));
  auto v = counts({{"a", 1}});
  CHECK_THROWS(partition_frequency(v, 0.0));
  CHECK_THROWS(partition_frequency(v, 1.0));
}

TEST_CASE("frequency partition properties on random vocabularies") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    Vocabulary v;
    const int types = 1 + static_cast<int>(rng() % 40);
    for (int t = 0; t < types; ++t) {
      const std::uint64_t c = 1 + rng() % 20;
      v.type_counts["w" + std::to_string(t)] = c;
      v.total_tokens += c;
    }
    const double threshold = 0.05 + 0.9 * static_cast<double>(rng() % 1000) / 1000.0;
    auto p = partition_frequency(v, threshold);
    CHECK(p.common.size() + p.rare.size() == v.type_counts.size());
    std::uint64_t mass = 0;
    std::uint64_t least = UINT64_MAX;
    for (const auto& w : p.common) {
      mass += v.count(w);
      least = std::min(least, v.count(w));
      CHECK(p.rare.count(w) == 0);
    }
    CHECK(static_cast<double>(mass) >= threshold * v.total_tokens);
    CHECK(static_cast<double>(mass - least) < threshold * v.total_tokens);
    // No rare type outranks a common one.
    for (const auto& w : p.rare) CHECK(v.count(w) <= least);
    CHECK(partition_frequency(v, threshold).common == p.common);
  }
}
