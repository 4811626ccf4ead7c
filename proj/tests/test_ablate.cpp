#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "shuffle_oracle.hpp"
#include "support.hpp"

#include "ctxinfo/ablate.hpp"
#include "ctxinfo/errors.hpp"

using namespace ctxinfo;

namespace {

const ReservedTokens kReserved;

Segment whole(const AnnotatedCorpus& corpus) {
  return Segment(corpus.documents.at(0).tokens);
}

std::string kept(const AblatedSegment& s) {
  return non_padding_suffix(s, kReserved);
}

AnnotatedDocument tagged(std::initializer_list<std::pair<const char*, Pos>> words) {
  AnnotatedDocument doc;
  doc.doc_id = "d";
  for (auto [w, p] : words) {
    WordToken t;
    t.surface = w;
    t.pos = p;
    t.sentence_id = "s0";
    doc.tokens.push_back(t);
  }
  return doc;
}

AnnotatedDocument numbered(std::size_t length) {
  AnnotatedDocument doc;
  doc.doc_id = "n";
  for (std::size_t i = 0; i < length; ++i) {
    WordToken t;
    t.surface = "w" + std::to_string(i);
    t.sentence_id = "s" + std::to_string(i / 7);
    t.sentence_index = i / 7;
    doc.tokens.push_back(t);
  }
  return doc;
}

std::size_t leading_padding(const AblatedSegment& s) {
  std::size_t n = 0;
  while (n < s.words.size() && s.words[n] == kReserved.padding) ++n;
  return n;
}

}  // namespace

TEST_CASE("Vinken fixture: part-of-speech filters") {
  auto corpus = testing::vinken();
  auto seg = whole(corpus);
  CHECK(kept(pos_filter(seg, pos_sets::nouns(), kReserved)) ==
        "Pierre Vinken years board director Nov. Mr. Vinken chairman Elsevier "
        "N.V. publishing group");
  CHECK(kept(pos_filter(seg, pos_sets::nouns_verbs(), kReserved)) ==
        "Pierre Vinken years will join board director Nov. Mr. Vinken chairman "
        "Elsevier N.V. publishing group");
  CHECK(kept(pos_filter(seg, pos_sets::nouns_verbs_adjectives(), kReserved)) ==
        "Pierre Vinken years old will join board nonexecutive director Nov. Mr. "
        "Vinken chairman Elsevier N.V. Dutch publishing group");
  CHECK(kept(pos_filter(seg, pos_sets::content_words(), kReserved)) ==
        "Pierre Vinken years old will join board nonexecutive director Nov. Mr. "
        "Vinken chairman Elsevier N.V. Dutch publishing group");
  CHECK(kept(pos_filter(seg, pos_sets::function_words(), kReserved)) ==
        ", 61 , the as a 29 . is of , the .");
}

TEST_CASE("Vinken fixture: entity filter") {
  auto corpus = testing::vinken();
  CHECK(kept(entity_filter(whole(corpus), kReserved)) ==
        "Pierre Vinken 61 years old Nov. 29 Vinken Elsevier N.V. Dutch");
}

TEST_CASE("filters left-pad to the original length") {
  auto corpus = testing::vinken();
  auto out = pos_filter(whole(corpus), pos_sets::nouns(), kReserved);
  CHECK(out.words.size() == 31);
  CHECK(out.original_length == 31);
  CHECK(leading_padding(out) == 31 - 13);
  CHECK(std::count(out.kept_mask.begin(), out.kept_mask.end(), true) == 13);
}

TEST_CASE("content and function filters partition the tokens") {
  auto corpus = testing::vinken();
  auto content = pos_filter(whole(corpus), pos_sets::content_words(), kReserved);
  auto function = pos_filter(whole(corpus), pos_sets::function_words(), kReserved);
  REQUIRE(content.kept_mask.size() == 31);
  for (std::size_t i = 0; i < 31; ++i) {
    CHECK(content.kept_mask[i] != function.kept_mask[i]);
  }
}

TEST_CASE("filter fixed points and empty results") {
  auto nouns = tagged({{"cat", Pos::NOUN}, {"Rome", Pos::PROPN}, {"dog", Pos::NOUN}});
  auto out = pos_filter(Segment(nouns.tokens), pos_sets::nouns(), kReserved);
  CHECK(out.words == std::vector<std::string>{"cat", "Rome", "dog"});

  auto plain = tagged({{"a", Pos::DET}, {"b", Pos::NOUN}});
  auto none = entity_filter(Segment(plain.tokens), kReserved);
  CHECK(none.words == std::vector<std::string>{"<pad>", "<pad>"});

  for (auto& t : nouns.tokens) t.entity_span = "E1";
  CHECK(entity_filter(Segment(nouns.tokens), kReserved).words ==
        std::vector<std::string>{"cat", "Rome", "dog"});
}

TEST_CASE("frequency filter: common and rare split the segment") {
  auto corpus = testing::vinken();
  FrequencyPartition p;
  for (const char* w : {"Pierre", "years", "old", "join", "board", "director",
                        ".", "Mr.", "chairman", "Dutch", "publishing", "group"}) {
    p.common.insert(w);
  }
  auto common = frequency_filter(whole(corpus), p, FrequencyKeep::common, kReserved);
  CHECK(kept(common) ==
        "Pierre years old join board director . Mr. chairman Dutch publishing "
        "group .");
  auto rare = frequency_filter(whole(corpus), p, FrequencyKeep::rare, kReserved);
  std::multiset<std::string> joined;
  for (std::size_t i = 0; i < 31; ++i) {
    CHECK(common.kept_mask[i] != rare.kept_mask[i]);
  }
  for (const auto& w : common.words) {
    if (w != kReserved.padding) joined.insert(w);
  }
  for (const auto& w : rare.words) {
    if (w != kReserved.padding) joined.insert(w);
  }
  std::multiset<std::string> original;
  for (const auto& t : corpus.documents[0].tokens) original.insert(t.surface);
  CHECK(joined == original);
}

TEST_CASE("Vinken fixture: shuffle outputs lie in each mode's valid set") {
  auto corpus = testing::vinken_plain();
  auto seg = whole(corpus);
  using U = ShuffleUnit;
  using S = ShuffleScope;
  struct Case {
    U unit;
    S scope;
    const char* text;
  };
  const Case cases[] = {
      {U::word, S::context,
       "61 N.V., director the of Mr. Vinken Dutch group. as nonexecutive the "
       "29. is Vinken, years Elsevier join old, publishing a Nov. will Pierre "
       "board chairman"},
      {U::trigram_block, S::context,
       "publishing group. N.V., the Dutch Mr. Vinken is join the board as a "
       "nonexecutive years old, will chairman of Elsevier Pierre Vinken, 61 "
       "director Nov. 29."},
      {U::word, S::sentence,
       "61 director as the old, join will a Nov. board nonexecutive years "
       "Vinken, 29. Pierre is publishing the Vinken N.V., Mr. group. chairman "
       "Elsevier of Dutch"},
      {U::word, S::trigram_block,
       "Vinken, Pierre 61 will old, years the board join a nonexecutive as "
       "Nov. director 29. Mr. Vinken is of Elsevier chairman the Dutch N.V., "
       "group. publishing"},
      {U::trigram_block, S::sentence,
       "years old, will as a nonexecutive join the board Pierre Vinken, 61 "
       "director Nov. 29. N.V., the Dutch chairman of Elsevier Mr. Vinken is "
       "publishing group."},
      {U::sentence, S::context,
       "Mr. Vinken is chairman of Elsevier N.V., the Dutch publishing group. "
       "Pierre Vinken, 61 years old, will join the board as a nonexecutive "
       "director Nov. 29."},
  };
  for (const auto& c : cases) {
    CAPTURE(unit_name(c.unit));
    CAPTURE(scope_name(c.scope));
    CHECK(testing::is_valid_shuffle(seg, testing::split_words(c.text), c.unit,
                                    c.scope));
    // And the implementation's own draws.
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto out = shuffle(seg, c.unit, c.scope, seed);
      CHECK(testing::is_valid_shuffle(seg, out.words, c.unit, c.scope));
    }
  }
  // The sentence-order draw is exactly one of two outputs.
  std::set<std::vector<std::string>> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    seen.insert(shuffle(seg, U::sentence, S::context, seed).words);
  }
  CHECK(seen.size() == 2);
  CHECK(seen.count(testing::split_words(cases[5].text)) == 1);
}

TEST_CASE("oracle rejects outputs that cross boundaries") {
  auto corpus = testing::vinken_plain();
  auto seg = whole(corpus);
  std::vector<std::string> words;
  for (const auto& t : seg) words.push_back(t.surface);
  std::swap(words[0], words[20]);
  CHECK(testing::is_valid_shuffle(seg, words, ShuffleUnit::word, ShuffleScope::context));
  CHECK_FALSE(testing::is_valid_shuffle(seg, words, ShuffleUnit::word, ShuffleScope::sentence));
  CHECK_FALSE(testing::is_valid_shuffle(seg, words, ShuffleUnit::sentence, ShuffleScope::context));
}

TEST_CASE("shuffle of a single word is the identity") {
  auto doc = numbered(1);
  for (const auto& name : {"shuffle-all", "shuf-trigrams-globally", "shuf-within-sent",
                           "shuf-within-trigrams", "shuf-trigrams-within-sent",
                           "shuf-sent"}) {
    auto spec = named_ablation(name, 3);
    auto out = shuffle(Segment(doc.tokens), *spec.shuffle_unit,
                       *spec.shuffle_scope, 99);
    CHECK(out.words == std::vector<std::string>{"w0"});
  }
}

TEST_CASE("shuffle modes: only the six pairs are valid") {
  int valid = 0;
  for (auto u : {ShuffleUnit::word, ShuffleUnit::trigram_block, ShuffleUnit::sentence}) {
    for (auto s : {ShuffleScope::context, ShuffleScope::sentence,
                   ShuffleScope::trigram_block}) {
      if (is_valid_shuffle_mode(u, s)) {
        ++valid;
      } else {
        auto doc = numbered(5);
        CHECK_THROWS_AS(shuffle(Segment(doc.tokens), u, s, 1), ConfigError);
        AblationSpec spec{"x", AblationKind::shuffle, u, s, {}, {}, 0};
        CHECK_THROWS_AS(spec.validate(), ConfigError);
      }
    }
  }
  CHECK(valid == 6);
}

TEST_CASE("spec validation") {
  AblationSpec bad{"x", AblationKind::pos_filter, ShuffleUnit::word,
                   ShuffleScope::context, pos_sets::nouns(), {}, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  AblationSpec no_set{"x", AblationKind::pos_filter, {}, {}, {}, {}, 0};
  CHECK_THROWS_AS(no_set.validate(), ConfigError);
  AblationSpec no_keep{"x", AblationKind::frequency_filter, {}, {}, {}, {}, 0};
  CHECK_THROWS_AS(no_keep.validate(), ConfigError);
  CHECK_THROWS_AS(named_ablation("no-such-ablation"), ConfigError);
  for (const auto& name : ablation_catalog()) {
    auto spec = named_ablation(name);
    CHECK(spec.name == name);
    CHECK_NOTHROW(spec.validate());
  }
}

TEST_CASE("shuffles are deterministic per window") {
  auto doc = numbered(60);
  auto spec = named_ablation("shuffle-all", 17);
  auto a = apply_ablation(spec, doc, 10, 40, nullptr, kReserved);
  auto b = apply_ablation(spec, doc, 10, 40, nullptr, kReserved);
  CHECK(a.words == b.words);
  auto other_window = apply_ablation(spec, doc, 11, 40, nullptr, kReserved);
  auto other_seed = apply_ablation(named_ablation("shuffle-all", 18), doc, 10,
                                   40, nullptr, kReserved);
  CHECK(a.words != other_window.words);
  CHECK(a.words != other_seed.words);
}

TEST_CASE("word shuffle of four words is uniform over the 24 orders") {
  auto doc = numbered(4);
  Rng rng(2024);
  std::map<std::vector<std::string>, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    ++counts[shuffle(Segment(doc.tokens), ShuffleUnit::word,
                     ShuffleScope::context, rng)
                 .words];
  }
  CHECK(counts.size() == 24);
  const double p = 1.0 / 24.0;
  const double se = std::sqrt(p * (1 - p) / draws);
  for (const auto& [order, c] : counts) {
    CHECK(std::abs(c / static_cast<double>(draws) - p) <= 3 * se);
  }
}

TEST_CASE("replace with old") {
  auto doc = numbered(1024);
  auto a = replace_with_old(doc, 512, 512, kReserved);
  REQUIRE(a.words.size() == 512);
  CHECK(a.words.front() == "w0");
  CHECK(a.words.back() == "w511");
  CHECK(a.padding_shortfall == 0);

  auto b = replace_with_old(doc, 300, 512, kReserved);
  CHECK(leading_padding(b) == 212);
  CHECK(b.padding_shortfall == 212);
  CHECK(b.words[212] == "w0");
  CHECK(b.words.back() == "w299");

  auto c = replace_with_old(doc, 0, 512, kReserved);
  CHECK(leading_padding(c) == 512);
  CHECK(c.padding_shortfall == 512);
}

TEST_CASE("extend with prior content") {
  auto doc = tagged({{"A", Pos::NOUN}, {"x", Pos::DET}, {"B", Pos::VERB},
                     {"C", Pos::NOUN}, {"D", Pos::NOUN}, {"E", Pos::VERB},
                     {"y", Pos::DET}, {"z", Pos::DET}, {"F", Pos::NOUN},
                     {"w", Pos::DET}});
  const auto set = pos_sets::nouns_verbs();
  auto filtered = pos_filter(Segment(doc.tokens).subspan(6, 4), set, kReserved);
  CHECK(leading_padding(filtered) == 3);
  auto extended = extend_with_prior_content(filtered, doc, 6, set, kReserved);
  CHECK(extended.words == std::vector<std::string>{"C", "D", "E", "F"});

  // Nothing earlier matches.
  auto at_start = pos_filter(Segment(doc.tokens).subspan(0, 2),
                             PosSet{Pos::DET}, kReserved);
  CHECK(extend_with_prior_content(at_start, doc, 0, PosSet{Pos::DET}, kReserved)
            .words == at_start.words);

  // No padding to fill.
  auto full = pos_filter(Segment(doc.tokens).subspan(3, 2), set, kReserved);
  CHECK(extend_with_prior_content(full, doc, 3, set, kReserved).words ==
        full.words);

  // Two earlier verbs for four slots.
  auto few = pos_filter(Segment(doc.tokens).subspan(6, 4), PosSet{Pos::VERB},
                        kReserved);
  auto few_ext = extend_with_prior_content(few, doc, 6, PosSet{Pos::VERB}, kReserved);
  CHECK(few_ext.words == std::vector<std::string>{"<pad>", "<pad>", "B", "E"});
}

TEST_CASE("erase all") {
  auto doc = numbered(5);
  auto out = erase_all(Segment(doc.tokens), kReserved);
  CHECK(out.words == std::vector<std::string>(5, "<pad>"));
  CHECK(erase_all(Segment(), kReserved).words.empty());
  AnnotatedDocument padded;
  for (const auto& w : out.words) {
    WordToken t;
    t.surface = w;
    t.is_reserved = true;
    padded.tokens.push_back(t);
  }
  CHECK(erase_all(Segment(padded.tokens), kReserved).words == out.words);
}
