#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"

#include "ctxinfo/cache_model.hpp"
#include "ctxinfo/ngram_model.hpp"
#include "ctxinfo/synthetic.hpp"
#include "ctxinfo/windows.hpp"

using namespace ctxinfo;

namespace {

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::vector<TrainingView> one_view(const std::string& text) {
  return {TrainingView{words(text), 0}};
}

NGramModel ngram(std::size_t order, const std::string& text) {
  NGramOptions o;
  o.order = order;
  NGramModel m(o);
  m.train(one_view(text), 1);
  return m;
}

double p(const LanguageModel& m, const std::string& context,
         const std::string& target) {
  const auto ctx = words(context);
  return std::exp(m.score(ctx, target));
}

struct Fixture {
  AnnotatedCorpus train;
  AnnotatedCorpus valid;
  WindowConfig config;
  std::vector<WindowDescriptor> windows;

  Fixture() {
    SyntheticOptions o;
    o.words = 20000;
    o.min_document = 500;
    o.max_document = 800;
    train = synthetic_corpus(o);
    o.words = 4000;
    o.seed = 2;
    valid = synthetic_corpus(o, Split::validation);
    config.ell = 64;
    config.m = 0;
    config.n = 64;
    windows = enumerate_windows(valid, config);
  }

  std::vector<TrainingView> views(const AblationSpec& spec) const {
    return training_views(train, config, spec, {}).views;
  }
  EvaluationWindow window(std::size_t i, const AblationSpec& spec) const {
    return realize_window(windows.at(i), spec, valid, config, {});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("Kneser-Ney hand computation") {
  // Order 2 on "a b a b a", D = 0.75. Continuation counts: a has two
  // distinct left neighbours (BOS, b), b has one (a); three bigram types.
  auto m = ngram(2, "a b a b a");
  const double unigram_b = (1 - 0.75) / 3 + 0.75 * 2 / 3 / 3;
  CHECK(unigram_b == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p(m, "a", "b") == doctest::Approx(0.71875).epsilon(1e-12));
  CHECK(p(m, "a", "a") == doctest::Approx(0.375 * 1.75 / 3).epsilon(1e-12));
  // Unknown word: the interpolated share of the unigram-level unknown mass.
  CHECK(p(m, "a", "zzz") == doctest::Approx(0.375 * 0.5 / 3).epsilon(1e-12));

  // Order 1 on "a a b": raw counts at the top.
  auto u = ngram(1, "a a b");
  CHECK(p(u, "", "a") == doctest::Approx(0.58333333333333).epsilon(1e-12));
  CHECK(p(u, "", "b") == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p(u, "", "zzz") == doctest::Approx(1.0 / 6).epsilon(1e-12));
  CHECK(p(u, "", "a") > p(u, "", "b"));
}

TEST_CASE("n-gram option and training errors") {
  NGramOptions bad;
  bad.order = 0;
  CHECK_THROWS(NGramModel(bad));
  bad.order = 3;
  bad.discount = 1.0;
  CHECK_THROWS(NGramModel(bad));
  NGramModel m;
  CHECK_THROWS(m.train({}, 1));
  CHECK_THROWS(m.score(std::vector<std::string>{}, "a"));
  CHECK_THROWS(m.train(one_view("a <pad> b"), 1));
  auto trained = ngram(3, "a b c");
  CHECK_THROWS_AS(trained.score(words("a b"), "<sep>"), std::invalid_argument);
  CHECK_THROWS_AS(trained.score(words("a b"), "<pad>"), std::invalid_argument);
}

TEST_CASE("distributions sum to one") {
  const auto& f = fixture();
  const auto views = f.views(named_ablation("identity"));
  NGramModel ng;
  ng.train(views, 1);
  CacheModel cache;
  cache.train(views, 1);
  std::mt19937_64 rng(3);
  for (const LanguageModel* m : {static_cast<const LanguageModel*>(&ng),
                                 static_cast<const LanguageModel*>(&cache)}) {
    const auto outcomes = m->outcomes();
    REQUIRE(outcomes.size() > 100);
    for (int trial = 0; trial < 8; ++trial) {
      const auto& win = f.window(rng() % f.windows.size(), named_ablation("identity"));
      const std::size_t at = win.realized_index(rng() % 64);
      std::span<const std::string> ctx(win.realized_input.data(), at);
      double total = 0;
      for (const auto& w : outcomes) total += std::exp(m->score(ctx, w));
      CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("training is deterministic and survives save/load") {
  const auto& f = fixture();
  const auto views = f.views(named_ablation("nouns"));
  NGramModel a, b;
  a.train(views, 7);
  b.train(views, 7);
  const auto win = f.window(0, named_ablation("nouns"));
  const auto sa = a.score_window(win);
  CHECK(sa == b.score_window(win));

  std::stringstream buf;
  a.save(buf);
  const auto loaded = NGramModel::load(buf);
  CHECK(loaded.score_window(win) == sa);

  CacheModel c;
  c.train(views, 7);
  std::stringstream cbuf;
  c.save(cbuf);
  CHECK(CacheModel::load(cbuf).score_window(win) == c.score_window(win));
}

TEST_CASE("score_window matches per-position scoring") {
  const auto& f = fixture();
  const auto views = f.views(named_ablation("identity"));
  NGramModel ng;
  ng.train(views, 1);
  CacheModel cache;
  cache.train(views, 1);
  for (const auto& name : {"identity", "shuffle-all", "erase-all", "nouns"}) {
    const auto win = f.window(1, named_ablation(name, 5));
    for (const LanguageModel* m : {static_cast<const LanguageModel*>(&ng),
                                   static_cast<const LanguageModel*>(&cache)}) {
      const auto batch = m->score_window(win);
      REQUIRE(batch.size() == win.scored_count());
      for (std::size_t j = 0; j < batch.size(); ++j) {
        const std::size_t at = win.realized_index(win.first_scored + j);
        std::span<const std::string> ctx(win.realized_input.data(), at);
        CHECK(batch[j] <= 0.0);
        CHECK(std::abs(batch[j] - m->score(ctx, win.realized_input[at])) <= 1e-12);
      }
    }
  }
}

TEST_CASE("cache closed form") {
  // Four known words plus the unknown class: V = 5.
  CacheOptions o;
  o.cache_weight = 1.0;
  CacheModel m(o);
  m.train(one_view("x y z q"), 1);
  const auto ctx = words("x y x z q x y z q z <sep>");
  CHECK(m.score(ctx, "x") == doctest::Approx(std::log(4.0 / 15.0)).epsilon(1e-12));
  // Padding and separators are not cache words.
  const auto padded = words("<pad> <pad> x y x z q x y z q z <sep>");
  CHECK(m.score(padded, "x") == m.score(ctx, "x"));
  CHECK_THROWS(CacheModel(CacheOptions{0.0, {}}));
}

TEST_CASE("cache is invariant to prefix order") {
  const auto& f = fixture();
  CacheModel cache;
  cache.train(f.views(named_ablation("identity")), 1);
  for (std::size_t i = 0; i < std::min<std::size_t>(5, f.windows.size()); ++i) {
    const auto base = cache.score_window(f.window(i, named_ablation("identity")));
    for (const auto& name : {"shuffle-all", "shuf-sent", "shuf-within-trigrams"}) {
      CHECK(cache.score_window(f.window(i, named_ablation(name, 11))) == base);
    }
  }
}

TEST_CASE("n-gram scores ignore words beyond the horizon") {
  const auto& f = fixture();
  NGramModel ng;
  ng.train(f.views(named_ablation("identity")), 1);
  WindowConfig c = f.config;
  c.m = 2;  // order 3: from here on only continuation words are visible
  const auto& desc = f.windows.at(0);
  const auto erased = realize_window(desc, named_ablation("erase-all"), f.valid, c, {});
  auto none_cfg = c;
  none_cfg.mode = WindowMode::no_information;
  const auto none = realize_window(desc, named_ablation("identity"), f.valid, none_cfg, {});
  const auto shuffled = realize_window(desc, named_ablation("shuffle-all", 3), f.valid, c, {});
  CHECK(ng.score_window(erased) == ng.score_window(none));
  CHECK(ng.score_window(shuffled) == ng.score_window(none));
}
