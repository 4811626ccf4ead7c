#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"

#include "ctxinfo/metrics.hpp"

using namespace ctxinfo;

namespace {

// A report whose windows have the given NLLs and equal position counts.
LikelihoodReport report(std::vector<double> nll, std::size_t positions = 4,
                        Condition c = Condition::mid_range) {
  std::vector<std::vector<double>> scores;
  for (double v : nll) scores.push_back(std::vector<double>(positions, -v));
  return aggregate_likelihood(scores, c, "x", 1);
}

}  // namespace

TEST_CASE("aggregate likelihood") {
  CHECK(report({2.0, 4.0}).mean_nll == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(report({1.5}).mean_nll == 1.5);

  std::vector<std::vector<double>> uniform(3, std::vector<double>(50, -std::log(100.0)));
  CHECK(std::abs(aggregate_likelihood(uniform, Condition::long_range).mean_nll -
                 std::log(100.0)) <= 1e-12);

  // Position counts weight the mean.
  auto r = aggregate_likelihood({{-1.0}, {-4.0, -4.0, -4.0}}, Condition::mid_range);
  CHECK(r.per_window_nll == std::vector<double>{1.0, 4.0});
  CHECK(r.mean_nll == doctest::Approx(13.0 / 4.0).epsilon(1e-15));
  CHECK(r.window_count == 2);

  CHECK_THROWS_AS(aggregate_likelihood({}, Condition::mid_range), std::invalid_argument);
  CHECK_THROWS_AS(aggregate_likelihood({{}}, Condition::mid_range), std::invalid_argument);
}

TEST_CASE("ablated information examples") {
  auto full = report({3.0});
  auto none = report({3.5});
  auto r = ablated_information(report({3.2}), full, none);
  CHECK(std::abs(r.a - 0.4) <= 1e-12);
  CHECK(std::abs(r.numerator - 0.2) <= 1e-12);
  CHECK(std::abs(r.denominator - 0.5) <= 1e-12);
  CHECK_FALSE(r.degenerate);

  CHECK(ablated_information(full, full, none).a == 0.0);
  CHECK(ablated_information(none, full, none).a == 1.0);

  // Not clamped in either direction.
  CHECK(ablated_information(report({2.9}), full, none).a < 0.0);
  CHECK(ablated_information(report({3.6}), full, none).a > 1.0);
}

TEST_CASE("degenerate denominators are flagged") {
  auto same = report({3.0, 3.1});
  auto r = ablated_information(report({3.0, 3.2}), same, same);
  CHECK(r.degenerate);
  CHECK(std::isnan(r.a));
  auto inverted = ablated_information(report({3.0}), report({3.5}), report({3.0}));
  CHECK(inverted.degenerate);
  auto with_ci = ablated_information_with_ci(report({3.0, 3.2}), same, same);
  CHECK(with_ci.degenerate);
  CHECK(with_ci.ci_degenerate);
}

TEST_CASE("misaligned reports are rejected") {
  CHECK_THROWS_AS(ablated_information(report({1, 2}), report({1}), report({2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(ablated_information(report({1}), report({1}, 4, Condition::long_range),
                                      report({2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(ablated_information(report({1}), report({1}, 3), report({2})),
                  std::invalid_argument);
}

TEST_CASE("affine coherence and monotonicity on random triples") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.5, 8.0);
  std::uniform_real_distribution<double> shift(-0.4, 5.0);
  int violations = 0;
  for (int i = 0; i < 2000; ++i) {
    const double f = u(rng), n = f + 0.01 + u(rng), a = u(rng), c = shift(rng);
    const auto base = ablated_information(report({a}), report({f}), report({n}));
    const auto moved = ablated_information(report({a + c}), report({f + c}), report({n + c}));
    if (std::abs(base.a - moved.a) > 1e-9 * std::max(1.0, std::abs(base.a))) ++violations;
    const auto higher = ablated_information(report({a + 0.01}), report({f}), report({n}));
    if (!(higher.a > base.a)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("seed averaging") {
  std::vector<LikelihoodReport> two{report({3.0}), report({3.2})};
  two[1].seeds = {2};
  auto avg = average_over_seeds(two);
  CHECK(avg.mean_nll == doctest::Approx(3.1).epsilon(1e-15));
  CHECK(avg.seeds == std::vector<std::uint64_t>{1, 2});

  std::vector<LikelihoodReport> one{report({2.0, 5.0})};
  CHECK(average_over_seeds(one).per_window_nll == one[0].per_window_nll);

  std::vector<LikelihoodReport> three(3, report({1.25, 2.5}));
  CHECK(average_over_seeds(three).per_window_nll == three[0].per_window_nll);

  std::vector<LikelihoodReport> bad{report({1.0}), report({1.0, 2.0})};
  CHECK_THROWS_AS(average_over_seeds(bad), std::invalid_argument);
  CHECK_THROWS_AS(average_over_seeds({}), std::invalid_argument);
}

TEST_CASE("percentile interpolation") {
  const std::vector<double> v{1, 2, 3, 4, 5};
  CHECK(percentile(v, 0.0) == 1);
  CHECK(percentile(v, 1.0) == 5);
  CHECK(percentile(v, 0.5) == 3);
  CHECK(percentile(v, 0.125) == doctest::Approx(1.5));
}

TEST_CASE("bootstrap basics") {
  auto full = report({3.0, 3.0, 3.0});
  auto none = report({4.0, 4.0, 4.0});
  auto abl = report({3.5, 3.5, 3.5});
  auto ci = bootstrap_ci(abl, full, none);
  CHECK(ci.low == doctest::Approx(0.5));
  CHECK(ci.high == doctest::Approx(0.5));
  CHECK_FALSE(ci.degenerate);

  auto single = bootstrap_ci(report({3.5}), report({3.0}), report({4.0}));
  CHECK(single.degenerate);
  CHECK(single.low == 0.5);

  BootstrapOptions few;
  few.resamples = 99;
  CHECK_THROWS_AS(bootstrap_ci(abl, full, none, few), std::invalid_argument);
  BootstrapOptions wide;
  wide.confidence = 1.0;
  CHECK_THROWS_AS(bootstrap_ci(abl, full, none, wide), std::invalid_argument);
}

TEST_CASE("bootstrap is seeded") {
  auto full = report({3.0, 3.1, 2.9, 3.3, 3.0});
  auto none = report({4.0, 3.6, 4.1, 3.9, 4.4});
  auto abl = report({3.5, 3.2, 3.6, 3.4, 3.9});
  BootstrapOptions o;
  o.seed = 12;
  auto a = bootstrap_ci(abl, full, none, o);
  auto b = bootstrap_ci(abl, full, none, o);
  CHECK(a.low == b.low);
  CHECK(a.high == b.high);
  // Another seed moves the endpoints once resamples take many values.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> fv, nv, av;
  for (int i = 0; i < 30; ++i) {
    fv.push_back(3 + u(rng));
    nv.push_back(fv.back() + 0.5 + u(rng));
    av.push_back(fv.back() + u(rng));
  }
  auto x = bootstrap_ci(report(av), report(fv), report(nv), o);
  o.seed = 13;
  auto y = bootstrap_ci(report(av), report(fv), report(nv), o);
  CHECK((x.low != y.low || x.high != y.high));
}

TEST_CASE("bootstrap agrees with exhaustive resample enumeration") {
  // Two clusters of windows; 4^4 = 256 equally likely resamples.
  const std::vector<double> f{3.0, 3.1, 5.0, 5.2};
  const std::vector<double> n{3.5, 3.4, 6.5, 6.0};
  const std::vector<double> a{3.2, 3.3, 5.9, 5.1};
  std::vector<double> exact;
  for (int i = 0; i < 256; ++i) {
    double sa = 0, sf = 0, sn = 0;
    for (int k = 0, code = i; k < 4; ++k, code /= 4) {
      sa += a[code % 4];
      sf += f[code % 4];
      sn += n[code % 4];
    }
    if (sn - sf > 0) exact.push_back((sa - sf) / (sn - sf));
  }
  std::sort(exact.begin(), exact.end());
  auto cdf = [&](double x) {
    return static_cast<double>(std::upper_bound(exact.begin(), exact.end(), x) -
                               exact.begin()) /
           exact.size();
  };
  auto below = [&](double x) {
    return static_cast<double>(std::lower_bound(exact.begin(), exact.end(), x) -
                               exact.begin()) /
           exact.size();
  };

  BootstrapOptions o;
  o.resamples = 20000;
  o.seed = 4;
  auto res = ablated_information_with_ci(report(a), report(f), report(n), o);
  CHECK(res.ci_low <= res.a);
  CHECK(res.a <= res.ci_high);
  const double point = (3.2 + 3.3 + 5.9 + 5.1 - 16.3) / (19.4 - 16.3);
  CHECK(std::abs(res.a - point) <= 1e-12);
  // Endpoints sit where the exact resampling distribution puts 2.5% and 97.5%.
  CHECK(below(res.ci_low) <= 0.025 + 0.01);
  CHECK(cdf(res.ci_low) >= 0.025 - 0.01);
  CHECK(below(res.ci_high) <= 0.975 + 0.01);
  CHECK(cdf(res.ci_high) >= 0.975 - 0.01);
}
