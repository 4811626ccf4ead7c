#include "ctxinfo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ctxinfo/rng.hpp"

namespace ctxinfo {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_aligned(const LikelihoodReport& a, const LikelihoodReport& b) {
  if (a.per_window_nll.size() != b.per_window_nll.size() ||
      a.per_window_counts != b.per_window_counts) {
    throw std::invalid_argument("likelihood reports cover different windows");
  }
  if (a.condition != b.condition) {
    throw std::invalid_argument("likelihood reports have different conditions");
  }
}

}  // namespace

std::string_view condition_name(Condition condition) {
  return condition == Condition::mid_range ? "mid_range" : "long_range";
}

std::optional<Condition> parse_condition(std::string_view name) {
  if (name == "mid_range") return Condition::mid_range;
  if (name == "long_range") return Condition::long_range;
  return std::nullopt;
}

double weighted_mean(std::span<const double> values,
                     std::span<const std::size_t> counts) {
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double c = static_cast<double>(counts[i]);
    sum += values[i] * c;
    total += c;
  }
  return sum / total;
}

LikelihoodReport aggregate_likelihood(
    const std::vector<std::vector<double>>& scores, Condition condition,
    std::string spec, std::uint64_t seed) {
  if (scores.empty()) {
    throw std::invalid_argument("no windows to aggregate");
  }
  LikelihoodReport report;
  report.spec = std::move(spec);
  report.condition = condition;
  report.seeds = {seed};
  report.window_count = scores.size();
  report.per_window_nll.reserve(scores.size());
  report.per_window_counts.reserve(scores.size());
  for (const auto& window : scores) {
    if (window.empty()) {
      throw std::invalid_argument("window with no scored positions");
    }
    double sum = 0.0;
    for (double lp : window) sum -= lp;
    report.per_window_nll.push_back(sum / static_cast<double>(window.size()));
    report.per_window_counts.push_back(window.size());
  }
  report.mean_nll =
      weighted_mean(report.per_window_nll, report.per_window_counts);
  return report;
}

AblatedInformationResult ablated_information(const LikelihoodReport& ablated,
                                             const LikelihoodReport& full,
                                             const LikelihoodReport& none) {
  check_aligned(ablated, full);
  check_aligned(ablated, none);
  AblatedInformationResult r;
  r.spec = ablated.spec;
  r.condition = ablated.condition;
  r.ablated_nll = ablated.mean_nll;
  r.full_nll = full.mean_nll;
  r.none_nll = none.mean_nll;
  r.numerator = ablated.mean_nll - full.mean_nll;
  r.denominator = none.mean_nll - full.mean_nll;
  r.degenerate = !(r.denominator > 0.0);
  r.a = r.degenerate ? kNaN : r.numerator / r.denominator;
  r.ci_low = r.ci_high = r.a;
  r.seeds_used = ablated.seeds;
  r.window_count = ablated.window_count;
  return r;
}

LikelihoodReport average_over_seeds(std::span<const LikelihoodReport> reports) {
  if (reports.empty()) {
    throw std::invalid_argument("no reports to average");
  }
  LikelihoodReport out = reports.front();
  for (std::size_t s = 1; s < reports.size(); ++s) {
    check_aligned(out, reports[s]);
    for (std::size_t w = 0; w < out.per_window_nll.size(); ++w) {
      out.per_window_nll[w] += reports[s].per_window_nll[w];
    }
    out.seeds.insert(out.seeds.end(), reports[s].seeds.begin(),
                     reports[s].seeds.end());
  }
  const double k = static_cast<double>(reports.size());
  if (reports.size() > 1) {
    for (double& v : out.per_window_nll) v /= k;
  }
  out.mean_nll = weighted_mean(out.per_window_nll, out.per_window_counts);
  return out;
}

double percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return kNaN;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

Interval bootstrap_ci(const LikelihoodReport& ablated,
                      const LikelihoodReport& full,
                      const LikelihoodReport& none,
                      const BootstrapOptions& options) {
  check_aligned(ablated, full);
  check_aligned(ablated, none);
  if (options.resamples < 100) {
    throw std::invalid_argument("bootstrap needs at least 100 resamples");
  }
  if (!(options.confidence > 0.0 && options.confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  const auto point = ablated_information(ablated, full, none);
  const std::size_t windows = ablated.per_window_nll.size();
  if (windows < 2) return {point.a, point.a, true};

  std::vector<double> values;
  values.reserve(options.resamples);
  for (std::size_t r = 0; r < options.resamples; ++r) {
    Rng rng(derive_seed(options.seed, r));
    double sa = 0.0, sf = 0.0, sn = 0.0, total = 0.0;
    for (std::size_t i = 0; i < windows; ++i) {
      const std::size_t w = uniform_below(rng, windows);
      const double c = static_cast<double>(ablated.per_window_counts[w]);
      sa += ablated.per_window_nll[w] * c;
      sf += full.per_window_nll[w] * c;
      sn += none.per_window_nll[w] * c;
      total += c;
    }
    const double den = sn / total - sf / total;
    if (!(den > 0.0)) continue;
    values.push_back((sa / total - sf / total) / den);
  }
  if (values.empty()) return {point.a, point.a, true};
  std::sort(values.begin(), values.end());
  const double tail = (1.0 - options.confidence) / 2.0;
  return {percentile(values, tail), percentile(values, 1.0 - tail), false};
}

AblatedInformationResult ablated_information_with_ci(
    const LikelihoodReport& ablated, const LikelihoodReport& full,
    const LikelihoodReport& none, const BootstrapOptions& options) {
  auto result = ablated_information(ablated, full, none);
  if (result.degenerate) {
    result.ci_degenerate = true;
    return result;
  }
  const Interval ci = bootstrap_ci(ablated, full, none, options);
  result.ci_degenerate = ci.degenerate;
  result.ci_low = std::min(ci.low, result.a);
  result.ci_high = std::max(ci.high, result.a);
  return result;
}

}  // namespace ctxinfo
