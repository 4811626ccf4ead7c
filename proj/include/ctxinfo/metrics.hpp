// Ablated likelihoods, ablated information and their bootstrap intervals.
//
//   A = (L_ablated - L_full) / (L_none - L_full)
//
// All likelihoods are mean negative log-likelihoods in nats per word.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ctxinfo {

enum class Condition { mid_range, long_range };

std::string_view condition_name(Condition condition);
std::optional<Condition> parse_condition(std::string_view name);

struct LikelihoodReport {
  std::string spec;
  Condition condition = Condition::mid_range;
  // Mean NLL of each window's stratum.
  std::vector<double> per_window_nll;
  std::vector<std::size_t> per_window_counts;
  double mean_nll = 0.0;
  std::size_t window_count = 0;
  std::vector<std::uint64_t> seeds;
};

// `scores[w]` holds the log-probabilities of window w's scored positions.
// Throws std::invalid_argument on zero windows or an empty window.
LikelihoodReport aggregate_likelihood(
    const std::vector<std::vector<double>>& scores, Condition condition,
    std::string spec = {}, std::uint64_t seed = 0);

// Count-weighted mean of per-window NLLs.
double weighted_mean(std::span<const double> values,
                     std::span<const std::size_t> counts);

struct AblatedInformationResult {
  std::string spec;
  Condition condition = Condition::mid_range;
  double ablated_nll = 0.0;
  double full_nll = 0.0;
  double none_nll = 0.0;
  double numerator = 0.0;
  double denominator = 0.0;
  // NaN when degenerate.
  double a = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  bool degenerate = false;
  bool ci_degenerate = false;
  // An arm this row needs is absent; every number is NaN.
  bool missing = false;
  std::vector<std::uint64_t> seeds_used;
  std::size_t window_count = 0;
};

// Plain ratio; no clamping. Degenerate when the denominator is not positive.
AblatedInformationResult ablated_information(const LikelihoodReport& ablated,
                                             const LikelihoodReport& full,
                                             const LikelihoodReport& none);

// Pointwise average of per-window NLLs across seeds. Throws
// std::invalid_argument on an empty list or mismatched windows.
LikelihoodReport average_over_seeds(std::span<const LikelihoodReport> reports);

struct BootstrapOptions {
  std::size_t resamples = 1000;
  double confidence = 0.95;
  std::uint64_t seed = 0;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool degenerate = false;
};

// Percentile bootstrap over windows. Resamples whose denominator is not
// positive are dropped. Fewer than two windows gives a degenerate interval at
// the point estimate.
Interval bootstrap_ci(const LikelihoodReport& ablated,
                      const LikelihoodReport& full,
                      const LikelihoodReport& none,
                      const BootstrapOptions& options = {});

// Linear-interpolated percentile of sorted data, q in [0, 1].
double percentile(std::span<const double> sorted, double q);

// ablated_information plus bootstrap_ci; the interval is widened to contain
// the point estimate.
AblatedInformationResult ablated_information_with_ci(
    const LikelihoodReport& ablated, const LikelihoodReport& full,
    const LikelihoodReport& none, const BootstrapOptions& options = {});

}  // namespace ctxinfo
