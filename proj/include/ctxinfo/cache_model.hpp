// Unigram cache model interpolated with an n-gram base:
//
//   p(w | ctx) = lambda * (count_ctx(w) + 1) / (|ctx| + V)
//              + (1 - lambda) * p_base(w | ctx)
//
// The cache is the bag of non-reserved context words, so the model is
// invariant to any reordering of the context. The base n-gram sees only the
// words after the last separator.
#pragma once

#include <iosfwd>

#include "ctxinfo/ngram_model.hpp"

namespace ctxinfo {

struct CacheOptions {
  double cache_weight = 0.2;
  NGramOptions base;
};

class CacheModel : public LanguageModel {
 public:
  explicit CacheModel(CacheOptions options = {});

  std::string name() const override;
  void train(std::span<const TrainingView> views, std::uint64_t seed) override;
  double score(std::span<const std::string> context,
               std::string_view target) const override;
  std::vector<double> score_window(
      const EvaluationWindow& window) const override;
  std::vector<std::string> outcomes() const override { return base_.outcomes(); }

  const NGramModel& base() const { return base_; }
  double cache_weight() const { return weight_; }

  void save(std::ostream& out) const;
  static CacheModel load(std::istream& in);

 private:
  double mix(double cache_count, double cache_size, double base_prob) const;

  double weight_;
  NGramModel base_;
};

}  // namespace ctxinfo
