// Interpolated Kneser-Ney n-gram model with a fixed absolute discount.
//
// The highest order uses raw counts; every lower order k uses continuation
// counts N1+(. w_{k}) taken over the distinct (k+1)-gram types, and the
// unigram level backs off to a uniform distribution over the known words
// plus one unknown-word class:
//
//   p_k(w | h) = max(c_k(h w) - D, 0) / c_k(h .)
//              + D * N1+(h .) / c_k(h .) * p_{k-1}(w | h')
//
// Histories are padded with a begin marker. Padding in a context ends the
// history like a context start does.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ctxinfo/language_model.hpp"

namespace ctxinfo {

// How a history treats the separator between ablated and unablated context.
enum class SeparatorPolicy {
  // Skipped: the history continues through it.
  transparent,
  // Ends the history like a context start.
  boundary,
};

struct NGramOptions {
  std::size_t order = 3;
  double discount = 0.75;
  SeparatorPolicy separator = SeparatorPolicy::transparent;
  ReservedTokens reserved;
};

class NGramModel : public LanguageModel {
 public:
  static constexpr std::size_t kMaxOrder = 6;
  using Id = WordIds::Id;
  using Key = std::array<Id, kMaxOrder>;

  explicit NGramModel(NGramOptions options = {});

  std::string name() const override;
  void train(std::span<const TrainingView> views, std::uint64_t seed) override;
  double score(std::span<const std::string> context,
               std::string_view target) const override;
  std::vector<double> score_window(
      const EvaluationWindow& window) const override;
  std::vector<std::string> outcomes() const override;

  const NGramOptions& options() const { return options_; }
  const WordIds& ids() const { return ids_; }
  bool trained() const { return trained_; }

  // Probability of `word` after `history` (order-1 ids, oldest first,
  // begin-marker padded).
  double probability(std::span<const Id> history, Id word) const;
  double context_probability(std::span<const std::string> context,
                             std::string_view target) const;

  // History ids for the word at `end` in an id-mapped context.
  void history_at(std::span<const Id> context, std::size_t end,
                  std::span<Id> history) const;
  std::vector<Id> map_words(std::span<const std::string> words) const;

  void save(std::ostream& out) const;
  static NGramModel load(std::istream& in);

 private:
  struct KeyHash {
    std::size_t operator()(const Key& key) const;
  };
  struct ContextStats {
    std::uint64_t total = 0;
    std::uint64_t distinct = 0;
  };
  struct Level {
    std::unordered_map<Key, std::uint64_t, KeyHash> counts;
    std::unordered_map<Key, ContextStats, KeyHash> contexts;
  };

  void build_levels(std::unordered_map<Key, std::uint64_t, KeyHash> top);

  NGramOptions options_;
  WordIds ids_;
  std::vector<Level> levels_;  // levels_[k - 1] holds k-grams
  bool trained_ = false;
};

}  // namespace ctxinfo
