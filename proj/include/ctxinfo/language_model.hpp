// The predictor-class interface: anything that can be trained on realized
// contexts and return natural-log probabilities for target words.
#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/windows.hpp"

namespace ctxinfo {

class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual std::string name() const = 0;

  virtual void train(std::span<const TrainingView> views,
                     std::uint64_t seed) = 0;

  // log p(target | context). Reserved tokens are never valid targets.
  virtual double score(std::span<const std::string> context,
                       std::string_view target) const = 0;

  // One log-probability per scored position of the window, in order. The
  // default re-scores each position from scratch.
  virtual std::vector<double> score_window(const EvaluationWindow& window) const;

  // Every outcome class the model distributes mass over, including a single
  // representative of the unknown-word class. Empty if not enumerable.
  virtual std::vector<std::string> outcomes() const { return {}; }
};

// Dense ids for the words of a trained model. Ids below kFirstWord are
// markers; kUnk is the single open-vocabulary class.
class WordIds {
 public:
  using Id = std::uint32_t;
  static constexpr Id kBos = 0;
  static constexpr Id kUnk = 1;
  static constexpr Id kPad = 2;
  static constexpr Id kSep = 3;
  static constexpr Id kFirstWord = 4;
  static constexpr std::string_view kUnkSurface = "<unk>";

  WordIds() = default;
  WordIds(const WordIds& other) { *this = other; }
  WordIds& operator=(const WordIds& other);
  WordIds(WordIds&&) = default;
  WordIds& operator=(WordIds&&) = default;

  // Sorted, de-duplicated vocabulary.
  void assign(std::vector<std::string> words, const ReservedTokens& reserved);

  Id lookup(std::string_view surface) const;
  const std::string& surface(Id id) const { return words_[id - kFirstWord]; }
  const std::vector<std::string>& words() const { return words_; }
  // Known words plus the unknown class.
  std::size_t outcome_count() const { return words_.size() + 1; }
  const ReservedTokens& reserved() const { return reserved_; }

 private:
  void reindex();

  ReservedTokens reserved_;
  std::vector<std::string> words_;
  std::unordered_map<std::string_view, Id> index_;
};

void check_scorable(std::string_view target, const ReservedTokens& reserved);

}  // namespace ctxinfo
