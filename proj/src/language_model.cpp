#include "ctxinfo/language_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace ctxinfo {

std::vector<double> LanguageModel::score_window(
    const EvaluationWindow& window) const {
  std::vector<double> out;
  out.reserve(window.scored_count());
  const std::span<const std::string> input(window.realized_input);
  for (std::size_t j = window.first_scored; j < window.end_scored; ++j) {
    const std::size_t i = window.realized_index(j);
    out.push_back(score(input.first(i), input[i]));
  }
  return out;
}

WordIds& WordIds::operator=(const WordIds& other) {
  if (this != &other) {
    reserved_ = other.reserved_;
    words_ = other.words_;
    reindex();
  }
  return *this;
}

void WordIds::assign(std::vector<std::string> words,
                     const ReservedTokens& reserved) {
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (const auto& w : words) {
    if (reserved.is_reserved(w) || w == kUnkSurface) {
      throw std::invalid_argument("reserved token '" + w + "' in vocabulary");
    }
  }
  reserved_ = reserved;
  words_ = std::move(words);
  reindex();
}

void WordIds::reindex() {
  index_.clear();
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], static_cast<Id>(i + kFirstWord));
  }
}

WordIds::Id WordIds::lookup(std::string_view surface) const {
  auto it = index_.find(surface);
  if (it != index_.end()) return it->second;
  if (surface == reserved_.padding) return kPad;
  if (surface == reserved_.separator) return kSep;
  return kUnk;
}

void check_scorable(std::string_view target, const ReservedTokens& reserved) {
  if (reserved.is_reserved(target)) {
    throw std::invalid_argument("cannot score reserved token '" +
                                std::string(target) + "'");
  }
}

}  // namespace ctxinfo
