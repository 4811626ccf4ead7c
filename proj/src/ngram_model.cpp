#include "ctxinfo/ngram_model.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "ctxinfo/rng.hpp"

namespace ctxinfo {

std::size_t NGramModel::KeyHash::operator()(const Key& key) const {
  std::uint64_t h = 0;
  for (Id id : key) h = mix64(h ^ id);
  return static_cast<std::size_t>(h);
}

NGramModel::NGramModel(NGramOptions options) : options_(std::move(options)) {
  if (options_.order < 1 || options_.order > kMaxOrder) {
    throw std::invalid_argument("n-gram order must be in [1, " +
                                std::to_string(kMaxOrder) + "]");
  }
  if (!(options_.discount > 0.0 && options_.discount < 1.0)) {
    throw std::invalid_argument("Kneser-Ney discount must lie in (0, 1)");
  }
}

std::string NGramModel::name() const {
  std::ostringstream out;
  out << "ngram(order=" << options_.order << ",discount=" << options_.discount
      << ")";
  return out.str();
}

std::vector<NGramModel::Id> NGramModel::map_words(
    std::span<const std::string> words) const {
  std::vector<Id> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(ids_.lookup(w));
  return out;
}

void NGramModel::history_at(std::span<const Id> context, std::size_t end,
                            std::span<Id> history) const {
  std::size_t j = end;
  std::size_t slot = history.size();
  bool stopped = false;
  while (slot > 0) {
    Id found = WordIds::kBos;
    while (!stopped && j > 0) {
      const Id id = context[--j];
      if (id == WordIds::kSep) {
        if (options_.separator == SeparatorPolicy::boundary) stopped = true;
        continue;
      }
      if (id == WordIds::kPad) {
        stopped = true;
        continue;
      }
      found = id;
      break;
    }
    if (found == WordIds::kBos) stopped = true;
    history[--slot] = found;
  }
}

void NGramModel::train(std::span<const TrainingView> views, std::uint64_t) {
  std::vector<std::string> targets;
  for (const auto& view : views) {
    for (std::size_t i = view.first_target; i < view.words.size(); ++i) {
      check_scorable(view.words[i], options_.reserved);
      targets.push_back(view.words[i]);
    }
  }
  if (targets.empty()) throw std::invalid_argument("empty training stream");
  ids_.assign(std::move(targets), options_.reserved);

  const std::size_t order = options_.order;
  std::unordered_map<Key, std::uint64_t, KeyHash> top;
  std::array<Id, kMaxOrder> history{};
  for (const auto& view : views) {
    const auto mapped = map_words(view.words);
    for (std::size_t i = view.first_target; i < mapped.size(); ++i) {
      history_at(mapped, i, std::span<Id>(history.data(), order - 1));
      Key key{};
      std::copy_n(history.begin(), order - 1, key.begin());
      key[order - 1] = mapped[i];
      ++top[key];
    }
  }
  build_levels(std::move(top));
}

void NGramModel::build_levels(
    std::unordered_map<Key, std::uint64_t, KeyHash> top) {
  const std::size_t order = options_.order;
  levels_.assign(order, Level{});
  levels_[order - 1].counts = std::move(top);
  // Continuation counts: one per distinct left extension.
  for (std::size_t k = order - 1; k >= 1; --k) {
    auto& lower = levels_[k - 1].counts;
    for (const auto& entry : levels_[k].counts) {
      Key suffix{};
      std::copy_n(entry.first.begin() + 1, k, suffix.begin());
      ++lower[suffix];
    }
  }
  for (std::size_t k = 1; k <= order; ++k) {
    auto& level = levels_[k - 1];
    for (const auto& [key, count] : level.counts) {
      Key context{};
      std::copy_n(key.begin(), k - 1, context.begin());
      auto& stats = level.contexts[context];
      stats.total += count;
      stats.distinct += 1;
    }
  }
  trained_ = true;
}

double NGramModel::probability(std::span<const Id> history, Id word) const {
  if (!trained_) throw std::logic_error("n-gram model is not trained");
  const double d = options_.discount;
  double p = 1.0 / static_cast<double>(ids_.outcome_count());
  const std::size_t order = options_.order;
  for (std::size_t k = 1; k <= order; ++k) {
    const auto& level = levels_[k - 1];
    Key key{};
    // last k-1 history ids, then the word
    std::copy_n(history.end() - static_cast<std::ptrdiff_t>(k - 1), k - 1,
                key.begin());
    auto ctx = level.contexts.find(key);
    if (ctx == level.contexts.end()) continue;
    key[k - 1] = word;
    auto hit = level.counts.find(key);
    const double c = hit == level.counts.end() ? 0.0 : double(hit->second);
    const double total = static_cast<double>(ctx->second.total);
    p = (std::max(c - d, 0.0) + d * double(ctx->second.distinct) * p) / total;
  }
  return p;
}

double NGramModel::score(std::span<const std::string> context,
                         std::string_view target) const {
  return std::log(context_probability(context, target));
}

double NGramModel::context_probability(std::span<const std::string> context,
                                       std::string_view target) const {
  check_scorable(target, options_.reserved);
  // Only the tail of the context can reach the history.
  const std::size_t order = options_.order;
  std::vector<Id> tail;
  std::size_t words = 0;
  for (std::size_t j = context.size(); j > 0 && words < order - 1; --j) {
    const Id id = ids_.lookup(context[j - 1]);
    tail.push_back(id);
    if (id == WordIds::kPad) break;
    if (id == WordIds::kSep) {
      if (options_.separator == SeparatorPolicy::boundary) break;
      continue;
    }
    ++words;
  }
  std::reverse(tail.begin(), tail.end());
  std::array<Id, kMaxOrder> history{};
  history_at(tail, tail.size(), std::span<Id>(history.data(), order - 1));
  return probability(std::span<const Id>(history.data(), order - 1),
                     ids_.lookup(target));
}

std::vector<double> NGramModel::score_window(
    const EvaluationWindow& window) const {
  const auto mapped = map_words(window.realized_input);
  const std::size_t order = options_.order;
  std::array<Id, kMaxOrder> history{};
  std::vector<double> out;
  out.reserve(window.scored_count());
  for (std::size_t j = window.first_scored; j < window.end_scored; ++j) {
    const std::size_t i = window.realized_index(j);
    check_scorable(window.realized_input[i], options_.reserved);
    history_at(mapped, i, std::span<Id>(history.data(), order - 1));
    out.push_back(std::log(probability(
        std::span<const Id>(history.data(), order - 1), mapped[i])));
  }
  return out;
}

std::vector<std::string> NGramModel::outcomes() const {
  std::vector<std::string> out = ids_.words();
  out.emplace_back(WordIds::kUnkSurface);
  return out;
}

void NGramModel::save(std::ostream& out) const {
  if (!trained_) throw std::logic_error("n-gram model is not trained");
  out << "ctxinfo-ngram 1\n";
  out << options_.order << ' ' << std::setprecision(17) << options_.discount << ' '
      << (options_.separator == SeparatorPolicy::boundary ? "boundary"
                                                           : "transparent")
      << '\n';
  out << options_.reserved.padding << '\n'
      << options_.reserved.separator << '\n';
  out << ids_.words().size() << '\n';
  for (const auto& w : ids_.words()) out << w << '\n';

  const auto& top = levels_.back().counts;
  std::vector<std::pair<Key, std::uint64_t>> rows(top.begin(), top.end());
  std::sort(rows.begin(), rows.end());
  out << rows.size() << '\n';
  for (const auto& [key, count] : rows) {
    for (std::size_t i = 0; i < options_.order; ++i) out << key[i] << ' ';
    out << count << '\n';
  }
}

NGramModel NGramModel::load(std::istream& in) {
  auto fail = [](const std::string& what) {
    throw std::runtime_error("bad n-gram model file: " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "ctxinfo-ngram 1") fail("header");
  NGramOptions options;
  std::string policy;
  if (!std::getline(in, line)) fail("options");
  std::istringstream opts(line);
  opts >> options.order >> options.discount >> policy;
  options.separator = policy == "boundary" ? SeparatorPolicy::boundary
                                           : SeparatorPolicy::transparent;
  if (!std::getline(in, options.reserved.padding) ||
      !std::getline(in, options.reserved.separator)) {
    fail("reserved tokens");
  }
  NGramModel model(options);
  std::size_t vocab = 0;
  if (!std::getline(in, line)) fail("vocabulary size");
  vocab = std::stoull(line);
  std::vector<std::string> words(vocab);
  for (auto& w : words) {
    if (!std::getline(in, w)) fail("vocabulary");
  }
  model.ids_.assign(std::move(words), options.reserved);

  std::size_t rows = 0;
  if (!(in >> rows)) fail("row count");
  std::unordered_map<Key, std::uint64_t, KeyHash> top;
  top.reserve(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    Key key{};
    for (std::size_t i = 0; i < options.order; ++i) {
      if (!(in >> key[i])) fail("row " + std::to_string(r));
    }
    std::uint64_t count = 0;
    if (!(in >> count)) fail("row " + std::to_string(r));
    top[key] = count;
  }
  model.build_levels(std::move(top));
  return model;
}

}  // namespace ctxinfo
