#include "ctxinfo/cache_model.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ctxinfo {
namespace {

NGramOptions with_boundary(NGramOptions options) {
  options.separator = SeparatorPolicy::boundary;
  return options;
}

}  // namespace

CacheModel::CacheModel(CacheOptions options)
    : weight_(options.cache_weight), base_(with_boundary(options.base)) {
  if (!(weight_ > 0.0 && weight_ <= 1.0)) {
    throw std::invalid_argument("cache weight must lie in (0, 1]");
  }
}

std::string CacheModel::name() const {
  std::ostringstream out;
  out << "cache(lambda=" << weight_ << ")+" << base_.name();
  return out.str();
}

void CacheModel::train(std::span<const TrainingView> views,
                       std::uint64_t seed) {
  base_.train(views, seed);
}

double CacheModel::mix(double cache_count, double cache_size,
                       double base_prob) const {
  const double outcomes = static_cast<double>(base_.ids().outcome_count());
  const double cache = (cache_count + 1.0) / (cache_size + outcomes);
  return weight_ * cache + (1.0 - weight_) * base_prob;
}

double CacheModel::score(std::span<const std::string> context,
                         std::string_view target) const {
  check_scorable(target, base_.options().reserved);
  const auto& ids = base_.ids();
  const WordIds::Id want = ids.lookup(target);
  double count = 0.0;
  double size = 0.0;
  for (const auto& w : context) {
    const WordIds::Id id = ids.lookup(w);
    if (id == WordIds::kPad || id == WordIds::kSep) continue;
    size += 1.0;
    if (id == want) count += 1.0;
  }
  const double base = base_.context_probability(context, target);
  return std::log(mix(count, size, base));
}

std::vector<double> CacheModel::score_window(
    const EvaluationWindow& window) const {
  const auto mapped = base_.map_words(window.realized_input);
  const std::size_t order = base_.options().order;
  std::vector<std::uint32_t> counts(base_.ids().outcome_count() +
                                    WordIds::kFirstWord);
  double size = 0.0;
  std::size_t consumed = 0;
  auto absorb_until = [&](std::size_t end) {
    for (; consumed < end; ++consumed) {
      const WordIds::Id id = mapped[consumed];
      if (id == WordIds::kPad || id == WordIds::kSep) continue;
      ++counts[id];
      size += 1.0;
    }
  };

  std::array<WordIds::Id, NGramModel::kMaxOrder> history{};
  std::vector<double> out;
  out.reserve(window.scored_count());
  for (std::size_t j = window.first_scored; j < window.end_scored; ++j) {
    const std::size_t i = window.realized_index(j);
    check_scorable(window.realized_input[i], base_.options().reserved);
    absorb_until(i);
    base_.history_at(mapped, i,
                     std::span<WordIds::Id>(history.data(), order - 1));
    const double base = base_.probability(
        std::span<const WordIds::Id>(history.data(), order - 1), mapped[i]);
    out.push_back(std::log(mix(counts[mapped[i]], size, base)));
  }
  return out;
}

void CacheModel::save(std::ostream& out) const {
  out << "ctxinfo-cache 1\n" << std::setprecision(17) << weight_ << '\n';
  base_.save(out);
}

CacheModel CacheModel::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "ctxinfo-cache 1") {
    throw std::runtime_error("bad cache model file: header");
  }
  if (!std::getline(in, line)) {
    throw std::runtime_error("bad cache model file: weight");
  }
  CacheOptions options;
  options.cache_weight = std::stod(line);
  CacheModel model(options);
  model.base_ = NGramModel::load(in);
  return model;
}

}  // namespace ctxinfo
