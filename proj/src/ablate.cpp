#include "ctxinfo/ablate.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <utility>

#include "ctxinfo/errors.hpp"

namespace ctxinfo {
namespace {

using Range = std::pair<std::size_t, std::size_t>;  // [first, second)

// Maximal runs of equal sentence_index. Partial sentences at the segment
// edges are runs like any other.
std::vector<Range> sentence_runs(Segment segment, Range within) {
  std::vector<Range> runs;
  std::size_t begin = within.first;
  for (std::size_t i = within.first + 1; i <= within.second; ++i) {
    if (i == within.second ||
        segment[i].sentence_index != segment[i - 1].sentence_index) {
      runs.emplace_back(begin, i);
      begin = i;
    }
  }
  return runs;
}

// Left-to-right blocks of three; a final block of one or two stands alone.
std::vector<Range> trigram_blocks(Range within) {
  std::vector<Range> blocks;
  for (std::size_t b = within.first; b < within.second; b += 3) {
    blocks.emplace_back(b, std::min(b + 3, within.second));
  }
  return blocks;
}

// Writes the units in `units` back into `order` positions [begin, ...) in a
// uniformly permuted unit order, keeping each unit's internal order.
void permute_units(std::vector<Range> units, std::vector<std::size_t>& order,
                   std::size_t begin, Rng& rng) {
  fisher_yates(std::span<Range>(units), rng);
  std::size_t out = begin;
  for (const auto& [first, last] : units) {
    for (std::size_t i = first; i < last; ++i) order[out++] = i;
  }
}

void permute_within(std::vector<std::size_t>& order, Range range, Rng& rng) {
  fisher_yates(std::span<std::size_t>(order.data() + range.first,
                                      range.second - range.first),
               rng);
}

AblatedSegment padded(std::vector<std::string> kept, std::vector<bool> mask,
                      std::size_t length, const ReservedTokens& reserved) {
  AblatedSegment out;
  out.original_length = length;
  out.kept_mask = std::move(mask);
  out.words.reserve(length);
  out.words.assign(length - kept.size(), reserved.padding);
  for (auto& w : kept) out.words.push_back(std::move(w));
  return out;
}

template <typename Pred>
AblatedSegment keep_if(Segment segment, const ReservedTokens& reserved,
                       Pred&& keep) {
  std::vector<std::string> kept;
  std::vector<bool> mask(segment.size(), false);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    if (keep(segment[i])) {
      kept.push_back(segment[i].surface);
      mask[i] = true;
    }
  }
  return padded(std::move(kept), std::move(mask), segment.size(), reserved);
}

constexpr std::array<std::string_view, 8> kKindNames = {
    "identity",      "shuffle",          "replace_with_old",
    "pos_filter",    "entity_filter",    "frequency_filter",
    "erase_all",     "extend_with_prior_content",
};
constexpr std::array<std::string_view, 3> kUnitNames = {"word", "trigram_block",
                                                        "sentence"};
constexpr std::array<std::string_view, 3> kScopeNames = {
    "context", "sentence", "trigram_block"};

template <typename Enum, std::size_t N>
std::optional<Enum> parse_enum(const std::array<std::string_view, N>& names,
                               std::string_view name) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  return std::nullopt;
}

AblationSpec make_shuffle(std::string name, ShuffleUnit unit,
                          ShuffleScope scope) {
  AblationSpec spec;
  spec.name = std::move(name);
  spec.kind = AblationKind::shuffle;
  spec.shuffle_unit = unit;
  spec.shuffle_scope = scope;
  return spec;
}

AblationSpec make_pos(std::string name, PosSet set,
                      AblationKind kind = AblationKind::pos_filter) {
  AblationSpec spec;
  spec.name = std::move(name);
  spec.kind = kind;
  spec.pos_set = set;
  return spec;
}

AblationSpec make_simple(std::string name, AblationKind kind) {
  AblationSpec spec;
  spec.name = std::move(name);
  spec.kind = kind;
  return spec;
}

AblationSpec make_frequency(std::string name, FrequencyKeep keep) {
  AblationSpec spec;
  spec.name = std::move(name);
  spec.kind = AblationKind::frequency_filter;
  spec.keep = keep;
  return spec;
}

std::vector<AblationSpec> build_catalog() {
  using U = ShuffleUnit;
  using S = ShuffleScope;
  return {
      make_simple("identity", AblationKind::identity),
      make_shuffle("shuffle-all", U::word, S::context),
      make_shuffle("shuf-trigrams-globally", U::trigram_block, S::context),
      make_shuffle("shuf-within-sent", U::word, S::sentence),
      make_shuffle("shuf-within-trigrams", U::word, S::trigram_block),
      make_shuffle("shuf-trigrams-within-sent", U::trigram_block, S::sentence),
      make_shuffle("shuf-sent", U::sentence, S::context),
      make_simple("replace-w-old", AblationKind::replace_with_old),
      make_pos("nouns", pos_sets::nouns()),
      make_pos("nouns-verbs", pos_sets::nouns_verbs()),
      make_pos("nouns-verbs-adj", pos_sets::nouns_verbs_adjectives()),
      make_pos("content-words", pos_sets::content_words()),
      make_pos("func-words", pos_sets::function_words()),
      make_simple("named-entities", AblationKind::entity_filter),
      make_frequency("common", FrequencyKeep::common),
      make_frequency("rare", FrequencyKeep::rare),
      make_simple("erase-all", AblationKind::erase_all),
      make_pos("nouns-verbs-extended", pos_sets::nouns_verbs(),
               AblationKind::extend_with_prior_content),
  };
}

const std::vector<AblationSpec>& catalog_specs() {
  static const std::vector<AblationSpec> specs = build_catalog();
  return specs;
}

}  // namespace

std::vector<Pos> PosSet::tags() const {
  std::vector<Pos> out;
  for (std::size_t i = 0; i < kPosCount; ++i) {
    if (bits_.test(i)) out.push_back(static_cast<Pos>(i));
  }
  return out;
}

namespace pos_sets {
PosSet nouns() { return {Pos::NOUN, Pos::PROPN}; }
PosSet nouns_verbs() { return {Pos::NOUN, Pos::PROPN, Pos::VERB, Pos::AUX}; }
PosSet nouns_verbs_adjectives() {
  return {Pos::NOUN, Pos::PROPN, Pos::VERB, Pos::AUX, Pos::ADJ};
}
PosSet content_words() {
  return {Pos::NOUN, Pos::PROPN, Pos::VERB, Pos::AUX, Pos::ADJ, Pos::ADV};
}
PosSet function_words() { return content_words().complement(); }
}  // namespace pos_sets

std::string_view kind_name(AblationKind kind) {
  return kKindNames[static_cast<std::size_t>(kind)];
}
std::optional<AblationKind> parse_kind(std::string_view name) {
  return parse_enum<AblationKind>(kKindNames, name);
}
std::string_view unit_name(ShuffleUnit unit) {
  return kUnitNames[static_cast<std::size_t>(unit)];
}
std::optional<ShuffleUnit> parse_unit(std::string_view name) {
  return parse_enum<ShuffleUnit>(kUnitNames, name);
}
std::string_view scope_name(ShuffleScope scope) {
  return kScopeNames[static_cast<std::size_t>(scope)];
}
std::optional<ShuffleScope> parse_scope(std::string_view name) {
  return parse_enum<ShuffleScope>(kScopeNames, name);
}

bool is_valid_shuffle_mode(ShuffleUnit unit, ShuffleScope scope) {
  using U = ShuffleUnit;
  using S = ShuffleScope;
  switch (unit) {
    case U::word:
      return true;  // context, sentence and trigram_block scopes
    case U::trigram_block:
      return scope == S::context || scope == S::sentence;
    case U::sentence:
      return scope == S::context;
  }
  return false;
}

bool is_order_ablation(AblationKind kind) {
  return kind == AblationKind::identity || kind == AblationKind::shuffle;
}

bool needs_annotations(const AblationSpec& spec) {
  return spec.kind == AblationKind::pos_filter ||
         spec.kind == AblationKind::entity_filter ||
         spec.kind == AblationKind::extend_with_prior_content;
}

void AblationSpec::validate() const {
  const bool is_shuffle = kind == AblationKind::shuffle;
  if (shuffle_unit.has_value() != is_shuffle ||
      shuffle_scope.has_value() != is_shuffle) {
    throw ConfigError("ablation '" + name +
                      "': shuffle unit/scope must be set exactly for shuffle");
  }
  if (is_shuffle && !is_valid_shuffle_mode(*shuffle_unit, *shuffle_scope)) {
    throw ConfigError("ablation '" + name + "': invalid shuffle mode (" +
                      std::string(unit_name(*shuffle_unit)) + ", " +
                      std::string(scope_name(*shuffle_scope)) + ")");
  }
  const bool uses_pos = kind == AblationKind::pos_filter ||
                        kind == AblationKind::extend_with_prior_content;
  if (pos_set.has_value() != uses_pos) {
    throw ConfigError("ablation '" + name +
                      "': pos_set must be set exactly for POS filters");
  }
  if (uses_pos && pos_set->empty()) {
    throw ConfigError("ablation '" + name + "': empty pos_set");
  }
  if (keep.has_value() != (kind == AblationKind::frequency_filter)) {
    throw ConfigError("ablation '" + name +
                      "': keep must be set exactly for frequency filters");
  }
}

AblationSpec named_ablation(std::string_view name, std::uint64_t seed) {
  for (const auto& spec : catalog_specs()) {
    if (spec.name == name) {
      AblationSpec out = spec;
      out.seed = seed;
      return out;
    }
  }
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

const std::vector<std::string>& ablation_catalog() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& spec : catalog_specs()) out.push_back(spec.name);
    return out;
  }();
  return names;
}

AblatedSegment shuffle(Segment segment, ShuffleUnit unit, ShuffleScope scope,
                       Rng& rng) {
  if (!is_valid_shuffle_mode(unit, scope)) {
    throw ConfigError("invalid shuffle mode (" + std::string(unit_name(unit)) +
                      ", " + std::string(scope_name(scope)) + ")");
  }
  const Range all{0, segment.size()};
  std::vector<std::size_t> order(segment.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (!segment.empty()) {
    using U = ShuffleUnit;
    using S = ShuffleScope;
    if (unit == U::word && scope == S::context) {
      permute_within(order, all, rng);
    } else if (unit == U::trigram_block && scope == S::context) {
      permute_units(trigram_blocks(all), order, 0, rng);
    } else if (unit == U::sentence) {
      permute_units(sentence_runs(segment, all), order, 0, rng);
    } else {
      for (const Range& sentence : sentence_runs(segment, all)) {
        if (unit == U::word && scope == S::sentence) {
          permute_within(order, sentence, rng);
        } else if (unit == U::word) {  // trigram_block scope
          for (const Range& block : trigram_blocks(sentence)) {
            permute_within(order, block, rng);
          }
        } else {  // trigram blocks within the sentence
          permute_units(trigram_blocks(sentence), order, sentence.first, rng);
        }
      }
    }
  }

  AblatedSegment out;
  out.original_length = segment.size();
  out.words.reserve(segment.size());
  for (std::size_t i : order) out.words.push_back(segment[i].surface);
  return out;
}

AblatedSegment shuffle(Segment segment, ShuffleUnit unit, ShuffleScope scope,
                       std::uint64_t seed) {
  Rng rng(seed);
  return shuffle(segment, unit, scope, rng);
}

AblatedSegment replace_with_old(const AnnotatedDocument& document,
                                std::size_t window_start, std::size_t length,
                                const ReservedTokens& reserved) {
  const std::size_t available = std::min(window_start, length);
  AblatedSegment out;
  out.original_length = length;
  out.padding_shortfall = length - available;
  out.words.reserve(length);
  out.words.assign(out.padding_shortfall, reserved.padding);
  for (std::size_t i = window_start - available; i < window_start; ++i) {
    out.words.push_back(document.tokens[i].surface);
  }
  return out;
}

AblatedSegment pos_filter(Segment segment, const PosSet& keep,
                          const ReservedTokens& reserved) {
  return keep_if(segment, reserved,
                 [&](const WordToken& t) { return keep.contains(t.pos); });
}

AblatedSegment entity_filter(Segment segment, const ReservedTokens& reserved) {
  return keep_if(segment, reserved, [](const WordToken& t) {
    return t.entity_span.has_value();
  });
}

AblatedSegment frequency_filter(Segment segment,
                                const FrequencyPartition& partition,
                                FrequencyKeep keep,
                                const ReservedTokens& reserved) {
  const bool want_common = keep == FrequencyKeep::common;
  return keep_if(segment, reserved, [&](const WordToken& t) {
    return partition.is_common(t.surface) == want_common;
  });
}

AblatedSegment extend_with_prior_content(AblatedSegment segment,
                                         const AnnotatedDocument& document,
                                         std::size_t window_start,
                                         const PosSet& keep,
                                         const ReservedTokens& reserved) {
  std::size_t slots = 0;
  while (slots < segment.words.size() &&
         segment.words[slots] == reserved.padding) {
    ++slots;
  }
  std::vector<std::size_t> found;  // nearest first
  for (std::size_t i = std::min(window_start, document.size());
       i > 0 && found.size() < slots; --i) {
    if (keep.contains(document.tokens[i - 1].pos)) found.push_back(i - 1);
  }
  std::size_t out = slots - found.size();
  for (auto it = found.rbegin(); it != found.rend(); ++it) {
    segment.words[out++] = document.tokens[*it].surface;
  }
  return segment;
}

AblatedSegment erase_all(Segment segment, const ReservedTokens& reserved) {
  AblatedSegment out;
  out.original_length = segment.size();
  out.words.assign(segment.size(), reserved.padding);
  out.kept_mask.assign(segment.size(), false);
  return out;
}

AblatedSegment identity(Segment segment) {
  AblatedSegment out;
  out.original_length = segment.size();
  out.words.reserve(segment.size());
  for (const auto& t : segment) out.words.push_back(t.surface);
  return out;
}

AblatedSegment apply_ablation(const AblationSpec& spec,
                              const AnnotatedDocument& document,
                              std::size_t start, std::size_t length,
                              const FrequencyPartition* partition,
                              const ReservedTokens& reserved) {
  const Segment segment(document.tokens.data() + start, length);
  switch (spec.kind) {
    case AblationKind::identity:
      return identity(segment);
    case AblationKind::shuffle: {
      Rng rng = window_stream(spec.seed, document.doc_id, start);
      return shuffle(segment, *spec.shuffle_unit, *spec.shuffle_scope, rng);
    }
    case AblationKind::replace_with_old:
      return replace_with_old(document, start, length, reserved);
    case AblationKind::pos_filter:
      return pos_filter(segment, *spec.pos_set, reserved);
    case AblationKind::entity_filter:
      return entity_filter(segment, reserved);
    case AblationKind::frequency_filter:
      if (partition == nullptr) {
        throw ConfigError("ablation '" + spec.name +
                          "' requires a frequency partition");
      }
      return frequency_filter(segment, *partition, *spec.keep, reserved);
    case AblationKind::erase_all:
      return erase_all(segment, reserved);
    case AblationKind::extend_with_prior_content:
      return extend_with_prior_content(
          pos_filter(segment, *spec.pos_set, reserved), document, start,
          *spec.pos_set, reserved);
  }
  throw ConfigError("unhandled ablation kind");
}

std::string non_padding_suffix(const AblatedSegment& segment,
                               const ReservedTokens& reserved) {
  std::string out;
  for (const auto& w : segment.words) {
    if (out.empty() && w == reserved.padding) continue;
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace ctxinfo
