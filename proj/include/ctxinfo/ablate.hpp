// Context ablations: seeded, pure transforms applied to the distant part of a
// language-model context. Order ablations permute words; deletion ablations
// drop words and left-pad back to the original length.
#pragma once

#include <bitset>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/rng.hpp"

namespace ctxinfo {

enum class AblationKind {
  identity,
  shuffle,
  replace_with_old,
  pos_filter,
  entity_filter,
  frequency_filter,
  erase_all,
  extend_with_prior_content,
};

enum class ShuffleUnit { word, trigram_block, sentence };
enum class ShuffleScope { context, sentence, trigram_block };
enum class FrequencyKeep { common, rare };

class PosSet {
 public:
  PosSet() = default;
  PosSet(std::initializer_list<Pos> tags) {
    for (Pos p : tags) insert(p);
  }

  void insert(Pos p) { bits_.set(static_cast<std::size_t>(p)); }
  bool contains(Pos p) const { return bits_.test(static_cast<std::size_t>(p)); }
  bool empty() const { return bits_.none(); }
  PosSet complement() const {
    PosSet out;
    out.bits_ = ~bits_;
    return out;
  }
  std::vector<Pos> tags() const;

  friend bool operator==(const PosSet&, const PosSet&) = default;

 private:
  std::bitset<kPosCount> bits_;
};

namespace pos_sets {
PosSet nouns();
PosSet nouns_verbs();
PosSet nouns_verbs_adjectives();
PosSet content_words();
PosSet function_words();
}  // namespace pos_sets

struct AblationSpec {
  std::string name;
  AblationKind kind = AblationKind::identity;
  std::optional<ShuffleUnit> shuffle_unit;
  std::optional<ShuffleScope> shuffle_scope;
  std::optional<PosSet> pos_set;
  std::optional<FrequencyKeep> keep;
  std::uint64_t seed = 0;

  // Throws ConfigError when the optional fields do not match `kind`.
  void validate() const;
};

bool is_valid_shuffle_mode(ShuffleUnit unit, ShuffleScope scope);

// Catalog of the canonical ablation names ("shuffle-all", "nouns",
// "replace-w-old", ...). Throws ConfigError on an unknown name.
AblationSpec named_ablation(std::string_view name, std::uint64_t seed = 0);
const std::vector<std::string>& ablation_catalog();

std::string_view kind_name(AblationKind kind);
std::optional<AblationKind> parse_kind(std::string_view name);
std::string_view unit_name(ShuffleUnit unit);
std::optional<ShuffleUnit> parse_unit(std::string_view name);
std::string_view scope_name(ShuffleScope scope);
std::optional<ShuffleScope> parse_scope(std::string_view name);

bool is_order_ablation(AblationKind kind);
// Whether the spec needs POS or entity annotations to be meaningful.
bool needs_annotations(const AblationSpec& spec);

struct AblatedSegment {
  std::vector<std::string> words;
  // Which input positions survived; empty for order ablations.
  std::vector<bool> kept_mask;
  std::size_t original_length = 0;
  // replace_with_old: padding inserted because too few words precede.
  std::size_t padding_shortfall = 0;
};

using Segment = std::span<const WordToken>;

AblatedSegment shuffle(Segment segment, ShuffleUnit unit, ShuffleScope scope,
                       Rng& rng);
AblatedSegment shuffle(Segment segment, ShuffleUnit unit, ShuffleScope scope,
                       std::uint64_t seed);

// The `length` words preceding `window_start` in `document`; a shortfall is
// filled with left padding.
AblatedSegment replace_with_old(const AnnotatedDocument& document,
                                std::size_t window_start, std::size_t length,
                                const ReservedTokens& reserved);

AblatedSegment pos_filter(Segment segment, const PosSet& keep,
                          const ReservedTokens& reserved);
AblatedSegment entity_filter(Segment segment, const ReservedTokens& reserved);
AblatedSegment frequency_filter(Segment segment,
                                const FrequencyPartition& partition,
                                FrequencyKeep keep,
                                const ReservedTokens& reserved);

// Replaces the padding prefix of a pos_filter output with matching words from
// before `window_start`, nearest first, inserted in document order.
AblatedSegment extend_with_prior_content(AblatedSegment segment,
                                         const AnnotatedDocument& document,
                                         std::size_t window_start,
                                         const PosSet& keep,
                                         const ReservedTokens& reserved);

AblatedSegment erase_all(Segment segment, const ReservedTokens& reserved);
AblatedSegment identity(Segment segment);

// Applies `spec` to document words [start, start + length) with the
// per-window random stream derived from (spec.seed, doc id, start).
AblatedSegment apply_ablation(const AblationSpec& spec,
                              const AnnotatedDocument& document,
                              std::size_t start, std::size_t length,
                              const FrequencyPartition* partition,
                              const ReservedTokens& reserved);

// Words joined by single spaces, leading padding dropped.
std::string non_padding_suffix(const AblatedSegment& segment,
                               const ReservedTokens& reserved);

}  // namespace ctxinfo
