// Annotated word-level corpora: ingestion, vocabulary statistics and the
// common/rare frequency partition.
#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "ctxinfo/errors.hpp"

namespace ctxinfo {

// Coarse universal-style tags. OTHER covers anything the annotation
// pipeline did not map to a universal category.
enum class Pos : std::uint8_t {
  NOUN,
  PROPN,
  VERB,
  AUX,
  ADJ,
  ADV,
  NUM,
  PUNCT,
  ADP,
  DET,
  PRON,
  CCONJ,
  SCONJ,
  PART,
  INTJ,
  SYM,
  X,
  OTHER,
};

inline constexpr std::size_t kPosCount = 18;

std::string_view pos_name(Pos pos);
std::optional<Pos> parse_pos(std::string_view name);

// Padding and separator are reserved surface strings; ingested text may not
// contain them.
struct ReservedTokens {
  std::string padding = "<pad>";
  std::string separator = "<sep>";

  bool is_reserved(std::string_view surface) const {
    return surface == padding || surface == separator;
  }
};

struct WordToken {
  std::string surface;
  Pos pos = Pos::OTHER;
  std::optional<std::string> entity_span;
  std::size_t sentence_index = 0;
  // Raw sentence id as it appeared in the sidecar file.
  std::string sentence_id;
  bool is_reserved = false;
};

struct AnnotatedDocument {
  std::string doc_id;
  std::vector<WordToken> tokens;

  std::size_t size() const { return tokens.size(); }
  std::size_t sentence_count() const;
};

enum class Split { train, validation };

struct AnnotatedCorpus {
  Split split = Split::train;
  // False for plain-text ingestion (no POS or entity information).
  bool annotated = true;
  std::vector<AnnotatedDocument> documents;

  std::size_t token_count() const;
  const AnnotatedDocument* find(std::string_view doc_id) const;
};

// Sidecar rows: surface<TAB>pos<TAB>entity-or-'-'<TAB>sentence-id, blank line
// between documents. Document ids are "<prefix><ordinal>".
AnnotatedCorpus read_sidecar(std::istream& in, Split split,
                             const ReservedTokens& reserved = {},
                             std::string_view doc_prefix = "doc");

// One sentence per line, whitespace separated words, blank line between
// documents. Every token is tagged OTHER without entity annotations.
AnnotatedCorpus read_plain_text(std::istream& in, Split split,
                                const ReservedTokens& reserved = {},
                                std::string_view doc_prefix = "doc");

void write_sidecar(std::ostream& out, const AnnotatedCorpus& corpus);

AnnotatedCorpus load_corpus_file(const std::string& path, bool plain_text,
                                 Split split,
                                 const ReservedTokens& reserved = {});

struct Vocabulary {
  std::map<std::string, std::uint64_t, std::less<>> type_counts;
  std::uint64_t total_tokens = 0;

  std::uint64_t count(std::string_view surface) const;
};

// Counts only training-split documents; a validation corpus yields an empty
// vocabulary.
Vocabulary build_vocabulary(const AnnotatedCorpus& corpus);

struct FrequencyPartition {
  std::set<std::string, std::less<>> common;
  std::set<std::string, std::less<>> rare;
  double token_mass_threshold = 0.8;

  // Forms outside the vocabulary are rare.
  bool is_common(std::string_view surface) const {
    return common.find(surface) != common.end();
  }
};

// Sorts types by descending count (ties: lexicographic surface) and takes the
// shortest prefix whose mass reaches threshold * total_tokens as common.
FrequencyPartition partition_frequency(const Vocabulary& vocab,
                                       double token_mass_threshold);

}  // namespace ctxinfo
