#include "ctxinfo/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ctxinfo {
namespace {

constexpr std::array<std::string_view, kPosCount> kPosNames = {
    "NOUN", "PROPN", "VERB",  "AUX",   "ADJ",   "ADV",  "NUM", "PUNCT", "ADP",
    "DET",  "PRON",  "CCONJ", "SCONJ", "PART",  "INTJ", "SYM", "X",     "OTHER",
};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t begin = 0;
  while (true) {
    auto tab = line.find('\t', begin);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(begin));
      break;
    }
    fields.push_back(line.substr(begin, tab - begin));
    begin = tab + 1;
  }
  return fields;
}

// Accumulates rows of one document and enforces the per-document invariants.
class DocumentBuilder {
 public:
  explicit DocumentBuilder(const ReservedTokens& reserved)
      : reserved_(reserved) {}

  void add(std::size_t line, WordToken token) {
    if (token.surface.empty()) throw ParseError(line, "empty surface");
    if (reserved_.is_reserved(token.surface)) {
      throw ParseError(line, "reserved token '" + token.surface +
                                 "' in corpus text");
    }
    if (doc_.tokens.empty() || token.sentence_id != current_sentence_) {
      if (!seen_sentences_.insert(token.sentence_id).second) {
        throw ParseError(line, "sentence '" + token.sentence_id +
                                   "' resumes after a different sentence");
      }
      if (!doc_.tokens.empty()) ++sentence_index_;
      current_sentence_ = token.sentence_id;
    }
    token.sentence_index = sentence_index_;

    const std::string* prev_entity =
        doc_.tokens.empty() || !doc_.tokens.back().entity_span
            ? nullptr
            : &*doc_.tokens.back().entity_span;
    if (token.entity_span &&
        (prev_entity == nullptr || *prev_entity != *token.entity_span)) {
      if (!seen_entities_.insert(*token.entity_span).second) {
        throw ParseError(line, "entity span '" + *token.entity_span +
                                   "' is not contiguous (overlapping spans)");
      }
    }
    doc_.tokens.push_back(std::move(token));
  }

  bool empty() const { return doc_.tokens.empty(); }

  AnnotatedDocument finish(std::string doc_id) {
    AnnotatedDocument out = std::move(doc_);
    out.doc_id = std::move(doc_id);
    doc_ = {};
    seen_sentences_.clear();
    seen_entities_.clear();
    current_sentence_.clear();
    sentence_index_ = 0;
    return out;
  }

 private:
  const ReservedTokens& reserved_;
  AnnotatedDocument doc_;
  std::set<std::string> seen_sentences_;
  std::set<std::string> seen_entities_;
  std::string current_sentence_;
  std::size_t sentence_index_ = 0;
};

template <typename RowFn>
AnnotatedCorpus read_documents(std::istream& in, Split split,
                               const ReservedTokens& reserved,
                               std::string_view doc_prefix, RowFn&& row_fn) {
  AnnotatedCorpus corpus;
  corpus.split = split;
  DocumentBuilder builder(reserved);
  auto flush = [&] {
    if (builder.empty()) return;
    corpus.documents.push_back(builder.finish(
        std::string(doc_prefix) + std::to_string(corpus.documents.size())));
  };

  std::string line;
  std::size_t line_no = 0;
  std::size_t doc_line = 0;  // plain-text sentence counter
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      doc_line = 0;
      continue;
    }
    row_fn(builder, line_no, line, doc_line);
    ++doc_line;
  }
  flush();
  return corpus;
}

}  // namespace

std::string_view pos_name(Pos pos) {
  return kPosNames[static_cast<std::size_t>(pos)];
}

std::optional<Pos> parse_pos(std::string_view name) {
  for (std::size_t i = 0; i < kPosNames.size(); ++i) {
    if (kPosNames[i] == name) return static_cast<Pos>(i);
  }
  return std::nullopt;
}

std::size_t AnnotatedDocument::sentence_count() const {
  return tokens.empty() ? 0 : tokens.back().sentence_index + 1;
}

std::size_t AnnotatedCorpus::token_count() const {
  std::size_t total = 0;
  for (const auto& doc : documents) total += doc.size();
  return total;
}

const AnnotatedDocument* AnnotatedCorpus::find(std::string_view doc_id) const {
  for (const auto& doc : documents) {
    if (doc.doc_id == doc_id) return &doc;
  }
  return nullptr;
}

AnnotatedCorpus read_sidecar(std::istream& in, Split split,
                             const ReservedTokens& reserved,
                             std::string_view doc_prefix) {
  return read_documents(
      in, split, reserved, doc_prefix,
      [](DocumentBuilder& builder, std::size_t line_no, const std::string& line,
         std::size_t) {
        auto fields = split_tabs(line);
        if (fields.size() != 4) {
          throw ParseError(line_no, "expected 4 tab-separated fields, got " +
                                        std::to_string(fields.size()));
        }
        auto pos = parse_pos(fields[1]);
        if (!pos) {
          throw ParseError(line_no,
                           "unknown POS tag '" + std::string(fields[1]) + "'");
        }
        if (fields[2].empty() || fields[3].empty()) {
          throw ParseError(line_no, "empty entity or sentence field");
        }
        WordToken token;
        token.surface = std::string(fields[0]);
        token.pos = *pos;
        if (fields[2] != "-") token.entity_span = std::string(fields[2]);
        token.sentence_id = std::string(fields[3]);
        builder.add(line_no, std::move(token));
      });
}

AnnotatedCorpus read_plain_text(std::istream& in, Split split,
                                const ReservedTokens& reserved,
                                std::string_view doc_prefix) {
  auto corpus = read_documents(
      in, split, reserved, doc_prefix,
      [](DocumentBuilder& builder, std::size_t line_no, const std::string& line,
         std::size_t sentence) {
        std::istringstream words(line);
        std::string word;
        while (words >> word) {
          WordToken token;
          token.surface = word;
          token.sentence_id = "s" + std::to_string(sentence);
          builder.add(line_no, std::move(token));
        }
      });
  corpus.annotated = false;
  return corpus;
}

void write_sidecar(std::ostream& out, const AnnotatedCorpus& corpus) {
  for (std::size_t d = 0; d < corpus.documents.size(); ++d) {
    if (d > 0) out << '\n';
    for (const auto& token : corpus.documents[d].tokens) {
      out << token.surface << '\t' << pos_name(token.pos) << '\t'
          << (token.entity_span ? *token.entity_span : "-") << '\t'
          << token.sentence_id << '\n';
    }
  }
}

AnnotatedCorpus load_corpus_file(const std::string& path, bool plain_text,
                                 Split split, const ReservedTokens& reserved) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  std::string prefix = split == Split::train ? "train/" : "valid/";
  try {
    return plain_text ? read_plain_text(in, split, reserved, prefix)
                      : read_sidecar(in, split, reserved, prefix);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.detail());
  }
}

std::uint64_t Vocabulary::count(std::string_view surface) const {
  auto it = type_counts.find(surface);
  return it == type_counts.end() ? 0 : it->second;
}

Vocabulary build_vocabulary(const AnnotatedCorpus& corpus) {
  Vocabulary vocab;
  if (corpus.split != Split::train) return vocab;
  std::unordered_map<std::string_view, std::uint64_t> counts;
  for (const auto& doc : corpus.documents) {
    for (const auto& token : doc.tokens) {
      if (token.is_reserved) continue;
      ++counts[token.surface];
      ++vocab.total_tokens;
    }
  }
  for (const auto& [surface, count] : counts) {
    vocab.type_counts.emplace(std::string(surface), count);
  }
  return vocab;
}

FrequencyPartition partition_frequency(const Vocabulary& vocab,
                                       double token_mass_threshold) {
  if (!(token_mass_threshold > 0.0 && token_mass_threshold < 1.0)) {
    throw std::invalid_argument("token mass threshold must lie in (0, 1)");
  }
  if (vocab.type_counts.empty() || vocab.total_tokens == 0) {
    throw std::invalid_argument("cannot partition an empty vocabulary");
  }
  std::vector<std::pair<std::string_view, std::uint64_t>> ranked(
      vocab.type_counts.begin(), vocab.type_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });

  FrequencyPartition partition;
  partition.token_mass_threshold = token_mass_threshold;
  const double target =
      token_mass_threshold * static_cast<double>(vocab.total_tokens);
  std::uint64_t mass = 0;
  bool reached = false;
  for (const auto& [surface, count] : ranked) {
    if (!reached) {
      partition.common.emplace(surface);
      mass += count;
      reached = static_cast<double>(mass) >= target;
    } else {
      partition.rare.emplace(surface);
    }
  }
  return partition;
}

}  // namespace ctxinfo
