#include "ctxinfo/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ctxinfo/rng.hpp"

namespace ctxinfo {
namespace {

struct Lexeme {
  std::string surface;
  Pos pos;
};

const char* kSyllables[] = {"ka", "lo", "mi", "ru", "te", "sa", "no", "vi",
                            "pe", "do", "ga", "li", "zu", "ma", "ti", "ber",
                            "con", "dal", "fen", "hor", "jin", "mur", "nel",
                            "pol", "ras", "sim", "tor", "val", "wen", "yor"};
constexpr std::size_t kSyllableCount = std::size(kSyllables);

// Distinct pronounceable word for every index.
std::string coined(std::size_t index, std::string_view suffix) {
  std::string out;
  std::size_t x = index;
  do {
    out += kSyllables[x % kSyllableCount];
    x /= kSyllableCount;
  } while (x > 0);
  out += suffix;
  return out;
}

class Zipf {
 public:
  Zipf(std::size_t size, double exponent) : cumulative_(size) {
    double total = 0.0;
    for (std::size_t r = 0; r < size; ++r) {
      total += 1.0 / std::pow(static_cast<double>(r + 1), exponent);
      cumulative_[r] = total;
    }
    for (double& c : cumulative_) c /= total;
  }

  std::size_t draw(Rng& rng) const {
    const double u = uniform_unit(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min<std::size_t>(it - cumulative_.begin(),
                                 cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

struct Lexicon {
  std::vector<Lexeme> determiners = {
      {"the", Pos::DET}, {"a", Pos::DET}, {"this", Pos::DET},
      {"its", Pos::PRON}, {"their", Pos::PRON}, {"every", Pos::DET},
      {"some", Pos::DET}, {"that", Pos::DET}};
  std::vector<Lexeme> prepositions = {
      {"of", Pos::ADP}, {"in", Pos::ADP}, {"to", Pos::ADP},
      {"for", Pos::ADP}, {"with", Pos::ADP}, {"on", Pos::ADP},
      {"by", Pos::ADP}, {"from", Pos::ADP}, {"at", Pos::ADP},
      {"about", Pos::ADP}};
  std::vector<Lexeme> auxiliaries = {
      {"was", Pos::AUX}, {"is", Pos::AUX}, {"had", Pos::AUX},
      {"will", Pos::AUX}, {"has", Pos::AUX}, {"would", Pos::AUX}};
  std::vector<Lexeme> conjunctions = {
      {"and", Pos::CCONJ}, {"but", Pos::CCONJ}, {"while", Pos::SCONJ},
      {"because", Pos::SCONJ}};
  std::vector<std::string> nouns, verbs, adjectives, adverbs, topics;
  std::vector<std::string> first_names, last_names;
};

Lexicon make_lexicon(std::size_t topic_pool) {
  Lexicon lex;
  std::size_t next = 40;  // skip the shortest coinages
  auto fill = [&](std::vector<std::string>& out, std::size_t count,
                  std::string_view suffix) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(coined(next++, suffix));
  };
  fill(lex.nouns, 300, "");
  fill(lex.verbs, 150, "ed");
  fill(lex.adjectives, 100, "ic");
  fill(lex.adverbs, 40, "ly");
  fill(lex.topics, topic_pool, "on");
  for (std::size_t i = 0; i < 120; ++i) {
    std::string name = coined(next++, "a");
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    lex.first_names.push_back(name);
  }
  for (std::size_t i = 0; i < 400; ++i) {
    std::string name = coined(next++, "son");
    name[0] = static_cast<char>(name[0] - 'a' + 'A');
    lex.last_names.push_back(name);
  }
  return lex;
}

class DocumentWriter {
 public:
  DocumentWriter(const Lexicon& lex, const SyntheticOptions& options, Rng& rng,
                 AnnotatedDocument& doc)
      : lex_(lex), options_(options), rng_(rng), doc_(doc),
        nouns_(lex.nouns.size(), 1.0), verbs_(lex.verbs.size(), 1.0),
        adjectives_(lex.adjectives.size(), 1.0),
        adverbs_(lex.adverbs.size(), 1.0),
        topic_rank_(std::max<std::size_t>(options.topics_per_document, 1), 0.8) {
    for (std::size_t i = 0; i < std::max<std::size_t>(options.topics_per_document, 1); ++i) {
      topics_.push_back(lex.topics[uniform_below(rng, lex.topics.size())]);
    }
    for (int i = 0; i < 3; ++i) {
      people_.push_back(
          {lex.first_names[uniform_below(rng, lex.first_names.size())],
           lex.last_names[uniform_below(rng, lex.last_names.size())]});
    }
  }

  void sentence() {
    noun_phrase(true);
    if (chance(0.3)) add(pick(lex_.auxiliaries));
    if (chance(0.15)) add(lex_.adverbs[adverbs_.draw(rng_)], Pos::ADV);
    add(lex_.verbs[verbs_.draw(rng_)], Pos::VERB);
    noun_phrase(false);
    while (chance(0.45)) {
      add(pick(lex_.prepositions));
      noun_phrase(false);
    }
    if (chance(0.2)) {
      add(",", Pos::PUNCT);
      add(pick(lex_.conjunctions));
      noun_phrase(true);
      add(lex_.verbs[verbs_.draw(rng_)], Pos::VERB);
      noun_phrase(false);
    }
    add(".", Pos::PUNCT);
    ++sentence_;
  }

 private:
  bool chance(double p) { return uniform_unit(rng_) < p; }

  const Lexeme& pick(const std::vector<Lexeme>& from) {
    return from[uniform_below(rng_, from.size())];
  }

  void add(const Lexeme& lexeme) { add(lexeme.surface, lexeme.pos); }

  void add(const std::string& surface, Pos pos,
           std::optional<std::string> entity = std::nullopt) {
    WordToken t;
    t.surface = surface;
    t.pos = pos;
    t.entity_span = std::move(entity);
    t.sentence_index = sentence_;
    t.sentence_id = "s" + std::to_string(sentence_);
    doc_.tokens.push_back(std::move(t));
  }

  std::string next_entity() { return "ENT" + std::to_string(++entities_); }

  void noun_phrase(bool subject) {
    const double r = uniform_unit(rng_);
    if (r < (subject ? 0.12 : 0.05)) {
      const auto& [first, last] = people_[uniform_below(rng_, people_.size())];
      const std::string id = next_entity();
      if (chance(0.5)) add(first, Pos::PROPN, id);
      add(last, Pos::PROPN, id);
      return;
    }
    if (r < (subject ? 0.15 : 0.09)) {
      const std::string id = next_entity();
      add(std::to_string(2 + uniform_below(rng_, 97)), Pos::NUM, id);
      add("years", Pos::NOUN, id);
      return;
    }
    add(pick(lex_.determiners));
    if (chance(0.3)) add(lex_.adjectives[adjectives_.draw(rng_)], Pos::ADJ);
    if (chance(options_.topic_rate)) {
      add(topics_[topic_rank_.draw(rng_)], Pos::NOUN);
    } else {
      add(lex_.nouns[nouns_.draw(rng_)], Pos::NOUN);
    }
  }

  const Lexicon& lex_;
  const SyntheticOptions& options_;
  Rng& rng_;
  AnnotatedDocument& doc_;
  Zipf nouns_, verbs_, adjectives_, adverbs_, topic_rank_;
  std::vector<std::string> topics_;
  std::vector<std::pair<std::string, std::string>> people_;
  std::size_t sentence_ = 0;
  std::size_t entities_ = 0;
};

}  // namespace

AnnotatedCorpus synthetic_corpus(const SyntheticOptions& options, Split split) {
  const Lexicon lex = make_lexicon(std::max<std::size_t>(options.topic_pool, 1));
  Rng rng(derive_seed(options.seed, split == Split::train ? 1 : 2));
  AnnotatedCorpus corpus;
  corpus.split = split;
  std::size_t total = 0;
  const std::string prefix = split == Split::train ? "train/" : "valid/";
  while (total < options.words) {
    AnnotatedDocument doc;
    doc.doc_id = prefix + std::to_string(corpus.documents.size());
    const std::size_t span = options.max_document > options.min_document
                                 ? options.max_document - options.min_document
                                 : 0;
    const std::size_t target =
        options.min_document + uniform_below(rng, span + 1);
    DocumentWriter writer(lex, options, rng, doc);
    while (doc.size() < target) writer.sentence();
    total += doc.size();
    corpus.documents.push_back(std::move(doc));
  }
  return corpus;
}

}  // namespace ctxinfo
