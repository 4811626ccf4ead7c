// Deterministic annotated corpus generator for calibration runs and tests.
//
// Sentences come from a small grammar over Zipf-distributed function and
// content words. Each document draws a handful of topic nouns from a large
// pool and reuses them throughout, along with a few recurring named people,
// so documents carry word recurrence that only long contexts expose.
#pragma once

#include <cstdint>

#include "ctxinfo/corpus.hpp"

namespace ctxinfo {

struct SyntheticOptions {
  std::size_t words = 100000;
  std::size_t min_document = 1500;
  std::size_t max_document = 3000;
  std::size_t topic_pool = 3000;
  std::size_t topics_per_document = 12;
  // Chance that a noun slot is filled with one of the document's topics.
  double topic_rate = 0.35;
  std::uint64_t seed = 1;
};

// Documents are generated until at least `words` tokens exist; the last one
// is complete, so the count may overshoot by one document.
AnnotatedCorpus synthetic_corpus(const SyntheticOptions& options,
                                 Split split = Split::train);

}  // namespace ctxinfo
