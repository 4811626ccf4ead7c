// Evaluation layout: `ell` ablated words, a separator, then the unablated
// continuation whose positions [m, n) are scored.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctxinfo/ablate.hpp"
#include "ctxinfo/corpus.hpp"

namespace ctxinfo {

enum class WindowMode {
  train_eval_ablated,
  eval_only,
  no_information,
  full_information,
};

std::string_view mode_name(WindowMode mode);

struct WindowConfig {
  std::size_t ell = 512;
  // Scored stratum, as offsets into the unablated continuation.
  std::size_t m = 0;
  std::size_t n = 512;
  // Evaluation stride; 0 means ell + n (non-overlapping windows).
  std::size_t stride = 0;
  // Training stride; 0 means n.
  std::size_t train_stride = 0;
  WindowMode mode = WindowMode::train_eval_ablated;

  std::size_t eval_stride() const { return stride == 0 ? ell + n : stride; }
  std::size_t training_stride() const {
    return train_stride == 0 ? n : train_stride;
  }
  // Throws ConfigError.
  void validate() const;
  // Stable hex digest of the layout fields.
  std::string hash() const;
};

struct WindowDescriptor {
  std::string doc_id;
  std::size_t start = 0;

  friend bool operator==(const WindowDescriptor&,
                         const WindowDescriptor&) = default;
};

std::string to_json_line(const WindowDescriptor& window,
                         const std::string& config_hash,
                         const std::string& spec_name);

struct DescriptorRecord {
  WindowDescriptor window;
  std::string config_hash;
  std::string spec_name;
};
DescriptorRecord parse_json_line(const std::string& line);

struct EvaluationWindow {
  std::string doc_id;
  std::size_t start = 0;
  // Length of the (possibly empty) prefix before the separator.
  std::size_t prefix_length = 0;
  std::size_t separator_index = 0;
  std::vector<std::string> realized_input;
  // Scored offsets [first_scored, end_scored) into the continuation.
  std::size_t first_scored = 0;
  std::size_t end_scored = 0;
  // Document position of continuation offset 0.
  std::size_t continuation_start = 0;
  std::size_t padding_shortfall = 0;

  std::size_t scored_count() const { return end_scored - first_scored; }
  std::size_t realized_index(std::size_t offset) const {
    return separator_index + 1 + offset;
  }
  std::vector<std::size_t> scored_positions() const;
};

// Windows with start + ell + n <= document length, stepping by the evaluation
// stride. Never crosses a document boundary.
std::vector<WindowDescriptor> enumerate_windows(const AnnotatedCorpus& corpus,
                                                const WindowConfig& config);

struct RealizeContext {
  const FrequencyPartition* partition = nullptr;
  ReservedTokens reserved;
};

EvaluationWindow realize_window(const WindowDescriptor& window,
                                const AblationSpec& spec,
                                const AnnotatedCorpus& corpus,
                                const WindowConfig& config,
                                const RealizeContext& context);

// A realized training input; every word from `first_target` on is a target
// conditioned on all words before it.
struct TrainingView {
  std::vector<std::string> words;
  std::size_t first_target = 0;
};

struct TrainingData {
  std::vector<TrainingView> views;
  // Documents too short for a full ell prefix, used with what exists.
  std::size_t short_documents = 0;
  std::size_t padding_shortfall = 0;
};

// Training views for one arm. In eval_only mode the spec is ignored and a
// uniform truncation t in {0..ell} of each prefix is replaced by padding.
TrainingData training_views(const AnnotatedCorpus& corpus,
                            const WindowConfig& config,
                            const AblationSpec& spec,
                            const RealizeContext& context);

// The truncation drawn for one eval_only training window.
std::size_t eval_only_truncation(std::uint64_t seed, const std::string& doc_id,
                                 std::size_t start, std::size_t prefix_length);

}  // namespace ctxinfo
