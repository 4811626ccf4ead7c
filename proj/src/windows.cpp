#include "ctxinfo/windows.hpp"

#include <cstdio>

#include "json.hpp"

#include "ctxinfo/errors.hpp"
#include "ctxinfo/rng.hpp"

namespace ctxinfo {
namespace {

constexpr std::uint64_t kTruncationStream = 0x7472756e63ULL;  // "trunc"

// Builds [prefix, SEP, continuation) for one window. An empty prefix still
// gets the separator so every layout has it at the same relative place.
void assemble(std::vector<std::string>& out, std::vector<std::string> prefix,
              const AnnotatedDocument& doc, std::size_t cont_begin,
              std::size_t cont_end, const ReservedTokens& reserved) {
  out = std::move(prefix);
  out.reserve(out.size() + 1 + (cont_end - cont_begin));
  out.push_back(reserved.separator);
  for (std::size_t i = cont_begin; i < cont_end; ++i) {
    out.push_back(doc.tokens[i].surface);
  }
}

std::vector<std::string> raw_prefix(const AnnotatedDocument& doc,
                                    std::size_t start, std::size_t length) {
  std::vector<std::string> out;
  out.reserve(length);
  for (std::size_t i = start; i < start + length; ++i) {
    out.push_back(doc.tokens[i].surface);
  }
  return out;
}

struct PrefixResult {
  std::vector<std::string> words;
  std::size_t shortfall = 0;
};

PrefixResult build_prefix(WindowMode mode, const AblationSpec& spec,
                          const AnnotatedDocument& doc, std::size_t start,
                          std::size_t length, const RealizeContext& ctx) {
  switch (mode) {
    case WindowMode::no_information:
      return {};
    case WindowMode::full_information:
      return {raw_prefix(doc, start, length), 0};
    case WindowMode::train_eval_ablated:
    case WindowMode::eval_only: {
      auto seg = apply_ablation(spec, doc, start, length, ctx.partition,
                                ctx.reserved);
      return {std::move(seg.words), seg.padding_shortfall};
    }
  }
  return {};
}

}  // namespace

std::string_view mode_name(WindowMode mode) {
  switch (mode) {
    case WindowMode::train_eval_ablated:
      return "train_eval_ablated";
    case WindowMode::eval_only:
      return "eval_only";
    case WindowMode::no_information:
      return "no_information";
    case WindowMode::full_information:
      return "full_information";
  }
  return "?";
}

void WindowConfig::validate() const {
  if (m >= n) throw ConfigError("window stratum requires m < n");
}

std::string WindowConfig::hash() const {
  std::string key = std::to_string(ell) + "/" + std::to_string(m) + "/" +
                    std::to_string(n) + "/" + std::to_string(eval_stride()) +
                    "/" + std::to_string(training_stride()) + "/" +
                    std::string(mode_name(mode));
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(stable_hash(key)));
  return buf;
}

std::string to_json_line(const WindowDescriptor& window,
                         const std::string& config_hash,
                         const std::string& spec_name) {
  nlohmann::ordered_json j;
  j["doc_id"] = window.doc_id;
  j["start"] = window.start;
  j["config_hash"] = config_hash;
  j["spec"] = spec_name;
  return j.dump();
}

DescriptorRecord parse_json_line(const std::string& line) {
  try {
    auto j = nlohmann::json::parse(line);
    DescriptorRecord rec;
    rec.window.doc_id = j.at("doc_id").get<std::string>();
    rec.window.start = j.at("start").get<std::size_t>();
    rec.config_hash = j.at("config_hash").get<std::string>();
    rec.spec_name = j.at("spec").get<std::string>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("bad window descriptor: ") + e.what());
  }
}

std::vector<std::size_t> EvaluationWindow::scored_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t j = first_scored; j < end_scored; ++j) {
    out.push_back(continuation_start + j);
  }
  return out;
}

std::vector<WindowDescriptor> enumerate_windows(const AnnotatedCorpus& corpus,
                                                const WindowConfig& config) {
  config.validate();
  std::vector<WindowDescriptor> out;
  const std::size_t span = config.ell + config.n;
  const std::size_t stride = config.eval_stride();
  for (const auto& doc : corpus.documents) {
    for (std::size_t start = 0; start + span <= doc.size(); start += stride) {
      out.push_back({doc.doc_id, start});
    }
  }
  return out;
}

EvaluationWindow realize_window(const WindowDescriptor& window,
                                const AblationSpec& spec,
                                const AnnotatedCorpus& corpus,
                                const WindowConfig& config,
                                const RealizeContext& context) {
  const AnnotatedDocument* doc = corpus.find(window.doc_id);
  const std::string where = window.doc_id + "@" + std::to_string(window.start);
  if (doc == nullptr) throw ConfigError("window " + where + ": unknown document");
  if (window.start + config.ell + config.n > doc->size()) {
    throw ConfigError("window " + where + " exceeds its document");
  }
  const bool ablating = config.mode == WindowMode::train_eval_ablated ||
                        config.mode == WindowMode::eval_only;
  if (ablating && needs_annotations(spec) && !corpus.annotated) {
    throw ConfigError("window " + where + ": ablation '" + spec.name +
                      "' needs POS/entity annotations the corpus lacks");
  }

  auto prefix =
      build_prefix(config.mode, spec, *doc, window.start, config.ell, context);
  EvaluationWindow out;
  out.doc_id = window.doc_id;
  out.start = window.start;
  out.prefix_length = prefix.words.size();
  out.separator_index = out.prefix_length;
  out.padding_shortfall = prefix.shortfall;
  out.continuation_start = window.start + config.ell;
  out.first_scored = config.m;
  out.end_scored = config.n;
  assemble(out.realized_input, std::move(prefix.words), *doc,
           out.continuation_start, out.continuation_start + config.n,
           context.reserved);
  return out;
}

std::size_t eval_only_truncation(std::uint64_t seed, const std::string& doc_id,
                                 std::size_t start,
                                 std::size_t prefix_length) {
  Rng rng = window_stream(derive_seed(seed, kTruncationStream), doc_id, start);
  return static_cast<std::size_t>(uniform_below(rng, prefix_length + 1));
}

TrainingData training_views(const AnnotatedCorpus& corpus,
                            const WindowConfig& config,
                            const AblationSpec& spec,
                            const RealizeContext& context) {
  config.validate();
  const bool ablating = config.mode == WindowMode::train_eval_ablated;
  if (ablating && needs_annotations(spec) && !corpus.annotated) {
    throw ConfigError("training: ablation '" + spec.name +
                      "' needs POS/entity annotations the corpus lacks");
  }
  TrainingData data;
  const std::size_t stride = config.training_stride();

  auto emit = [&](const AnnotatedDocument& doc, std::size_t start,
                  std::size_t prefix_len, std::size_t cont_end) {
    PrefixResult prefix;
    if (config.mode == WindowMode::eval_only) {
      prefix.words = raw_prefix(doc, start, prefix_len);
      std::size_t t =
          eval_only_truncation(spec.seed, doc.doc_id, start, prefix_len);
      for (std::size_t i = 0; i < t; ++i) {
        prefix.words[i] = context.reserved.padding;
      }
    } else {
      prefix =
          build_prefix(config.mode, spec, doc, start, prefix_len, context);
    }
    data.padding_shortfall += prefix.shortfall;
    TrainingView view;
    view.first_target = prefix.words.size() + 1;
    assemble(view.words, std::move(prefix.words), doc, start + prefix_len,
             cont_end, context.reserved);
    data.views.push_back(std::move(view));
  };

  for (const auto& doc : corpus.documents) {
    const std::size_t len = doc.size();
    if (len <= config.ell) {
      // Too short for a full prefix: the last min(len, n) words are targets.
      const std::size_t targets = std::min(len, config.n);
      if (targets == 0) continue;
      ++data.short_documents;
      emit(doc, 0, len - targets, len);
      continue;
    }
    if (len < config.ell + config.n) ++data.short_documents;
    for (std::size_t start = 0; start + config.ell < len; start += stride) {
      emit(doc, start, config.ell,
           std::min(start + config.ell + config.n, len));
    }
  }
  if (data.views.empty()) throw ConfigError("training corpus yields no views");
  return data;
}

}  // namespace ctxinfo
