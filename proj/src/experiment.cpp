#include "ctxinfo/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include "ctxinfo/adapter.hpp"
#include "ctxinfo/cache_model.hpp"
#include "ctxinfo/errors.hpp"
#include "ctxinfo/ngram_model.hpp"
#include "ctxinfo/report.hpp"
#include "ctxinfo/rng.hpp"

namespace ctxinfo {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::string_view kEvalOnlyModel = "eval-only-model";

std::string hex(const unsigned char* data, std::size_t size) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(size * 2);
  for (std::size_t i = 0; i < size; ++i) {
    out += digits[data[i] >> 4];
    out += digits[data[i] & 15];
  }
  return out;
}

std::string sha256(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int size = 0;
  EVP_Digest(data.data(), data.size(), digest, &size, EVP_sha256(), nullptr);
  return hex(digest, size);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_keys(const json& obj, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) {
    throw ConfigError(std::string(where) + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "': " +
                      it->dump());
  }
}

std::string resolve(const std::string& path, const fs::path& base) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) {
    return path;
  }
  return (base / path).lexically_normal().string();
}

std::string_view paradigm_name(Paradigm p) {
  return p == Paradigm::train_and_eval ? "train_and_eval" : "eval_only";
}

std::uint64_t arm_seed(std::uint64_t run_seed, std::string_view name) {
  return derive_seed(run_seed, stable_hash(name));
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace

// --- config -----------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (corpus.train.empty()) throw ConfigError("corpus.train is required");
  if (corpus.validation.empty()) {
    throw ConfigError("corpus.validation is required");
  }
  if (corpus.reserved.padding.empty() || corpus.reserved.separator.empty() ||
      corpus.reserved.padding == corpus.reserved.separator) {
    throw ConfigError("padding and separator must be distinct, non-empty");
  }
  if (strata.empty()) throw ConfigError("at least one stratum is required");
  std::set<Condition> seen_conditions;
  for (const auto& s : strata) {
    if (!(s.m < s.n)) {
      throw ConfigError("stratum " + std::string(condition_name(s.condition)) +
                        " needs m < n");
    }
    if (!seen_conditions.insert(s.condition).second) {
      throw ConfigError("duplicate stratum " +
                        std::string(condition_name(s.condition)));
    }
  }
  for (std::size_t i = 0; i < strata.size(); ++i) {
    for (std::size_t j = i + 1; j < strata.size(); ++j) {
      if (strata[i].m < strata[j].n && strata[j].m < strata[i].n) {
        throw ConfigError("strata overlap");
      }
    }
  }
  if (seeds.empty()) throw ConfigError("seeds must be non-empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() !=
      seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  std::set<std::string> names;
  for (const auto& spec : ablations) {
    spec.validate();
    if (spec.name.empty()) throw ConfigError("ablation without a name");
    if (spec.name == kFullArm || spec.name == kNoneArm ||
        spec.name == kEvalOnlyModel) {
      throw ConfigError("ablation name '" + spec.name + "' is reserved");
    }
    if (spec.name.find_first_of("/\\") != std::string::npos) {
      throw ConfigError("ablation name '" + spec.name + "' contains a slash");
    }
    if (!names.insert(spec.name).second) {
      throw ConfigError("duplicate ablation name '" + spec.name + "'");
    }
  }
  if (!(frequency_threshold > 0.0 && frequency_threshold < 1.0)) {
    throw ConfigError("frequency_threshold must lie in (0, 1)");
  }
  if (model.kind == "ngram" || model.kind == "cache") {
    if (model.order < 1 || model.order > NGramModel::kMaxOrder) {
      throw ConfigError("model.order must lie in [1, " +
                        std::to_string(NGramModel::kMaxOrder) + "]");
    }
    if (!(model.discount > 0.0 && model.discount < 1.0)) {
      throw ConfigError("model.discount must lie in (0, 1)");
    }
    if (model.kind == "cache" &&
        !(model.cache_weight > 0.0 && model.cache_weight <= 1.0)) {
      throw ConfigError("model.cache_weight must lie in (0, 1]");
    }
  } else if (model.kind == "adapter") {
    if (model.adapter.empty()) {
      throw ConfigError("model.adapter address is required");
    }
  } else {
    throw ConfigError("unknown model class '" + model.kind + "'");
  }
  if (bootstrap.resamples < 100) {
    throw ConfigError("bootstrap.resamples must be at least 100");
  }
  if (!(bootstrap.confidence > 0.0 && bootstrap.confidence < 1.0)) {
    throw ConfigError("bootstrap.confidence must lie in (0, 1)");
  }
  windows(WindowMode::train_eval_ablated).validate();
}

WindowConfig ExperimentConfig::windows(WindowMode mode) const {
  WindowConfig w;
  w.ell = ell;
  w.m = strata.empty() ? 0 : strata.front().m;
  w.n = 0;
  for (const auto& s : strata) {
    w.m = std::min(w.m, s.m);
    w.n = std::max(w.n, s.n);
  }
  w.stride = eval_stride;
  w.train_stride = train_stride;
  w.mode = mode;
  return w;
}

json ablation_to_json(const AblationSpec& spec) {
  try {
    AblationSpec canonical = named_ablation(spec.name, spec.seed);
    if (canonical.kind == spec.kind &&
        canonical.shuffle_unit == spec.shuffle_unit &&
        canonical.shuffle_scope == spec.shuffle_scope &&
        canonical.pos_set == spec.pos_set && canonical.keep == spec.keep) {
      return spec.name;
    }
  } catch (const ConfigError&) {
  }
  json out = {{"name", spec.name}, {"kind", kind_name(spec.kind)}};
  if (spec.shuffle_unit) out["unit"] = unit_name(*spec.shuffle_unit);
  if (spec.shuffle_scope) out["scope"] = scope_name(*spec.shuffle_scope);
  if (spec.pos_set) {
    json tags = json::array();
    for (Pos p : spec.pos_set->tags()) tags.push_back(pos_name(p));
    out["pos"] = tags;
  }
  if (spec.keep) {
    out["keep"] = *spec.keep == FrequencyKeep::common ? "common" : "rare";
  }
  return out;
}

AblationSpec parse_ablation(const json& entry) {
  if (entry.is_string()) return named_ablation(entry.get<std::string>());
  check_keys(entry, "ablation", {"name", "kind", "unit", "scope", "pos", "keep"});
  AblationSpec spec;
  spec.name = get_or<std::string>(entry, "name", "");
  const auto kind_text = get_or<std::string>(entry, "kind", "");
  if (kind_text.empty()) {
    // A bare {"name": ...} refers to the catalog.
    return named_ablation(spec.name);
  }
  auto kind = parse_kind(kind_text);
  if (!kind) throw ConfigError("unknown ablation kind '" + kind_text + "'");
  spec.kind = *kind;
  if (entry.contains("unit")) {
    auto u = parse_unit(get_or<std::string>(entry, "unit", ""));
    if (!u) throw ConfigError("unknown shuffle unit " + entry["unit"].dump());
    spec.shuffle_unit = *u;
  }
  if (entry.contains("scope")) {
    auto s = parse_scope(get_or<std::string>(entry, "scope", ""));
    if (!s) throw ConfigError("unknown shuffle scope " + entry["scope"].dump());
    spec.shuffle_scope = *s;
  }
  if (entry.contains("pos")) {
    PosSet set;
    for (const auto& tag :
         get_or<std::vector<std::string>>(entry, "pos", {})) {
      auto p = parse_pos(tag);
      if (!p) throw ConfigError("unknown POS tag '" + tag + "'");
      set.insert(*p);
    }
    spec.pos_set = set;
  }
  if (entry.contains("keep")) {
    const auto keep = get_or<std::string>(entry, "keep", "");
    if (keep == "common") {
      spec.keep = FrequencyKeep::common;
    } else if (keep == "rare") {
      spec.keep = FrequencyKeep::rare;
    } else {
      throw ConfigError("keep must be 'common' or 'rare'");
    }
  }
  spec.validate();
  return spec;
}

json ExperimentConfig::to_json() const {
  json strata_json = json::object();
  for (const auto& s : strata) {
    strata_json[std::string(condition_name(s.condition))] = {s.m, s.n};
  }
  json ablations_json = json::array();
  for (const auto& spec : ablations) {
    ablations_json.push_back(ablation_to_json(spec));
  }
  json model_json = {{"class", model.kind}};
  if (model.kind == "adapter") {
    model_json["adapter"] = model.adapter;
  } else {
    model_json["order"] = model.order;
    model_json["discount"] = model.discount;
    if (model.kind == "cache") model_json["cache_weight"] = model.cache_weight;
  }
  return {
      {"corpus",
       {{"train", corpus.train},
        {"validation", corpus.validation},
        {"format", corpus.plain_text ? "plain" : "sidecar"},
        {"padding", corpus.reserved.padding},
        {"separator", corpus.reserved.separator}}},
      {"windows",
       {{"ell", ell},
        {"strata", strata_json},
        {"eval_stride", eval_stride},
        {"train_stride", train_stride}}},
      {"ablations", ablations_json},
      {"frequency_threshold", frequency_threshold},
      {"model", model_json},
      {"seeds", seeds},
      {"output", output},
      {"paradigm", paradigm_name(paradigm)},
      {"bootstrap",
       {{"resamples", bootstrap.resamples},
        {"confidence", bootstrap.confidence},
        {"seed", bootstrap.seed}}},
  };
}

std::string ExperimentConfig::hash() const {
  json canonical = to_json();
  // Where results go does not change what they are.
  canonical.erase("output");
  return sha256(canonical.dump());
}

ExperimentConfig preset_config(std::string_view name) {
  ExperimentConfig config;
  if (name == "default") return config;
  if (name == "long-context") {
    config.ell = 1024;
    return config;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

ExperimentConfig parse_config(const json& doc, const fs::path& base_dir) {
  check_keys(doc, "config",
             {"preset", "corpus", "windows", "ablations", "frequency_threshold",
              "model", "seeds", "output", "paradigm", "bootstrap"});
  ExperimentConfig config =
      preset_config(get_or<std::string>(doc, "preset", "default"));

  if (doc.contains("corpus")) {
    const json& c = doc["corpus"];
    check_keys(c, "corpus",
               {"train", "validation", "format", "padding", "separator"});
    config.corpus.train = resolve(get_or<std::string>(c, "train", ""), base_dir);
    config.corpus.validation =
        resolve(get_or<std::string>(c, "validation", ""), base_dir);
    const auto format = get_or<std::string>(c, "format", "sidecar");
    if (format != "sidecar" && format != "plain") {
      throw ConfigError("corpus.format must be 'sidecar' or 'plain'");
    }
    config.corpus.plain_text = format == "plain";
    config.corpus.reserved.padding =
        get_or<std::string>(c, "padding", config.corpus.reserved.padding);
    config.corpus.reserved.separator =
        get_or<std::string>(c, "separator", config.corpus.reserved.separator);
  }
  if (doc.contains("windows")) {
    const json& w = doc["windows"];
    check_keys(w, "windows", {"ell", "strata", "eval_stride", "train_stride"});
    config.ell = get_or<std::size_t>(w, "ell", config.ell);
    config.eval_stride = get_or<std::size_t>(w, "eval_stride", 0);
    config.train_stride = get_or<std::size_t>(w, "train_stride", 0);
    if (w.contains("strata")) {
      const json& s = w["strata"];
      if (!s.is_object() || s.empty()) {
        throw ConfigError("windows.strata must be a non-empty object");
      }
      config.strata.clear();
      for (const auto& [key, bounds] : s.items()) {
        auto condition = parse_condition(key);
        if (!condition) throw ConfigError("unknown stratum '" + key + "'");
        auto count = [](const json& v) {
          return v.is_number_integer() && v.get<long long>() >= 0;
        };
        if (!bounds.is_array() || bounds.size() != 2 || !count(bounds[0]) ||
            !count(bounds[1])) {
          throw ConfigError("stratum '" + key + "' must be [m, n]");
        }
        config.strata.push_back(
            {*condition, bounds[0].get<std::size_t>(), bounds[1].get<std::size_t>()});
      }
      std::sort(config.strata.begin(), config.strata.end(),
                [](const Stratum& a, const Stratum& b) {
                  return a.condition < b.condition;
                });
    }
  }
  if (doc.contains("ablations")) {
    if (!doc["ablations"].is_array()) {
      throw ConfigError("ablations must be a list");
    }
    for (const auto& entry : doc["ablations"]) {
      config.ablations.push_back(parse_ablation(entry));
    }
  }
  config.frequency_threshold =
      get_or<double>(doc, "frequency_threshold", config.frequency_threshold);
  if (doc.contains("model")) {
    const json& m = doc["model"];
    check_keys(m, "model",
               {"class", "order", "discount", "cache_weight", "adapter"});
    config.model.kind = get_or<std::string>(m, "class", "ngram");
    config.model.order = get_or<std::size_t>(m, "order", config.model.order);
    config.model.discount = get_or<double>(m, "discount", config.model.discount);
    config.model.cache_weight =
        get_or<double>(m, "cache_weight", config.model.cache_weight);
    config.model.adapter = get_or<std::string>(m, "adapter", "");
  }
  if (doc.contains("seeds")) {
    config.seeds = get_or<std::vector<std::uint64_t>>(doc, "seeds", {});
  }
  config.output = resolve(get_or<std::string>(doc, "output", config.output),
                          base_dir);
  const auto paradigm = get_or<std::string>(doc, "paradigm", "train_and_eval");
  if (paradigm == "train_and_eval") {
    config.paradigm = Paradigm::train_and_eval;
  } else if (paradigm == "eval_only") {
    config.paradigm = Paradigm::eval_only;
  } else {
    throw ConfigError("paradigm must be 'train_and_eval' or 'eval_only'");
  }
  if (doc.contains("bootstrap")) {
    const json& b = doc["bootstrap"];
    check_keys(b, "bootstrap", {"resamples", "confidence", "seed"});
    config.bootstrap.resamples =
        get_or<std::size_t>(b, "resamples", config.bootstrap.resamples);
    config.bootstrap.confidence =
        get_or<double>(b, "confidence", config.bootstrap.confidence);
    config.bootstrap.seed = get_or<std::uint64_t>(b, "seed", 0);
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  return parse_config(doc, path.parent_path());
}

// --- models -----------------------------------------------------------------

std::unique_ptr<LanguageModel> make_model(const ModelConfig& model,
                                          const ReservedTokens& reserved) {
  NGramOptions ngram;
  ngram.order = model.order;
  ngram.discount = model.discount;
  ngram.reserved = reserved;
  if (model.kind == "ngram") return std::make_unique<NGramModel>(ngram);
  if (model.kind == "cache") {
    return std::make_unique<CacheModel>(CacheOptions{model.cache_weight, ngram});
  }
  if (model.kind == "adapter") {
    return std::make_unique<AdapterModel>(model.adapter, reserved);
  }
  throw ConfigError("unknown model class '" + model.kind + "'");
}

void save_model(const LanguageModel& model, const fs::path& path) {
  std::ostringstream out;
  if (auto* ngram = dynamic_cast<const NGramModel*>(&model)) {
    ngram->save(out);
  } else if (auto* cache = dynamic_cast<const CacheModel*>(&model)) {
    cache->save(out);
  } else {
    out << "ctxinfo-adapter 1\n" << model.name() << '\n';
  }
  write_atomic(path, out.str());
}

std::unique_ptr<LanguageModel> load_model(const fs::path& path,
                                          const ModelConfig& model,
                                          const ReservedTokens& reserved) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read model " + path.string());
  std::string header;
  std::getline(in, header);
  in.seekg(0);
  if (header == "ctxinfo-ngram 1") {
    return std::make_unique<NGramModel>(NGramModel::load(in));
  }
  if (header == "ctxinfo-cache 1") {
    return std::make_unique<CacheModel>(CacheModel::load(in));
  }
  if (header == "ctxinfo-adapter 1") return make_model(model, reserved);
  throw std::runtime_error("unrecognized model file " + path.string());
}

// --- arms -------------------------------------------------------------------

ExperimentData load_data(const ExperimentConfig& config) {
  ExperimentData data;
  data.train = load_corpus_file(config.corpus.train, config.corpus.plain_text,
                                Split::train, config.corpus.reserved);
  data.validation =
      load_corpus_file(config.corpus.validation, config.corpus.plain_text,
                       Split::validation, config.corpus.reserved);
  data.vocabulary = build_vocabulary(data.train);
  if (data.vocabulary.total_tokens == 0) {
    throw ConfigError("training corpus is empty");
  }
  data.partition =
      partition_frequency(data.vocabulary, config.frequency_threshold);
  data.windows = enumerate_windows(
      data.validation, config.windows(WindowMode::train_eval_ablated));
  if (data.windows.empty()) {
    throw ConfigError("validation corpus has no document long enough for " +
                      std::to_string(config.ell) + " + " +
                      std::to_string(config.windows({}).n) + " words");
  }
  return data;
}

std::vector<ArmPlan> plan_arms(const ExperimentConfig& config) {
  std::vector<ArmPlan> arms;
  for (std::uint64_t seed : config.seeds) {
    const bool eval_only = config.paradigm == Paradigm::eval_only;
    const std::uint64_t truncation = arm_seed(seed, kEvalOnlyModel);

    ArmPlan full{std::string(kFullArm), seed, named_ablation("identity"),
                 WindowMode::full_information, WindowMode::full_information};
    ArmPlan none{std::string(kNoneArm), seed, named_ablation("identity"),
                 WindowMode::no_information, WindowMode::no_information};
    full.spec.name = full.name;
    none.spec.name = none.name;
    if (eval_only) {
      full.train_mode = none.train_mode = WindowMode::eval_only;
      full.spec.seed = none.spec.seed = truncation;
      // All-padding prefix, as the truncated training saw at t = ell.
      none.spec = named_ablation("erase-all", truncation);
      none.spec.name = none.name;
      none.eval_mode = WindowMode::train_eval_ablated;
    }
    arms.push_back(full);
    arms.push_back(none);
    for (const auto& spec : config.ablations) {
      ArmPlan arm{spec.name, seed, spec, WindowMode::train_eval_ablated,
                  WindowMode::train_eval_ablated};
      arm.spec.seed = arm_seed(seed, spec.name);
      if (eval_only) arm.train_mode = WindowMode::eval_only;
      arms.push_back(std::move(arm));
    }
  }
  return arms;
}

std::string model_key(const ExperimentConfig& config, const ArmPlan& arm) {
  if (config.paradigm == Paradigm::eval_only) {
    return arm_key(std::string(kEvalOnlyModel), arm.seed);
  }
  return arm_key(arm.name, arm.seed);
}

TrainingStats train_arm(LanguageModel& model, const ExperimentConfig& config,
                        const ExperimentData& data, const ArmPlan& arm) {
  AblationSpec spec = arm.spec;
  if (arm.train_mode == WindowMode::eval_only) {
    spec.seed = arm_seed(arm.seed, kEvalOnlyModel);
  }
  const RealizeContext context{&data.partition, config.corpus.reserved};
  TrainingData views =
      training_views(data.train, config.windows(arm.train_mode), spec, context);
  model.train(views.views, arm.seed);
  return {views.views.size(), views.short_documents, views.padding_shortfall};
}

ArmResult evaluate_arm(const LanguageModel& model,
                       const ExperimentConfig& config,
                       const ExperimentData& data, const ArmPlan& arm) {
  const WindowConfig layout = config.windows(arm.eval_mode);
  const RealizeContext context{&data.partition, config.corpus.reserved};
  std::vector<std::vector<std::vector<double>>> per_stratum(
      config.strata.size());
  ArmResult result;
  result.name = arm.name;
  result.seed = arm.seed;
  result.model = model.name();
  for (const auto& descriptor : data.windows) {
    const EvaluationWindow window =
        realize_window(descriptor, arm.spec, data.validation, layout, context);
    result.eval_padding_shortfall += window.padding_shortfall;
    const std::vector<double> scores = model.score_window(window);
    for (std::size_t s = 0; s < config.strata.size(); ++s) {
      const Stratum& st = config.strata[s];
      per_stratum[s].emplace_back(scores.begin() + (st.m - layout.m),
                                  scores.begin() + (st.n - layout.m));
    }
  }
  for (std::size_t s = 0; s < config.strata.size(); ++s) {
    result.strata.push_back(aggregate_likelihood(
        per_stratum[s], config.strata[s].condition, arm.name, arm.seed));
  }
  return result;
}

json ArmResult::to_json(const std::string& config_hash) const {
  json strata_json = json::object();
  for (const auto& r : strata) {
    strata_json[std::string(condition_name(r.condition))] = {
        {"mean_nll", r.mean_nll},
        {"window_count", r.window_count},
        {"per_window_nll", r.per_window_nll},
        {"per_window_counts", r.per_window_counts},
    };
  }
  return {
      {"arm", name},
      {"seed", seed},
      {"model", model},
      {"config_hash", config_hash},
      {"strata", strata_json},
      {"training",
       {{"views", training.views},
        {"short_documents", training.short_documents},
        {"padding_shortfall", training.padding_shortfall}}},
      {"evaluation", {{"padding_shortfall", eval_padding_shortfall}}},
  };
}

ArmResult ArmResult::from_json(const json& doc) {
  ArmResult r;
  r.name = doc.at("arm").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.model = doc.at("model").get<std::string>();
  for (const auto& [key, value] : doc.at("strata").items()) {
    LikelihoodReport rep;
    rep.spec = r.name;
    rep.condition = parse_condition(key).value();
    rep.mean_nll = value.at("mean_nll").get<double>();
    rep.window_count = value.at("window_count").get<std::size_t>();
    rep.per_window_nll = value.at("per_window_nll").get<std::vector<double>>();
    rep.per_window_counts =
        value.at("per_window_counts").get<std::vector<std::size_t>>();
    rep.seeds = {r.seed};
    r.strata.push_back(std::move(rep));
  }
  const json& t = doc.at("training");
  r.training = {t.at("views").get<std::size_t>(),
                t.at("short_documents").get<std::size_t>(),
                t.at("padding_shortfall").get<std::size_t>()};
  r.eval_padding_shortfall =
      doc.at("evaluation").at("padding_shortfall").get<std::size_t>();
  return r;
}

// --- manifest ---------------------------------------------------------------

std::string arm_key(const std::string& name, std::uint64_t seed) {
  return name + "/seed-" + std::to_string(seed);
}

std::string sha256_file(const fs::path& path) {
  return sha256(read_file(path));
}

void write_atomic(const fs::path& path, const std::string& data) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << data;
    out.flush();
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

json RunManifest::to_json() const {
  json arms_json = json::object();
  for (const auto& [key, e] : arms) {
    json entry = {{"status", e.status}};
    if (!e.path.empty()) entry["path"] = e.path;
    if (!e.sha256.empty()) entry["sha256"] = e.sha256;
    if (!e.error.empty()) entry["error"] = e.error;
    arms_json[key] = entry;
  }
  return {{"toolkit_version", toolkit_version},
          {"config_hash", config_hash},
          {"status", status},
          {"arms", arms_json}};
}

RunManifest RunManifest::from_json(const json& doc) {
  RunManifest m;
  m.toolkit_version = doc.value("toolkit_version", "");
  m.config_hash = doc.at("config_hash").get<std::string>();
  m.status = doc.value("status", "");
  for (const auto& [key, e] : doc.at("arms").items()) {
    m.arms[key] = {e.value("status", ""), e.value("path", ""),
                   e.value("sha256", ""), e.value("error", "")};
  }
  return m;
}

// --- results ----------------------------------------------------------------

std::vector<AblatedInformationResult> compute_results(
    const ExperimentConfig& config, const std::vector<ArmResult>& arms) {
  auto reports_for = [&](const std::string& name, Condition condition)
      -> std::optional<LikelihoodReport> {
    std::vector<LikelihoodReport> found;
    for (std::uint64_t seed : config.seeds) {
      const LikelihoodReport* hit = nullptr;
      for (const auto& arm : arms) {
        if (arm.name != name || arm.seed != seed) continue;
        for (const auto& r : arm.strata) {
          if (r.condition == condition) hit = &r;
        }
      }
      if (hit == nullptr) return std::nullopt;
      found.push_back(*hit);
    }
    return average_over_seeds(found);
  };

  std::vector<AblatedInformationResult> rows;
  for (const auto& spec : config.ablations) {
    for (const auto& stratum : config.strata) {
      auto ablated = reports_for(spec.name, stratum.condition);
      auto full = reports_for(std::string(kFullArm), stratum.condition);
      auto none = reports_for(std::string(kNoneArm), stratum.condition);
      if (!ablated || !full || !none) {
        const double nan = std::nan("");
        AblatedInformationResult row;
        row.spec = spec.name;
        row.condition = stratum.condition;
        row.ablated_nll = ablated ? ablated->mean_nll : nan;
        row.full_nll = full ? full->mean_nll : nan;
        row.none_nll = none ? none->mean_nll : nan;
        row.numerator = row.denominator = row.a = nan;
        row.ci_low = row.ci_high = nan;
        row.degenerate = row.ci_degenerate = row.missing = true;
        row.seeds_used = config.seeds;
        rows.push_back(std::move(row));
        continue;
      }
      BootstrapOptions boot = config.bootstrap;
      boot.seed = derive_seed(boot.seed, stable_hash(spec.name),
                              static_cast<std::uint64_t>(stratum.condition));
      rows.push_back(ablated_information_with_ci(*ablated, *full, *none, boot));
    }
  }
  return rows;
}

json results_json(const ExperimentConfig& config,
                  const std::vector<AblatedInformationResult>& rows,
                  const std::vector<ArmResult>& arms,
                  const RunManifest& manifest) {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({
        {"spec", r.spec},
        {"condition", condition_name(r.condition)},
        {"ablated_nll", r.ablated_nll},
        {"full_nll", r.full_nll},
        {"none_nll", r.none_nll},
        {"delta_nll", r.numerator},
        {"denominator", r.denominator},
        {"A", r.a},
        {"ci_low", r.ci_low},
        {"ci_high", r.ci_high},
        {"degenerate", r.degenerate},
        {"ci_degenerate", r.ci_degenerate},
        {"missing", r.missing},
        {"seeds", r.seeds_used},
        {"window_count", r.window_count},
    });
  }
  json arms_json = json::array();
  std::size_t short_docs = 0;
  std::size_t train_shortfall = 0;
  std::size_t eval_shortfall = 0;
  std::string model_name;
  for (const auto& a : arms) {
    json means = json::object();
    for (const auto& r : a.strata) {
      means[std::string(condition_name(r.condition))] = r.mean_nll;
    }
    arms_json.push_back({{"arm", a.name}, {"seed", a.seed}, {"mean_nll", means}});
    short_docs = std::max(short_docs, a.training.short_documents);
    train_shortfall += a.training.padding_shortfall;
    eval_shortfall += a.eval_padding_shortfall;
    if (model_name.empty()) model_name = a.model;
  }
  json strata_json = json::object();
  for (const auto& s : config.strata) {
    strata_json[std::string(condition_name(s.condition))] = {s.m, s.n};
  }
  return {
      {"toolkit_version", kToolkitVersion},
      {"config_hash", manifest.config_hash},
      {"status", manifest.status},
      {"model", model_name},
      {"paradigm", paradigm_name(config.paradigm)},
      {"seeds", config.seeds},
      {"ell", config.ell},
      {"strata", strata_json},
      {"bootstrap",
       {{"method", "percentile over windows"},
        {"resamples", config.bootstrap.resamples},
        {"confidence", config.bootstrap.confidence}}},
      {"rows", rows_json},
      {"arms", arms_json},
      {"metadata",
       {{"units",
         "positions and lengths count words, not subword tokens"},
        {"annotations", "POS and entity tags ingested as produced upstream"},
        {"separator", "outside both the prefix and continuation budgets"},
        {"short_training_documents", short_docs},
        {"training_padding_shortfall", train_shortfall},
        {"evaluation_padding_shortfall", eval_shortfall},
        {"reference_large_scale",
         {{"shuffle-all", {{"mid_range", 0.41}, {"long_range", 0.84}}},
          {"nouns", {{"mid_range", 0.20}}}}}}},
  };
}

std::string results_csv(const std::vector<AblatedInformationResult>& rows) {
  std::string out =
      "spec,condition,full_nll,none_nll,ablated_nll,delta_nll,A,ci_low,"
      "ci_high,degenerate,missing,seeds,window_count\n";
  for (const auto& r : rows) {
    std::string seeds;
    for (std::size_t i = 0; i < r.seeds_used.size(); ++i) {
      if (i) seeds += ';';
      seeds += std::to_string(r.seeds_used[i]);
    }
    out += r.spec + ',' + std::string(condition_name(r.condition)) + ',' +
           num(r.full_nll) + ',' + num(r.none_nll) + ',' + num(r.ablated_nll) +
           ',' + num(r.numerator) + ',' + num(r.a) + ',' + num(r.ci_low) +
           ',' + num(r.ci_high) + ',' + (r.degenerate ? "1" : "0") + ',' +
           (r.missing ? "1" : "0") + ',' + seeds + ',' +
           std::to_string(r.window_count) + '\n';
  }
  return out;
}

// --- runner -----------------------------------------------------------------

std::size_t worker_count_from_env() {
  if (const char* env = std::getenv("CTXINFO_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string("CTXINFO_WORKERS must be a positive integer, got '") +
                      env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunSummary run_experiment(const ExperimentConfig& config,
                          const RunOptions& options) {
  config.validate();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  const fs::path out_dir(config.output);
  fs::create_directories(out_dir / "arms");
  const fs::path manifest_path = out_dir / "manifest.json";
  const std::string config_hash = config.hash();

  RunSummary summary;
  RunManifest& manifest = summary.manifest;
  if (fs::exists(manifest_path)) {
    manifest = RunManifest::from_json(json::parse(read_file(manifest_path)));
    if (manifest.config_hash != config_hash) {
      throw ConfigError(out_dir.string() +
                        " holds a run of a different configuration");
    }
  }
  manifest.toolkit_version = kToolkitVersion;
  manifest.config_hash = config_hash;
  write_atomic(out_dir / "config.json", config.to_json().dump(2) + "\n");

  const auto arms = plan_arms(config);
  auto arm_path = [](const ArmPlan& a) {
    return "arms/" + a.name + ".seed-" + std::to_string(a.seed) + ".json";
  };
  auto is_done = [&](const ArmPlan& a) {
    auto it = manifest.arms.find(arm_key(a.name, a.seed));
    if (it == manifest.arms.end() || it->second.status != "evaluated") {
      return false;
    }
    const fs::path p = out_dir / it->second.path;
    return fs::exists(p) && sha256_file(p) == it->second.sha256;
  };

  // Jobs: one per trained model, each evaluating the arms that share it.
  std::vector<std::pair<std::string, std::vector<const ArmPlan*>>> jobs;
  for (const auto& arm : arms) {
    if (is_done(arm)) {
      ++summary.arms_skipped;
      continue;
    }
    const std::string key = model_key(config, arm);
    auto it = std::find_if(jobs.begin(), jobs.end(),
                           [&](const auto& j) { return j.first == key; });
    if (it == jobs.end()) {
      jobs.push_back({key, {&arm}});
    } else {
      it->second.push_back(&arm);
    }
  }

  std::mutex mu;
  auto save_manifest = [&] {
    write_atomic(manifest_path, manifest.to_json().dump(2) + "\n");
  };
  if (!jobs.empty()) {
    const ExperimentData data = load_data(config);
    log("loaded " + std::to_string(data.train.token_count()) +
        " training words, " + std::to_string(data.windows.size()) +
        " evaluation windows");
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      while (true) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) return;
        const auto& [key, members] = jobs[j];
        try {
          auto model = make_model(config.model, config.corpus.reserved);
          const TrainingStats stats =
              train_arm(*model, config, data, *members.front());
          {
            std::lock_guard lock(mu);
            ++summary.arms_trained;
            for (const ArmPlan* a : members) {
              manifest.arms[arm_key(a->name, a->seed)] = {"trained", "", "", ""};
            }
            save_manifest();
            log("trained " + key);
          }
          for (const ArmPlan* a : members) {
            ArmResult result = evaluate_arm(*model, config, data, *a);
            result.training = stats;
            const std::string rel = arm_path(*a);
            write_atomic(out_dir / rel, result.to_json(config_hash).dump() + "\n");
            std::lock_guard lock(mu);
            ++summary.arms_evaluated;
            manifest.arms[arm_key(a->name, a->seed)] = {
                "evaluated", rel, sha256_file(out_dir / rel), ""};
            save_manifest();
            log("evaluated " + arm_key(a->name, a->seed));
          }
        } catch (const std::exception& e) {
          std::lock_guard lock(mu);
          for (const ArmPlan* a : members) {
            auto& entry = manifest.arms[arm_key(a->name, a->seed)];
            if (entry.status == "evaluated") continue;
            entry = {"failed", "", "", e.what()};
            ++summary.arms_failed;
          }
          save_manifest();
          log("failed " + key + ": " + e.what());
        }
      }
    };
    const std::size_t workers =
        std::min(jobs.size(),
                 options.workers ? options.workers : worker_count_from_env());
    std::vector<std::thread> pool;
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  }

  std::vector<ArmResult> results;
  bool complete = true;
  for (const auto& arm : arms) {
    auto it = manifest.arms.find(arm_key(arm.name, arm.seed));
    if (it == manifest.arms.end() || it->second.status != "evaluated") {
      complete = false;
      continue;
    }
    results.push_back(ArmResult::from_json(
        json::parse(read_file(out_dir / it->second.path))));
  }
  manifest.status = complete ? "complete" : "failed";
  save_manifest();

  summary.results = compute_results(config, results);
  write_atomic(out_dir / "results.json",
               results_json(config, summary.results, results, manifest).dump(2) +
                   "\n");
  write_atomic(out_dir / "results.csv", results_csv(summary.results));
  for (const auto& warning : emit_report(out_dir)) log("warning: " + warning);
  return summary;
}

}  // namespace ctxinfo
