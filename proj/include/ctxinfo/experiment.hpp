// Experiment runner: config parsing, the arm grid (full-information,
// no-information and one arm per ablation, per seed), result files and the
// resumable run manifest.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxinfo/ablate.hpp"
#include "ctxinfo/corpus.hpp"
#include "ctxinfo/language_model.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/windows.hpp"

namespace ctxinfo {

inline constexpr std::string_view kToolkitVersion = "0.1.0";
inline constexpr std::string_view kFullArm = "full-information";
inline constexpr std::string_view kNoneArm = "no-information";

enum class Paradigm { train_and_eval, eval_only };

struct Stratum {
  Condition condition = Condition::mid_range;
  std::size_t m = 0;
  std::size_t n = 0;
};

struct CorpusConfig {
  std::string train;
  std::string validation;
  bool plain_text = false;
  ReservedTokens reserved;
};

struct ModelConfig {
  // "ngram", "cache" or "adapter".
  std::string kind = "ngram";
  std::size_t order = 3;
  double discount = 0.75;
  double cache_weight = 0.2;
  std::string adapter;
};

struct ExperimentConfig {
  CorpusConfig corpus;
  std::size_t ell = 512;
  std::vector<Stratum> strata = {{Condition::mid_range, 0, 256},
                                 {Condition::long_range, 256, 512}};
  std::size_t eval_stride = 0;
  std::size_t train_stride = 0;
  // Seeds are left at zero; each arm derives its own from the run seed.
  std::vector<AblationSpec> ablations;
  double frequency_threshold = 0.8;
  ModelConfig model;
  std::vector<std::uint64_t> seeds = {1, 2};
  std::string output = "results";
  Paradigm paradigm = Paradigm::train_and_eval;
  BootstrapOptions bootstrap;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  // SHA-256 of the canonical JSON form.
  std::string hash() const;
  // Window layout covering every stratum.
  WindowConfig windows(WindowMode mode) const;
};

// Relative corpus and output paths resolve against `base_dir`.
ExperimentConfig parse_config(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// The small/large presets: ell 512 with strata (0,256) and (256,512), or
// ell 1024 with the same strata.
ExperimentConfig preset_config(std::string_view name);

AblationSpec parse_ablation(const nlohmann::json& entry);
nlohmann::json ablation_to_json(const AblationSpec& spec);

std::unique_ptr<LanguageModel> make_model(const ModelConfig& model,
                                          const ReservedTokens& reserved);
void save_model(const LanguageModel& model, const std::filesystem::path& path);
std::unique_ptr<LanguageModel> load_model(const std::filesystem::path& path,
                                          const ModelConfig& model,
                                          const ReservedTokens& reserved);

// Loaded corpora plus everything derived from them that arms share.
struct ExperimentData {
  AnnotatedCorpus train;
  AnnotatedCorpus validation;
  Vocabulary vocabulary;
  FrequencyPartition partition;
  std::vector<WindowDescriptor> windows;
};

ExperimentData load_data(const ExperimentConfig& config);

// One arm's view of the experiment: what it trains on, how its evaluation
// windows are realized.
struct ArmPlan {
  std::string name;
  std::uint64_t seed = 0;
  AblationSpec spec;
  WindowMode train_mode = WindowMode::train_eval_ablated;
  WindowMode eval_mode = WindowMode::train_eval_ablated;
};

std::vector<ArmPlan> plan_arms(const ExperimentConfig& config);
// The arm whose trained model an arm is evaluated with (itself, except in the
// eval_only paradigm where every arm of a seed shares one model).
std::string model_key(const ExperimentConfig& config, const ArmPlan& arm);

struct TrainingStats {
  std::size_t views = 0;
  std::size_t short_documents = 0;
  std::size_t padding_shortfall = 0;
};

TrainingStats train_arm(LanguageModel& model, const ExperimentConfig& config,
                        const ExperimentData& data, const ArmPlan& arm);

struct ArmResult {
  std::string name;
  std::uint64_t seed = 0;
  std::string model;
  std::vector<LikelihoodReport> strata;
  TrainingStats training;
  std::size_t eval_padding_shortfall = 0;

  nlohmann::json to_json(const std::string& config_hash) const;
  static ArmResult from_json(const nlohmann::json& doc);
};

ArmResult evaluate_arm(const LanguageModel& model,
                       const ExperimentConfig& config,
                       const ExperimentData& data, const ArmPlan& arm);

struct ManifestEntry {
  // "trained", "evaluated" or "failed".
  std::string status;
  std::string path;
  std::string sha256;
  std::string error;
};

struct RunManifest {
  std::string toolkit_version{kToolkitVersion};
  std::string config_hash;
  // Keyed "<arm>/seed-<seed>".
  std::map<std::string, ManifestEntry> arms;
  std::string status;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& doc);
};

std::string arm_key(const std::string& name, std::uint64_t seed);
std::string sha256_file(const std::filesystem::path& path);
// Writes to a temporary sibling and renames over the target.
void write_atomic(const std::filesystem::path& path, const std::string& data);

struct RunSummary {
  RunManifest manifest;
  std::size_t arms_trained = 0;
  std::size_t arms_evaluated = 0;
  std::size_t arms_skipped = 0;
  std::size_t arms_failed = 0;
  std::vector<AblatedInformationResult> results;
};

struct RunOptions {
  // 0: CTXINFO_WORKERS, else the hardware concurrency.
  std::size_t workers = 0;
  std::function<void(const std::string&)> log;
};

std::size_t worker_count_from_env();

// Trains and evaluates every missing arm, then writes results.json,
// results.csv, report.txt and chart.svg. Arms already recorded as evaluated
// with a matching checksum are skipped. Throws ConfigError when the output
// directory belongs to a different configuration.
RunSummary run_experiment(const ExperimentConfig& config,
                          const RunOptions& options = {});

// Recomputes A and intervals from the arm files named by the manifest.
std::vector<AblatedInformationResult> compute_results(
    const ExperimentConfig& config, const std::vector<ArmResult>& arms);

nlohmann::json results_json(const ExperimentConfig& config,
                            const std::vector<AblatedInformationResult>& rows,
                            const std::vector<ArmResult>& arms,
                            const RunManifest& manifest);
std::string results_csv(const std::vector<AblatedInformationResult>& rows);

}  // namespace ctxinfo
