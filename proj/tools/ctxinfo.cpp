// ctxinfo: ingest corpora, train and evaluate single arms, run full ablation
// grids and render their reports.
//
// Exit codes: 0 success, 2 configuration or input error, 3 arm failure,
// 1 anything else.
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "ctxinfo/adapter.hpp"
#include "ctxinfo/corpus.hpp"
#include "ctxinfo/errors.hpp"
#include "ctxinfo/experiment.hpp"
#include "ctxinfo/report.hpp"
#include "ctxinfo/synthetic.hpp"

using namespace ctxinfo;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitArm = 3;

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::string adapter;
  std::string output;
};

ExperimentConfig configure(const std::string& path, const Overrides& o) {
  ExperimentConfig config = load_config(path);
  if (!o.seeds.empty()) config.seeds = o.seeds;
  if (!o.adapter.empty()) {
    config.model.kind = "adapter";
    config.model.adapter = o.adapter;
  }
  if (!o.output.empty()) config.output = o.output;
  config.validate();
  return config;
}

const ArmPlan& find_arm(const std::vector<ArmPlan>& arms,
                        const std::string& name, std::uint64_t seed) {
  for (const auto& a : arms) {
    if (a.name == name && a.seed == seed) return a;
  }
  throw ConfigError("no arm '" + name + "' with seed " + std::to_string(seed));
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seeds", o.seeds, "replace the configured seed list")
      ->delimiter(',');
  cmd->add_option("--adapter", o.adapter,
                  "score with an external adapter (command or tcp:HOST:PORT)");
  cmd->add_option("--output", o.output, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"usable-information context ablation toolkit"};
  app.require_subcommand(1);

  // ingest
  std::string input, sidecar_out, vocab_out, split_name = "train";
  bool plain = false;
  double threshold = 0.8;
  auto* ingest = app.add_subcommand("ingest", "validate a corpus and report statistics");
  ingest->add_option("input", input, "sidecar or plain-text file")->required();
  ingest->add_flag("--plain", plain, "whitespace text, one sentence per line");
  ingest->add_option("--split", split_name, "train or validation")
      ->check(CLI::IsMember({"train", "validation"}));
  ingest->add_option("--write-sidecar", sidecar_out, "re-serialize as sidecar");
  ingest->add_option("--vocab-out", vocab_out,
                     "write vocabulary and frequency partition as JSON");
  ingest->add_option("--threshold", threshold, "common-word token mass");

  // train / evaluate
  std::string config_path, arm_name, model_path, out_path;
  std::uint64_t seed = 1;
  Overrides overrides;
  auto* train = app.add_subcommand("train", "train the model of one arm");
  train->add_option("--config", config_path)->required();
  train->add_option("--arm", arm_name, "arm name (ablation, full-information, no-information)")
      ->required();
  train->add_option("--seed", seed);
  train->add_option("--model-out", model_path)->required();
  add_overrides(train, overrides);

  auto* evaluate = app.add_subcommand("evaluate", "evaluate one arm with a trained model");
  evaluate->add_option("--config", config_path)->required();
  evaluate->add_option("--arm", arm_name)->required();
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--model", model_path)->required();
  evaluate->add_option("--out", out_path, "arm result JSON (default: stdout)");
  add_overrides(evaluate, overrides);

  // run / report
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "train and evaluate the full grid");
  run->add_option("--config", config_path)->required();
  run->add_option("--workers", workers,
                  "worker pool size (default: CTXINFO_WORKERS or core count)");
  add_overrides(run, overrides);

  std::string results_dir;
  auto* report = app.add_subcommand("report", "render report.txt and chart.svg");
  report->add_option("results", results_dir, "results directory")->required();

  // windows
  auto* windows = app.add_subcommand("windows", "export evaluation windows as JSONL");
  windows->add_option("--config", config_path)->required();
  windows->add_option("--out", out_path, "JSONL file (default: stdout)");
  add_overrides(windows, overrides);

  // synth
  SyntheticOptions synth_options;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic annotated corpus");
  synth->add_option("--words", synth_options.words);
  synth->add_option("--seed", synth_options.seed);
  synth->add_option("--split", split_name)
      ->check(CLI::IsMember({"train", "validation"}));
  synth->add_option("--topic-rate", synth_options.topic_rate);
  synth->add_option("--out", synth_out)->required();

  // check-adapter
  std::string adapter_address;
  int timeout_ms = 30000;
  auto* check = app.add_subcommand("check-adapter", "run protocol conformance checks");
  check->add_option("adapter", adapter_address, "command or tcp:HOST:PORT")
      ->required();
  check->add_option("--timeout-ms", timeout_ms);

  CLI11_PARSE(app, argc, argv);

  const Split split = split_name == "train" ? Split::train : Split::validation;
  try {
    if (*ingest) {
      AnnotatedCorpus corpus = load_corpus_file(input, plain, split);
      std::size_t sentences = 0;
      for (const auto& d : corpus.documents) sentences += d.sentence_count();
      AnnotatedCorpus as_train = corpus;
      as_train.split = Split::train;
      const Vocabulary vocab = build_vocabulary(as_train);
      std::cout << "documents " << corpus.documents.size() << "\n"
                << "sentences " << sentences << "\n"
                << "tokens " << corpus.token_count() << "\n"
                << "types " << vocab.type_counts.size() << "\n";
      if (!sidecar_out.empty()) {
        std::ofstream out(sidecar_out);
        write_sidecar(out, corpus);
      }
      if (!vocab_out.empty() && vocab.total_tokens > 0) {
        const auto partition = partition_frequency(vocab, threshold);
        json doc = {{"total_tokens", vocab.total_tokens},
                    {"type_counts", vocab.type_counts},
                    {"threshold", threshold},
                    {"common", partition.common},
                    {"rare", partition.rare}};
        std::ofstream(vocab_out) << doc.dump(2) << "\n";
        std::cout << "common types " << partition.common.size() << " ("
                  << 100.0 * partition.common.size() / vocab.type_counts.size()
                  << "%)\n";
      }
      return 0;
    }
    if (*train) {
      const auto config = configure(config_path, overrides);
      const auto arms = plan_arms(config);
      const ArmPlan& arm = find_arm(arms, arm_name, seed);
      const ExperimentData data = load_data(config);
      auto model = make_model(config.model, config.corpus.reserved);
      const auto stats = train_arm(*model, config, data, arm);
      save_model(*model, model_path);
      std::cerr << "trained " << arm_key(arm.name, arm.seed) << " on "
                << stats.views << " views\n";
      return 0;
    }
    if (*evaluate) {
      const auto config = configure(config_path, overrides);
      const auto arms = plan_arms(config);
      const ArmPlan& arm = find_arm(arms, arm_name, seed);
      const ExperimentData data = load_data(config);
      auto model = load_model(model_path, config.model, config.corpus.reserved);
      const ArmResult result = evaluate_arm(*model, config, data, arm);
      const std::string text = result.to_json(config.hash()).dump(2) + "\n";
      if (out_path.empty()) {
        std::cout << text;
      } else {
        write_atomic(out_path, text);
      }
      return 0;
    }
    if (*run) {
      const auto config = configure(config_path, overrides);
      RunOptions options;
      options.workers = workers;
      options.log = [](const std::string& msg) { std::cerr << msg << "\n"; };
      const RunSummary summary = run_experiment(config, options);
      std::cerr << "arms trained " << summary.arms_trained << ", evaluated "
                << summary.arms_evaluated << ", skipped "
                << summary.arms_skipped << ", failed " << summary.arms_failed
                << "\n";
      std::ifstream table(fs::path(config.output) / "report.txt");
      std::cout << table.rdbuf();
      return summary.manifest.status == "complete" ? 0 : kExitArm;
    }
    if (*report) {
      for (const auto& w : emit_report(results_dir)) {
        std::cerr << "warning: " << w << "\n";
      }
      std::ifstream table(fs::path(results_dir) / "report.txt");
      std::cout << table.rdbuf();
      return 0;
    }
    if (*windows) {
      const auto config = configure(config_path, overrides);
      const ExperimentData data = load_data(config);
      const std::string hash = config.hash();
      std::ostringstream lines;
      std::set<std::string> seen;
      for (const auto& arm : plan_arms(config)) {
        if (!seen.insert(arm.name).second) continue;
        for (const auto& w : data.windows) {
          lines << to_json_line(w, hash, arm.name) << "\n";
        }
      }
      if (out_path.empty()) {
        std::cout << lines.str();
      } else {
        write_atomic(out_path, lines.str());
      }
      return 0;
    }
    if (*synth) {
      const AnnotatedCorpus corpus = synthetic_corpus(synth_options, split);
      std::ofstream out(synth_out);
      write_sidecar(out, corpus);
      std::cerr << corpus.documents.size() << " documents, "
                << corpus.token_count() << " words\n";
      return 0;
    }
    if (*check) {
      AdapterEndpoint endpoint =
          open_adapter(adapter_address, std::chrono::milliseconds(timeout_ms));
      const ConformanceReport result = check_adapter(endpoint);
      std::cout << "model " << result.model << "\n";
      for (const auto& c : result.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
        if (!c.detail.empty()) std::cout << ": " << c.detail;
        std::cout << "\n";
      }
      return result.passed() ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const AdapterError& e) {
    std::cerr << "adapter error: " << e.what() << "\n";
    return kExitArm;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
