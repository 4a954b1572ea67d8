#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptsteer/config.hpp"
#include "promptsteer/metrics.hpp"
#include "promptsteer/multitask.hpp"
#include "promptsteer/remote.hpp"

namespace promptsteer {

// Everything instantiated from a config: vocabulary, contexts, reward
// bindings, responder, and fitted metric statistics.
struct ExperimentWorld {
    std::shared_ptr<const Vocab> vocab;
    std::vector<TokenSeq> contexts;
    std::shared_ptr<const EmotionClassifier> classifier;  // null without emotion tasks
    TaskRegistry registry;
    std::shared_ptr<const BlackBoxResponder> responder;
    std::optional<NGramLM> lm;
    std::optional<TfIdfStats> tfidf;

    RolloutEnv env(const ExperimentConfig& config) const;
};

ExperimentWorld build_world(const ExperimentConfig& config);

// One (task, method, shots) evaluation cell, Table-style.
struct ReportRow {
    std::string kind;  // topic | emotion
    std::string task;
    std::string method;  // multi | scratch | noprompt | human0 | human1 | independent
    int shots = 0;
    double reward = 0.0;
    std::optional<double> ppl;
    std::optional<double> coherence;
    std::optional<double> sb2;
};

ReportRow make_report_row(const ExperimentConfig& config, const ExperimentWorld& world,
                          const std::string& task_name, FactorKind kind,
                          const std::string& method, int shots, const EvalOutcome& eval);

// The seeded policy the pretrain command starts from.
PolicyParams pretrain_initial_policy(const ExperimentConfig& config,
                                     const ExperimentWorld& world);

enum class Command { Pretrain, Adapt, Baseline, Report };

Command parse_command(const std::string& name);

// Runs one command end to end, writing artifacts into config.out_dir:
//   pretrain -> checkpoint.txt, pretrain_stats.csv
//   adapt    -> adapt_eval.{json,csv}, adapt_episodes.csv, adapt_stats.csv
//   baseline -> baseline_eval.{json,csv}, baseline_episodes.csv
//   report   -> report.{json,csv}, merged from the *_eval.json files
// Every artifact embeds the config hash and master seed. Throws the error
// types from errors.hpp; the CLI maps them to exit codes.
void run_experiment(const ExperimentConfig& config, Command command, bool force_merge = false);

// Merges eval rows found under run_dir, cross-checks rewards against the raw
// episode logs (1e-9), and writes report.csv / report.json.
std::vector<ReportRow> emit_report(const ExperimentConfig& config, const std::string& run_dir,
                                   bool force_merge = false);

}  // namespace promptsteer
