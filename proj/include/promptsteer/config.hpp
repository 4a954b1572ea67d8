#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptsteer/policy.hpp"
#include "promptsteer/ppo.hpp"
#include "promptsteer/multitask.hpp"

namespace promptsteer {

struct ResponderSpec {
    std::string type = "triggered";  // markov | triggered | remote
    int order = 1;
    double smoothing_alpha = 0.1;
    int response_len = 12;
    int triggers_per_task = 2;
    double trigger_beta = 0.9;
    std::string endpoint;  // remote only; PROMPTSTEER_ENDPOINT overrides
    int timeout_ms = 5000;
    int max_retries = 3;
};

struct MetricFlags {
    bool ppl = true;
    bool coherence = true;
    bool self_bleu = true;
};

struct ExperimentConfig {
    std::string corpus_path;
    std::string task_registry_path;
    std::string word_groups_path;
    std::string emotion_lexicon_path;
    ResponderSpec responder;
    TrainSchedule schedule;
    PPOConfig ppo;
    int embed_dim = 32;
    int prompt_len = 5;
    double temperature = 1.0;
    MetricFlags metrics;
    std::string factor = "topic";  // topic | emotion
    bool normalize_topic_reward = false;
    int emotion_group_size = 8;
    int lm_order = 2;
    double lm_alpha = 0.1;
    int eval_episodes = 200;
    std::vector<int> shot_budgets = {0, 10, 500};
    int rollout_threads = 0;  // 0 = hardware concurrency
    std::string out_dir = "runs/out";
    std::uint64_t master_seed = 1;

    // FNV-1a over the canonical serialization, excluding master_seed and
    // out_dir so seed sweeps and relocated runs stay mergeable.
    std::uint64_t config_hash = 0;

    FactorKind factor_kind() const;
};

// Parses and validates a JSON config file. Relative paths (including
// out_dir) resolve against the config file's directory. Throws ConfigError
// on malformed content and MissingFileError when a referenced input is
// absent.
ExperimentConfig load_config(const std::string& path);

// Same, from an already-parsed body; `base_dir` anchors relative paths.
ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir);

std::string config_hash_hex(const ExperimentConfig& config);

}  // namespace promptsteer
