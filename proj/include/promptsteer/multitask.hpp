#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptsteer/policy.hpp"
#include "promptsteer/ppo.hpp"
#include "promptsteer/responders.hpp"
#include "promptsteer/rewards.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// One steering task: a control factor bound to its reward.
struct Task {
    ControlFactor factor;
    TokenId control_token = -1;
    WordGroup group;            // topic tasks
    std::string emotion_label;  // emotion tasks
};

struct TaskSpec {
    FactorKind kind = FactorKind::Topic;
    bool train = true;
    std::string name;
    std::string group_name;  // topic tasks; defaults to the task name
};

// Registry file: one task per line, "<topic|emotion> <train|test> <name>
// [group]" with '#' comments.
std::vector<TaskSpec> parse_task_lines(const std::vector<std::string>& lines);
std::vector<TaskSpec> load_task_specs(const std::string& path);

class TaskRegistry {
public:
    std::vector<Task> tasks;
    std::vector<int> train_split;  // sorted task ids
    std::vector<int> test_split;
    std::shared_ptr<const EmotionClassifier> classifier;  // required for emotion tasks
    bool normalize_topic_reward = false;

    void validate() const;
    bool in_train(int task_id) const;
    bool in_test(int task_id) const;
    std::vector<int> train_ids(std::optional<FactorKind> kind = {}) const;
    std::vector<int> test_ids(std::optional<FactorKind> kind = {}) const;
    int find_task(const std::string& name) const;  // -1 when absent

    double score(int task_id, const TokenSeq& response) const;
};

TaskRegistry build_registry(
    const std::vector<TaskSpec>& specs,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& word_groups,
    const Vocab& vocab, std::shared_ptr<const EmotionClassifier> classifier);

struct TrainSchedule {
    int tasks_per_epoch = 8;
    int episodes_per_task = 16;
    int epochs = 50;
    std::uint64_t seed = 0;
};

// Everything a rollout needs. The referenced objects must outlive the env.
struct RolloutEnv {
    const Vocab* vocab = nullptr;
    const TaskRegistry* registry = nullptr;
    const BlackBoxResponder* responder = nullptr;
    const std::vector<TokenSeq>* contexts = nullptr;
    int prompt_len = 5;
    double temperature = 1.0;
    int threads = 1;
    std::optional<FactorKind> factor_filter;
    PolicyDims policy_dims;

    std::vector<int> train_ids() const { return registry->train_ids(factor_filter); }
    std::vector<int> test_ids() const { return registry->test_ids(factor_filter); }
};

// Fresh policy wired to the registry's control tokens.
PolicyParams init_policy(const RolloutEnv& env, std::uint64_t seed, double bow_scale = 1.0);

// Named sub-streams of a run seed, so every random decision has its own lane.
enum SeedStream : std::uint64_t {
    kStreamTaskSample = 1,
    kStreamPrompt = 2,
    kStreamResponder = 3,
    kStreamShuffle = 4,
    kStreamEval = 5,
    kStreamInit = 6,
};

struct RolloutCursor {
    std::size_t context_cursor = 0;      // round-robin over the corpus
    std::uint64_t episode_counter = 0;   // global episode index within a run
};

Episode run_episode(const PolicyParams& params, const RolloutEnv& env, int task_id,
                    const TokenSeq& context, std::uint64_t prompt_seed,
                    std::uint64_t responder_seed);

// `count` episodes for one task; contexts round-robin, seeds derived from
// (run_seed, episode counter). Collection may run on env.threads workers.
std::vector<Episode> collect_episodes(const PolicyParams& params, const RolloutEnv& env,
                                      int task_id, int count, std::uint64_t run_seed,
                                      RolloutCursor& cursor);

struct TrainResult {
    std::vector<double> reward_curve;          // mean episode reward per epoch
    std::vector<PPOStats> stats;               // one per update
    std::vector<std::vector<int>> task_trace;  // tasks sampled per epoch
};

// Joint multi-task pretraining: per epoch, sample tasks_per_epoch train tasks
// without replacement, pool their episodes into one batch, run one update.
TrainResult multitask_train(PolicyParams& params, const RolloutEnv& env,
                            const TrainSchedule& schedule, const PPOConfig& ppo_config);

struct EvalOutcome {
    double mean_reward = 0.0;
    std::vector<double> rewards;
    std::vector<TokenSeq> responses;
    std::vector<TokenSeq> contexts;
};

using Prompter = std::function<std::vector<TokenId>(const TokenSeq& context, std::uint64_t seed)>;

// Scores `episodes` responder calls with no learning; seeds and contexts are
// reproducible functions of `seed`.
EvalOutcome evaluate_prompter(const RolloutEnv& env, int task_id, int episodes,
                              std::uint64_t seed, const Prompter& prompter);
EvalOutcome evaluate_policy(const PolicyParams& params, const RolloutEnv& env, int task_id,
                            int episodes, std::uint64_t seed);

struct AdaptResult {
    PolicyParams params;
    double eval_reward = 0.0;
    EvalOutcome eval;
    std::vector<PPOStats> stats;
    std::uint64_t responder_calls = 0;  // adaptation only, excludes evaluation
};

// Few-shot adaptation on a held-out task: exactly `shots` scored episodes,
// grouped into PPO updates of config.batch_size (final partial batch kept),
// then a frozen evaluation of eval_episodes fresh episodes.
AdaptResult fewshot_adapt(PolicyParams params, const RolloutEnv& env, int task_id, int shots,
                          const PPOConfig& ppo_config, int eval_episodes, std::uint64_t seed);

enum class BaselineKind { NoPrompt, HumanTemplate0, HumanTemplate1, IndependentPrompt, Scratch };

const char* baseline_name(BaselineKind kind);

// The handcrafted prompt templates, with {c} substituted.
std::string human_template_text(int variant, const std::string& factor_name);

// NoPrompt feeds x untouched; HumanTemplate prepends the fixed template;
// IndependentPrompt samples a fresh policy with the context term disabled;
// Scratch runs the few-shot protocol from a fresh policy.
EvalOutcome run_baseline(BaselineKind kind, const RolloutEnv& env, int task_id,
                         int eval_episodes, std::uint64_t seed, const PPOConfig& ppo_config,
                         int shots = 0);

// Plants one trigger group per registry task onto a base chatbot: topic tasks
// trigger their own word group, emotion tasks trigger the classifier's most
// characteristic tokens for the label. Trigger tokens are drawn from the
// prompt vocabulary, disjoint across tasks and from all group words.
TriggeredChatbot plant_triggers(const TaskRegistry& registry, const Vocab& vocab,
                                MarkovChatbot base, int triggers_per_task, double beta,
                                std::uint64_t seed, int emotion_group_size = 8);

}  // namespace promptsteer
