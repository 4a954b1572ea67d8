#include "promptsteer/multitask.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "promptsteer/errors.hpp"
#include "promptsteer/parallel.hpp"

namespace promptsteer {

std::vector<TaskSpec> parse_task_lines(const std::vector<std::string>& lines) {
    std::vector<TaskSpec> specs;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        std::string line = lines[n];
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream stream(line);
        std::string kind, split, name, group;
        if (!(stream >> kind)) continue;  // blank line
        if (!(stream >> split >> name))
            throw ConfigError("task registry: line " + std::to_string(n + 1) +
                              ": expected '<kind> <split> <name> [group]'");
        stream >> group;
        TaskSpec spec;
        if (kind == "topic")
            spec.kind = FactorKind::Topic;
        else if (kind == "emotion")
            spec.kind = FactorKind::Emotion;
        else
            throw ConfigError("task registry: line " + std::to_string(n + 1) +
                              ": unknown kind '" + kind + "'");
        if (split == "train")
            spec.train = true;
        else if (split == "test")
            spec.train = false;
        else
            throw ConfigError("task registry: line " + std::to_string(n + 1) +
                              ": unknown split '" + split + "'");
        spec.name = name;
        spec.group_name = group.empty() ? name : group;
        specs.push_back(std::move(spec));
    }
    return specs;
}

std::vector<TaskSpec> load_task_specs(const std::string& path) {
    return parse_task_lines(read_lines(path));
}

void TaskRegistry::validate() const {
    std::set<int> train(train_split.begin(), train_split.end());
    std::set<int> test(test_split.begin(), test_split.end());
    for (int id : train)
        if (test.count(id))
            throw ConfigError("task registry: task id " + std::to_string(id) +
                              " is in both splits");
    if (train.size() + test.size() != tasks.size())
        throw ConfigError("task registry: splits must cover every task exactly once");
    for (int id : train_split)
        if (id < 0 || id >= static_cast<int>(tasks.size()))
            throw ConfigError("task registry: train id out of range");
    for (int id : test_split)
        if (id < 0 || id >= static_cast<int>(tasks.size()))
            throw ConfigError("task registry: test id out of range");
    for (const Task& t : tasks) {
        if (t.factor.kind == FactorKind::Topic && t.group.words.empty())
            throw ConfigError("task registry: topic task '" + t.factor.name +
                              "' has an empty word group");
        if (t.factor.kind == FactorKind::Emotion) {
            if (!classifier)
                throw ConfigError("task registry: emotion task '" + t.factor.name +
                                  "' needs a classifier");
            classifier->label_index(t.emotion_label);  // throws on unknown label
        }
    }
}

bool TaskRegistry::in_train(int task_id) const {
    return std::binary_search(train_split.begin(), train_split.end(), task_id);
}

bool TaskRegistry::in_test(int task_id) const {
    return std::binary_search(test_split.begin(), test_split.end(), task_id);
}

std::vector<int> TaskRegistry::train_ids(std::optional<FactorKind> kind) const {
    std::vector<int> out;
    for (int id : train_split)
        if (!kind || tasks[static_cast<std::size_t>(id)].factor.kind == *kind) out.push_back(id);
    return out;
}

std::vector<int> TaskRegistry::test_ids(std::optional<FactorKind> kind) const {
    std::vector<int> out;
    for (int id : test_split)
        if (!kind || tasks[static_cast<std::size_t>(id)].factor.kind == *kind) out.push_back(id);
    return out;
}

int TaskRegistry::find_task(const std::string& name) const {
    for (std::size_t i = 0; i < tasks.size(); ++i)
        if (tasks[i].factor.name == name) return static_cast<int>(i);
    return -1;
}

double TaskRegistry::score(int task_id, const TokenSeq& response) const {
    const Task& task = tasks.at(static_cast<std::size_t>(task_id));
    if (task.factor.kind == FactorKind::Topic) {
        double count = static_cast<double>(topic_reward(response, task.group));
        if (normalize_topic_reward && !response.empty())
            count /= static_cast<double>(response.size());
        return count;
    }
    return emotion_reward(response, *classifier, task.emotion_label);
}

TaskRegistry build_registry(
    const std::vector<TaskSpec>& specs,
    const std::vector<std::pair<std::string, std::vector<std::string>>>& word_groups,
    const Vocab& vocab, std::shared_ptr<const EmotionClassifier> classifier) {
    std::map<std::string, const std::vector<std::string>*> groups_by_name;
    for (const auto& [name, words] : word_groups) groups_by_name[name] = &words;

    TaskRegistry registry;
    registry.classifier = std::move(classifier);
    std::set<std::string> names;
    for (const TaskSpec& spec : specs) {
        if (!names.insert(spec.name).second)
            throw ConfigError("task registry: duplicate task name '" + spec.name + "'");
        Task task;
        task.factor.kind = spec.kind;
        task.factor.name = spec.name;
        task.control_token = vocab.control_id(spec.name);
        if (spec.kind == FactorKind::Topic) {
            auto it = groups_by_name.find(spec.group_name);
            if (it == groups_by_name.end())
                throw ConfigError("task registry: topic task '" + spec.name +
                                  "' references unknown word group '" + spec.group_name + "'");
            task.group.topic = spec.group_name;
            for (const std::string& word : *it->second) {
                if (!vocab.contains(word))
                    throw ConfigError("word group '" + spec.group_name + "': word '" + word +
                                      "' is not in the vocabulary");
                task.group.words.insert(vocab.id_of(word));
            }
        } else {
            task.emotion_label = spec.name;
        }
        int id = static_cast<int>(registry.tasks.size());
        registry.tasks.push_back(std::move(task));
        (spec.train ? registry.train_split : registry.test_split).push_back(id);
    }
    std::sort(registry.train_split.begin(), registry.train_split.end());
    std::sort(registry.test_split.begin(), registry.test_split.end());
    registry.validate();
    return registry;
}

PolicyParams init_policy(const RolloutEnv& env, std::uint64_t seed, double bow_scale) {
    PolicyDims dims = env.policy_dims;
    dims.num_tasks = static_cast<int>(env.registry->tasks.size());
    dims.prompt_vocab = env.vocab->prompt_vocab_size();
    dims.vocab = env.vocab->size();
    PolicyParams params = PolicyParams::random_init(dims, mix_seed(seed, kStreamInit));
    params.bow_scale = bow_scale;
    for (std::size_t i = 0; i < env.registry->tasks.size(); ++i)
        params.task_of_token.emplace(env.registry->tasks[i].control_token, static_cast<int>(i));
    return params;
}

Episode run_episode(const PolicyParams& params, const RolloutEnv& env, int task_id,
                    const TokenSeq& context, std::uint64_t prompt_seed,
                    std::uint64_t responder_seed) {
    const Task& task = env.registry->tasks.at(static_cast<std::size_t>(task_id));
    Episode ep;
    ep.task_id = task_id;
    ep.context = context;
    ep.steer_input = build_steer_input(task.factor, context, *env.vocab);
    ep.prompt = sample_prompt(params, ep.steer_input, env.prompt_len, env.temperature,
                              prompt_seed);
    TokenSeq responder_input;
    responder_input.reserve(ep.prompt.tokens.size() + context.size());
    responder_input.insert(responder_input.end(), ep.prompt.tokens.begin(),
                           ep.prompt.tokens.end());
    responder_input.insert(responder_input.end(), context.begin(), context.end());
    ep.response = env.responder->respond(responder_input, responder_seed);
    ep.reward = env.registry->score(task_id, ep.response);
    if (!std::isfinite(ep.reward))
        throw std::runtime_error("episode produced a non-finite reward");
    ep.old_logprobs = ep.prompt.logprobs;
    return ep;
}

std::vector<Episode> collect_episodes(const PolicyParams& params, const RolloutEnv& env,
                                      int task_id, int count, std::uint64_t run_seed,
                                      RolloutCursor& cursor) {
    std::vector<Episode> episodes(static_cast<std::size_t>(count));
    std::size_t n_contexts = env.contexts->size();
    if (n_contexts == 0) throw std::invalid_argument("collect_episodes: no contexts");
    std::size_t base_cursor = cursor.context_cursor;
    std::uint64_t base_counter = cursor.episode_counter;
    parallel_for(static_cast<std::size_t>(count), env.threads, [&](std::size_t i) {
        const TokenSeq& context = (*env.contexts)[(base_cursor + i) % n_contexts];
        std::uint64_t k = base_counter + i;
        episodes[i] = run_episode(params, env, task_id, context,
                                  mix_seed(run_seed, kStreamPrompt, k),
                                  mix_seed(run_seed, kStreamResponder, k));
    });
    cursor.context_cursor = (base_cursor + static_cast<std::size_t>(count)) % n_contexts;
    cursor.episode_counter = base_counter + static_cast<std::uint64_t>(count);
    return episodes;
}

namespace {

std::vector<int> sample_without_replacement(std::vector<int> pool, int k, Rng& rng) {
    for (int i = 0; i < k; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.uniform_int(pool.size() - static_cast<std::size_t>(i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(k));
    return pool;
}

double mean_reward_of(const std::vector<Episode>& batch) {
    double sum = 0.0;
    for (const Episode& ep : batch) sum += ep.reward;
    return batch.empty() ? 0.0 : sum / static_cast<double>(batch.size());
}

}  // namespace

TrainResult multitask_train(PolicyParams& params, const RolloutEnv& env,
                            const TrainSchedule& schedule, const PPOConfig& ppo_config) {
    std::vector<int> train = env.train_ids();
    if (schedule.tasks_per_epoch < 1 ||
        schedule.tasks_per_epoch > static_cast<int>(train.size()))
        throw std::invalid_argument("multitask_train: tasks_per_epoch must be in [1, |train|]");
    if (schedule.episodes_per_task < 1)
        throw std::invalid_argument("multitask_train: episodes_per_task must be >= 1");

    TrainResult result;
    std::map<int, double> baselines;
    RolloutCursor cursor;
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        try {
            Rng task_rng(mix_seed(schedule.seed, kStreamTaskSample, static_cast<std::uint64_t>(epoch)));
            std::vector<int> sampled =
                sample_without_replacement(train, schedule.tasks_per_epoch, task_rng);
            std::vector<Episode> batch;
            batch.reserve(static_cast<std::size_t>(schedule.tasks_per_epoch) *
                          static_cast<std::size_t>(schedule.episodes_per_task));
            for (int task_id : sampled) {
                auto episodes = collect_episodes(params, env, task_id,
                                                 schedule.episodes_per_task, schedule.seed,
                                                 cursor);
                for (auto& ep : episodes) batch.push_back(std::move(ep));
            }
            Rng shuffle_rng(mix_seed(schedule.seed, kStreamShuffle, static_cast<std::uint64_t>(epoch)));
            PPOStats stats = ppo_update(params, batch, ppo_config, baselines, shuffle_rng);
            result.reward_curve.push_back(mean_reward_of(batch));
            result.stats.push_back(stats);
            result.task_trace.push_back(std::move(sampled));
        } catch (const TransportError& e) {
            throw TransportError("epoch " + std::to_string(epoch) + ": " + e.what(),
                                 e.attempts);
        } catch (const ProtocolError& e) {
            throw ProtocolError("epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error("epoch " + std::to_string(epoch) + ": " + e.what());
        }
    }
    return result;
}

EvalOutcome evaluate_prompter(const RolloutEnv& env, int task_id, int episodes,
                              std::uint64_t seed, const Prompter& prompter) {
    EvalOutcome outcome;
    outcome.rewards.resize(static_cast<std::size_t>(episodes));
    outcome.responses.resize(static_cast<std::size_t>(episodes));
    outcome.contexts.resize(static_cast<std::size_t>(episodes));
    std::size_t n_contexts = env.contexts->size();
    if (n_contexts == 0) throw std::invalid_argument("evaluate: no contexts");
    parallel_for(static_cast<std::size_t>(episodes), env.threads, [&](std::size_t i) {
        const TokenSeq& context = (*env.contexts)[i % n_contexts];
        std::uint64_t ep_seed = mix_seed(seed, kStreamEval, i);
        std::vector<TokenId> prompt = prompter(context, ep_seed);
        TokenSeq input;
        input.reserve(prompt.size() + context.size());
        input.insert(input.end(), prompt.begin(), prompt.end());
        input.insert(input.end(), context.begin(), context.end());
        TokenSeq response =
            env.responder->respond(input, mix_seed(seed, kStreamResponder, i));
        outcome.rewards[i] = env.registry->score(task_id, response);
        outcome.responses[i] = std::move(response);
        outcome.contexts[i] = context;
    });
    double sum = 0.0;
    for (double r : outcome.rewards) sum += r;
    outcome.mean_reward = episodes > 0 ? sum / static_cast<double>(episodes) : 0.0;
    return outcome;
}

EvalOutcome evaluate_policy(const PolicyParams& params, const RolloutEnv& env, int task_id,
                            int episodes, std::uint64_t seed) {
    const Task& task = env.registry->tasks.at(static_cast<std::size_t>(task_id));
    return evaluate_prompter(env, task_id, episodes, seed,
                             [&](const TokenSeq& context, std::uint64_t ep_seed) {
                                 TokenSeq s = build_steer_input(task.factor, context, *env.vocab);
                                 return sample_prompt(params, s, env.prompt_len, env.temperature,
                                                      ep_seed)
                                     .tokens;
                             });
}

AdaptResult fewshot_adapt(PolicyParams params, const RolloutEnv& env, int task_id, int shots,
                          const PPOConfig& ppo_config, int eval_episodes, std::uint64_t seed) {
    if (!env.registry->in_test(task_id))
        throw std::invalid_argument("fewshot_adapt: task " + std::to_string(task_id) +
                                    " is not in the test split");
    if (shots < 0) throw std::invalid_argument("fewshot_adapt: shots must be >= 0");

    AdaptResult result{std::move(params), 0.0, EvalOutcome{}, {}, 0};
    std::map<int, double> baselines;
    RolloutCursor cursor;
    int remaining = shots;
    int update_index = 0;
    while (remaining > 0) {
        int chunk = std::min(remaining, ppo_config.batch_size);
        auto batch = collect_episodes(result.params, env, task_id, chunk, seed, cursor);
        result.responder_calls += static_cast<std::uint64_t>(batch.size());
        Rng shuffle_rng(mix_seed(seed, kStreamShuffle, static_cast<std::uint64_t>(update_index)));
        result.stats.push_back(
            ppo_update(result.params, batch, ppo_config, baselines, shuffle_rng));
        remaining -= chunk;
        ++update_index;
    }
    result.eval = evaluate_policy(result.params, env, task_id, eval_episodes,
                                  mix_seed(seed, kStreamEval));
    result.eval_reward = result.eval.mean_reward;
    return result;
}

const char* baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::NoPrompt: return "noprompt";
        case BaselineKind::HumanTemplate0: return "human0";
        case BaselineKind::HumanTemplate1: return "human1";
        case BaselineKind::IndependentPrompt: return "independent";
        case BaselineKind::Scratch: return "scratch";
    }
    return "unknown";
}

std::string human_template_text(int variant, const std::string& factor_name) {
    if (variant == 0) return "There is " + factor_name + " in the following response: ";
    if (variant == 1) return "Making the following response full of " + factor_name + ": ";
    throw std::invalid_argument("human_template_text: variant must be 0 or 1");
}

EvalOutcome run_baseline(BaselineKind kind, const RolloutEnv& env, int task_id,
                         int eval_episodes, std::uint64_t seed, const PPOConfig& ppo_config,
                         int shots) {
    const Task& task = env.registry->tasks.at(static_cast<std::size_t>(task_id));
    switch (kind) {
        case BaselineKind::NoPrompt:
            return evaluate_prompter(env, task_id, eval_episodes, seed,
                                     [](const TokenSeq&, std::uint64_t) { return TokenSeq{}; });
        case BaselineKind::HumanTemplate0:
        case BaselineKind::HumanTemplate1: {
            int variant = kind == BaselineKind::HumanTemplate0 ? 0 : 1;
            TokenSeq prompt =
                tokenize(human_template_text(variant, task.factor.name), *env.vocab);
            return evaluate_prompter(
                env, task_id, eval_episodes, seed,
                [prompt](const TokenSeq&, std::uint64_t) { return prompt; });
        }
        case BaselineKind::IndependentPrompt: {
            PolicyParams params = init_policy(env, seed, /*bow_scale=*/0.0);
            return evaluate_policy(params, env, task_id, eval_episodes, seed);
        }
        case BaselineKind::Scratch: {
            PolicyParams params = init_policy(env, seed);
            return fewshot_adapt(std::move(params), env, task_id, shots, ppo_config,
                                 eval_episodes, seed)
                .eval;
        }
    }
    throw std::invalid_argument("run_baseline: unknown kind");
}

TriggeredChatbot plant_triggers(const TaskRegistry& registry, const Vocab& vocab,
                                MarkovChatbot base, int triggers_per_task, double beta,
                                std::uint64_t seed, int emotion_group_size) {
    if (triggers_per_task < 1)
        throw std::invalid_argument("plant_triggers: triggers_per_task must be >= 1");

    std::map<int, std::vector<TokenId>> groups;
    std::set<TokenId> excluded;  // group words and already-placed triggers
    for (std::size_t id = 0; id < registry.tasks.size(); ++id) {
        const Task& task = registry.tasks[id];
        std::vector<TokenId> words;
        if (task.factor.kind == FactorKind::Topic) {
            words.assign(task.group.words.begin(), task.group.words.end());
        } else {
            words = registry.classifier->characteristic_tokens(task.emotion_label,
                                                               emotion_group_size);
        }
        groups[static_cast<int>(id)] = words;
        excluded.insert(words.begin(), words.end());
    }

    Rng rng(mix_seed(seed, 0x747269676765ULL));
    std::map<TokenId, Trigger> trigger_map;
    int prompt_vocab = vocab.prompt_vocab_size();
    excluded.insert(vocab.unk_id());
    for (const auto& [gid, words] : groups) {
        for (int t = 0; t < triggers_per_task; ++t) {
            TokenId pick = -1;
            for (int attempt = 0; attempt < 10000; ++attempt) {
                TokenId cand = static_cast<TokenId>(rng.uniform_int(
                    static_cast<std::uint64_t>(prompt_vocab)));
                if (!excluded.count(cand) && !trigger_map.count(cand)) {
                    pick = cand;
                    break;
                }
            }
            if (pick < 0)
                throw std::runtime_error(
                    "plant_triggers: prompt vocabulary too small for disjoint triggers");
            trigger_map.emplace(pick, Trigger{gid, beta});
        }
    }
    return TriggeredChatbot(std::move(base), std::move(trigger_map), std::move(groups));
}

}  // namespace promptsteer
