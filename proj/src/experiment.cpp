#include "promptsteer/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "promptsteer/errors.hpp"

namespace promptsteer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

// World-building seed lanes, separate from the rollout streams.
constexpr std::uint64_t kStreamTriggers = 0x74726967ULL;
constexpr std::uint64_t kStreamPretrainInit = 0x696e6974ULL;
constexpr std::uint64_t kStreamScratchInit = 0x73637261ULL;
constexpr std::uint64_t kStreamAdapt = 0x61646170ULL;
constexpr std::uint64_t kStreamBaseline = 0x62617365ULL;

std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string artifact_header(const ExperimentConfig& config) {
    return "# promptsteer schema=" + std::to_string(kSchemaVersion) +
           " config_hash=" + config_hash_hex(config) +
           " master_seed=" + std::to_string(config.master_seed);
}

std::ofstream open_artifact(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write artifact: " + path.string());
    return out;
}

std::uint64_t schedule_seed(const ExperimentConfig& config) {
    return config.schedule.seed != 0 ? config.schedule.seed
                                     : mix_seed(config.master_seed, 0x5c4ed01eULL);
}

}  // namespace

RolloutEnv ExperimentWorld::env(const ExperimentConfig& config) const {
    RolloutEnv env;
    env.vocab = vocab.get();
    env.registry = &registry;
    env.responder = responder.get();
    env.contexts = &contexts;
    env.prompt_len = config.prompt_len;
    env.temperature = config.temperature;
    env.threads = config.rollout_threads;
    env.factor_filter = config.factor_kind();
    env.policy_dims.embed_dim = config.embed_dim;
    return env;
}

ExperimentWorld build_world(const ExperimentConfig& config) {
    ExperimentWorld world;

    std::vector<std::string> corpus_lines = read_lines(config.corpus_path);
    auto groups = load_word_groups(config.word_groups_path);
    auto specs = load_task_specs(config.task_registry_path);

    std::vector<std::string> lexicon_words;
    std::vector<std::pair<std::string, std::string>> lexicon;
    bool has_emotion = std::any_of(specs.begin(), specs.end(), [](const TaskSpec& s) {
        return s.kind == FactorKind::Emotion;
    });
    if (has_emotion) {
        if (config.emotion_lexicon_path.empty())
            throw ConfigError("config: registry has emotion tasks but no emotion_lexicon set");
        lexicon = load_emotion_lexicon(config.emotion_lexicon_path);
        for (const auto& [label, text] : lexicon)
            for (const auto& w : normalize_words(text)) lexicon_words.push_back(w);
    }

    std::vector<std::string> extra_words = lexicon_words;
    for (const auto& [topic, words] : groups)
        extra_words.insert(extra_words.end(), words.begin(), words.end());
    std::vector<std::string> task_names;
    for (const auto& spec : specs) task_names.push_back(spec.name);

    world.vocab = std::make_shared<Vocab>(build_vocab(corpus_lines, extra_words, task_names));

    for (const auto& line : corpus_lines) {
        TokenSeq toks = tokenize(line, *world.vocab);
        if (!toks.empty()) world.contexts.push_back(std::move(toks));
    }
    if (world.contexts.empty())
        throw ConfigError("corpus " + config.corpus_path + " has no usable lines");

    if (has_emotion) {
        std::vector<std::string> labels;
        std::set<std::string> seen;
        for (const auto& spec : specs)
            if (spec.kind == FactorKind::Emotion && seen.insert(spec.name).second)
                labels.push_back(spec.name);
        std::vector<std::pair<TokenSeq, std::string>> examples;
        for (const auto& [label, text] : lexicon) {
            if (!seen.count(label))
                throw ConfigError("emotion lexicon: label '" + label +
                                  "' is not a registered emotion task");
            examples.emplace_back(tokenize(text, *world.vocab), label);
        }
        world.classifier = std::make_shared<EmotionClassifier>(
            train_emotion_classifier(labels, examples, world.vocab->size()));
    }

    world.registry = build_registry(specs, groups, *world.vocab, world.classifier);
    world.registry.normalize_topic_reward = config.normalize_topic_reward;

    const ResponderSpec& r = config.responder;
    if (r.type == "remote") {
        world.responder = std::make_shared<RemoteResponder>(
            r.endpoint, world.vocab, std::chrono::milliseconds(r.timeout_ms), r.max_retries);
    } else {
        MarkovChatbot base = fit_markov(world.contexts, r.order, r.smoothing_alpha,
                                        world.vocab->size(), r.response_len);
        if (r.type == "markov") {
            world.responder = std::make_shared<MarkovChatbot>(std::move(base));
        } else {
            world.responder = std::make_shared<TriggeredChatbot>(plant_triggers(
                world.registry, *world.vocab, std::move(base), r.triggers_per_task,
                r.trigger_beta, mix_seed(config.master_seed, kStreamTriggers),
                config.emotion_group_size));
        }
    }

    if (config.metrics.ppl)
        world.lm = fit_ngram_lm(world.contexts, config.lm_order, config.lm_alpha,
                                world.vocab->size());
    if (config.metrics.coherence) {
        world.tfidf.emplace(world.vocab->size());
        world.tfidf->fit(world.contexts);
    }
    return world;
}

ReportRow make_report_row(const ExperimentConfig& config, const ExperimentWorld& world,
                          const std::string& task_name, FactorKind kind,
                          const std::string& method, int shots, const EvalOutcome& eval) {
    ReportRow row;
    row.kind = kind == FactorKind::Topic ? "topic" : "emotion";
    row.task = task_name;
    row.method = method;
    row.shots = shots;
    row.reward = eval.mean_reward;

    std::vector<TokenSeq> nonempty;
    for (const auto& resp : eval.responses)
        if (!resp.empty()) nonempty.push_back(resp);

    if (config.metrics.ppl && world.lm && !nonempty.empty()) {
        double sum = 0.0;
        for (const auto& resp : nonempty) sum += perplexity(*world.lm, resp);
        row.ppl = sum / static_cast<double>(nonempty.size());
    }
    if (config.metrics.coherence && world.tfidf) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t i = 0; i < eval.responses.size(); ++i) {
            sum += coherence(eval.contexts[i], eval.responses[i], *world.tfidf);
            ++n;
        }
        if (n > 0) row.coherence = sum / static_cast<double>(n);
    }
    if (config.metrics.self_bleu && nonempty.size() >= 2) row.sb2 = self_bleu(nonempty, 2);
    return row;
}

PolicyParams pretrain_initial_policy(const ExperimentConfig& config,
                                     const ExperimentWorld& world) {
    return init_policy(world.env(config), mix_seed(config.master_seed, kStreamPretrainInit));
}

Command parse_command(const std::string& name) {
    if (name == "pretrain") return Command::Pretrain;
    if (name == "adapt") return Command::Adapt;
    if (name == "baseline") return Command::Baseline;
    if (name == "report") return Command::Report;
    throw ConfigError("unknown command '" + name +
                      "' (expected pretrain, adapt, baseline or report)");
}

namespace {

void write_stats_csv(const ExperimentConfig& config, const fs::path& path,
                     const std::vector<PPOStats>& stats) {
    std::ofstream out = open_artifact(path);
    out << artifact_header(config) << "\n";
    out << "update_index,mean_reward,mean_kl,clip_fraction,entropy\n";
    for (std::size_t i = 0; i < stats.size(); ++i) {
        const PPOStats& s = stats[i];
        out << i << ',' << fmt_full(s.mean_reward) << ',' << fmt_full(s.mean_kl) << ','
            << fmt_full(s.clip_fraction) << ',' << fmt_full(s.entropy) << "\n";
    }
}

json row_to_json(const ReportRow& row) {
    json j;
    j["kind"] = row.kind;
    j["task"] = row.task;
    j["method"] = row.method;
    j["shots"] = row.shots;
    j["reward"] = row.reward;
    j["ppl"] = row.ppl ? json(*row.ppl) : json(nullptr);
    j["coherence"] = row.coherence ? json(*row.coherence) : json(nullptr);
    j["sb2"] = row.sb2 ? json(*row.sb2) : json(nullptr);
    return j;
}

ReportRow row_from_json(const json& j) {
    ReportRow row;
    row.kind = j.at("kind").get<std::string>();
    row.task = j.at("task").get<std::string>();
    row.method = j.at("method").get<std::string>();
    row.shots = j.at("shots").get<int>();
    row.reward = j.at("reward").get<double>();
    if (!j.at("ppl").is_null()) row.ppl = j.at("ppl").get<double>();
    if (!j.at("coherence").is_null()) row.coherence = j.at("coherence").get<double>();
    if (!j.at("sb2").is_null()) row.sb2 = j.at("sb2").get<double>();
    return row;
}

void write_rows_json(const ExperimentConfig& config, const fs::path& path,
                     const std::vector<ReportRow>& rows) {
    json j;
    j["schema"] = kSchemaVersion;
    j["config_hash"] = config_hash_hex(config);
    j["master_seed"] = config.master_seed;
    j["rows"] = json::array();
    for (const ReportRow& row : rows) j["rows"].push_back(row_to_json(row));
    std::ofstream out = open_artifact(path);
    out << j.dump(2) << "\n";
}

void write_rows_csv(const ExperimentConfig& config, const fs::path& path,
                    const std::vector<ReportRow>& rows) {
    std::ofstream out = open_artifact(path);
    out << artifact_header(config) << "\n";
    out << "kind,task,method,shots,reward,ppl,coherence,sb2\n";
    for (const ReportRow& row : rows) {
        out << row.kind << ',' << row.task << ',' << row.method << ',' << row.shots << ','
            << fmt3(row.reward) << ',' << (row.ppl ? fmt3(*row.ppl) : "") << ','
            << (row.coherence ? fmt3(*row.coherence) : "") << ','
            << (row.sb2 ? fmt3(*row.sb2) : "") << "\n";
    }
}

struct EpisodeLog {
    std::ofstream out;
    void add(const std::string& kind, const std::string& task, const std::string& method,
             int shots, const std::vector<double>& rewards) {
        for (std::size_t i = 0; i < rewards.size(); ++i)
            out << kind << ',' << task << ',' << method << ',' << shots << ',' << i << ','
                << fmt_full(rewards[i]) << "\n";
    }
};

EpisodeLog open_episode_log(const ExperimentConfig& config, const fs::path& path) {
    EpisodeLog log{open_artifact(path)};
    log.out << artifact_header(config) << "\n";
    log.out << "kind,task,method,shots,episode,reward\n";
    return log;
}

void sort_rows(std::vector<ReportRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.kind != b.kind) return a.kind < b.kind;
        if (a.task != b.task) return a.task < b.task;
        if (a.method != b.method) return a.method < b.method;
        return a.shots < b.shots;
    });
}

void run_pretrain(const ExperimentConfig& config, const ExperimentWorld& world) {
    RolloutEnv env = world.env(config);
    PolicyParams params = pretrain_initial_policy(config, world);
    TrainSchedule schedule = config.schedule;
    schedule.seed = schedule_seed(config);
    TrainResult result = multitask_train(params, env, schedule, config.ppo);
    fs::create_directories(config.out_dir);
    save_policy(params, (fs::path(config.out_dir) / "checkpoint.txt").string(),
                artifact_header(config));
    write_stats_csv(config, fs::path(config.out_dir) / "pretrain_stats.csv", result.stats);
}

void run_adapt(const ExperimentConfig& config, const ExperimentWorld& world) {
    RolloutEnv env = world.env(config);
    fs::path checkpoint = fs::path(config.out_dir) / "checkpoint.txt";
    if (!fs::exists(checkpoint))
        throw MissingFileError(checkpoint.string() + " (run 'pretrain' first)");
    PolicyParams pretrained = load_policy(checkpoint.string());

    fs::create_directories(config.out_dir);
    std::vector<ReportRow> rows;
    std::vector<PPOStats> all_stats;
    EpisodeLog episodes =
        open_episode_log(config, fs::path(config.out_dir) / "adapt_episodes.csv");

    for (int task_id : env.test_ids()) {
        const Task& task = world.registry.tasks[static_cast<std::size_t>(task_id)];
        for (int shots : config.shot_budgets) {
            std::uint64_t seed = mix_seed(config.master_seed, kStreamAdapt,
                                          static_cast<std::uint64_t>(task_id) * 10007ULL +
                                              static_cast<std::uint64_t>(shots));
            for (const std::string& method : {std::string("multi"), std::string("scratch")}) {
                PolicyParams start =
                    method == "multi"
                        ? pretrained
                        : init_policy(env, mix_seed(config.master_seed, kStreamScratchInit,
                                                    static_cast<std::uint64_t>(task_id)));
                AdaptResult adapted =
                    fewshot_adapt(std::move(start), env, task_id, shots, config.ppo,
                                  config.eval_episodes, seed);
                rows.push_back(make_report_row(config, world, task.factor.name,
                                               task.factor.kind, method, shots, adapted.eval));
                episodes.add(rows.back().kind, task.factor.name, method, shots,
                             adapted.eval.rewards);
                for (const PPOStats& s : adapted.stats) all_stats.push_back(s);
            }
        }
    }
    sort_rows(rows);
    write_rows_json(config, fs::path(config.out_dir) / "adapt_eval.json", rows);
    write_rows_csv(config, fs::path(config.out_dir) / "adapt_eval.csv", rows);
    write_stats_csv(config, fs::path(config.out_dir) / "adapt_stats.csv", all_stats);
}

void run_baselines(const ExperimentConfig& config, const ExperimentWorld& world) {
    RolloutEnv env = world.env(config);
    fs::create_directories(config.out_dir);
    std::vector<ReportRow> rows;
    EpisodeLog episodes =
        open_episode_log(config, fs::path(config.out_dir) / "baseline_episodes.csv");

    const std::pair<BaselineKind, int> kinds[] = {
        {BaselineKind::NoPrompt, 0},
        {BaselineKind::HumanTemplate0, 1},
        {BaselineKind::HumanTemplate1, 2},
        {BaselineKind::IndependentPrompt, 3},
    };
    for (int task_id : env.test_ids()) {
        const Task& task = world.registry.tasks[static_cast<std::size_t>(task_id)];
        for (const auto& [kind, lane] : kinds) {
            std::uint64_t seed = mix_seed(config.master_seed, kStreamBaseline,
                                          static_cast<std::uint64_t>(task_id) * 11ULL +
                                              static_cast<std::uint64_t>(lane));
            EvalOutcome eval =
                run_baseline(kind, env, task_id, config.eval_episodes, seed, config.ppo);
            rows.push_back(make_report_row(config, world, task.factor.name, task.factor.kind,
                                           baseline_name(kind), 0, eval));
            episodes.add(rows.back().kind, task.factor.name, baseline_name(kind), 0,
                         eval.rewards);
        }
    }
    sort_rows(rows);
    write_rows_json(config, fs::path(config.out_dir) / "baseline_eval.json", rows);
    write_rows_csv(config, fs::path(config.out_dir) / "baseline_eval.csv", rows);
}

// Mean rewards recomputed from an episode log, keyed by (task, method, shots).
std::map<std::string, std::pair<double, int>> episode_means(const fs::path& path) {
    std::map<std::string, std::pair<double, int>> sums;
    std::ifstream in(path);
    if (!in) return sums;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("kind,", 0) == 0) continue;
        std::istringstream row(line);
        std::string kind, task, method, shots, episode, reward;
        std::getline(row, kind, ',');
        std::getline(row, task, ',');
        std::getline(row, method, ',');
        std::getline(row, shots, ',');
        std::getline(row, episode, ',');
        std::getline(row, reward, ',');
        auto& slot = sums[task + '|' + method + '|' + shots];
        slot.first += std::stod(reward);
        slot.second += 1;
    }
    return sums;
}

}  // namespace

std::vector<ReportRow> emit_report(const ExperimentConfig& config, const std::string& run_dir,
                                   bool force_merge) {
    std::vector<ReportRow> rows;
    std::string merged_hash;
    bool found = false;
    for (const char* name : {"adapt_eval.json", "baseline_eval.json"}) {
        fs::path path = fs::path(run_dir) / name;
        if (!fs::exists(path)) continue;
        std::ifstream in(path);
        json j = json::parse(in, nullptr, false);
        if (j.is_discarded())
            throw ConfigError("report: cannot parse " + path.string());
        if (j.at("schema").get<int>() != kSchemaVersion)
            throw MergeConflictError("report: " + path.string() + " has schema version " +
                                     std::to_string(j.at("schema").get<int>()) + ", expected " +
                                     std::to_string(kSchemaVersion));
        std::string hash = j.at("config_hash").get<std::string>();
        if (merged_hash.empty()) merged_hash = hash;
        if (hash != merged_hash && !force_merge)
            throw MergeConflictError("report: config hash mismatch between runs in " + run_dir +
                                     " (" + merged_hash + " vs " + hash +
                                     "); pass --force-merge to override");
        for (const json& row : j.at("rows")) rows.push_back(row_from_json(row));
        found = true;
    }
    if (!found) throw ConfigError("report: no runs found in " + run_dir);

    // Cross-check: merged reward means must equal the raw episode logs.
    std::map<std::string, std::pair<double, int>> sums;
    for (const char* name : {"adapt_episodes.csv", "baseline_episodes.csv"}) {
        auto part = episode_means(fs::path(run_dir) / name);
        for (const auto& [key, value] : part) {
            auto& slot = sums[key];
            slot.first += value.first;
            slot.second += value.second;
        }
    }
    for (const ReportRow& row : rows) {
        auto it = sums.find(row.task + '|' + row.method + '|' + std::to_string(row.shots));
        if (it == sums.end()) continue;  // logs may have been pruned; not an error
        double recomputed = it->second.first / it->second.second;
        if (std::abs(recomputed - row.reward) > 1e-9)
            throw ConfigError("report: reward mean for " + row.task + "/" + row.method +
                              " disagrees with the episode log (" + fmt_full(row.reward) +
                              " vs " + fmt_full(recomputed) + ")");
    }

    sort_rows(rows);
    write_rows_csv(config, fs::path(run_dir) / "report.csv", rows);
    write_rows_json(config, fs::path(run_dir) / "report.json", rows);
    return rows;
}

void run_experiment(const ExperimentConfig& config, Command command, bool force_merge) {
    if (command == Command::Report) {
        ExperimentConfig c = config;
        emit_report(c, config.out_dir, force_merge);
        return;
    }
    ExperimentWorld world = build_world(config);
    switch (command) {
        case Command::Pretrain: run_pretrain(config, world); break;
        case Command::Adapt: run_adapt(config, world); break;
        case Command::Baseline: run_baselines(config, world); break;
        case Command::Report: break;
    }
}

}  // namespace promptsteer
