#include "promptsteer/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "promptsteer/errors.hpp"

namespace promptsteer {

namespace fs = std::filesystem;
using nlohmann::json;

FactorKind ExperimentConfig::factor_kind() const {
    if (factor == "topic") return FactorKind::Topic;
    if (factor == "emotion") return FactorKind::Emotion;
    throw ConfigError("config: factor must be 'topic' or 'emotion', got '" + factor + "'");
}

namespace {

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename T>
void read_field(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for field '") + key + "': " + e.what());
    }
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty()) return path;
    return (fs::path(base_dir) / path).lexically_normal().string();
}

// Canonical serialization for hashing: sorted keys, fixed field set, and no
// master_seed / out_dir.
std::string canonical_text(const ExperimentConfig& c) {
    json j;
    j["corpus"] = c.corpus_path;
    j["task_registry"] = c.task_registry_path;
    j["word_groups"] = c.word_groups_path;
    j["emotion_lexicon"] = c.emotion_lexicon_path;
    j["responder"] = {{"type", c.responder.type},
                      {"order", c.responder.order},
                      {"smoothing_alpha", c.responder.smoothing_alpha},
                      {"response_len", c.responder.response_len},
                      {"triggers_per_task", c.responder.triggers_per_task},
                      {"trigger_beta", c.responder.trigger_beta},
                      {"endpoint", c.responder.endpoint},
                      {"timeout_ms", c.responder.timeout_ms},
                      {"max_retries", c.responder.max_retries}};
    j["schedule"] = {{"tasks_per_epoch", c.schedule.tasks_per_epoch},
                     {"episodes_per_task", c.schedule.episodes_per_task},
                     {"epochs", c.schedule.epochs},
                     {"seed", c.schedule.seed}};
    j["ppo"] = {{"clip_eps", c.ppo.clip_eps},
                {"learning_rate", c.ppo.learning_rate},
                {"epochs_per_batch", c.ppo.epochs_per_batch},
                {"batch_size", c.ppo.batch_size},
                {"entropy_coef", c.ppo.entropy_coef},
                {"adv_norm_eps", c.ppo.adv_norm_eps},
                {"baseline_decay", c.ppo.baseline_decay}};
    j["embed_dim"] = c.embed_dim;
    j["prompt_len"] = c.prompt_len;
    j["temperature"] = c.temperature;
    j["metrics"] = {{"ppl", c.metrics.ppl},
                    {"coherence", c.metrics.coherence},
                    {"self_bleu", c.metrics.self_bleu}};
    j["factor"] = c.factor;
    j["normalize_topic_reward"] = c.normalize_topic_reward;
    j["emotion_group_size"] = c.emotion_group_size;
    j["lm_order"] = c.lm_order;
    j["lm_alpha"] = c.lm_alpha;
    j["eval_episodes"] = c.eval_episodes;
    j["shot_budgets"] = c.shot_budgets;
    return j.dump();
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const std::string& base_dir) {
    json root = json::parse(json_text, nullptr, false);
    if (root.is_discarded() || !root.is_object())
        throw ConfigError("config: not a JSON object");

    ExperimentConfig c;
    read_field(root, "corpus", c.corpus_path);
    read_field(root, "task_registry", c.task_registry_path);
    read_field(root, "word_groups", c.word_groups_path);
    read_field(root, "emotion_lexicon", c.emotion_lexicon_path);
    if (root.contains("responder")) {
        const json& r = root.at("responder");
        if (!r.is_object()) throw ConfigError("config: 'responder' must be an object");
        read_field(r, "type", c.responder.type);
        read_field(r, "order", c.responder.order);
        read_field(r, "smoothing_alpha", c.responder.smoothing_alpha);
        read_field(r, "response_len", c.responder.response_len);
        read_field(r, "triggers_per_task", c.responder.triggers_per_task);
        read_field(r, "trigger_beta", c.responder.trigger_beta);
        read_field(r, "endpoint", c.responder.endpoint);
        read_field(r, "timeout_ms", c.responder.timeout_ms);
        read_field(r, "max_retries", c.responder.max_retries);
    }
    if (root.contains("schedule")) {
        const json& s = root.at("schedule");
        if (!s.is_object()) throw ConfigError("config: 'schedule' must be an object");
        read_field(s, "tasks_per_epoch", c.schedule.tasks_per_epoch);
        read_field(s, "episodes_per_task", c.schedule.episodes_per_task);
        read_field(s, "epochs", c.schedule.epochs);
        read_field(s, "seed", c.schedule.seed);
    }
    if (root.contains("ppo")) {
        const json& p = root.at("ppo");
        if (!p.is_object()) throw ConfigError("config: 'ppo' must be an object");
        read_field(p, "clip_eps", c.ppo.clip_eps);
        read_field(p, "learning_rate", c.ppo.learning_rate);
        read_field(p, "epochs_per_batch", c.ppo.epochs_per_batch);
        read_field(p, "batch_size", c.ppo.batch_size);
        read_field(p, "entropy_coef", c.ppo.entropy_coef);
        read_field(p, "adv_norm_eps", c.ppo.adv_norm_eps);
        read_field(p, "baseline_decay", c.ppo.baseline_decay);
    }
    if (root.contains("metrics")) {
        const json& m = root.at("metrics");
        if (!m.is_object()) throw ConfigError("config: 'metrics' must be an object");
        read_field(m, "ppl", c.metrics.ppl);
        read_field(m, "coherence", c.metrics.coherence);
        read_field(m, "self_bleu", c.metrics.self_bleu);
    }
    read_field(root, "embed_dim", c.embed_dim);
    read_field(root, "prompt_len", c.prompt_len);
    read_field(root, "temperature", c.temperature);
    read_field(root, "factor", c.factor);
    read_field(root, "normalize_topic_reward", c.normalize_topic_reward);
    read_field(root, "emotion_group_size", c.emotion_group_size);
    read_field(root, "lm_order", c.lm_order);
    read_field(root, "lm_alpha", c.lm_alpha);
    read_field(root, "eval_episodes", c.eval_episodes);
    read_field(root, "shot_budgets", c.shot_budgets);
    read_field(root, "rollout_threads", c.rollout_threads);
    read_field(root, "out_dir", c.out_dir);
    read_field(root, "master_seed", c.master_seed);

    if (c.corpus_path.empty()) throw ConfigError("config: missing required field 'corpus'");
    if (c.task_registry_path.empty())
        throw ConfigError("config: missing required field 'task_registry'");
    if (c.word_groups_path.empty())
        throw ConfigError("config: missing required field 'word_groups'");
    c.factor_kind();  // validates the factor string
    validate(c.ppo);
    if (c.prompt_len < 1) throw ConfigError("config: prompt_len must be >= 1");
    if (c.embed_dim < 1) throw ConfigError("config: embed_dim must be >= 1");
    if (!(c.temperature > 0.0)) throw ConfigError("config: temperature must be > 0");
    if (c.eval_episodes < 1) throw ConfigError("config: eval_episodes must be >= 1");
    for (int s : c.shot_budgets)
        if (s < 0) throw ConfigError("config: shot_budgets entries must be >= 0");
    if (c.responder.type != "markov" && c.responder.type != "triggered" &&
        c.responder.type != "remote")
        throw ConfigError("config: responder.type must be markov, triggered or remote, got '" +
                          c.responder.type + "'");

    c.corpus_path = resolve(base_dir, c.corpus_path);
    c.task_registry_path = resolve(base_dir, c.task_registry_path);
    c.word_groups_path = resolve(base_dir, c.word_groups_path);
    c.emotion_lexicon_path = resolve(base_dir, c.emotion_lexicon_path);
    c.out_dir = resolve(base_dir, c.out_dir);

    if (const char* endpoint = std::getenv("PROMPTSTEER_ENDPOINT"))
        if (*endpoint) c.responder.endpoint = endpoint;
    if (c.responder.type == "remote" && c.responder.endpoint.empty())
        throw ConfigError("config: responder.type is 'remote' but no endpoint is set "
                          "(field responder.endpoint or PROMPTSTEER_ENDPOINT)");

    c.config_hash = fnv1a(canonical_text(c));
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_config(buffer.str(), fs::path(path).parent_path().string());
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()) + " (config file: " + path + ")");
    }
}

std::string config_hash_hex(const ExperimentConfig& config) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config.config_hash));
    return buf;
}

}  // namespace promptsteer
