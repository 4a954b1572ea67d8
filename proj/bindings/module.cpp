#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "promptsteer/config.hpp"
#include "promptsteer/experiment.hpp"
#include "promptsteer/metrics.hpp"
#include "promptsteer/multitask.hpp"
#include "promptsteer/policy.hpp"
#include "promptsteer/ppo.hpp"
#include "promptsteer/remote.hpp"
#include "promptsteer/responders.hpp"
#include "promptsteer/rewards.hpp"
#include "promptsteer/text.hpp"

namespace py = pybind11;
using namespace promptsteer;

PYBIND11_MODULE(_promptsteer, m) {
    m.doc() = "Prompt-based steering of black-box chatbots with PPO";

    py::enum_<FactorKind>(m, "FactorKind")
        .value("Emotion", FactorKind::Emotion)
        .value("Topic", FactorKind::Topic);

    py::class_<ControlFactor>(m, "ControlFactor")
        .def(py::init([](FactorKind kind, const std::string& name) {
                 return ControlFactor{kind, name};
             }),
             py::arg("kind"), py::arg("name"))
        .def_readwrite("kind", &ControlFactor::kind)
        .def_readwrite("name", &ControlFactor::name);

    py::class_<Vocab, std::shared_ptr<Vocab>>(m, "Vocab")
        .def(py::init<std::vector<std::string>, const std::vector<std::string>&>(),
             py::arg("words"), py::arg("reserved_names"))
        .def("__len__", &Vocab::size)
        .def_property_readonly("prompt_vocab_size", &Vocab::prompt_vocab_size)
        .def_property_readonly("unk_id", &Vocab::unk_id)
        .def("token", &Vocab::token)
        .def("id_of", &Vocab::id_of)
        .def("control_id", &Vocab::control_id)
        .def("tokens", &Vocab::tokens);

    m.def("build_vocab", &build_vocab, py::arg("corpus_lines"), py::arg("extra_words"),
          py::arg("reserved_names"));
    m.def("tokenize", &tokenize, py::arg("text"), py::arg("vocab"));
    m.def("render", &render, py::arg("tokens"), py::arg("vocab"));
    m.def("build_steer_input", &build_steer_input, py::arg("factor"), py::arg("context"),
          py::arg("vocab"));

    py::class_<BlackBoxResponder, std::shared_ptr<BlackBoxResponder>>(m, "BlackBoxResponder")
        .def("respond", &BlackBoxResponder::respond, py::arg("input"), py::arg("seed"));
    py::class_<MarkovChatbot, BlackBoxResponder, std::shared_ptr<MarkovChatbot>>(
        m, "MarkovChatbot")
        .def_property_readonly("order", &MarkovChatbot::order)
        .def_property_readonly("response_len", &MarkovChatbot::response_len);
    m.def(
        "fit_markov",
        [](const std::vector<TokenSeq>& corpus, int order, double alpha, int vocab_size,
           int response_len) {
            return std::make_shared<MarkovChatbot>(
                fit_markov(corpus, order, alpha, vocab_size, response_len));
        },
        py::arg("corpus"), py::arg("order"), py::arg("smoothing_alpha"), py::arg("vocab_size"),
        py::arg("response_len") = 12);

    py::class_<Trigger>(m, "Trigger")
        .def(py::init([](int group, double beta) { return Trigger{group, beta}; }),
             py::arg("group"), py::arg("beta"))
        .def_readwrite("group", &Trigger::group)
        .def_readwrite("beta", &Trigger::beta);
    py::class_<TriggeredChatbot, BlackBoxResponder, std::shared_ptr<TriggeredChatbot>>(
        m, "TriggeredChatbot")
        .def(py::init<MarkovChatbot, std::map<TokenId, Trigger>,
                      std::map<int, std::vector<TokenId>>>(),
             py::arg("base"), py::arg("trigger_map"), py::arg("groups"))
        .def("group_lambda", &TriggeredChatbot::group_lambda, py::arg("group"),
             py::arg("input"));
    m.def(
        "oracle_best_reward",
        [](const TriggeredChatbot& model, const std::set<TokenId>& words, int prompt_len,
           int sample_tokens) {
            return oracle_best_reward(model, words, prompt_len, sample_tokens);
        },
        py::arg("model"), py::arg("reward_words"), py::arg("prompt_len"),
        py::arg("sample_tokens") = 100000);

    py::class_<WordGroup>(m, "WordGroup")
        .def(py::init([](const std::string& topic, const std::set<TokenId>& words) {
                 return WordGroup{topic, words};
             }),
             py::arg("topic"), py::arg("words"))
        .def_readwrite("topic", &WordGroup::topic)
        .def_readwrite("words", &WordGroup::words);
    m.def("topic_reward", &topic_reward, py::arg("response"), py::arg("group"));

    py::class_<EmotionClassifier, std::shared_ptr<EmotionClassifier>>(m, "EmotionClassifier")
        .def_property_readonly("labels", &EmotionClassifier::labels)
        .def("posterior", &EmotionClassifier::posterior)
        .def("characteristic_tokens", &EmotionClassifier::characteristic_tokens,
             py::arg("label"), py::arg("k"));
    m.def(
        "train_emotion_classifier",
        [](const std::vector<std::string>& labels,
           const std::vector<std::pair<TokenSeq, std::string>>& examples, int vocab_size,
           double alpha) {
            return std::make_shared<EmotionClassifier>(
                train_emotion_classifier(labels, examples, vocab_size, alpha));
        },
        py::arg("labels"), py::arg("examples"), py::arg("vocab_size"), py::arg("alpha") = 1.0);
    m.def("emotion_reward", &emotion_reward, py::arg("response"), py::arg("classifier"),
          py::arg("label"));

    py::class_<PolicyDims>(m, "PolicyDims")
        .def(py::init([](int num_tasks, int embed_dim, int prompt_vocab, int vocab) {
                 return PolicyDims{num_tasks, embed_dim, prompt_vocab, vocab};
             }),
             py::arg("num_tasks"), py::arg("embed_dim"), py::arg("prompt_vocab"),
             py::arg("vocab"))
        .def_readwrite("num_tasks", &PolicyDims::num_tasks)
        .def_readwrite("embed_dim", &PolicyDims::embed_dim)
        .def_readwrite("prompt_vocab", &PolicyDims::prompt_vocab)
        .def_readwrite("vocab", &PolicyDims::vocab);

    py::class_<PolicyParams>(m, "PolicyParams")
        .def(py::init<PolicyDims>(), py::arg("dims"))
        .def_static("random_init", &PolicyParams::random_init, py::arg("dims"), py::arg("seed"),
                    py::arg("scale") = 0.01)
        .def_property_readonly("dims", &PolicyParams::dims)
        .def_readwrite("bow_scale", &PolicyParams::bow_scale)
        .def_readwrite("task_of_token", &PolicyParams::task_of_token)
        .def_property(
            "data", [](const PolicyParams& p) { return p.data(); },
            [](PolicyParams& p, const std::vector<double>& values) {
                if (values.size() != p.data().size())
                    throw std::invalid_argument("parameter vector size mismatch");
                p.data() = values;
            });

    py::class_<PromptSample>(m, "PromptSample")
        .def_readonly("tokens", &PromptSample::tokens)
        .def_readonly("logprobs", &PromptSample::logprobs)
        .def_readonly("entropy", &PromptSample::entropy);

    m.def("sample_prompt", &sample_prompt, py::arg("params"), py::arg("steer_input"),
          py::arg("length"), py::arg("temperature"), py::arg("seed"));
    m.def("logprob_and_grad", &logprob_and_grad, py::arg("params"), py::arg("steer_input"),
          py::arg("prompt_tokens"));
    m.def("save_policy", &save_policy, py::arg("params"), py::arg("path"),
          py::arg("comment") = "");
    m.def("load_policy", &load_policy, py::arg("path"));

    py::class_<Episode>(m, "Episode")
        .def(py::init<>())
        .def_readwrite("task_id", &Episode::task_id)
        .def_readwrite("context", &Episode::context)
        .def_readwrite("steer_input", &Episode::steer_input)
        .def_readwrite("prompt", &Episode::prompt)
        .def_readwrite("response", &Episode::response)
        .def_readwrite("reward", &Episode::reward)
        .def_readwrite("old_logprobs", &Episode::old_logprobs);

    py::class_<PPOConfig>(m, "PPOConfig")
        .def(py::init<>())
        .def_readwrite("clip_eps", &PPOConfig::clip_eps)
        .def_readwrite("learning_rate", &PPOConfig::learning_rate)
        .def_readwrite("epochs_per_batch", &PPOConfig::epochs_per_batch)
        .def_readwrite("batch_size", &PPOConfig::batch_size)
        .def_readwrite("entropy_coef", &PPOConfig::entropy_coef)
        .def_readwrite("adv_norm_eps", &PPOConfig::adv_norm_eps)
        .def_readwrite("baseline_decay", &PPOConfig::baseline_decay);

    py::class_<PPOStats>(m, "PPOStats")
        .def_readonly("mean_reward", &PPOStats::mean_reward)
        .def_readonly("mean_kl", &PPOStats::mean_kl)
        .def_readonly("clip_fraction", &PPOStats::clip_fraction)
        .def_readonly("entropy", &PPOStats::entropy)
        .def_readonly("aborted", &PPOStats::aborted);

    m.def(
        "compute_advantages",
        [](const std::vector<Episode>& batch, std::map<int, double> baselines,
           const PPOConfig& config) {
            auto adv = compute_advantages(batch, baselines, config);
            return std::make_pair(adv, baselines);
        },
        py::arg("batch"), py::arg("baselines"), py::arg("config"));
    m.def("ppo_loss_and_grad", &ppo_loss_and_grad, py::arg("params"), py::arg("batch"),
          py::arg("advantages"), py::arg("config"));
    m.def(
        "ppo_update",
        [](PolicyParams& params, const std::vector<Episode>& batch, const PPOConfig& config,
           std::map<int, double> baselines, std::uint64_t seed) {
            Rng rng(seed);
            PPOStats stats = ppo_update(params, batch, config, baselines, rng);
            return std::make_pair(stats, baselines);
        },
        py::arg("params"), py::arg("batch"), py::arg("config"), py::arg("baselines"),
        py::arg("seed"));

    py::class_<NGramLM>(m, "NGramLM")
        .def(py::init<int, double, int>(), py::arg("order"), py::arg("smoothing_alpha"),
             py::arg("vocab_size"))
        .def_property_readonly("order", &NGramLM::order)
        .def("log_prob", &NGramLM::log_prob, py::arg("history"), py::arg("token"));
    m.def("fit_ngram_lm", &fit_ngram_lm, py::arg("corpus"), py::arg("order"), py::arg("alpha"),
          py::arg("vocab_size"));
    m.def("perplexity", &perplexity, py::arg("lm"), py::arg("response"));
    m.def("bleu", &bleu, py::arg("prediction"), py::arg("references"), py::arg("max_n") = 2);
    m.def("self_bleu", &self_bleu, py::arg("responses"), py::arg("max_n") = 2);

    py::class_<TfIdfStats>(m, "TfIdfStats")
        .def(py::init<int>(), py::arg("vocab_size"))
        .def("fit", &TfIdfStats::fit, py::arg("corpus"))
        .def("idf", &TfIdfStats::idf, py::arg("token"));
    m.def("coherence", &coherence, py::arg("context"), py::arg("response"), py::arg("stats"));

    m.def("human_template_text", &human_template_text, py::arg("variant"),
          py::arg("factor_name"));

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def_readonly("out_dir", &ExperimentConfig::out_dir)
        .def_readonly("master_seed", &ExperimentConfig::master_seed)
        .def_property_readonly("config_hash",
                               [](const ExperimentConfig& c) { return config_hash_hex(c); });
    m.def("load_config", &load_config, py::arg("path"));
    m.def(
        "run_experiment",
        [](const std::string& config_path, const std::string& command,
           std::optional<std::uint64_t> seed, std::optional<std::string> out_dir,
           bool force_merge) {
            ExperimentConfig config = load_config(config_path);
            if (seed) config.master_seed = *seed;
            if (out_dir) config.out_dir = *out_dir;
            run_experiment(config, parse_command(command), force_merge);
        },
        py::arg("config_path"), py::arg("command"), py::arg("seed") = std::nullopt,
        py::arg("out_dir") = std::nullopt, py::arg("force_merge") = false);

    m.attr("__version__") = "0.1.0";
}
