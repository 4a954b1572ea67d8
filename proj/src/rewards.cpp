#include "promptsteer/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "promptsteer/errors.hpp"

namespace promptsteer {

int topic_reward(const TokenSeq& response, const WordGroup& group) {
    int count = 0;
    for (TokenId tok : response) count += group.words.count(tok) ? 1 : 0;
    return count;
}

int EmotionClassifier::label_index(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw std::invalid_argument("unknown emotion label: " + label);
    return static_cast<int>(it - labels_.begin());
}

std::vector<double> EmotionClassifier::posterior(const TokenSeq& response) const {
    std::size_t k = labels_.size();
    std::vector<double> logp(k);
    for (std::size_t y = 0; y < k; ++y) {
        double s = log_prior_[y];
        for (TokenId tok : response) s += log_likelihood_[y][static_cast<std::size_t>(tok)];
        logp[y] = s;
    }
    double mx = *std::max_element(logp.begin(), logp.end());
    double z = 0.0;
    for (double v : logp) z += std::exp(v - mx);
    double logz = mx + std::log(z);
    std::vector<double> post(k);
    for (std::size_t y = 0; y < k; ++y) post[y] = std::exp(logp[y] - logz);
    return post;
}

std::vector<TokenId> EmotionClassifier::characteristic_tokens(const std::string& label,
                                                              int k) const {
    int y = label_index(label);
    std::size_t v = log_likelihood_.front().size();
    std::vector<std::pair<double, TokenId>> scored;
    scored.reserve(v);
    for (std::size_t t = 0; t < v; ++t) {
        double others = 0.0;
        for (std::size_t o = 0; o < labels_.size(); ++o)
            if (static_cast<int>(o) != y) others += log_likelihood_[o][t];
        double margin = log_likelihood_[static_cast<std::size_t>(y)][t];
        if (labels_.size() > 1) margin -= others / static_cast<double>(labels_.size() - 1);
        scored.emplace_back(margin, static_cast<TokenId>(t));
    }
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<TokenId> out;
    for (int i = 0; i < k && i < static_cast<int>(scored.size()); ++i)
        out.push_back(scored[static_cast<std::size_t>(i)].second);
    return out;
}

EmotionClassifier train_emotion_classifier(
    const std::vector<std::string>& labels,
    const std::vector<std::pair<TokenSeq, std::string>>& examples, int vocab_size, double alpha) {
    if (labels.empty()) throw std::invalid_argument("classifier: no labels");
    if (vocab_size < 1) throw std::invalid_argument("classifier: vocab size must be >= 1");

    std::map<std::string, int> index;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!index.emplace(labels[i], static_cast<int>(i)).second)
            throw std::invalid_argument("classifier: duplicate label " + labels[i]);
    }

    std::vector<std::vector<std::int64_t>> counts(
        labels.size(), std::vector<std::int64_t>(static_cast<std::size_t>(vocab_size), 0));
    std::vector<std::int64_t> label_examples(labels.size(), 0);
    std::vector<std::int64_t> label_tokens(labels.size(), 0);
    for (const auto& [tokens, label] : examples) {
        auto it = index.find(label);
        if (it == index.end())
            throw std::invalid_argument("classifier: example carries unregistered label " + label);
        std::size_t y = static_cast<std::size_t>(it->second);
        label_examples[y] += 1;
        for (TokenId tok : tokens) {
            if (tok < 0 || tok >= vocab_size)
                throw std::invalid_argument("classifier: token id out of range");
            counts[y][static_cast<std::size_t>(tok)] += 1;
            label_tokens[y] += 1;
        }
    }
    for (std::size_t y = 0; y < labels.size(); ++y)
        if (label_examples[y] == 0)
            throw std::invalid_argument("classifier: no training examples for label " +
                                        labels[y]);

    EmotionClassifier clf;
    clf.labels_ = labels;
    clf.log_prior_.resize(labels.size());
    clf.log_likelihood_.assign(labels.size(),
                               std::vector<double>(static_cast<std::size_t>(vocab_size)));
    double total_examples = static_cast<double>(examples.size());
    for (std::size_t y = 0; y < labels.size(); ++y) {
        clf.log_prior_[y] = std::log(static_cast<double>(label_examples[y]) / total_examples);
        double denom = static_cast<double>(label_tokens[y]) + alpha * vocab_size;
        for (std::size_t t = 0; t < static_cast<std::size_t>(vocab_size); ++t)
            clf.log_likelihood_[y][t] =
                std::log((static_cast<double>(counts[y][t]) + alpha) / denom);
    }
    return clf;
}

double emotion_reward(const TokenSeq& response, const EmotionClassifier& clf,
                      const std::string& y) {
    int idx = clf.label_index(y);
    return clf.posterior(response)[static_cast<std::size_t>(idx)];
}

std::vector<std::pair<std::string, std::vector<std::string>>> parse_word_groups(
    const std::vector<std::string>& lines) {
    std::vector<std::pair<std::string, std::vector<std::string>>> groups;
    bool in_block = false;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string& line = lines[n];
        auto words = normalize_words(line);
        if (words.empty()) {
            in_block = false;
            continue;
        }
        if (line.rfind("topic:", 0) == 0) {
            std::string name = line.substr(6);
            auto parts = normalize_words(name);
            if (parts.size() != 1)
                throw ConfigError("word groups: bad topic header at line " +
                                  std::to_string(n + 1));
            groups.emplace_back(parts.front(), std::vector<std::string>{});
            in_block = true;
            continue;
        }
        if (!in_block || groups.empty())
            throw ConfigError("word groups: word outside a topic block at line " +
                              std::to_string(n + 1));
        if (words.size() != 1)
            throw ConfigError("word groups: expected one word per line at line " +
                              std::to_string(n + 1));
        groups.back().second.push_back(words.front());
    }
    for (const auto& [topic, words] : groups)
        if (words.empty()) throw ConfigError("word groups: topic '" + topic + "' has no words");
    return groups;
}

std::vector<std::pair<std::string, std::vector<std::string>>> load_word_groups(
    const std::string& path) {
    return parse_word_groups(read_lines(path));
}

std::vector<std::pair<std::string, std::string>> parse_emotion_lexicon(
    const std::vector<std::string>& lines) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t n = 0; n < lines.size(); ++n) {
        const std::string& line = lines[n];
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError("emotion lexicon: missing tab separator at line " +
                              std::to_string(n + 1));
        out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> load_emotion_lexicon(const std::string& path) {
    return parse_emotion_lexicon(read_lines(path));
}

}  // namespace promptsteer
