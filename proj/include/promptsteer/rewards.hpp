#pragma once

#include <set>
#include <string>
#include <vector>

#include "promptsteer/text.hpp"

namespace promptsteer {

// A topic and the words that count toward it.
struct WordGroup {
    std::string topic;
    std::set<TokenId> words;
};

// Number of response tokens (with multiplicity) that belong to the group.
int topic_reward(const TokenSeq& response, const WordGroup& group);

// Multinomial naive Bayes over token counts, standing in for a neural
// emotion classifier. Immutable after training; scoring is pure.
class EmotionClassifier {
public:
    const std::vector<std::string>& labels() const { return labels_; }
    int label_index(const std::string& label) const;  // throws on unknown label

    // Log posterior over all labels for a response; sums to 1 after exp.
    std::vector<double> posterior(const TokenSeq& response) const;

    double log_likelihood(int label, TokenId token) const {
        return log_likelihood_[static_cast<std::size_t>(label)][static_cast<std::size_t>(token)];
    }
    double log_prior(int label) const { return log_prior_[static_cast<std::size_t>(label)]; }

    // Top-k tokens most characteristic of a label (largest mean log-likelihood
    // margin over the other labels). Used to plant synthetic emotion groups.
    std::vector<TokenId> characteristic_tokens(const std::string& label, int k) const;

    friend EmotionClassifier train_emotion_classifier(
        const std::vector<std::string>& labels,
        const std::vector<std::pair<TokenSeq, std::string>>& examples, int vocab_size,
        double alpha);

private:
    std::vector<std::string> labels_;
    std::vector<std::vector<double>> log_likelihood_;  // [label][token]
    std::vector<double> log_prior_;
};

// Add-alpha token counts per label; priors from label frequencies. Every
// entry of `labels` must appear in `examples` at least once.
EmotionClassifier train_emotion_classifier(
    const std::vector<std::string>& labels,
    const std::vector<std::pair<TokenSeq, std::string>>& examples, int vocab_size,
    double alpha = 1.0);

// Posterior probability of label y given the response. An empty response
// scores the prior of y.
double emotion_reward(const TokenSeq& response, const EmotionClassifier& clf,
                      const std::string& y);

// Word-group file: blocks of "topic: <name>" followed by one word per line,
// separated by blank lines.
std::vector<std::pair<std::string, std::vector<std::string>>> parse_word_groups(
    const std::vector<std::string>& lines);
std::vector<std::pair<std::string, std::vector<std::string>>> load_word_groups(
    const std::string& path);

// Emotion lexicon file: "<label>\t<text>" per line.
std::vector<std::pair<std::string, std::string>> parse_emotion_lexicon(
    const std::vector<std::string>& lines);
std::vector<std::pair<std::string, std::string>> load_emotion_lexicon(const std::string& path);

}  // namespace promptsteer
