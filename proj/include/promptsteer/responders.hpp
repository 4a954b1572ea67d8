#pragma once

#include <map>
#include <memory>
#include <set>
#include <vector>

#include "promptsteer/ngram.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// The conversational model: text in, text out, nothing else. Implementations
// must be deterministic per (input, seed) and safe for concurrent calls.
class BlackBoxResponder {
public:
    virtual ~BlackBoxResponder() = default;
    virtual TokenSeq respond(const TokenSeq& input, std::uint64_t seed) const = 0;
};

// Seeded add-alpha Markov text generator. Desk-scale stand-in for a neural
// chatbot: the response continues the tail of the input for a fixed number
// of tokens.
class MarkovChatbot : public BlackBoxResponder {
public:
    MarkovChatbot(int order, double smoothing_alpha, int vocab_size, int response_len = 12);

    TokenSeq respond(const TokenSeq& input, std::uint64_t seed) const override;

    // Draws the next token given the running context and advances the context.
    TokenId step(TokenSeq& context, Rng& rng) const;

    const NgramCounts& counts() const { return counts_; }
    int order() const { return counts_.context_len(); }
    int response_len() const { return response_len_; }

    friend MarkovChatbot fit_markov(const std::vector<TokenSeq>& corpus, int order,
                                    double smoothing_alpha, int vocab_size, int response_len);

private:
    NgramCounts counts_;
    int response_len_;
};

MarkovChatbot fit_markov(const std::vector<TokenSeq>& corpus, int order, double smoothing_alpha,
                         int vocab_size, int response_len = 12);

// One planted trigger: seeing `token` in the input lets `group` fire with
// strength beta.
struct Trigger {
    int group = 0;
    double beta = 1.0;  // in (0, 1]
};

// Markov chatbot with planted trigger tokens. Distinct triggers of a group
// present in the input fire independently, so the per-step probability of
// emitting a group word is lambda = 1 - prod(1 - beta_t). The base chain
// advances every step regardless of whether the group word replaced its draw,
// which keeps the expected group-word count analytic.
class TriggeredChatbot : public BlackBoxResponder {
public:
    TriggeredChatbot(MarkovChatbot base, std::map<TokenId, Trigger> trigger_map,
                     std::map<int, std::vector<TokenId>> groups);

    TokenSeq respond(const TokenSeq& input, std::uint64_t seed) const override;

    const MarkovChatbot& base() const { return base_; }
    const std::map<TokenId, Trigger>& trigger_map() const { return trigger_map_; }
    const std::map<int, std::vector<TokenId>>& groups() const { return groups_; }
    int response_len() const { return base_.response_len(); }

    // lambda for one group given the distinct trigger tokens present in `input`.
    double group_lambda(int group, const TokenSeq& input) const;

private:
    MarkovChatbot base_;
    std::map<TokenId, Trigger> trigger_map_;
    std::map<int, std::vector<TokenId>> groups_;  // group id -> sorted word ids
};

std::uint64_t hash_tokens(const TokenSeq& seq);

// Fraction of base-chain emissions landing in `words`, estimated from
// `sample_tokens` seeded tokens (the stationary mass of the word set).
double base_emission_rate(const MarkovChatbot& base, const std::set<TokenId>& words,
                          int sample_tokens = 100000);

// Analytic best expected count of `reward_words` per response over all
// single-group trigger placements in a prompt of `prompt_len` tokens:
//   response_len * (lambda * overlap(g, W) + (1 - lambda) * p_bg(W))
// maximized over planted groups g, where lambda uses the min(prompt_len,
// #triggers) strongest triggers of g. Falls back to the no-trigger baseline
// response_len * p_bg(W).
double oracle_best_reward(const TriggeredChatbot& model, const std::set<TokenId>& reward_words,
                          int prompt_len, int sample_tokens = 100000);

}  // namespace promptsteer
