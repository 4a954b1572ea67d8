#pragma once

#include <map>
#include <vector>

#include "promptsteer/rng.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// Sentinel padding the left edge of every line so that contexts are always
// full length. Never a valid vocab id.
constexpr TokenId kBosId = -1;

// Raw n-gram transition counts with add-alpha smoothing applied at query
// time. Shared by the Markov responder and the scoring language model;
// `context_len` is the number of conditioning tokens (order-1 Markov chain
// and a bigram LM both use context_len = 1).
class NgramCounts {
public:
    NgramCounts(int context_len, double alpha, int vocab_size);

    // Counts every (context -> next) transition of every line, with BOS padding.
    void fit(const std::vector<TokenSeq>& corpus);

    // P(token | context) = (count + alpha) / (total + alpha * V).
    double prob(const TokenSeq& context, TokenId token) const;
    double log_prob(const TokenSeq& context, TokenId token) const;

    // One smoothed categorical draw. Costs O(distinct successors), not O(V).
    TokenId sample(const TokenSeq& context, Rng& rng) const;

    int context_len() const { return context_len_; }
    double alpha() const { return alpha_; }
    int vocab_size() const { return vocab_size_; }

    // Trims or left-pads a history to exactly context_len tokens.
    TokenSeq make_context(const TokenSeq& history) const;

private:
    struct Row {
        std::vector<std::pair<TokenId, std::int64_t>> counts;  // sorted by token id
        std::int64_t total = 0;
    };
    const Row* find_row(const TokenSeq& context) const;

    int context_len_;
    double alpha_;
    int vocab_size_;
    std::map<TokenSeq, Row> rows_;
};

}  // namespace promptsteer
