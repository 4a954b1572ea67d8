#pragma once

#include <span>
#include <vector>

#include "promptsteer/ngram.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// Add-alpha n-gram language model used to score response fluency. `order` is
// the n-gram size (2 = bigram), so the conditioning context has order-1
// tokens. A freshly constructed model with no counts is the uniform model.
class NGramLM {
public:
    NGramLM(int order, double smoothing_alpha, int vocab_size);

    double log_prob(const TokenSeq& history, TokenId token) const;
    const NgramCounts& counts() const { return counts_; }
    int order() const { return counts_.context_len() + 1; }

    friend NGramLM fit_ngram_lm(const std::vector<TokenSeq>& corpus, int order, double alpha,
                                int vocab_size);

private:
    NgramCounts counts_;
};

NGramLM fit_ngram_lm(const std::vector<TokenSeq>& corpus, int order, double alpha,
                     int vocab_size);

// Geometric-mean inverse probability, computed in log space.
double perplexity_from_logprobs(std::span<const double> logprobs);
double perplexity(const NGramLM& lm, const TokenSeq& response);

// BLEU with modified n-gram precision (counts clipped by the max reference
// count), brevity penalty against the closest reference length, and add-eps
// smoothing so empty overlaps stay finite.
double bleu(const TokenSeq& prediction, const std::vector<TokenSeq>& references, int max_n = 2);

// Mean BLEU of each response against all the others. Lower = more diverse.
double self_bleu(const std::vector<TokenSeq>& responses, int max_n = 2);

// Document-frequency statistics for the tf-idf coherence proxy.
class TfIdfStats {
public:
    explicit TfIdfStats(int vocab_size) : df_(static_cast<std::size_t>(vocab_size), 0) {}
    void fit(const std::vector<TokenSeq>& corpus);
    double idf(TokenId token) const;
    int documents() const { return documents_; }

private:
    std::vector<int> df_;
    int documents_ = 0;
};

// Cosine similarity of tf-idf bag vectors, clamped to [0, 1]. Zero vectors
// score 0.
double coherence(const TokenSeq& context, const TokenSeq& response, const TfIdfStats& stats);

}  // namespace promptsteer
