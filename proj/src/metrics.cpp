#include "promptsteer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace promptsteer {

NGramLM::NGramLM(int order, double smoothing_alpha, int vocab_size)
    : counts_(order - 1, smoothing_alpha, vocab_size) {
    if (order < 2) throw std::invalid_argument("ngram lm: order must be >= 2");
}

NGramLM fit_ngram_lm(const std::vector<TokenSeq>& corpus, int order, double alpha,
                     int vocab_size) {
    NGramLM lm(order, alpha, vocab_size);
    lm.counts_.fit(corpus);
    return lm;
}

double NGramLM::log_prob(const TokenSeq& history, TokenId token) const {
    return counts_.log_prob(counts_.make_context(history), token);
}

double perplexity_from_logprobs(std::span<const double> logprobs) {
    if (logprobs.empty()) throw std::invalid_argument("perplexity: empty response");
    double sum = 0.0;
    for (double lp : logprobs) sum += lp;
    return std::exp(-sum / static_cast<double>(logprobs.size()));
}

double perplexity(const NGramLM& lm, const TokenSeq& response) {
    if (response.empty()) throw std::invalid_argument("perplexity: empty response");
    std::vector<double> logprobs;
    logprobs.reserve(response.size());
    TokenSeq history;
    for (TokenId tok : response) {
        logprobs.push_back(lm.log_prob(history, tok));
        history.push_back(tok);
    }
    return perplexity_from_logprobs(logprobs);
}

namespace {

constexpr double kBleuEps = 1e-9;

std::map<TokenSeq, int> ngram_counts_of(const TokenSeq& seq, int n) {
    std::map<TokenSeq, int> counts;
    if (static_cast<int>(seq.size()) < n) return counts;
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
        TokenSeq gram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                      seq.begin() + static_cast<std::ptrdiff_t>(i + static_cast<std::size_t>(n)));
        counts[gram] += 1;
    }
    return counts;
}

}  // namespace

double bleu(const TokenSeq& prediction, const std::vector<TokenSeq>& references, int max_n) {
    if (prediction.empty()) throw std::invalid_argument("bleu: empty prediction");
    if (references.empty()) throw std::invalid_argument("bleu: no references");
    for (const auto& ref : references)
        if (ref.empty()) throw std::invalid_argument("bleu: empty reference");
    if (max_n < 1) throw std::invalid_argument("bleu: max_n must be >= 1");

    double log_precision = 0.0;
    for (int n = 1; n <= max_n; ++n) {
        auto pred_counts = ngram_counts_of(prediction, n);
        int total = 0;
        for (const auto& [gram, c] : pred_counts) total += c;
        int clipped = 0;
        for (const auto& [gram, c] : pred_counts) {
            int max_ref = 0;
            for (const auto& ref : references) {
                auto ref_counts = ngram_counts_of(ref, n);
                auto it = ref_counts.find(gram);
                if (it != ref_counts.end()) max_ref = std::max(max_ref, it->second);
            }
            clipped += std::min(c, max_ref);
        }
        log_precision += std::log((static_cast<double>(clipped) + kBleuEps) /
                                  (static_cast<double>(total) + kBleuEps));
    }
    double geo_mean = std::exp(log_precision / static_cast<double>(max_n));

    // Closest reference length; ties go to the shorter reference.
    std::size_t c = prediction.size();
    std::size_t r = references.front().size();
    for (const auto& ref : references) {
        std::size_t diff_new = ref.size() > c ? ref.size() - c : c - ref.size();
        std::size_t diff_old = r > c ? r - c : c - r;
        if (diff_new < diff_old || (diff_new == diff_old && ref.size() < r)) r = ref.size();
    }
    double bp = c >= r ? 1.0
                       : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return bp * geo_mean;
}

double self_bleu(const std::vector<TokenSeq>& responses, int max_n) {
    if (responses.size() < 2)
        throw std::invalid_argument("self_bleu: need at least 2 responses");
    for (const auto& r : responses)
        if (r.empty()) throw std::invalid_argument("self_bleu: empty response");
    double sum = 0.0;
    for (std::size_t i = 0; i < responses.size(); ++i) {
        std::vector<TokenSeq> refs;
        refs.reserve(responses.size() - 1);
        for (std::size_t j = 0; j < responses.size(); ++j)
            if (j != i) refs.push_back(responses[j]);
        sum += bleu(responses[i], refs, max_n);
    }
    return sum / static_cast<double>(responses.size());
}

void TfIdfStats::fit(const std::vector<TokenSeq>& corpus) {
    for (const auto& doc : corpus) {
        std::set<TokenId> distinct(doc.begin(), doc.end());
        for (TokenId tok : distinct)
            if (tok >= 0 && tok < static_cast<TokenId>(df_.size()))
                df_[static_cast<std::size_t>(tok)] += 1;
        ++documents_;
    }
}

double TfIdfStats::idf(TokenId token) const {
    int df = 0;
    if (token >= 0 && token < static_cast<TokenId>(df_.size()))
        df = df_[static_cast<std::size_t>(token)];
    return std::log((1.0 + documents_) / (1.0 + df)) + 1.0;
}

double coherence(const TokenSeq& context, const TokenSeq& response, const TfIdfStats& stats) {
    std::map<TokenId, double> a, b;
    for (TokenId tok : context) a[tok] += 1.0;
    for (TokenId tok : response) b[tok] += 1.0;
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (auto& [tok, tf] : a) {
        tf *= stats.idf(tok);
        na += tf * tf;
    }
    for (auto& [tok, tf] : b) {
        tf *= stats.idf(tok);
        nb += tf * tf;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    for (const auto& [tok, wa] : a) {
        auto it = b.find(tok);
        if (it != b.end()) dot += wa * it->second;
    }
    double cos = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(cos, 0.0, 1.0);
}

}  // namespace promptsteer
