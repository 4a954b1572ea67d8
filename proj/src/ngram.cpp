#include "promptsteer/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace promptsteer {

NgramCounts::NgramCounts(int context_len, double alpha, int vocab_size)
    : context_len_(context_len), alpha_(alpha), vocab_size_(vocab_size) {
    if (context_len < 1) throw std::invalid_argument("ngram: context_len must be >= 1");
    if (alpha <= 0) throw std::invalid_argument("ngram: smoothing alpha must be > 0");
    if (vocab_size < 1) throw std::invalid_argument("ngram: vocab size must be >= 1");
}

void NgramCounts::fit(const std::vector<TokenSeq>& corpus) {
    if (corpus.empty()) throw std::invalid_argument("ngram: empty corpus");
    std::map<TokenSeq, std::map<TokenId, std::int64_t>> raw;
    for (const auto& line : corpus) {
        TokenSeq ctx(static_cast<std::size_t>(context_len_), kBosId);
        for (TokenId tok : line) {
            raw[ctx][tok] += 1;
            ctx.erase(ctx.begin());
            ctx.push_back(tok);
        }
    }
    rows_.clear();
    for (auto& [ctx, counts] : raw) {
        Row row;
        row.counts.assign(counts.begin(), counts.end());
        for (const auto& [tok, n] : row.counts) row.total += n;
        rows_.emplace(ctx, std::move(row));
    }
}

const NgramCounts::Row* NgramCounts::find_row(const TokenSeq& context) const {
    auto it = rows_.find(context);
    return it == rows_.end() ? nullptr : &it->second;
}

TokenSeq NgramCounts::make_context(const TokenSeq& history) const {
    TokenSeq ctx;
    std::size_t len = static_cast<std::size_t>(context_len_);
    if (history.size() >= len) {
        ctx.assign(history.end() - static_cast<std::ptrdiff_t>(len), history.end());
    } else {
        ctx.assign(len - history.size(), kBosId);
        ctx.insert(ctx.end(), history.begin(), history.end());
    }
    return ctx;
}

double NgramCounts::prob(const TokenSeq& context, TokenId token) const {
    const Row* row = find_row(context);
    std::int64_t count = 0;
    std::int64_t total = 0;
    if (row) {
        total = row->total;
        auto it = std::lower_bound(row->counts.begin(), row->counts.end(), token,
                                   [](const auto& p, TokenId t) { return p.first < t; });
        if (it != row->counts.end() && it->first == token) count = it->second;
    }
    return (static_cast<double>(count) + alpha_) /
           (static_cast<double>(total) + alpha_ * vocab_size_);
}

double NgramCounts::log_prob(const TokenSeq& context, TokenId token) const {
    return std::log(prob(context, token));
}

TokenId NgramCounts::sample(const TokenSeq& context, Rng& rng) const {
    const Row* row = find_row(context);
    double smooth_mass = alpha_ * vocab_size_;
    double total = smooth_mass + (row ? static_cast<double>(row->total) : 0.0);
    double u = rng.uniform() * total;
    if (u < smooth_mass || !row) {
        TokenId tok = static_cast<TokenId>(u / alpha_);
        if (tok >= vocab_size_) tok = vocab_size_ - 1;  // guard the open interval edge
        if (tok < 0) tok = 0;
        return tok;
    }
    double rest = u - smooth_mass;
    for (const auto& [tok, n] : row->counts) {
        rest -= static_cast<double>(n);
        if (rest < 0) return tok;
    }
    return row->counts.back().first;
}

}  // namespace promptsteer
