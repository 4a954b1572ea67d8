#include "promptsteer/responders.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace promptsteer {

std::uint64_t hash_tokens(const TokenSeq& seq) {
    // FNV-1a over the id stream; stable across platforms.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId id : seq) {
        h ^= static_cast<std::uint64_t>(static_cast<std::uint32_t>(id));
        h *= 0x100000001b3ULL;
    }
    return h;
}

MarkovChatbot::MarkovChatbot(int order, double smoothing_alpha, int vocab_size, int response_len)
    : counts_(order, smoothing_alpha, vocab_size), response_len_(response_len) {
    if (response_len < 1) throw std::invalid_argument("markov: response_len must be >= 1");
}

MarkovChatbot fit_markov(const std::vector<TokenSeq>& corpus, int order, double smoothing_alpha,
                         int vocab_size, int response_len) {
    MarkovChatbot bot(order, smoothing_alpha, vocab_size, response_len);
    bot.counts_.fit(corpus);
    return bot;
}

TokenId MarkovChatbot::step(TokenSeq& context, Rng& rng) const {
    TokenId tok = counts_.sample(context, rng);
    context.erase(context.begin());
    context.push_back(tok);
    return tok;
}

TokenSeq MarkovChatbot::respond(const TokenSeq& input, std::uint64_t seed) const {
    Rng rng(mix_seed(seed, hash_tokens(input)));
    TokenSeq context = counts_.make_context(input);
    TokenSeq out;
    out.reserve(static_cast<std::size_t>(response_len_));
    for (int i = 0; i < response_len_; ++i) out.push_back(step(context, rng));
    return out;
}

TriggeredChatbot::TriggeredChatbot(MarkovChatbot base, std::map<TokenId, Trigger> trigger_map,
                                   std::map<int, std::vector<TokenId>> groups)
    : base_(std::move(base)), trigger_map_(std::move(trigger_map)), groups_(std::move(groups)) {
    for (const auto& [tok, trig] : trigger_map_) {
        if (tok < 0 || tok >= base_.counts().vocab_size())
            throw std::invalid_argument("triggered: trigger token id out of range");
        if (trig.beta <= 0.0 || trig.beta > 1.0)
            throw std::invalid_argument("triggered: trigger strength must be in (0, 1]");
        if (!groups_.count(trig.group))
            throw std::invalid_argument("triggered: trigger references unknown group");
    }
    for (auto& [gid, words] : groups_) {
        if (words.empty()) throw std::invalid_argument("triggered: empty word group");
        std::sort(words.begin(), words.end());
        words.erase(std::unique(words.begin(), words.end()), words.end());
    }
}

double TriggeredChatbot::group_lambda(int group, const TokenSeq& input) const {
    std::set<TokenId> distinct(input.begin(), input.end());
    double keep = 1.0;
    for (TokenId tok : distinct) {
        auto it = trigger_map_.find(tok);
        if (it != trigger_map_.end() && it->second.group == group) keep *= 1.0 - it->second.beta;
    }
    return 1.0 - keep;
}

TokenSeq TriggeredChatbot::respond(const TokenSeq& input, std::uint64_t seed) const {
    // Active group: highest lambda, ties to the lowest group id.
    std::map<int, double> keep;  // group -> prod(1 - beta)
    std::set<TokenId> distinct(input.begin(), input.end());
    for (TokenId tok : distinct) {
        auto it = trigger_map_.find(tok);
        if (it == trigger_map_.end()) continue;
        auto [slot, inserted] = keep.emplace(it->second.group, 1.0);
        slot->second *= 1.0 - it->second.beta;
    }
    int active = -1;
    double lambda = 0.0;
    for (const auto& [gid, k] : keep) {
        double lam = 1.0 - k;
        if (lam > lambda) {  // strict: ties resolve to the lowest id seen first
            lambda = lam;
            active = gid;
        }
    }

    Rng rng(mix_seed(seed, hash_tokens(input)));
    TokenSeq context = base_.counts().make_context(input);
    TokenSeq out;
    out.reserve(static_cast<std::size_t>(response_len()));
    const std::vector<TokenId>* words = active >= 0 ? &groups_.at(active) : nullptr;
    for (int i = 0; i < response_len(); ++i) {
        TokenId base_tok = base_.step(context, rng);
        if (words && rng.bernoulli(lambda))
            out.push_back((*words)[rng.uniform_int(words->size())]);
        else
            out.push_back(base_tok);
    }
    return out;
}

double base_emission_rate(const MarkovChatbot& base, const std::set<TokenId>& words,
                          int sample_tokens) {
    int responses = (sample_tokens + base.response_len() - 1) / base.response_len();
    std::int64_t hits = 0;
    std::int64_t total = 0;
    TokenSeq empty;
    for (int s = 0; s < responses; ++s) {
        TokenSeq resp = base.respond(empty, static_cast<std::uint64_t>(s));
        for (TokenId tok : resp) {
            hits += words.count(tok) ? 1 : 0;
            ++total;
        }
    }
    return total ? static_cast<double>(hits) / static_cast<double>(total) : 0.0;
}

double oracle_best_reward(const TriggeredChatbot& model, const std::set<TokenId>& reward_words,
                          int prompt_len, int sample_tokens) {
    if (prompt_len < 1) throw std::invalid_argument("oracle: prompt_len must be >= 1");
    double p_bg = base_emission_rate(model.base(), reward_words, sample_tokens);
    double len = static_cast<double>(model.response_len());
    double best = len * p_bg;  // no trigger placed

    // Strongest triggers per group, best-first.
    std::map<int, std::vector<double>> betas;
    for (const auto& [tok, trig] : model.trigger_map()) betas[trig.group].push_back(trig.beta);
    for (auto& [gid, bs] : betas) {
        std::sort(bs.begin(), bs.end(), std::greater<>());
        const auto& words = model.groups().at(gid);
        std::size_t overlap_n = 0;
        for (TokenId w : words) overlap_n += reward_words.count(w) ? 1 : 0;
        double overlap = static_cast<double>(overlap_n) / static_cast<double>(words.size());
        double keep = 1.0;
        std::size_t m = std::min<std::size_t>(bs.size(), static_cast<std::size_t>(prompt_len));
        for (std::size_t i = 0; i < m; ++i) keep *= 1.0 - bs[i];
        double lambda = 1.0 - keep;
        best = std::max(best, len * (lambda * overlap + (1.0 - lambda) * p_bg));
    }
    return best;
}

}  // namespace promptsteer
