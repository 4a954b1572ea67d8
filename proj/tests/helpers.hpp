#pragma once

#include <string>
#include <vector>

#include "promptsteer/rng.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer::test {

// Ten ordinary corpus words plus five group words that never occur in the
// corpus, so planted groups are disjoint from the base chain's support.
inline std::vector<std::string> corpus_lines() {
    return {
        "alpha beta gamma delta", "beta gamma delta epsilon", "gamma delta epsilon zeta",
        "delta epsilon zeta eta", "epsilon zeta eta theta",   "zeta eta theta iota",
        "eta theta iota kappa",   "alpha gamma epsilon eta",  "beta delta zeta theta",
        "alpha beta beta gamma",
    };
}

inline std::vector<std::string> group_words() {
    return {"planet", "comet", "nebula", "quasar", "meteor"};
}

inline Vocab make_vocab(std::vector<std::string> reserved = {}) {
    return build_vocab(corpus_lines(), group_words(), reserved);
}

inline std::vector<TokenSeq> tokenized_corpus(const Vocab& vocab) {
    std::vector<TokenSeq> out;
    for (const auto& line : corpus_lines()) out.push_back(tokenize(line, vocab));
    return out;
}

inline TokenSeq random_seq(Rng& rng, int max_len, int vocab_size) {
    TokenSeq seq(rng.uniform_int(static_cast<std::uint64_t>(max_len) + 1));
    for (auto& id : seq) id = static_cast<TokenId>(rng.uniform_int(vocab_size));
    return seq;
}

}  // namespace promptsteer::test
