#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "promptsteer/responders.hpp"

using namespace promptsteer;

namespace {

// Base chain over the test corpus plus a planted group disjoint from it.
struct TriggerWorld {
    Vocab vocab = test::make_vocab();
    MarkovChatbot base;
    std::vector<TokenId> group;
    TokenId trigger_a, trigger_b;

    explicit TriggerWorld(double alpha = 0.1, int response_len = 12)
        : base(fit_markov(test::tokenized_corpus(vocab), 1, alpha, vocab.size(),
                          response_len)) {
        for (const auto& w : test::group_words()) group.push_back(vocab.id_of(w));
        trigger_a = vocab.id_of("alpha");
        trigger_b = vocab.id_of("beta");
    }

    TriggeredChatbot with(std::map<TokenId, Trigger> triggers) const {
        return TriggeredChatbot(base, std::move(triggers), {{0, group}});
    }
};

double mc_group_count(const TriggeredChatbot& bot, const TokenSeq& input,
                      const std::set<TokenId>& words, int seeds) {
    double total = 0.0;
    for (int s = 0; s < seeds; ++s) {
        TokenSeq resp = bot.respond(input, static_cast<std::uint64_t>(s));
        for (TokenId tok : resp) total += words.count(tok) ? 1.0 : 0.0;
    }
    return total / seeds;
}

}  // namespace

TEST_CASE("markov counts match the add-alpha formula") {
    Vocab vocab = build_vocab({"a b", "a b"}, {}, {});
    double alpha = 0.5;
    MarkovChatbot bot = fit_markov({tokenize("a b", vocab), tokenize("a b", vocab)}, 1, alpha,
                                   vocab.size(), 12);
    double v = vocab.size();
    TokenSeq ctx = {vocab.id_of("a")};
    CHECK(bot.counts().prob(ctx, vocab.id_of("b")) ==
          doctest::Approx((2.0 + alpha) / (2.0 + alpha * v)).epsilon(1e-12));

    // Unseen contexts fall back to the uniform smoothed distribution.
    MarkovChatbot single = fit_markov({tokenize("a", vocab)}, 1, alpha, vocab.size(), 12);
    TokenSeq unseen = {vocab.id_of("b")};
    for (int tok = 0; tok < vocab.size(); ++tok)
        CHECK(single.counts().prob(unseen, tok) == doctest::Approx(1.0 / v).epsilon(1e-12));
}

TEST_CASE("markov conditional distributions sum to one") {
    Vocab vocab = test::make_vocab();
    MarkovChatbot bot = fit_markov(test::tokenized_corpus(vocab), 1, 0.25, vocab.size(), 12);
    for (TokenSeq ctx : {TokenSeq{vocab.id_of("alpha")}, TokenSeq{vocab.id_of("theta")},
                         TokenSeq{vocab.id_of("planet")}, TokenSeq{kBosId}}) {
        double sum = 0.0;
        for (int tok = 0; tok < vocab.size(); ++tok) sum += bot.counts().prob(ctx, tok);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK_THROWS(fit_markov({}, 1, 0.5, vocab.size(), 12));
}

TEST_CASE("responders are deterministic per input and seed") {
    TriggerWorld world;
    TriggeredChatbot bot = world.with({{world.trigger_a, {0, 0.5}}});
    TokenSeq input = tokenize("alpha beta gamma", world.vocab);
    TokenSeq first = bot.respond(input, 42);
    for (int i = 0; i < 100; ++i) CHECK(bot.respond(input, 42) == first);
    TokenSeq base_first = world.base.respond(input, 42);
    for (int i = 0; i < 100; ++i) CHECK(world.base.respond(input, 42) == base_first);
}

TEST_CASE("no trigger in the input reduces to the base chain") {
    TriggerWorld world;
    TriggeredChatbot bot = world.with({{world.trigger_a, {0, 0.9}}});
    TokenSeq input = tokenize("beta gamma delta", world.vocab);  // no alpha
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        CHECK(bot.respond(input, seed) == world.base.respond(input, seed));
}

TEST_CASE("a trigger with beta one emits only group words") {
    TriggerWorld world;
    TriggeredChatbot bot = world.with({{world.trigger_a, {0, 1.0}}});
    std::set<TokenId> words(world.group.begin(), world.group.end());
    TokenSeq input = tokenize("alpha beta gamma", world.vocab);
    for (std::uint64_t seed = 0; seed < 50; ++seed)
        for (TokenId tok : bot.respond(input, seed)) CHECK(words.count(tok) == 1);
}

TEST_CASE("expected group-word count matches the closed form") {
    TriggerWorld world;
    TriggeredChatbot bot = world.with({{world.trigger_a, {0, 0.5}}});
    std::set<TokenId> words(world.group.begin(), world.group.end());
    TokenSeq input = tokenize("alpha beta gamma", world.vocab);
    // Group words never occur in the corpus, so the base rate is the smoothing
    // floor; the dominant term is 12 * 0.5 = 6.
    double mean = mc_group_count(bot, input, words, 10000);
    double base_rate = base_emission_rate(world.base, words, 100000);
    CHECK(mean == doctest::Approx(12.0 * (0.5 + 0.5 * base_rate)).epsilon(0.025));
    CHECK(std::abs(mean - 6.0) < 0.15 + 12.0 * base_rate);
}

TEST_CASE("group-word count is monotone in the number of distinct triggers") {
    TriggerWorld world;
    TokenId t1 = world.vocab.id_of("alpha");
    TokenId t2 = world.vocab.id_of("beta");
    TokenId t3 = world.vocab.id_of("gamma");
    TriggeredChatbot bot =
        world.with({{t1, {0, 0.4}}, {t2, {0, 0.4}}, {t3, {0, 0.4}}});
    std::set<TokenId> words(world.group.begin(), world.group.end());
    const char* inputs[] = {"delta epsilon", "alpha delta", "alpha beta delta",
                            "alpha beta gamma delta"};
    double prev = -1.0;
    for (const char* text : inputs) {
        double mean = mc_group_count(bot, tokenize(text, world.vocab), words, 10000);
        CHECK(mean >= prev);
        prev = mean;
    }
}

TEST_CASE("lambda ties resolve to the lowest group id") {
    TriggerWorld world;
    std::set<TokenId> g1 = {world.vocab.id_of("planet"), world.vocab.id_of("comet")};
    std::set<TokenId> g2 = {world.vocab.id_of("quasar")};
    TokenSeq input = tokenize("alpha beta", world.vocab);  // both groups at lambda 0.6

    // Either assignment of triggers to the two groups: the low id wins the tie,
    // so group 1 words carry the lambda boost while group 2 only appears through
    // base-chain smoothing noise.
    for (bool swapped : {false, true}) {
        std::map<TokenId, Trigger> triggers =
            swapped ? std::map<TokenId, Trigger>{{world.trigger_a, {1, 0.6}},
                                                 {world.trigger_b, {2, 0.6}}}
                    : std::map<TokenId, Trigger>{{world.trigger_a, {2, 0.6}},
                                                 {world.trigger_b, {1, 0.6}}};
        TriggeredChatbot bot(world.base, triggers,
                             {{1, {g1.begin(), g1.end()}}, {2, {g2.begin(), g2.end()}}});
        double r1 = mc_group_count(bot, input, g1, 2000) / 12.0;
        double r2 = mc_group_count(bot, input, g2, 2000) / 12.0;
        CHECK(r1 > 0.55);   // lambda 0.6 plus smoothing noise
        CHECK(r2 < 0.05);   // smoothing noise only
    }
}

TEST_CASE("oracle ceiling") {
    TriggerWorld world;
    std::set<TokenId> words(world.group.begin(), world.group.end());

    SUBCASE("beta one saturates at the response length") {
        TriggeredChatbot bot = world.with({{world.trigger_a, {0, 1.0}}});
        CHECK(oracle_best_reward(bot, words, 1, 20000) == doctest::Approx(12.0));
        CHECK(oracle_best_reward(bot, words, 5, 20000) == doctest::Approx(12.0));
    }
    SUBCASE("no triggers means the baseline rate") {
        TriggeredChatbot bot(world.base, {}, {{0, world.group}});
        double base_rate = base_emission_rate(world.base, words, 100000);
        CHECK(oracle_best_reward(bot, words, 5, 100000) ==
              doctest::Approx(12.0 * base_rate).epsilon(1e-9));
    }
    SUBCASE("two triggers at beta 0.5 agree with Monte-Carlo within 2%") {
        TriggeredChatbot bot =
            world.with({{world.trigger_a, {0, 0.5}}, {world.trigger_b, {0, 0.5}}});
        double oracle = oracle_best_reward(bot, words, 5, 100000);
        // Both triggers present: lambda = 1 - 0.25 = 0.75.
        TokenSeq input = tokenize("alpha beta gamma", world.vocab);
        double mc = mc_group_count(bot, input, words, 10000);
        CHECK(std::abs(mc - oracle) / oracle < 0.02);
    }
}
