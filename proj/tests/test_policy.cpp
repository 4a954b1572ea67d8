#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "helpers.hpp"
#include "promptsteer/policy.hpp"

using namespace promptsteer;

namespace {

// Small instance used throughout: 2 tasks, d=4, V_p=7, V=9.
PolicyParams small_params(std::uint64_t seed, double scale = 0.05) {
    PolicyDims dims{2, 4, 7, 9};
    PolicyParams p = seed == 0 ? PolicyParams(dims)
                               : PolicyParams::random_init(dims, seed, scale);
    p.task_of_token = {{7, 0}, {8, 1}};  // control tokens are ids 7 and 8
    return p;
}

double finite_diff(PolicyParams params, std::size_t index, const TokenSeq& s,
                   const std::vector<TokenId>& prompt, double h = 1e-5) {
    params.data()[index] += h;
    double up = policy_forward(params, s, prompt).total_logprob;
    params.data()[index] -= 2 * h;
    double down = policy_forward(params, s, prompt).total_logprob;
    return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("all-zero parameters give a uniform policy") {
    PolicyParams params = small_params(0);
    TokenSeq s = {7, 1, 2, 3};
    PromptSample sample = sample_prompt(params, s, 5, 1.0, 123);
    for (double lp : sample.logprobs) CHECK(lp == doctest::Approx(-std::log(7.0)).epsilon(1e-12));
    CHECK(sample.entropy == doctest::Approx(std::log(7.0)).epsilon(1e-12));

    auto [total, grad] = logprob_and_grad(params, s, sample.tokens);
    CHECK(total == doctest::Approx(-5.0 * std::log(7.0)).epsilon(1e-12));
}

TEST_CASE("temperature near zero decodes the argmax") {
    PolicyParams params = small_params(21);
    TokenSeq s = {7, 1, 2};
    PromptSample a = sample_prompt(params, s, 4, 1e-9, 1);
    PromptSample b = sample_prompt(params, s, 4, 1e-9, 999);
    CHECK(a.tokens == b.tokens);  // no randomness left in the limit
    for (double lp : a.logprobs) CHECK(lp == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS(sample_prompt(params, s, 4, 0.0, 1));
    CHECK_THROWS(sample_prompt(params, s, 0, 1.0, 1));
}

TEST_CASE("sampling is deterministic per seed") {
    PolicyParams params = small_params(4);
    TokenSeq s = {8, 0, 4};
    PromptSample first = sample_prompt(params, s, 5, 1.0, 77);
    for (int i = 0; i < 100; ++i) {
        PromptSample again = sample_prompt(params, s, 5, 1.0, 77);
        CHECK(again.tokens == first.tokens);
        CHECK(again.logprobs == first.logprobs);
    }
}

TEST_CASE("per-step probabilities are a distribution and match the sampler") {
    PolicyParams params = small_params(13);
    TokenSeq s = {7, 2, 5, 5};
    PromptSample sample = sample_prompt(params, s, 6, 1.0, 3);
    PolicyForward fwd = policy_forward(params, s, sample.tokens);
    for (std::size_t t = 0; t < fwd.probs.size(); ++t) {
        double sum = 0.0;
        for (double p : fwd.probs[t]) sum += p;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
        // Sampling at temperature 1 records the same logprob the forward pass
        // recomputes.
        CHECK(fwd.logprobs[t] == doctest::Approx(sample.logprobs[t]).epsilon(1e-9));
    }
}

TEST_CASE("disabling the context term makes prompts independent of x") {
    PolicyParams params = small_params(8, 0.8);
    params.bow_scale = 0.0;
    TokenSeq s1 = {7, 1, 2, 3};
    TokenSeq s2 = {7, 6, 6};
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        PromptSample a = sample_prompt(params, s1, 5, 1.0, seed);
        PromptSample b = sample_prompt(params, s2, 5, 1.0, seed);
        CHECK(a.tokens == b.tokens);
        CHECK(a.logprobs == b.logprobs);
    }
    params.bow_scale = 1.0;
    bool any_diff = false;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        any_diff |= sample_prompt(params, s1, 5, 1.0, seed).tokens !=
                    sample_prompt(params, s2, 5, 1.0, seed).tokens;
    CHECK(any_diff);
}

TEST_CASE("analytic gradient matches central finite differences") {
    PolicyParams params = small_params(31);
    TokenSeq s = {8, 1, 2, 2, 6};
    std::vector<TokenId> prompt = {3, 0, 5};
    auto [total, grad] = logprob_and_grad(params, s, prompt);
    CHECK(std::isfinite(total));
    double worst = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        double fd = finite_diff(params, i, s, prompt);
        double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("out_bias gradient sums to zero") {
    PolicyParams params = small_params(17);
    TokenSeq s = {7, 3};
    SUBCASE("single step") {
        auto [total, grad] = logprob_and_grad(params, s, {2});
        double sum = 0.0;
        for (std::size_t i = grad.size() - 7; i < grad.size(); ++i) sum += grad[i];
        CHECK(std::abs(sum) < 1e-10);
    }
    SUBCASE("several steps") {
        auto [total, grad] = logprob_and_grad(params, s, {2, 6, 1, 1});
        double sum = 0.0;
        for (std::size_t i = grad.size() - 7; i < grad.size(); ++i) sum += grad[i];
        CHECK(std::abs(sum) < 1e-10);
    }
}

TEST_CASE("unregistered task is an error") {
    PolicyParams params = small_params(2);
    CHECK_THROWS_AS(sample_prompt(params, {5, 1}, 3, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(policy_forward(params, {5, 1}, {0}), std::invalid_argument);
}

TEST_CASE("checkpoint round trip") {
    namespace fs = std::filesystem;
    PolicyParams params = small_params(99);
    params.bow_scale = 0.25;
    fs::path path = fs::temp_directory_path() / "promptsteer_ckpt_test.txt";
    save_policy(params, path.string(), "config_hash=deadbeef master_seed=3");
    PolicyParams loaded = load_policy(path.string());
    CHECK(loaded.same_shape(params));
    CHECK(loaded.data() == params.data());
    CHECK(loaded.bow_scale == params.bow_scale);
    CHECK(loaded.task_of_token == params.task_of_token);
    fs::remove(path);
    CHECK_THROWS(load_policy((fs::temp_directory_path() / "no_such_ckpt.txt").string()));
}
