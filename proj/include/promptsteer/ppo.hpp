#pragma once

#include <map>
#include <vector>

#include "promptsteer/policy.hpp"
#include "promptsteer/rng.hpp"
#include "promptsteer/text.hpp"

namespace promptsteer {

// One rollout: prompt sampled for (task, context), response scored once.
struct Episode {
    int task_id = 0;
    TokenSeq context;      // x
    TokenSeq steer_input;  // s(c, x), kept so updates need no vocab access
    PromptSample prompt;
    TokenSeq response;
    double reward = 0.0;
    std::vector<double> old_logprobs;  // log pi_old per prompt token
};

struct PPOConfig {
    double clip_eps = 0.2;
    double learning_rate = 0.01;
    int epochs_per_batch = 4;
    int batch_size = 64;
    double entropy_coef = 0.01;
    double adv_norm_eps = 1e-8;
    double baseline_decay = 0.9;
};

void validate(const PPOConfig& config);

// reward - per-task EMA baseline, batch normalized to zero mean and unit
// std. Baselines are updated (decay * old + (1 - decay) * task batch mean)
// after the advantages are taken.
std::vector<double> compute_advantages(const std::vector<Episode>& batch,
                                       std::map<int, double>& baselines,
                                       const PPOConfig& config);

// Clipped-surrogate loss with an entropy bonus, averaged over all prompt
// tokens of the batch, and its exact gradient. Tokens where the clipped
// branch is active and binding contribute no policy gradient.
std::pair<double, std::vector<double>> ppo_loss_and_grad(const PolicyParams& params,
                                                         const std::vector<Episode>& batch,
                                                         const std::vector<double>& advantages,
                                                         const PPOConfig& config);

struct PPOStats {
    double mean_reward = 0.0;
    double mean_kl = 0.0;        // mean(old_logprob - new_logprob) over tokens
    double clip_fraction = 0.0;  // fraction of tokens where clipping binds
    double entropy = 0.0;        // mean per-token entropy after the update
    bool aborted = false;        // non-finite loss/grad; params left unchanged
};

// epochs_per_batch sweeps of plain gradient descent over seeded shuffled
// minibatches of config.batch_size episodes. Advantages are computed once per
// batch. Stats come from a full-batch pass after the final update.
PPOStats ppo_update(PolicyParams& params, const std::vector<Episode>& batch,
                    const PPOConfig& config, std::map<int, double>& baselines, Rng& rng);

}  // namespace promptsteer
