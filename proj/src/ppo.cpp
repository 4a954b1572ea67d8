#include "promptsteer/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace promptsteer {

void validate(const PPOConfig& config) {
    if (!(config.clip_eps > 0.0 && config.clip_eps < 1.0))
        throw std::invalid_argument("ppo: clip_eps must be in (0, 1)");
    if (!(config.learning_rate >= 0.0))
        throw std::invalid_argument("ppo: learning_rate must be >= 0");
    if (config.epochs_per_batch < 1)
        throw std::invalid_argument("ppo: epochs_per_batch must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("ppo: batch_size must be >= 1");
}

std::vector<double> compute_advantages(const std::vector<Episode>& batch,
                                       std::map<int, double>& baselines,
                                       const PPOConfig& config) {
    if (batch.empty()) throw std::invalid_argument("compute_advantages: empty batch");
    std::size_t n = batch.size();
    std::vector<double> adv(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = baselines.find(batch[i].task_id);
        double baseline = it == baselines.end() ? 0.0 : it->second;
        adv[i] = batch[i].reward - baseline;
    }
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    double stddev = std::sqrt(var / static_cast<double>(n));
    for (double& a : adv) a = (a - mean) / (stddev + config.adv_norm_eps);

    // EMA refresh from per-task batch means, after the advantages are fixed.
    std::map<int, std::pair<double, int>> sums;
    for (const Episode& ep : batch) {
        auto& slot = sums[ep.task_id];
        slot.first += ep.reward;
        slot.second += 1;
    }
    for (const auto& [task, sum_count] : sums) {
        double task_mean = sum_count.first / static_cast<double>(sum_count.second);
        auto [it, inserted] = baselines.emplace(task, 0.0);
        it->second = config.baseline_decay * it->second +
                     (1.0 - config.baseline_decay) * task_mean;
    }
    return adv;
}

std::pair<double, std::vector<double>> ppo_loss_and_grad(const PolicyParams& params,
                                                         const std::vector<Episode>& batch,
                                                         const std::vector<double>& advantages,
                                                         const PPOConfig& config) {
    if (batch.size() != advantages.size())
        throw std::invalid_argument("ppo_loss_and_grad: advantages misaligned with batch");
    std::size_t total_tokens = 0;
    for (const Episode& ep : batch) {
        if (ep.prompt.tokens.size() != ep.old_logprobs.size())
            throw std::invalid_argument("ppo_loss_and_grad: old_logprobs length mismatch");
        total_tokens += ep.prompt.tokens.size();
    }
    if (total_tokens == 0) throw std::invalid_argument("ppo_loss_and_grad: no prompt tokens");

    double inv_n = 1.0 / static_cast<double>(total_tokens);
    double lo = 1.0 - config.clip_eps;
    double hi = 1.0 + config.clip_eps;
    double loss = 0.0;
    std::vector<double> grad(params.data().size(), 0.0);

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Episode& ep = batch[i];
        double adv = advantages[i];
        PolicyForward fwd = policy_forward(params, ep.steer_input, ep.prompt.tokens);
        std::vector<std::vector<double>> dlogits(ep.prompt.tokens.size());
        for (std::size_t t = 0; t < ep.prompt.tokens.size(); ++t) {
            double ratio = std::exp(fwd.logprobs[t] - ep.old_logprobs[t]);
            double clipped = std::clamp(ratio, lo, hi);
            double surrogate = std::min(ratio * adv, clipped * adv);
            double ent = fwd.entropies[t];
            loss += -(surrogate + config.entropy_coef * ent) * inv_n;

            const std::vector<double>& probs = fwd.probs[t];
            std::vector<double>& dz = dlogits[t];
            dz.assign(probs.size(), 0.0);
            // Policy-gradient path only when the unclipped branch is selected.
            if (ratio * adv <= clipped * adv) {
                double coef = -adv * ratio * inv_n;
                std::size_t pick = static_cast<std::size_t>(ep.prompt.tokens[t]);
                for (std::size_t j = 0; j < probs.size(); ++j) dz[j] = coef * -probs[j];
                dz[pick] += coef;
            }
            // Entropy path: d(-c*H)/dz_k = c * p_k * (log p_k + H).
            double c = config.entropy_coef * inv_n;
            for (std::size_t j = 0; j < probs.size(); ++j) {
                double p = probs[j];
                if (p > 0.0) dz[j] += c * p * (std::log(p) + ent);
            }
        }
        policy_backward(params, ep.steer_input, ep.prompt.tokens, fwd, dlogits, grad);
    }
    return {loss, std::move(grad)};
}

namespace {

bool all_finite(double loss, const std::vector<double>& grad) {
    if (!std::isfinite(loss)) return false;
    for (double g : grad)
        if (!std::isfinite(g)) return false;
    return true;
}

}  // namespace

PPOStats ppo_update(PolicyParams& params, const std::vector<Episode>& batch,
                    const PPOConfig& config, std::map<int, double>& baselines, Rng& rng) {
    validate(config);
    if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");

    std::vector<double> advantages = compute_advantages(batch, baselines, config);
    std::vector<double> snapshot = params.data();

    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.epochs_per_batch; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(config.batch_size)) {
            std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            std::vector<Episode> mini;
            std::vector<double> mini_adv;
            mini.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                mini.push_back(batch[order[k]]);
                mini_adv.push_back(advantages[order[k]]);
            }
            auto [loss, grad] = ppo_loss_and_grad(params, mini, mini_adv, config);
            if (!all_finite(loss, grad)) {
                params.data() = snapshot;
                PPOStats stats;
                stats.aborted = true;
                return stats;
            }
            for (std::size_t i = 0; i < grad.size(); ++i)
                params.data()[i] -= config.learning_rate * grad[i];
        }
    }

    // Full-batch stats after the final update.
    PPOStats stats;
    double kl = 0.0;
    double ent = 0.0;
    double clipped_tokens = 0.0;
    std::size_t total_tokens = 0;
    double lo = 1.0 - config.clip_eps;
    double hi = 1.0 + config.clip_eps;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Episode& ep = batch[i];
        stats.mean_reward += ep.reward;
        PolicyForward fwd = policy_forward(params, ep.steer_input, ep.prompt.tokens);
        for (std::size_t t = 0; t < ep.prompt.tokens.size(); ++t) {
            double ratio = std::exp(fwd.logprobs[t] - ep.old_logprobs[t]);
            double adv = advantages[i];
            bool binds = ratio * adv > std::clamp(ratio, lo, hi) * adv;
            clipped_tokens += binds ? 1.0 : 0.0;
            kl += ep.old_logprobs[t] - fwd.logprobs[t];
            ent += fwd.entropies[t];
            ++total_tokens;
        }
    }
    stats.mean_reward /= static_cast<double>(batch.size());
    stats.mean_kl = kl / static_cast<double>(total_tokens);
    stats.clip_fraction = clipped_tokens / static_cast<double>(total_tokens);
    stats.entropy = ent / static_cast<double>(total_tokens);
    return stats;
}

}  // namespace promptsteer
