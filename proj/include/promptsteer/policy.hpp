#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promptsteer/text.hpp"

namespace promptsteer {

struct PolicyDims {
    int num_tasks = 0;
    int embed_dim = 32;
    int prompt_vocab = 0;  // V_p: sampleable tokens, ids [0, prompt_vocab)
    int vocab = 0;         // V: full vocab incl. control tokens
};

// Parameters of the prompt generator. The generator is a linear
// autoregressive token policy:
//   h        = task_embed[task] + bow_scale * ctx_proj . bow(s[1:])
//   logits_t = out_proj . (h + prev_embed[p_{t-1}]) + out_bias
// with softmax sampling per step. prev_embed has one extra row (index V_p)
// acting as the begin marker for p_0. All blocks live in one flat buffer so
// updates and finite differences are single loops.
class PolicyParams {
public:
    explicit PolicyParams(PolicyDims dims);
    static PolicyParams random_init(PolicyDims dims, std::uint64_t seed, double scale = 0.01);

    const PolicyDims& dims() const { return dims_; }
    std::vector<double>& data() { return flat_; }
    const std::vector<double>& data() const { return flat_; }

    double* task_embed(int task);
    const double* task_embed(int task) const;
    double* ctx_proj_row(int k);  // length V, k in [0, d)
    const double* ctx_proj_row(int k) const;
    double* prev_embed(int prev);  // length d, prev in [0, V_p]; V_p = begin marker
    const double* prev_embed(int prev) const;
    double* out_proj_row(int j);  // length d, j in [0, V_p)
    const double* out_proj_row(int j) const;
    double* out_bias();
    const double* out_bias() const;

    int begin_marker() const { return dims_.prompt_vocab; }

    // Scales the bag-of-words context term; 0 makes prompts independent of x.
    double bow_scale = 1.0;

    // Maps a control-token vocab id (first token of s) to a task row.
    std::map<TokenId, int> task_of_token;
    int task_row(TokenId control_token) const;  // throws on unregistered task

    bool same_shape(const PolicyParams& other) const;

private:
    PolicyDims dims_;
    std::size_t off_task_, off_ctx_, off_prev_, off_out_, off_bias_;
    std::vector<double> flat_;
};

// One sampled prompt: tokens, their log-probabilities at the sampling
// temperature, and the mean per-step entropy.
struct PromptSample {
    std::vector<TokenId> tokens;
    std::vector<double> logprobs;
    double entropy = 0.0;
};

PromptSample sample_prompt(const PolicyParams& params, const TokenSeq& steer_input, int length,
                           double temperature, std::uint64_t seed);

// Cached forward pass at temperature 1 for a fixed prompt.
struct PolicyForward {
    int task = 0;
    std::vector<double> hidden;                // d
    std::vector<std::vector<double>> step_in;  // L x d  (h + prev embed)
    std::vector<std::vector<double>> probs;    // L x V_p
    std::vector<double> logprobs;              // L, of the given prompt tokens
    std::vector<double> entropies;             // L
    double total_logprob = 0.0;
};

PolicyForward policy_forward(const PolicyParams& params, const TokenSeq& steer_input,
                             const std::vector<TokenId>& prompt_tokens);

// Accumulates d(loss)/d(params) into grad (same layout as params.data()),
// given upstream d(loss)/d(logits_t) for every step.
void policy_backward(const PolicyParams& params, const TokenSeq& steer_input,
                     const std::vector<TokenId>& prompt_tokens, const PolicyForward& fwd,
                     const std::vector<std::vector<double>>& dlogits, std::vector<double>& grad);

// Total log pi(prompt | s) at temperature 1 and its exact gradient.
std::pair<double, std::vector<double>> logprob_and_grad(const PolicyParams& params,
                                                        const TokenSeq& steer_input,
                                                        const std::vector<TokenId>& prompt_tokens);

// Versioned text checkpoint. `comment` (if nonempty) is stored as a '#' line
// after the magic and ignored by the loader.
void save_policy(const PolicyParams& params, const std::string& path,
                 const std::string& comment = "");
PolicyParams load_policy(const std::string& path);

}  // namespace promptsteer
