#include "promptsteer/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

#include "promptsteer/errors.hpp"
#include "promptsteer/rng.hpp"

namespace promptsteer {

PolicyParams::PolicyParams(PolicyDims dims) : dims_(dims) {
    if (dims.num_tasks < 1 || dims.embed_dim < 1 || dims.prompt_vocab < 1 || dims.vocab < 1)
        throw std::invalid_argument("policy: all dimensions must be >= 1");
    if (dims.prompt_vocab > dims.vocab)
        throw std::invalid_argument("policy: prompt vocab larger than vocab");
    std::size_t nt = static_cast<std::size_t>(dims.num_tasks);
    std::size_t d = static_cast<std::size_t>(dims.embed_dim);
    std::size_t vp = static_cast<std::size_t>(dims.prompt_vocab);
    std::size_t v = static_cast<std::size_t>(dims.vocab);
    off_task_ = 0;
    off_ctx_ = off_task_ + nt * d;
    off_prev_ = off_ctx_ + d * v;
    off_out_ = off_prev_ + (vp + 1) * d;
    off_bias_ = off_out_ + vp * d;
    flat_.assign(off_bias_ + vp, 0.0);
}

PolicyParams PolicyParams::random_init(PolicyDims dims, std::uint64_t seed, double scale) {
    PolicyParams p(dims);
    Rng rng(mix_seed(seed, 0x706f6c69637900ULL));
    for (double& w : p.flat_) w = scale * (2.0 * rng.uniform() - 1.0);
    return p;
}

double* PolicyParams::task_embed(int task) {
    return flat_.data() + off_task_ + static_cast<std::size_t>(task) * dims_.embed_dim;
}
const double* PolicyParams::task_embed(int task) const {
    return flat_.data() + off_task_ + static_cast<std::size_t>(task) * dims_.embed_dim;
}
double* PolicyParams::ctx_proj_row(int k) {
    return flat_.data() + off_ctx_ + static_cast<std::size_t>(k) * dims_.vocab;
}
const double* PolicyParams::ctx_proj_row(int k) const {
    return flat_.data() + off_ctx_ + static_cast<std::size_t>(k) * dims_.vocab;
}
double* PolicyParams::prev_embed(int prev) {
    return flat_.data() + off_prev_ + static_cast<std::size_t>(prev) * dims_.embed_dim;
}
const double* PolicyParams::prev_embed(int prev) const {
    return flat_.data() + off_prev_ + static_cast<std::size_t>(prev) * dims_.embed_dim;
}
double* PolicyParams::out_proj_row(int j) {
    return flat_.data() + off_out_ + static_cast<std::size_t>(j) * dims_.embed_dim;
}
const double* PolicyParams::out_proj_row(int j) const {
    return flat_.data() + off_out_ + static_cast<std::size_t>(j) * dims_.embed_dim;
}
double* PolicyParams::out_bias() { return flat_.data() + off_bias_; }
const double* PolicyParams::out_bias() const { return flat_.data() + off_bias_; }

int PolicyParams::task_row(TokenId control_token) const {
    auto it = task_of_token.find(control_token);
    if (it == task_of_token.end())
        throw std::invalid_argument("policy: unregistered task token id " +
                                    std::to_string(control_token));
    return it->second;
}

bool PolicyParams::same_shape(const PolicyParams& other) const {
    return dims_.num_tasks == other.dims_.num_tasks && dims_.embed_dim == other.dims_.embed_dim &&
           dims_.prompt_vocab == other.dims_.prompt_vocab && dims_.vocab == other.dims_.vocab;
}

namespace {

// Bag-of-words weights of s[1:], normalized by max(1, len(s)-1).
std::vector<std::pair<TokenId, double>> bow_weights(const TokenSeq& steer_input) {
    std::map<TokenId, double> counts;
    for (std::size_t i = 1; i < steer_input.size(); ++i) counts[steer_input[i]] += 1.0;
    double denom = std::max<double>(1.0, static_cast<double>(steer_input.size()) - 1.0);
    std::vector<std::pair<TokenId, double>> out(counts.begin(), counts.end());
    for (auto& [tok, w] : out) w /= denom;
    return out;
}

std::vector<double> hidden_state(const PolicyParams& params, const TokenSeq& steer_input,
                                 int task) {
    int d = params.dims().embed_dim;
    std::vector<double> h(params.task_embed(task), params.task_embed(task) + d);
    if (params.bow_scale != 0.0) {
        for (const auto& [tok, w] : bow_weights(steer_input)) {
            double scaled = params.bow_scale * w;
            for (int k = 0; k < d; ++k) h[static_cast<std::size_t>(k)] +=
                scaled * params.ctx_proj_row(k)[tok];
        }
    }
    return h;
}

void step_logits(const PolicyParams& params, const std::vector<double>& h, int prev,
                 std::vector<double>& input, std::vector<double>& logits) {
    int d = params.dims().embed_dim;
    int vp = params.dims().prompt_vocab;
    const double* pe = params.prev_embed(prev);
    input.resize(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) input[static_cast<std::size_t>(k)] = h[static_cast<std::size_t>(k)] + pe[k];
    logits.resize(static_cast<std::size_t>(vp));
    const double* bias = params.out_bias();
    for (int j = 0; j < vp; ++j) {
        const double* row = params.out_proj_row(j);
        double z = bias[j];
        for (int k = 0; k < d; ++k) z += row[k] * input[static_cast<std::size_t>(k)];
        logits[static_cast<std::size_t>(j)] = z;
    }
}

// softmax(logits / temperature) with max subtraction; returns probs and the
// log normalizer so log-probabilities are exact.
void softmax_at(const std::vector<double>& logits, double temperature,
                std::vector<double>& probs, double& max_z, double& log_norm) {
    std::size_t n = logits.size();
    max_z = -std::numeric_limits<double>::infinity();
    for (double z : logits) max_z = std::max(max_z, z);
    probs.resize(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        probs[j] = std::exp((logits[j] - max_z) / temperature);
        sum += probs[j];
    }
    for (std::size_t j = 0; j < n; ++j) probs[j] /= sum;
    log_norm = std::log(sum);
}

double entropy_of(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

}  // namespace

PromptSample sample_prompt(const PolicyParams& params, const TokenSeq& steer_input, int length,
                           double temperature, std::uint64_t seed) {
    if (length < 1) throw std::invalid_argument("sample_prompt: length must be >= 1");
    if (!(temperature > 0.0))
        throw std::invalid_argument("sample_prompt: temperature must be > 0");
    if (steer_input.empty())
        throw std::invalid_argument("sample_prompt: steer input is empty");
    int task = params.task_row(steer_input.front());

    Rng rng(mix_seed(seed, 0x70726f6d7074ULL));
    std::vector<double> h = hidden_state(params, steer_input, task);
    std::vector<double> input, logits, probs;
    PromptSample sample;
    sample.tokens.reserve(static_cast<std::size_t>(length));
    sample.logprobs.reserve(static_cast<std::size_t>(length));
    double entropy_sum = 0.0;
    int prev = params.begin_marker();
    for (int t = 0; t < length; ++t) {
        step_logits(params, h, prev, input, logits);
        double max_z, log_norm;
        softmax_at(logits, temperature, probs, max_z, log_norm);
        double u = rng.uniform();
        std::size_t pick = probs.size() - 1;
        double acc = 0.0;
        for (std::size_t j = 0; j < probs.size(); ++j) {
            acc += probs[j];
            if (u < acc) {
                pick = j;
                break;
            }
        }
        sample.tokens.push_back(static_cast<TokenId>(pick));
        sample.logprobs.push_back((logits[pick] - max_z) / temperature - log_norm);
        entropy_sum += entropy_of(probs);
        prev = static_cast<int>(pick);
    }
    sample.entropy = entropy_sum / static_cast<double>(length);
    return sample;
}

PolicyForward policy_forward(const PolicyParams& params, const TokenSeq& steer_input,
                             const std::vector<TokenId>& prompt_tokens) {
    if (steer_input.empty())
        throw std::invalid_argument("policy_forward: steer input is empty");
    PolicyForward fwd;
    fwd.task = params.task_row(steer_input.front());
    fwd.hidden = hidden_state(params, steer_input, fwd.task);
    std::vector<double> logits;
    int prev = params.begin_marker();
    for (TokenId tok : prompt_tokens) {
        if (tok < 0 || tok >= params.dims().prompt_vocab)
            throw std::invalid_argument("policy_forward: prompt token outside prompt vocab");
        std::vector<double> input;
        step_logits(params, fwd.hidden, prev, input, logits);
        double max_z, log_norm;
        std::vector<double> probs;
        softmax_at(logits, 1.0, probs, max_z, log_norm);
        double lp = logits[static_cast<std::size_t>(tok)] - max_z - log_norm;
        fwd.step_in.push_back(std::move(input));
        fwd.entropies.push_back(entropy_of(probs));
        fwd.probs.push_back(std::move(probs));
        fwd.logprobs.push_back(lp);
        fwd.total_logprob += lp;
        prev = static_cast<int>(tok);
    }
    return fwd;
}

void policy_backward(const PolicyParams& params, const TokenSeq& steer_input,
                     const std::vector<TokenId>& prompt_tokens, const PolicyForward& fwd,
                     const std::vector<std::vector<double>>& dlogits, std::vector<double>& grad) {
    if (grad.size() != params.data().size())
        throw std::invalid_argument("policy_backward: grad buffer has wrong size");
    if (dlogits.size() != prompt_tokens.size())
        throw std::invalid_argument("policy_backward: one dlogits vector per step required");

    int d = params.dims().embed_dim;
    int vp = params.dims().prompt_vocab;
    std::size_t nt = static_cast<std::size_t>(params.dims().num_tasks);
    std::size_t dd = static_cast<std::size_t>(d);
    std::size_t v = static_cast<std::size_t>(params.dims().vocab);
    std::size_t off_task = 0;
    std::size_t off_ctx = off_task + nt * dd;
    std::size_t off_prev = off_ctx + dd * v;
    std::size_t off_out = off_prev + (static_cast<std::size_t>(vp) + 1) * dd;
    std::size_t off_bias = off_out + static_cast<std::size_t>(vp) * dd;

    std::vector<double> dh(dd, 0.0);
    int prev = params.begin_marker();
    for (std::size_t t = 0; t < prompt_tokens.size(); ++t) {
        const std::vector<double>& dz = dlogits[t];
        const std::vector<double>& input = fwd.step_in[t];
        std::vector<double> dinput(dd, 0.0);
        for (int j = 0; j < vp; ++j) {
            double g = dz[static_cast<std::size_t>(j)];
            if (g == 0.0) continue;
            grad[off_bias + static_cast<std::size_t>(j)] += g;
            const double* row = params.out_proj_row(j);
            double* grow = grad.data() + off_out + static_cast<std::size_t>(j) * dd;
            for (int k = 0; k < d; ++k) {
                grow[k] += g * input[static_cast<std::size_t>(k)];
                dinput[static_cast<std::size_t>(k)] += g * row[k];
            }
        }
        double* gprev = grad.data() + off_prev + static_cast<std::size_t>(prev) * dd;
        for (int k = 0; k < d; ++k) {
            gprev[k] += dinput[static_cast<std::size_t>(k)];
            dh[static_cast<std::size_t>(k)] += dinput[static_cast<std::size_t>(k)];
        }
        prev = static_cast<int>(prompt_tokens[t]);
    }

    double* gtask = grad.data() + off_task + static_cast<std::size_t>(fwd.task) * dd;
    for (int k = 0; k < d; ++k) gtask[k] += dh[static_cast<std::size_t>(k)];
    if (params.bow_scale != 0.0) {
        for (const auto& [tok, w] : bow_weights(steer_input)) {
            double scaled = params.bow_scale * w;
            for (int k = 0; k < d; ++k)
                grad[off_ctx + static_cast<std::size_t>(k) * v + static_cast<std::size_t>(tok)] +=
                    scaled * dh[static_cast<std::size_t>(k)];
        }
    }
}

std::pair<double, std::vector<double>> logprob_and_grad(
    const PolicyParams& params, const TokenSeq& steer_input,
    const std::vector<TokenId>& prompt_tokens) {
    PolicyForward fwd = policy_forward(params, steer_input, prompt_tokens);
    std::vector<std::vector<double>> dlogits(prompt_tokens.size());
    for (std::size_t t = 0; t < prompt_tokens.size(); ++t) {
        dlogits[t] = fwd.probs[t];
        for (double& p : dlogits[t]) p = -p;
        dlogits[t][static_cast<std::size_t>(prompt_tokens[t])] += 1.0;
    }
    std::vector<double> grad(params.data().size(), 0.0);
    policy_backward(params, steer_input, prompt_tokens, fwd, dlogits, grad);
    return {fwd.total_logprob, std::move(grad)};
}

void save_policy(const PolicyParams& params, const std::string& path,
                 const std::string& comment) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint: " + path);
    const auto& dims = params.dims();
    out << "promptsteer-policy v1\n";
    if (!comment.empty())
        out << (comment[0] == '#' ? "" : "# ") << comment << '\n';
    out << dims.num_tasks << ' ' << dims.embed_dim << ' ' << dims.prompt_vocab << ' '
        << dims.vocab << '\n';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", params.bow_scale);
    out << buf << '\n';
    out << params.task_of_token.size() << '\n';
    for (const auto& [tok, row] : params.task_of_token) out << tok << ' ' << row << '\n';
    out << params.data().size() << '\n';
    for (std::size_t i = 0; i < params.data().size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", params.data()[i]);
        out << buf << (i + 1 == params.data().size() ? '\n' : ' ');
    }
    if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

PolicyParams load_policy(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError(path);
    std::string magic, version;
    in >> magic >> version;
    if (magic != "promptsteer-policy" || version != "v1")
        throw ConfigError("checkpoint " + path + ": unsupported format '" + magic + " " +
                          version + "'");
    in >> std::ws;
    while (in.peek() == '#') {
        std::string comment;
        std::getline(in, comment);
        in >> std::ws;
    }
    PolicyDims dims;
    in >> dims.num_tasks >> dims.embed_dim >> dims.prompt_vocab >> dims.vocab;
    PolicyParams params(dims);
    in >> params.bow_scale;
    std::size_t map_size = 0;
    in >> map_size;
    for (std::size_t i = 0; i < map_size; ++i) {
        TokenId tok;
        int row;
        in >> tok >> row;
        params.task_of_token.emplace(tok, row);
    }
    std::size_t n = 0;
    in >> n;
    if (n != params.data().size())
        throw ConfigError("checkpoint " + path + ": parameter count mismatch");
    for (std::size_t i = 0; i < n; ++i) in >> params.data()[i];
    if (!in) throw ConfigError("checkpoint " + path + ": truncated");
    return params;
}

}  // namespace promptsteer
