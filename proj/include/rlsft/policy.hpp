#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "rlsft/rng.hpp"

namespace rlsft {

// Pooled-embedding MLP policy, f64 throughout.
//
// Forward recipe (documented so an independent oracle can recompute it):
//   h0 = mean over context tokens t of E[t, :]            (d)
//   h  = tanh(W h0 + b1)                                  (d)
//   z  = U^T h + b2                                       (vocab)
//   probs = softmax(z / temperature)
//
// Parameter flattening order (checkpoints, gradients): E row-major
// [vocab x d], then W row-major [d x d], then b1 [d], then U row-major
// [d x vocab], then b2 [vocab].
struct PolicyParams {
    int vocab = 0;
    int d = 0;
    std::vector<double> E, W, b1, U, b2;

    PolicyParams() = default;
    PolicyParams(int vocab_, int d_);

    size_t param_count() const {
        return size_t(vocab) * d + size_t(d) * d + d + size_t(d) * vocab + vocab;
    }
    std::vector<double> flat() const;
    void set_flat(const std::vector<double>& v);
};

struct TokenDistribution {
    std::vector<double> probs;
    std::vector<double> logprobs;
};

// Uniform init in [-0.08, 0.08], filled in flattening order from Rng(seed).
PolicyParams init_params(int vocab, int d, uint64_t seed);

// Pre-softmax logits z for the given context (temperature-free).
std::vector<double> logits(const PolicyParams& p, const std::vector<int>& context);

TokenDistribution forward(const PolicyParams& p, const std::vector<int>& context,
                          double temperature = 1.0);

// Samples up to max_steps tokens autoregressively. temperature 0 is greedy
// argmax with lowest-index tie-break.
std::vector<int> sample_sequence(const PolicyParams& p, const std::vector<int>& prompt,
                                 int max_steps, double temperature, Rng& rng);

// Teacher-forced per-token log-probabilities of `generated` after `prompt`.
std::vector<double> sequence_logprob(const PolicyParams& p, const std::vector<int>& prompt,
                                     const std::vector<int>& generated, double temperature);

// Analytic gradient of sum_t coeff[t] * log pi(generated[t] | context_t).
std::vector<double> grad_sequence_logprob(const PolicyParams& p, const std::vector<int>& prompt,
                                          const std::vector<int>& generated,
                                          const std::vector<double>& coeffs, double temperature);

// Central finite differences against the analytic gradient; returns the worst
// relative error with denominator max(|analytic|, |numeric|, 1e-12).
double finite_diff_check(const PolicyParams& p, const std::vector<int>& prompt,
                         const std::vector<int>& generated, const std::vector<double>& coeffs,
                         double step, double temperature = 1.0);

// Checkpoint file: "EDQW" magic, u32 version, stage tag (base|rl1|sft|rl2),
// u32 vocab, u32 d, u64 count, little-endian f64 array in flattening order.
void save_checkpoint(const std::string& path, const PolicyParams& p, const std::string& stage);
std::pair<PolicyParams, std::string> load_checkpoint(const std::string& path);

int argmax_lowest(const std::vector<double>& v);

}  // namespace rlsft
