#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rlsft/metrics.hpp"
#include "rlsft/optim.hpp"
#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/synth.hpp"

namespace rlsft {

struct SftConfig {
    int epochs = 3;
    double learning_rate = 1e-2;
    int micro_batch = 8;
    int accumulation_steps = 1;
    int validation_every = 10;  // optimizer steps between holdout evaluations
    int patience = 3;           // non-improving validations tolerated before stopping
    uint64_t seed = 0;
    int rollout_length = 8;     // decode budget for validation
};

// loss = weight * sum_t -log pi(token_t | prompt + tokens_<t); gradient is the
// exact analytic gradient of the loss.
std::pair<double, std::vector<double>> weighted_ce_loss(const PolicyParams& params,
                                                        const SyntheticExample& example,
                                                        const Question& question);

// One accumulated optimizer step: gradients summed over every example of every
// micro-batch, divided by the total example count. Equivalent to a single
// full-batch step. Returns (new params, mean per-example loss).
std::pair<PolicyParams, double> sft_step(const PolicyParams& params,
                                         const std::vector<std::vector<SyntheticExample>>& micro_batches,
                                         const QuestionBank& bank, const SftConfig& cfg,
                                         AdamState& opt);

// Difficulty-weighted SFT with per-epoch shuffling, periodic holdout
// validation (greedy decode), patience-based early stop, and best-checkpoint
// restore. A pre-training baseline validation seeds the best checkpoint, so a
// run that never improves returns the entry parameters. Empty holdout: fixed
// epochs, no early stop.
PolicyParams train_sft(const PolicyParams& params, const SyntheticDataset& selected,
                       const QuestionBank& bank, const QuestionBank& holdout, const SftConfig& cfg,
                       MetricsSink& sink, int workers = 1);

}  // namespace rlsft
