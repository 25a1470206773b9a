#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rlsft/curriculum.hpp"
#include "rlsft/metrics.hpp"
#include "rlsft/optim.hpp"
#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/reward.hpp"
#include "rlsft/rollout.hpp"

namespace rlsft {

struct ClipConfig {
    double eps_low = 0.2;
    double eps_high = 0.28;  // clip-higher: wider upward band
};

struct AdvantageGroup {
    std::vector<double> rewards;
    std::vector<double> advantages;
    bool degenerate = false;  // zero reward variance; advantages all zero
};

struct RlConfig {
    double learning_rate = 1e-2;
    int epochs = 8;              // E_RL for the first curriculum phase
    double escalation = 1.5;     // phase p trains rint(epochs * escalation^p) epochs
    int group_size = 8;
    ClipConfig clip;
    LengthSchedule schedule;
    double temperature = 1.0;
    int batch_questions = 16;    // questions collected per optimizer step
    int inner_epochs = 1;        // extra passes over a collected batch (ratios drift, clipping bites)
    bool accumulate_phases = false;  // replay earlier phases' questions inside later phases
    uint64_t seed = 0;
};

struct StepMetrics {
    double reward_mean = 0.0;
    double reward_std = 0.0;
    double surrogate = 0.0;
    double clip_frac = 0.0;
    int dropped_groups = 0;
    int rollout_len = 0;
    bool skipped = false;  // every group degenerate; params untouched
};

// Group-relative advantages. Rewards are range-normalized to [0,1] before the
// mean/population-std standardization: mathematically a no-op (affine maps
// cancel), but it makes shift/scale invariance bit-exact because the
// normalized vector is computed from differences of stored values only.
AdvantageGroup group_advantage(const std::vector<double>& rewards);

// Keeps exactly the groups whose reward variance is nonzero, order preserved.
std::vector<RolloutGroup> dynamic_filter(const std::vector<RolloutGroup>& groups);

// min(ratio*A, clamp(ratio, 1-eps_low, 1+eps_high)*A), to be maximized.
double clipped_surrogate_term(double ratio, double advantage, const ClipConfig& clip);

// Token-level mean of the clipped surrogate over every trajectory of every
// group (rewards must be populated), plus its analytic gradient. Groups are
// assumed pre-filtered; degenerate ones contribute zero terms but still count
// tokens. clip_frac_out receives the fraction of tokens where the clipped
// branch is strictly active.
std::pair<double, std::vector<double>> surrogate_objective(const PolicyParams& params,
                                                           const std::vector<RolloutGroup>& groups,
                                                           const QuestionBank& bank,
                                                           const RlConfig& cfg,
                                                           double* clip_frac_out = nullptr);

// Scores rewards, filters degenerate groups, ascends the clipped surrogate by
// one optimizer step. A batch that filters to nothing is a skip, not an error.
std::pair<PolicyParams, StepMetrics> rl_step(const PolicyParams& params,
                                             const std::vector<RolloutGroup>& batch,
                                             const QuestionBank& bank,
                                             const RewardConfig& reward_cfg, const RlConfig& cfg,
                                             AdamState& opt);

// Curriculum-ordered DAPO training (Phases 1 and 3). Phase p uses
// schedule_length(p) and rint(epochs * escalation^p) epochs; each epoch
// shuffles the phase's questions and walks them in batches of batch_questions,
// one collection + inner_epochs updates per batch. Deterministic in cfg.seed
// and independent of worker count.
PolicyParams train_rl(const PolicyParams& params, const CurriculumDataset& curriculum,
                      const QuestionBank& bank, const RlConfig& cfg, MetricsSink& sink,
                      int workers = 1, const RewardConfig& reward_cfg = RewardConfig{});

}  // namespace rlsft
