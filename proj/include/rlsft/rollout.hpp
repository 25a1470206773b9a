#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/rng.hpp"

namespace rlsft {

struct Trajectory {
    std::string question_id;
    std::vector<int> tokens;       // generated tokens; last one is the answer
    std::vector<double> old_logp;  // behavior-policy per-token log-probs
    double reward = 0.0;           // filled by the reward module
    int rollout_length = 0;        // the length budget L used at collection

    int answer() const { return tokens.back(); }
};

struct RolloutGroup {
    std::string question_id;
    std::vector<Trajectory> trajectories;

    int group_size() const { return int(trajectories.size()); }
};

struct LengthSchedule {
    int start_length = 5;
    int end_length = 8;
    int total_phases = 4;
};

// Piecewise-constant non-decreasing interpolation; phase 0 -> start, last
// phase -> end ([5,6,7,8] for the defaults). A single phase uses end_length.
int schedule_length(const LengthSchedule& schedule, int phase_index);

// Sample one trajectory of exactly `length` tokens. Free steps draw from the
// full vocabulary; the final step is restricted to the question's choice
// tokens and renormalized, so the last token is always a parseable answer.
// temperature 0 is greedy (argmax, lowest index first on ties). old_logp holds
// the *unconstrained* teacher-forced log-probs of the emitted tokens, taken at
// the sampling temperature (at temperature 0 they are recorded at 1.0, the
// distribution the greedy decode argmaxes over).
Trajectory sample_trajectory(const PolicyParams& params, const Question& question, int length,
                             double temperature, Rng& rng);

RolloutGroup collect_group(const PolicyParams& params, const Question& question, int group_size,
                           int length, double temperature, Rng& rng);

void append_trajectory_jsonl(std::ostream& os, const Trajectory& t);
std::vector<Trajectory> load_trajectories_jsonl(const std::string& path);

}  // namespace rlsft
