#pragma once

#include <functional>
#include <string>

#include "rlsft/qbank.hpp"
#include "rlsft/rollout.hpp"

namespace rlsft {

struct RewardConfig {
    std::string scorer = "exact_match";
    double shift = 0.0;
    double scale = 1.0;
};

// Plugin seam for richer scorers (the learned pedagogical reward model is out
// of scope; exact_match is the default and only built-in).
using ScorerFn = std::function<double(const Trajectory&, const Question&)>;
void register_scorer(const std::string& name, ScorerFn fn);

double score(const Trajectory& t, const Question& q, const RewardConfig& cfg);

}  // namespace rlsft
