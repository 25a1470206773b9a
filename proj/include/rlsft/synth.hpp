#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlsft/curriculum.hpp"
#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"

namespace rlsft {

struct SyntheticExample {
    std::string question_id;
    std::vector<int> tokens;  // generated response; last token is the answer
    bool correct = false;
    double logp = 0.0;        // sequence log-likelihood under the generating policy
    double weight = 1.0;

    int answer() const { return tokens.back(); }
};

struct SyntheticDataset {
    std::string stage = "raw";  // raw | clean | selected
    std::vector<SyntheticExample> examples;
    // generation metadata
    int requested = 0;
    uint64_t seed = 0;
    double temperature = 0.0;
};

// Spreads `total` generations across the bank round-robin (the first
// total mod |bank| questions get one extra), sampling at the configured
// temperature and rollout length. logp is recorded at the sampling
// temperature (at temperature 0, at 1.0 — see sample_trajectory).
SyntheticDataset generate(const PolicyParams& params, const QuestionBank& bank, int total,
                          double temperature, uint64_t seed, int rollout_length, int workers = 1);

// Keeps exactly the correct examples, order preserved. Throws PhaseAbort when
// nothing survives (the policy never answers correctly).
SyntheticDataset retain_correct(const SyntheticDataset& raw);

// Per question with baseline accuracy a_q = 1 - error_rate:
//   a_q = 1        -> drop every example (answered correctly consistently)
//   tau <= a_q < 1 -> keep one representative: max logp, earliest on ties
//   a_q < tau      -> keep all
// Output ascends by difficulty (errors, then question id); within a question
// the clean order is preserved.
SyntheticDataset gradient_selection(const SyntheticDataset& clean,
                                    const std::vector<DifficultyRecord>& records, double tau);

// weight = 1 + alpha * error_rate(question).
SyntheticDataset assign_weights(const SyntheticDataset& selected,
                                const std::vector<DifficultyRecord>& records, double alpha);

void save_synth(const std::string& path, const SyntheticDataset& ds);
SyntheticDataset load_synth(const std::string& path);

}  // namespace rlsft
