#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"

namespace rlsft {

struct DifficultyRecord {
    std::string question_id;
    int attempts = 30;
    int errors = 0;

    double error_rate() const { return attempts > 0 ? double(errors) / attempts : 0.0; }
};

struct CurriculumDataset {
    std::vector<DifficultyRecord> records;             // ascending by (errors, question_id)
    std::vector<std::pair<size_t, size_t>> phase_bounds;  // half-open [begin, end) index ranges
};

// `attempts` constrained-answer samples per question at the given temperature
// and rollout length; per-question sub-seeds make the counts independent of
// worker count. One record per question, bank order.
std::vector<DifficultyRecord> measure_difficulty(const PolicyParams& params,
                                                 const QuestionBank& bank, int attempts,
                                                 double temperature, uint64_t seed,
                                                 int rollout_length, int workers = 1);

// Drops records with errors <= threshold, sorts survivors ascending by
// (errors, question_id), slices into num_phases contiguous phases. Throws
// PhaseAbort when nothing survives (the policy saturates the bank).
CurriculumDataset difficulty_filter(const std::vector<DifficultyRecord>& records,
                                    int threshold = 0, int num_phases = 4);

// Contiguous ascending-difficulty id slices, sizes differing by at most one,
// larger slices first.
std::vector<std::vector<std::string>> phase_slices(const CurriculumDataset& curriculum,
                                                   int num_phases);

void save_curriculum(const std::string& path, const CurriculumDataset& c);
CurriculumDataset load_curriculum(const std::string& path, int num_phases = 4);

}  // namespace rlsft
