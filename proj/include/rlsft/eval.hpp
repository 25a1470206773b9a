#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"

namespace rlsft {

struct DecodeMode {
    std::string kind = "greedy";  // greedy | sampled
    int k = 1;                    // samples per question (sampled mode)
    double temperature = 1.0;     // sampling temperature (sampled mode)
    uint64_t seed = 0;
    int rollout_length = 8;       // token budget per decode

    std::string describe() const;
};

struct EvalReport {
    std::string bank_id;  // fingerprint of the bank's question ids
    int num_questions = 0;
    int num_correct = 0;
    double accuracy_percent = 0.0;
    std::string decode;
    std::vector<std::string> question_ids;
    std::vector<bool> outcomes;  // per question, aligned with question_ids
};

struct DeltaReport {
    double delta_points = 0.0;  // b - a, percentage points
    std::vector<std::string> newly_correct;
    std::vector<std::string> newly_wrong;
};

std::string bank_fingerprint(const QuestionBank& bank);

// Greedy: one temperature-0 decode per question. Sampled: majority vote over
// k samples with lowest-choice-index tie-break.
EvalReport evaluate(const PolicyParams& params, const QuestionBank& bank, const DecodeMode& mode,
                    int workers = 1);

DeltaReport compare(const EvalReport& a, const EvalReport& b);

nlohmann::ordered_json report_to_json(const EvalReport& r);

}  // namespace rlsft
