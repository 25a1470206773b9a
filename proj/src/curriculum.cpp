#include "rlsft/curriculum.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "rlsft/errors.hpp"
#include "rlsft/parallel.hpp"
#include "rlsft/rng.hpp"
#include "rlsft/rollout.hpp"

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

std::vector<DifficultyRecord> measure_difficulty(const PolicyParams& params,
                                                 const QuestionBank& bank, int attempts,
                                                 double temperature, uint64_t seed,
                                                 int rollout_length, int workers) {
    if (attempts < 1) throw std::invalid_argument("measure_difficulty: attempts must be >= 1");
    if (rollout_length < 1) throw std::invalid_argument("measure_difficulty: bad rollout length");
    return parallel_map<DifficultyRecord>(bank.questions.size(), workers, [&](size_t i) {
        const Question& q = bank.questions[i];
        Rng rng(derive_seed(seed, "profile:" + q.id));
        int correct_token = q.choices[q.correct_index];
        DifficultyRecord rec;
        rec.question_id = q.id;
        rec.attempts = attempts;
        for (int a = 0; a < attempts; ++a) {
            Trajectory t = sample_trajectory(params, q, rollout_length, temperature, rng);
            if (t.answer() != correct_token) ++rec.errors;
        }
        return rec;
    });
}

static std::vector<std::pair<size_t, size_t>> slice_bounds(size_t n, int num_phases) {
    std::vector<std::pair<size_t, size_t>> bounds;
    size_t base = n / num_phases, rem = n % num_phases;
    size_t at = 0;
    for (int p = 0; p < num_phases; ++p) {
        size_t len = base + (size_t(p) < rem ? 1 : 0);  // remainder to the front
        bounds.emplace_back(at, at + len);
        at += len;
    }
    return bounds;
}

CurriculumDataset difficulty_filter(const std::vector<DifficultyRecord>& records,
                                    int threshold, int num_phases) {
    if (records.empty()) throw PhaseAbort("difficulty_filter: no difficulty records to filter");
    if (num_phases < 1) throw std::invalid_argument("difficulty_filter: num_phases < 1");
    CurriculumDataset c;
    for (const DifficultyRecord& r : records)
        if (r.errors > threshold) c.records.push_back(r);
    if (c.records.empty())
        throw PhaseAbort("difficulty_filter: every question is at or below the error threshold; "
                         "the policy already saturates this bank");
    std::stable_sort(c.records.begin(), c.records.end(),
                     [](const DifficultyRecord& a, const DifficultyRecord& b) {
                         if (a.errors != b.errors) return a.errors < b.errors;
                         return a.question_id < b.question_id;
                     });
    int phases = std::min<int>(num_phases, int(c.records.size()));
    c.phase_bounds = slice_bounds(c.records.size(), phases);
    return c;
}

std::vector<std::vector<std::string>> phase_slices(const CurriculumDataset& curriculum,
                                                   int num_phases) {
    size_t n = curriculum.records.size();
    if (num_phases < 1 || size_t(num_phases) > n)
        throw std::out_of_range("phase_slices: num_phases out of range");
    std::vector<std::vector<std::string>> out;
    for (auto [b, e] : slice_bounds(n, num_phases)) {
        std::vector<std::string> ids;
        for (size_t i = b; i < e; ++i) ids.push_back(curriculum.records[i].question_id);
        out.push_back(std::move(ids));
    }
    return out;
}

void save_curriculum(const std::string& path, const CurriculumDataset& c) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_curriculum: cannot open " + path);
    for (const DifficultyRecord& r : c.records) {
        ordered_json j;
        j["qid"] = r.question_id;
        j["attempts"] = r.attempts;
        j["errors"] = r.errors;
        f << j.dump() << "\n";
    }
}

CurriculumDataset load_curriculum(const std::string& path, int num_phases) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_curriculum: cannot open " + path);
    CurriculumDataset c;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        DifficultyRecord r;
        r.question_id = j.at("qid").get<std::string>();
        r.attempts = j.at("attempts").get<int>();
        r.errors = j.at("errors").get<int>();
        c.records.push_back(std::move(r));
    }
    if (c.records.empty()) throw std::runtime_error("load_curriculum: " + path + " is empty");
    int phases = std::min<int>(num_phases, int(c.records.size()));
    c.phase_bounds = slice_bounds(c.records.size(), phases);
    return c;
}

}  // namespace rlsft
