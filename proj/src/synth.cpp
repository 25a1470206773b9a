#include "rlsft/synth.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "rlsft/errors.hpp"
#include "rlsft/parallel.hpp"
#include "rlsft/rng.hpp"
#include "rlsft/rollout.hpp"

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

SyntheticDataset generate(const PolicyParams& params, const QuestionBank& bank, int total,
                          double temperature, uint64_t seed, int rollout_length, int workers) {
    size_t n = bank.questions.size();
    if (n == 0) throw std::invalid_argument("generate: empty bank");
    if (total < int(n)) throw std::invalid_argument("generate: total must be >= bank size");
    size_t base = size_t(total) / n, extra = size_t(total) % n;
    std::vector<std::vector<SyntheticExample>> per_q =
        parallel_map<std::vector<SyntheticExample>>(n, workers, [&](size_t i) {
            const Question& q = bank.questions[i];
            size_t count = base + (i < extra ? 1 : 0);
            Rng rng(derive_seed(seed, "synth:" + q.id));
            int correct_token = q.choices[q.correct_index];
            std::vector<SyntheticExample> out;
            out.reserve(count);
            for (size_t k = 0; k < count; ++k) {
                Trajectory t = sample_trajectory(params, q, rollout_length, temperature, rng);
                SyntheticExample e;
                e.question_id = q.id;
                e.tokens = std::move(t.tokens);
                e.correct = e.answer() == correct_token;
                e.logp = std::accumulate(t.old_logp.begin(), t.old_logp.end(), 0.0);
                out.push_back(std::move(e));
            }
            return out;
        });
    SyntheticDataset ds;
    ds.stage = "raw";
    ds.requested = total;
    ds.seed = seed;
    ds.temperature = temperature;
    for (auto& block : per_q)
        for (auto& e : block) ds.examples.push_back(std::move(e));
    return ds;
}

SyntheticDataset retain_correct(const SyntheticDataset& raw) {
    if (raw.stage != "raw" && raw.stage != "clean")
        throw std::invalid_argument("retain_correct: stage must be raw (or clean for idempotence)");
    SyntheticDataset out = raw;
    out.stage = "clean";
    out.examples.clear();
    for (const SyntheticExample& e : raw.examples)
        if (e.correct) out.examples.push_back(e);
    if (out.examples.empty())
        throw PhaseAbort("retain_correct: no correct generations; the policy never answers "
                         "correctly on this bank");
    return out;
}

static std::map<std::string, const DifficultyRecord*> record_index(
    const std::vector<DifficultyRecord>& records) {
    std::map<std::string, const DifficultyRecord*> idx;
    for (const DifficultyRecord& r : records) idx[r.question_id] = &r;
    return idx;
}

SyntheticDataset gradient_selection(const SyntheticDataset& clean,
                                    const std::vector<DifficultyRecord>& records, double tau) {
    if (clean.stage != "clean") throw std::invalid_argument("gradient_selection: stage must be clean");
    if (!(tau > 0.0 && tau < 1.0))
        throw std::invalid_argument("gradient_selection: tau must lie in (0,1)");
    auto idx = record_index(records);

    // group example indices by question, preserving clean order
    std::vector<std::string> qid_order;
    std::map<std::string, std::vector<size_t>> by_q;
    for (size_t i = 0; i < clean.examples.size(); ++i) {
        const std::string& qid = clean.examples[i].question_id;
        auto [it, fresh] = by_q.try_emplace(qid);
        if (fresh) qid_order.push_back(qid);
        it->second.push_back(i);
    }
    for (const std::string& qid : qid_order)
        if (!idx.count(qid))
            throw std::invalid_argument("gradient_selection: no difficulty record for " + qid);

    // difficulty order: ascending (errors, question_id)
    std::stable_sort(qid_order.begin(), qid_order.end(),
                     [&](const std::string& a, const std::string& b) {
                         const DifficultyRecord *ra = idx[a], *rb = idx[b];
                         if (ra->errors != rb->errors) return ra->errors < rb->errors;
                         return a < b;
                     });

    SyntheticDataset out = clean;
    out.stage = "selected";
    out.examples.clear();
    for (const std::string& qid : qid_order) {
        const DifficultyRecord* rec = idx[qid];
        double a_q = 1.0 - rec->error_rate();
        const std::vector<size_t>& members = by_q[qid];
        if (a_q >= 1.0) continue;  // consistently correct: eliminated
        if (a_q >= tau) {
            size_t best = members[0];
            for (size_t i : members)
                if (clean.examples[i].logp > clean.examples[best].logp) best = i;
            out.examples.push_back(clean.examples[best]);
        } else {
            for (size_t i : members) out.examples.push_back(clean.examples[i]);
        }
    }
    return out;
}

SyntheticDataset assign_weights(const SyntheticDataset& selected,
                                const std::vector<DifficultyRecord>& records, double alpha) {
    if (selected.stage != "selected")
        throw std::invalid_argument("assign_weights: stage must be selected");
    if (alpha < 0.0) throw std::invalid_argument("assign_weights: alpha must be >= 0");
    auto idx = record_index(records);
    SyntheticDataset out = selected;
    for (SyntheticExample& e : out.examples) {
        auto it = idx.find(e.question_id);
        if (it == idx.end())
            throw std::invalid_argument("assign_weights: no difficulty record for " + e.question_id);
        e.weight = 1.0 + alpha * it->second->error_rate();
    }
    return out;
}

void save_synth(const std::string& path, const SyntheticDataset& ds) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_synth: cannot open " + path);
    for (const SyntheticExample& e : ds.examples) {
        ordered_json j;
        j["qid"] = e.question_id;
        j["tokens"] = e.tokens;
        j["answer"] = e.answer();
        j["correct"] = e.correct;
        j["logp"] = e.logp;
        j["weight"] = e.weight;
        j["stage"] = ds.stage;
        f << j.dump() << "\n";
    }
}

SyntheticDataset load_synth(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_synth: cannot open " + path);
    SyntheticDataset ds;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        SyntheticExample e;
        e.question_id = j.at("qid").get<std::string>();
        e.tokens = j.at("tokens").get<std::vector<int>>();
        e.correct = j.at("correct").get<bool>();
        e.logp = j.at("logp").get<double>();
        e.weight = j.at("weight").get<double>();
        ds.stage = j.at("stage").get<std::string>();
        ds.examples.push_back(std::move(e));
    }
    if (ds.examples.empty()) throw std::runtime_error("load_synth: " + path + " is empty");
    return ds;
}

}  // namespace rlsft
