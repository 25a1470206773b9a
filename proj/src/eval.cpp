#include "rlsft/eval.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "rlsft/parallel.hpp"
#include "rlsft/rng.hpp"
#include "rlsft/rollout.hpp"

namespace rlsft {

std::string DecodeMode::describe() const {
    if (kind == "greedy") return "greedy";
    std::ostringstream os;
    os << "sampled(k=" << k << ",temp=" << temperature << ")";
    return os.str();
}

std::string bank_fingerprint(const QuestionBank& bank) {
    std::string acc;
    for (const Question& q : bank.questions) {
        acc += q.id;
        acc += '\n';
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)fnv1a64(acc));
    return buf;
}

EvalReport evaluate(const PolicyParams& params, const QuestionBank& bank, const DecodeMode& mode,
                    int workers) {
    if (bank.questions.empty()) throw std::invalid_argument("evaluate: empty bank");
    if (mode.kind != "greedy" && mode.kind != "sampled")
        throw std::invalid_argument("evaluate: unknown decode mode " + mode.kind);
    if (mode.kind == "sampled" && (mode.k < 1 || mode.temperature <= 0.0))
        throw std::invalid_argument("evaluate: sampled mode needs k >= 1 and temperature > 0");

    std::vector<char> correct = parallel_map<char>(bank.questions.size(), workers, [&](size_t i) {
        const Question& q = bank.questions[i];
        int key = q.choices[q.correct_index];
        if (mode.kind == "greedy") {
            Rng rng(0);  // unused in greedy decode
            Trajectory t = sample_trajectory(params, q, mode.rollout_length, 0.0, rng);
            return char(t.answer() == key);
        }
        Rng rng(derive_seed(mode.seed, "eval:" + q.id));
        std::map<int, int> votes;  // choice index -> count
        for (int s = 0; s < mode.k; ++s) {
            Trajectory t = sample_trajectory(params, q, mode.rollout_length, mode.temperature, rng);
            for (size_t c = 0; c < q.choices.size(); ++c)
                if (q.choices[c] == t.answer()) {
                    ++votes[int(c)];
                    break;
                }
        }
        int winner = 0, best = -1;
        for (size_t c = 0; c < q.choices.size(); ++c) {
            auto it = votes.find(int(c));
            int v = it == votes.end() ? 0 : it->second;
            if (v > best) {  // strict: lowest index wins ties
                best = v;
                winner = int(c);
            }
        }
        return char(q.choices[winner] == key);
    });

    EvalReport r;
    r.bank_id = bank_fingerprint(bank);
    r.num_questions = int(bank.questions.size());
    r.decode = mode.describe();
    for (size_t i = 0; i < bank.questions.size(); ++i) {
        r.question_ids.push_back(bank.questions[i].id);
        r.outcomes.push_back(correct[i] != 0);
        if (correct[i]) ++r.num_correct;
    }
    r.accuracy_percent = 100.0 * double(r.num_correct) / double(r.num_questions);
    return r;
}

DeltaReport compare(const EvalReport& a, const EvalReport& b) {
    if (a.bank_id != b.bank_id) throw std::invalid_argument("compare: bank mismatch");
    if (a.decode != b.decode) throw std::invalid_argument("compare: decode mode mismatch");
    DeltaReport d;
    d.delta_points = b.accuracy_percent - a.accuracy_percent;
    for (size_t i = 0; i < a.outcomes.size(); ++i) {
        if (!a.outcomes[i] && b.outcomes[i]) d.newly_correct.push_back(a.question_ids[i]);
        if (a.outcomes[i] && !b.outcomes[i]) d.newly_wrong.push_back(a.question_ids[i]);
    }
    return d;
}

nlohmann::ordered_json report_to_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["bank_id"] = r.bank_id;
    j["n"] = r.num_questions;
    j["correct"] = r.num_correct;
    j["accuracy"] = r.accuracy_percent;
    j["decode"] = r.decode;
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (size_t i = 0; i < r.question_ids.size(); ++i) {
        nlohmann::ordered_json o;
        o["qid"] = r.question_ids[i];
        o["correct"] = bool(r.outcomes[i]);
        outs.push_back(o);
    }
    j["outcomes"] = outs;
    return j;
}

}  // namespace rlsft
