#include "rlsft/reward.hpp"

#include <map>
#include <stdexcept>

namespace rlsft {

static std::map<std::string, ScorerFn>& registry() {
    static std::map<std::string, ScorerFn> r;
    return r;
}

void register_scorer(const std::string& name, ScorerFn fn) {
    if (name == "exact_match") throw std::invalid_argument("register_scorer: exact_match is built in");
    registry()[name] = std::move(fn);
}

double score(const Trajectory& t, const Question& q, const RewardConfig& cfg) {
    if (t.question_id != q.id)
        throw std::invalid_argument("score: trajectory/question mismatch (" + t.question_id +
                                    " vs " + q.id + ")");
    if (cfg.scale <= 0.0) throw std::invalid_argument("score: scale must be > 0");
    double base;
    if (cfg.scorer == "exact_match") {
        base = t.answer() == q.choices[q.correct_index] ? 1.0 : 0.0;
    } else {
        auto it = registry().find(cfg.scorer);
        if (it == registry().end())
            throw std::invalid_argument("score: unknown scorer plugin \"" + cfg.scorer + "\"");
        base = it->second(t, q);
    }
    return cfg.scale * base + cfg.shift;
}

}  // namespace rlsft
