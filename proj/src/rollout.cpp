#include "rlsft/rollout.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

int schedule_length(const LengthSchedule& schedule, int phase_index) {
    if (schedule.start_length < 1 || schedule.start_length > schedule.end_length ||
        schedule.total_phases < 1)
        throw std::invalid_argument("schedule_length: invalid schedule");
    if (phase_index < 0 || phase_index >= schedule.total_phases)
        throw std::out_of_range("schedule_length: phase out of range");
    if (schedule.total_phases == 1) return schedule.end_length;
    double frac = double(phase_index) / double(schedule.total_phases - 1);
    return schedule.start_length +
           int(std::lround(frac * (schedule.end_length - schedule.start_length)));
}

static int pick_choice(const PolicyParams& params, const std::vector<int>& ctx,
                       const std::vector<int>& choices, double temperature, Rng& rng) {
    if (temperature == 0.0) {
        std::vector<double> z = logits(params, ctx);
        int best = 0;
        for (size_t i = 1; i < choices.size(); ++i)
            if (z[choices[i]] > z[choices[best]]) best = int(i);
        return choices[best];
    }
    TokenDistribution dist = forward(params, ctx, temperature);
    double mass = 0.0;
    for (int c : choices) mass += dist.probs[c];
    double u = rng.next_double() * mass;
    double acc = 0.0;
    for (int c : choices) {
        acc += dist.probs[c];
        if (u < acc) return c;
    }
    return choices.back();
}

Trajectory sample_trajectory(const PolicyParams& params, const Question& question, int length,
                             double temperature, Rng& rng) {
    if (length < 1) throw std::invalid_argument("sample_trajectory: length < 1");
    Trajectory t;
    t.question_id = question.id;
    t.rollout_length = length;
    std::vector<int> ctx = question.prompt_tokens;
    for (int s = 0; s + 1 < length; ++s) {
        int tok;
        if (temperature == 0.0) {
            tok = argmax_lowest(logits(params, ctx));
        } else {
            TokenDistribution dist = forward(params, ctx, temperature);
            double u = rng.next_double();
            double acc = 0.0;
            tok = int(dist.probs.size()) - 1;
            for (size_t i = 0; i < dist.probs.size(); ++i) {
                acc += dist.probs[i];
                if (u < acc) {
                    tok = int(i);
                    break;
                }
            }
        }
        t.tokens.push_back(tok);
        ctx.push_back(tok);
    }
    t.tokens.push_back(pick_choice(params, ctx, question.choices, temperature, rng));
    double lp_temp = temperature == 0.0 ? 1.0 : temperature;
    t.old_logp = sequence_logprob(params, question.prompt_tokens, t.tokens, lp_temp);
    return t;
}

RolloutGroup collect_group(const PolicyParams& params, const Question& question, int group_size,
                           int length, double temperature, Rng& rng) {
    if (group_size < 2) throw std::invalid_argument("collect_group: group size must be >= 2");
    if (temperature <= 0.0) throw std::invalid_argument("collect_group: temperature must be > 0");
    RolloutGroup g;
    g.question_id = question.id;
    g.trajectories.reserve(group_size);
    for (int i = 0; i < group_size; ++i)
        g.trajectories.push_back(sample_trajectory(params, question, length, temperature, rng));
    return g;
}

void append_trajectory_jsonl(std::ostream& os, const Trajectory& t) {
    ordered_json j;
    j["qid"] = t.question_id;
    j["tokens"] = t.tokens;
    j["old_logp"] = t.old_logp;
    j["reward"] = t.reward;
    j["len"] = t.rollout_length;
    os << j.dump() << "\n";
}

std::vector<Trajectory> load_trajectories_jsonl(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_trajectories_jsonl: cannot open " + path);
    std::vector<Trajectory> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        ordered_json j = ordered_json::parse(line);
        Trajectory t;
        t.question_id = j.at("qid").get<std::string>();
        t.tokens = j.at("tokens").get<std::vector<int>>();
        t.old_logp = j.at("old_logp").get<std::vector<double>>();
        t.reward = j.at("reward").get<double>();
        t.rollout_length = j.at("len").get<int>();
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace rlsft
