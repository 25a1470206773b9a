#include "rlsft/dapo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlsft/parallel.hpp"

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

static void validate_clip(const ClipConfig& c) {
    if (!(c.eps_low > 0.0 && c.eps_low < 1.0 && c.eps_high >= c.eps_low))
        throw std::invalid_argument("ClipConfig: need 0 < eps_low < 1 and eps_high >= eps_low");
}

AdvantageGroup group_advantage(const std::vector<double>& rewards) {
    size_t n = rewards.size();
    if (n < 2) throw std::invalid_argument("group_advantage: group size must be >= 2");
    AdvantageGroup g;
    g.rewards = rewards;
    g.advantages.assign(n, 0.0);
    double lo = *std::min_element(rewards.begin(), rewards.end());
    double hi = *std::max_element(rewards.begin(), rewards.end());
    if (lo == hi) {
        g.degenerate = true;
        return g;
    }
    double range = hi - lo;
    std::vector<double> u(n);
    for (size_t i = 0; i < n; ++i) u[i] = (rewards[i] - lo) / range;
    double mean = 0.0;
    for (double x : u) mean += x;
    mean /= double(n);
    double var = 0.0;
    for (double x : u) var += (x - mean) * (x - mean);
    var /= double(n);
    double sd = std::sqrt(var);
    for (size_t i = 0; i < n; ++i) g.advantages[i] = (u[i] - mean) / sd;
    return g;
}

std::vector<RolloutGroup> dynamic_filter(const std::vector<RolloutGroup>& groups) {
    std::vector<RolloutGroup> out;
    for (const RolloutGroup& g : groups) {
        bool varies = false;
        for (size_t i = 1; i < g.trajectories.size(); ++i)
            if (g.trajectories[i].reward != g.trajectories[0].reward) {
                varies = true;
                break;
            }
        if (varies) out.push_back(g);
    }
    return out;
}

double clipped_surrogate_term(double ratio, double advantage, const ClipConfig& clip) {
    if (ratio <= 0.0) throw std::invalid_argument("clipped_surrogate_term: ratio must be > 0");
    validate_clip(clip);
    double clamped = std::clamp(ratio, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
    return std::min(ratio * advantage, clamped * advantage);
}

std::pair<double, std::vector<double>> surrogate_objective(const PolicyParams& params,
                                                           const std::vector<RolloutGroup>& groups,
                                                           const QuestionBank& bank,
                                                           const RlConfig& cfg,
                                                           double* clip_frac_out) {
    validate_clip(cfg.clip);
    if (cfg.temperature <= 0.0) throw std::invalid_argument("surrogate_objective: temperature");
    size_t total_tokens = 0;
    for (const RolloutGroup& g : groups)
        for (const Trajectory& t : g.trajectories) total_tokens += t.tokens.size();
    std::vector<double> grad(params.param_count(), 0.0);
    double obj = 0.0;
    size_t clipped = 0;
    for (const RolloutGroup& g : groups) {
        std::vector<double> rewards;
        rewards.reserve(g.trajectories.size());
        for (const Trajectory& t : g.trajectories) rewards.push_back(t.reward);
        AdvantageGroup adv = group_advantage(rewards);
        if (adv.degenerate) continue;  // zero advantages: no objective or gradient mass
        const Question& q = bank.by_id(g.question_id);
        for (size_t i = 0; i < g.trajectories.size(); ++i) {
            const Trajectory& t = g.trajectories[i];
            double a = adv.advantages[i];
            std::vector<double> new_lp =
                sequence_logprob(params, q.prompt_tokens, t.tokens, cfg.temperature);
            if (new_lp.size() != t.old_logp.size())
                throw std::invalid_argument("surrogate_objective: stale old_logp length");
            std::vector<double> coeffs(new_lp.size(), 0.0);
            bool any = false;
            for (size_t k = 0; k < new_lp.size(); ++k) {
                double ratio = std::exp(new_lp[k] - t.old_logp[k]);
                double unclipped = ratio * a;
                double clamped =
                    std::clamp(ratio, 1.0 - cfg.clip.eps_low, 1.0 + cfg.clip.eps_high) * a;
                if (unclipped <= clamped) {
                    obj += unclipped;
                    coeffs[k] = a * ratio;
                    any = true;
                } else {
                    obj += clamped;  // constant in params: zero gradient
                    ++clipped;
                }
            }
            if (any) {
                std::vector<double> gt =
                    grad_sequence_logprob(params, q.prompt_tokens, t.tokens, coeffs, cfg.temperature);
                for (size_t j = 0; j < grad.size(); ++j) grad[j] += gt[j];
            }
        }
    }
    if (total_tokens > 0) {
        obj /= double(total_tokens);
        for (double& x : grad) x /= double(total_tokens);
    }
    if (clip_frac_out)
        *clip_frac_out = total_tokens > 0 ? double(clipped) / double(total_tokens) : 0.0;
    return {obj, std::move(grad)};
}

std::pair<PolicyParams, StepMetrics> rl_step(const PolicyParams& params,
                                             const std::vector<RolloutGroup>& batch,
                                             const QuestionBank& bank,
                                             const RewardConfig& reward_cfg, const RlConfig& cfg,
                                             AdamState& opt) {
    if (batch.empty()) throw std::invalid_argument("rl_step: empty batch");
    std::vector<RolloutGroup> scored = batch;
    double sum = 0.0, sumsq = 0.0;
    size_t n = 0;
    for (RolloutGroup& g : scored) {
        const Question& q = bank.by_id(g.question_id);
        for (Trajectory& t : g.trajectories) {
            t.reward = score(t, q, reward_cfg);
            sum += t.reward;
            sumsq += t.reward * t.reward;
            ++n;
        }
    }
    StepMetrics m;
    m.reward_mean = sum / double(n);
    m.reward_std = std::sqrt(std::max(0.0, sumsq / double(n) - m.reward_mean * m.reward_mean));
    m.rollout_len = scored.front().trajectories.front().rollout_length;
    std::vector<RolloutGroup> retained = dynamic_filter(scored);
    m.dropped_groups = int(scored.size() - retained.size());
    if (retained.empty()) {
        m.skipped = true;
        return {params, m};
    }
    auto [obj, grad] = surrogate_objective(params, retained, bank, cfg, &m.clip_frac);
    m.surrogate = obj;
    PolicyParams out = params;
    std::vector<double> flat = out.flat();
    opt.ascend(flat, grad);
    out.set_flat(flat);
    return {std::move(out), m};
}

static void validate_rl(const RlConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("RlConfig: learning rate must be > 0");
    if (cfg.epochs < 1) throw std::invalid_argument("RlConfig: epochs must be >= 1");
    if (cfg.escalation < 1.0) throw std::invalid_argument("RlConfig: escalation must be >= 1");
    if (cfg.group_size < 2) throw std::invalid_argument("RlConfig: group size must be >= 2");
    if (cfg.temperature <= 0.0) throw std::invalid_argument("RlConfig: temperature must be > 0");
    if (cfg.batch_questions < 1) throw std::invalid_argument("RlConfig: batch_questions must be >= 1");
    if (cfg.inner_epochs < 1) throw std::invalid_argument("RlConfig: inner_epochs must be >= 1");
    validate_clip(cfg.clip);
}

PolicyParams train_rl(const PolicyParams& params, const CurriculumDataset& curriculum,
                      const QuestionBank& bank, const RlConfig& cfg, MetricsSink& sink,
                      int workers, const RewardConfig& reward_cfg) {
    validate_rl(cfg);
    if (curriculum.records.empty()) {
        ordered_json w;
        w["event"] = "warning";
        w["message"] = "empty curriculum; parameters returned unchanged";
        sink.emit(w);
        return params;
    }
    int num_phases = int(curriculum.phase_bounds.size());
    if (num_phases == 0) num_phases = 1;
    LengthSchedule sched = cfg.schedule;
    sched.total_phases = num_phases;
    std::vector<std::vector<std::string>> slices =
        phase_slices(curriculum, std::min<int>(num_phases, int(curriculum.records.size())));

    PolicyParams cur = params;
    AdamState opt(cur.param_count(), cfg.learning_rate);
    int step = 0;
    for (int p = 0; p < int(slices.size()); ++p) {
        int len = schedule_length(sched, p);
        // rint: round-to-nearest, ties to even (4.5 -> 4)
        long long epochs_p = std::llrint(cfg.epochs * std::pow(cfg.escalation, double(p)));
        if (epochs_p < 1) epochs_p = 1;
        std::vector<std::string> qids;
        if (cfg.accumulate_phases) {
            for (int s = 0; s <= p; ++s) qids.insert(qids.end(), slices[s].begin(), slices[s].end());
        } else {
            qids = slices[p];
        }
        for (long long e = 0; e < epochs_p; ++e) {
            std::vector<std::string> order = qids;
            Rng shuf(derive_seed(cfg.seed,
                                 "order:ph" + std::to_string(p) + ":ep" + std::to_string(e)));
            shuf.shuffle(order);
            for (size_t at = 0; at < order.size(); at += size_t(cfg.batch_questions)) {
                size_t hi = std::min(order.size(), at + size_t(cfg.batch_questions));
                std::vector<std::string> batch_ids(order.begin() + at, order.begin() + hi);
                std::vector<RolloutGroup> groups = parallel_map<RolloutGroup>(
                    batch_ids.size(), workers, [&](size_t i) {
                        const Question& q = bank.by_id(batch_ids[i]);
                        Rng rng(derive_seed(cfg.seed, "collect:ph" + std::to_string(p) + ":ep" +
                                                          std::to_string(e) + ":" + q.id));
                        return collect_group(cur, q, cfg.group_size, len, cfg.temperature, rng);
                    });
                for (int inner = 0; inner < cfg.inner_epochs; ++inner) {
                    auto [next, m] = rl_step(cur, groups, bank, reward_cfg, cfg, opt);
                    cur = std::move(next);
                    ordered_json ev;
                    ev["phase"] = p;
                    ev["step"] = step;
                    ev["reward_mean"] = m.reward_mean;
                    ev["reward_std"] = m.reward_std;
                    ev["surrogate"] = m.surrogate;
                    ev["clip_frac"] = m.clip_frac;
                    ev["dropped_groups"] = m.dropped_groups;
                    ev["rollout_len"] = m.rollout_len;
                    sink.emit(ev);
                    ++step;
                }
            }
        }
    }
    return cur;
}

}  // namespace rlsft
