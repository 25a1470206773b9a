#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "rlsft/dapo.hpp"
#include "rlsft/errors.hpp"

using namespace rlsft;
using nlohmann::ordered_json;

static QuestionBank small_bank(int n = 12, uint64_t seed = 21) {
    SynthBankSpec spec;
    spec.num_questions = n;
    spec.seed = seed;
    return generate_synthetic_bank(spec);
}

static Trajectory manual_traj(const PolicyParams& p, const Question& q, std::vector<int> tokens,
                              double temp = 1.0) {
    Trajectory t;
    t.question_id = q.id;
    t.tokens = std::move(tokens);
    t.old_logp = sequence_logprob(p, q.prompt_tokens, t.tokens, temp);
    t.rollout_length = int(t.tokens.size());
    return t;
}

TEST_CASE("group_advantage reproduces the binary-reward oracles") {
    AdvantageGroup g1 = group_advantage({1.0, 0.0});
    CHECK_FALSE(g1.degenerate);
    CHECK(g1.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g1.advantages[1] == doctest::Approx(-1.0).epsilon(1e-12));

    AdvantageGroup g2 = group_advantage({1.0, 1.0, 0.0, 0.0});
    CHECK(g2.advantages[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g2.advantages[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g2.advantages[2] == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(g2.advantages[3] == doctest::Approx(-1.0).epsilon(1e-12));

    AdvantageGroup g3 = group_advantage({1.0, 0.0, 0.0, 0.0});
    CHECK(g3.advantages[0] == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
    CHECK(g3.advantages[1] == doctest::Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("uniform rewards are degenerate with zero advantages") {
    for (std::vector<double> r : {std::vector<double>{1, 1, 1, 1}, {0, 0}, {0.5, 0.5, 0.5}}) {
        AdvantageGroup g = group_advantage(r);
        CHECK(g.degenerate);
        for (double a : g.advantages) CHECK(a == 0.0);
    }
    CHECK_THROWS_AS(group_advantage({1.0}), std::invalid_argument);
}

TEST_CASE("advantages are standardized: mean 0, population std 1") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + rng.uniform_int(7);
        std::vector<double> r(n);
        for (double& x : r) x = rng.uniform_real(-3.0, 3.0);
        AdvantageGroup g = group_advantage(r);
        if (g.degenerate) continue;
        double mean = std::accumulate(g.advantages.begin(), g.advantages.end(), 0.0) / n;
        double var = 0.0;
        for (double a : g.advantages) var += (a - mean) * (a - mean);
        var /= n;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("advantages are bit-exactly invariant to reward shift and scale") {
    Rng rng(32);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + rng.uniform_int(6);
        std::vector<double> r(n);
        for (double& x : r) x = rng.uniform_int(2);  // binary, the training case
        double a = rng.uniform_real(0.25, 4.0);
        double b = rng.uniform_real(-5.0, 5.0);
        std::vector<double> r2(n);
        for (int i = 0; i < n; ++i) r2[i] = a * r[i] + b;
        AdvantageGroup g1 = group_advantage(r);
        AdvantageGroup g2 = group_advantage(r2);
        CHECK(g1.degenerate == g2.degenerate);
        for (int i = 0; i < n; ++i) CHECK(g1.advantages[i] == g2.advantages[i]);  // bitwise
    }
}

TEST_CASE("clipped_surrogate_term matches the worked examples") {
    ClipConfig clip;  // (0.2, 0.28)
    CHECK(clipped_surrogate_term(1.0, 2.0, clip) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(clipped_surrogate_term(1.5, 1.0, clip) == doctest::Approx(1.28).epsilon(1e-12));
    CHECK(clipped_surrogate_term(0.5, -1.0, clip) == doctest::Approx(-0.8).epsilon(1e-12));
    CHECK(clipped_surrogate_term(0.7, 1.0, clip) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(clipped_surrogate_term(1.5, -1.0, clip) == doctest::Approx(-1.5).epsilon(1e-12));
    CHECK(clipped_surrogate_term(1.0, 0.0, clip) == 0.0);
}

TEST_CASE("clipped_surrogate_term validates ratio and clip band") {
    ClipConfig clip;
    CHECK_THROWS_AS(clipped_surrogate_term(0.0, 1.0, clip), std::invalid_argument);
    CHECK_THROWS_AS(clipped_surrogate_term(-0.5, 1.0, clip), std::invalid_argument);
    ClipConfig bad1{1.0, 1.2};
    CHECK_THROWS_AS(clipped_surrogate_term(1.0, 1.0, bad1), std::invalid_argument);
    ClipConfig bad2{0.3, 0.1};
    CHECK_THROWS_AS(clipped_surrogate_term(1.0, 1.0, bad2), std::invalid_argument);
}

TEST_CASE("clipped_surrogate_term is pessimistic and matches the closed form") {
    ClipConfig clip{0.2, 0.28};
    Rng rng(33);
    for (int trial = 0; trial < 1000; ++trial) {
        double ratio = rng.uniform_real(0.01, 3.0);
        double adv = rng.uniform_real(-2.0, 2.0);
        double term = clipped_surrogate_term(ratio, adv, clip);
        CHECK(term <= ratio * adv + 1e-15);
        double ref = adv >= 0.0 ? adv * std::min(ratio, 1.0 + clip.eps_high)
                                : adv * std::max(ratio, 1.0 - clip.eps_low);
        CHECK(term == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("dynamic_filter keeps exactly the mixed-reward groups, in order") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 1);
    auto make_group = [&](const Question& q, std::vector<int> answers) {
        RolloutGroup g;
        g.question_id = q.id;
        for (int a : answers) {
            Trajectory t = manual_traj(p, q, {10, a});
            t.reward = (a == q.choices[q.correct_index]) ? 1.0 : 0.0;
            g.trajectories.push_back(t);
        }
        return g;
    };
    const Question& q0 = bank.questions[0];
    const Question& q1 = bank.questions[1];
    const Question& q2 = bank.questions[2];
    int right0 = q0.choices[q0.correct_index];
    int wrong0 = q0.choices[(q0.correct_index + 1) % 4];
    int right1 = q1.choices[q1.correct_index];
    int wrong2 = q2.choices[(q2.correct_index + 1) % 4];

    std::vector<RolloutGroup> groups;
    groups.push_back(make_group(q0, {right0, wrong0}));   // mixed: keep
    groups.push_back(make_group(q1, {right1, right1}));   // all correct: drop
    groups.push_back(make_group(q2, {wrong2, wrong2}));   // all wrong: drop
    groups.push_back(make_group(q0, {wrong0, right0}));   // mixed: keep

    std::vector<RolloutGroup> kept = dynamic_filter(groups);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].trajectories[0].reward == 1.0);
    CHECK(kept[1].trajectories[0].reward == 0.0);
}

TEST_CASE("surrogate is exactly zero at ratio one and its gradient checks out") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 44);
    const Question& q = bank.questions[3];
    int right = q.choices[q.correct_index];
    int wrong = q.choices[(q.correct_index + 1) % 4];

    RolloutGroup g;
    g.question_id = q.id;
    for (int a : {right, wrong, wrong, right}) {
        Trajectory t = manual_traj(p, q, {20, 30, a});
        t.reward = (a == right) ? 1.0 : 0.0;
        g.trajectories.push_back(t);
    }
    RlConfig cfg;
    double clip_frac = -1.0;
    auto [obj, grad] = surrogate_objective(p, {g}, bank, cfg, &clip_frac);
    CHECK(std::abs(obj) < 1e-12);  // equal lengths, advantages sum to zero
    CHECK(clip_frac == 0.0);
    REQUIRE(grad.size() == p.param_count());

    // Directional derivative along the gradient itself.
    double gnorm2 = 0.0;
    for (double x : grad) gnorm2 += x * x;
    REQUIRE(gnorm2 > 0.0);
    double h = 1e-6;
    std::vector<double> flat = p.flat();
    PolicyParams plus(p.vocab, p.d), minus(p.vocab, p.d);
    std::vector<double> fplus = flat, fminus = flat;
    for (size_t i = 0; i < flat.size(); ++i) {
        fplus[i] += h * grad[i];
        fminus[i] -= h * grad[i];
    }
    plus.set_flat(fplus);
    minus.set_flat(fminus);
    double op = surrogate_objective(plus, {g}, bank, cfg).first;
    double om = surrogate_objective(minus, {g}, bank, cfg).first;
    double numeric = (op - om) / (2 * h);
    CHECK(numeric == doctest::Approx(gnorm2).epsilon(1e-4));
}

TEST_CASE("token-level mean divides by every retained token") {
    // Two groups with different trajectory lengths; recompute the objective by hand.
    QuestionBank bank = small_bank();
    PolicyParams sampler = init_params(bank.vocab_size, 8, 45);
    PolicyParams current = init_params(bank.vocab_size, 8, 46);  // ratios != 1
    const Question& qa = bank.questions[0];
    const Question& qb = bank.questions[1];
    int ra = qa.choices[qa.correct_index], wa = qa.choices[(qa.correct_index + 1) % 4];
    int rb = qb.choices[qb.correct_index], wb = qb.choices[(qb.correct_index + 2) % 4];

    auto mk = [&](const Question& q, std::vector<int> toks, double reward) {
        Trajectory t = manual_traj(sampler, q, std::move(toks));
        t.reward = reward;
        return t;
    };
    RolloutGroup g1, g2;
    g1.question_id = qa.id;
    g1.trajectories = {mk(qa, {30, ra}, 1.0), mk(qa, {31, wa}, 0.0)};
    g2.question_id = qb.id;
    g2.trajectories = {mk(qb, {25, 26, 27, rb}, 1.0), mk(qb, {25, 28, 29, wb}, 0.0)};

    RlConfig cfg;
    auto [obj, grad] = surrogate_objective(current, {g1, g2}, bank, cfg);

    double expect = 0.0;
    size_t tokens = 0;
    for (const RolloutGroup* g : {&g1, &g2}) {
        AdvantageGroup adv = group_advantage(
            {g->trajectories[0].reward, g->trajectories[1].reward});
        for (size_t i = 0; i < g->trajectories.size(); ++i) {
            const Trajectory& t = g->trajectories[i];
            const Question& q = bank.by_id(t.question_id);
            std::vector<double> lp = sequence_logprob(current, q.prompt_tokens, t.tokens, 1.0);
            for (size_t k = 0; k < t.tokens.size(); ++k) {
                double ratio = std::exp(lp[k] - t.old_logp[k]);
                expect += clipped_surrogate_term(ratio, adv.advantages[i], cfg.clip);
                ++tokens;
            }
        }
    }
    expect /= double(tokens);
    CHECK(obj == doctest::Approx(expect).epsilon(1e-12));
    CHECK(grad.size() == current.param_count());
}

TEST_CASE("rl_step: all-degenerate batches are skipped without touching params") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 47);
    const Question& q = bank.questions[5];
    int right = q.choices[q.correct_index];
    RolloutGroup g;
    g.question_id = q.id;
    for (int i = 0; i < 4; ++i) g.trajectories.push_back(manual_traj(p, q, {12, right}));

    RlConfig cfg;
    AdamState opt(p.param_count(), cfg.learning_rate);
    auto [next, metrics] = rl_step(p, {g}, bank, RewardConfig{}, cfg, opt);
    CHECK(metrics.skipped);
    CHECK(metrics.dropped_groups == 1);
    CHECK(metrics.reward_mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(metrics.reward_std == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(next.flat() == p.flat());  // bitwise unchanged
}

TEST_CASE("rl_step reports reward stats over all trajectories pre-filter") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 48);
    const Question& qa = bank.questions[0];
    const Question& qb = bank.questions[1];
    int ra = qa.choices[qa.correct_index], wa = qa.choices[(qa.correct_index + 1) % 4];
    int wb = qb.choices[(qb.correct_index + 1) % 4];

    RolloutGroup mixed;  // rewards 1,0,0,0
    mixed.question_id = qa.id;
    for (int a : {ra, wa, wa, wa}) mixed.trajectories.push_back(manual_traj(p, qa, {15, a}));
    RolloutGroup flat;  // rewards 0,0,0,0 -> dropped
    flat.question_id = qb.id;
    for (int i = 0; i < 4; ++i) flat.trajectories.push_back(manual_traj(p, qb, {16, wb}));

    RlConfig cfg;
    AdamState opt(p.param_count(), cfg.learning_rate);
    auto [next, metrics] = rl_step(p, {mixed, flat}, bank, RewardConfig{}, cfg, opt);
    CHECK_FALSE(metrics.skipped);
    CHECK(metrics.dropped_groups == 1);
    CHECK(metrics.reward_mean == doctest::Approx(0.125).epsilon(1e-12));
    CHECK(metrics.reward_std == doctest::Approx(std::sqrt(0.125 * 0.875)).epsilon(1e-12));
    CHECK(next.flat() != p.flat());  // the optimizer moved
}

static CurriculumDataset three_phase_curriculum(const QuestionBank& bank) {
    std::vector<DifficultyRecord> recs;
    recs.push_back({bank.questions[0].id, 30, 5});
    recs.push_back({bank.questions[1].id, 30, 10});
    recs.push_back({bank.questions[2].id, 30, 20});
    return difficulty_filter(recs, 0, 3);
}

TEST_CASE("train_rl escalates epochs per phase: base 2, factor 1.5 -> 2,3,4") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 49);
    CurriculumDataset cur = three_phase_curriculum(bank);
    REQUIRE(cur.phase_bounds.size() == 3);

    RlConfig cfg;
    cfg.epochs = 2;
    cfg.escalation = 1.5;
    cfg.group_size = 4;
    cfg.schedule = {2, 3, 3};
    cfg.seed = 77;
    MemoryMetricsSink sink;
    train_rl(p, cur, bank, cfg, sink);

    std::map<int, int> per_phase;
    int prev_step = -1;
    for (const auto& ev : sink.events) {
        REQUIRE(ev.contains("phase"));
        REQUIRE(ev["phase"].is_number_integer());
        ++per_phase[ev["phase"].get<int>()];
        int step = ev["step"].get<int>();
        CHECK(step == prev_step + 1);
        prev_step = step;
    }
    // One question per phase, batch_questions 16 -> one step per epoch;
    // 2 * 1.5^2 = 4.5 rounds to 4 (ties to even).
    CHECK(per_phase[0] == 2);
    CHECK(per_phase[1] == 3);
    CHECK(per_phase[2] == 4);
    CHECK(sink.events.size() == 9);
}

TEST_CASE("train_rl emits the pinned metrics schema") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 50);
    CurriculumDataset cur = three_phase_curriculum(bank);
    RlConfig cfg;
    cfg.epochs = 1;
    cfg.escalation = 1.0;
    cfg.group_size = 4;
    cfg.seed = 11;
    MemoryMetricsSink sink;
    train_rl(p, cur, bank, cfg, sink);
    REQUIRE_FALSE(sink.events.empty());
    std::vector<std::string> keys;
    for (auto it = sink.events[0].begin(); it != sink.events[0].end(); ++it)
        keys.push_back(it.key());
    CHECK(keys == std::vector<std::string>{"phase", "step", "reward_mean", "reward_std",
                                           "surrogate", "clip_frac", "dropped_groups",
                                           "rollout_len"});
    CHECK(sink.events[0]["rollout_len"].get<int>() == schedule_length(cfg.schedule, 0));
}

TEST_CASE("train_rl on an empty curriculum warns and returns params unchanged") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 51);
    CurriculumDataset empty;
    RlConfig cfg;
    MemoryMetricsSink sink;
    PolicyParams out = train_rl(p, empty, bank, cfg, sink);
    CHECK(out.flat() == p.flat());
    REQUIRE(sink.events.size() == 1);
    CHECK(sink.events[0]["event"] == "warning");
    CHECK(sink.events[0].contains("message"));
}

TEST_CASE("train_rl is deterministic and independent of worker count") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 52);
    std::vector<DifficultyRecord> recs;
    for (int i = 0; i < 6; ++i) recs.push_back({bank.questions[i].id, 30, 3 + i});
    CurriculumDataset cur = difficulty_filter(recs, 0, 2);

    RlConfig cfg;
    cfg.epochs = 1;
    cfg.escalation = 1.0;
    cfg.group_size = 4;
    cfg.batch_questions = 2;
    cfg.seed = 99;

    MemoryMetricsSink s1, s3;
    PolicyParams out1 = train_rl(p, cur, bank, cfg, s1, 1);
    PolicyParams out3 = train_rl(p, cur, bank, cfg, s3, 3);
    CHECK(out1.flat() == out3.flat());  // bitwise
    REQUIRE(s1.events.size() == s3.events.size());
    for (size_t i = 0; i < s1.events.size(); ++i)
        CHECK(s1.events[i].dump() == s3.events[i].dump());
}

TEST_CASE("accumulate_phases replays earlier questions in later phases") {
    QuestionBank bank = small_bank();
    PolicyParams p = init_params(bank.vocab_size, 8, 53);
    CurriculumDataset cur = three_phase_curriculum(bank);

    RlConfig cfg;
    cfg.epochs = 1;
    cfg.escalation = 1.0;
    cfg.group_size = 4;
    cfg.batch_questions = 1;  // one question per step makes step counts visible
    cfg.seed = 5;

    MemoryMetricsSink current_only, accumulated;
    train_rl(p, cur, bank, cfg, current_only);
    cfg.accumulate_phases = true;
    train_rl(p, cur, bank, cfg, accumulated);
    // Phases see 1 / 2 / 3 questions when accumulating vs 1 / 1 / 1 otherwise.
    CHECK(current_only.events.size() == 3);
    CHECK(accumulated.events.size() == 6);
}
