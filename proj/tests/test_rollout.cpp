#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "rlsft/rollout.hpp"

using namespace rlsft;
namespace fs = std::filesystem;

static Question make_question() {
    Question q;
    q.id = "q0001";
    q.prompt_tokens = {9, 5, 9, 12};
    q.choices = {0, 1, 2, 3};
    q.correct_index = 2;
    return q;
}

TEST_CASE("schedule_length reproduces the documented ramp") {
    LengthSchedule s{5, 8, 4};
    std::vector<int> got;
    for (int p = 0; p < 4; ++p) got.push_back(schedule_length(s, p));
    CHECK(got == std::vector<int>{5, 6, 7, 8});

    LengthSchedule one{5, 8, 1};
    CHECK(schedule_length(one, 0) == 8);

    LengthSchedule two{3, 10, 2};
    CHECK(schedule_length(two, 0) == 3);
    CHECK(schedule_length(two, 1) == 10);

    LengthSchedule many{5, 8, 7};
    int prev = 0;
    for (int p = 0; p < 7; ++p) {
        int len = schedule_length(many, p);
        CHECK(len >= prev);
        prev = len;
    }
    CHECK(schedule_length(many, 0) == 5);
    CHECK(schedule_length(many, 6) == 8);
}

TEST_CASE("schedule_length rejects bad inputs") {
    CHECK_THROWS_AS(schedule_length(LengthSchedule{5, 8, 4}, -1), std::exception);
    CHECK_THROWS_AS(schedule_length(LengthSchedule{5, 8, 4}, 4), std::exception);
    CHECK_THROWS_AS(schedule_length(LengthSchedule{0, 8, 4}, 0), std::exception);
    CHECK_THROWS_AS(schedule_length(LengthSchedule{8, 5, 4}, 0), std::exception);
}

TEST_CASE("sample_trajectory: exact length, final token is a choice") {
    PolicyParams p = init_params(16, 6, 3);
    Question q = make_question();
    for (int len : {1, 4, 8}) {
        Rng rng(100 + len);
        Trajectory t = sample_trajectory(p, q, len, 1.0, rng);
        CHECK(t.question_id == q.id);
        REQUIRE(int(t.tokens.size()) == len);
        REQUIRE(t.old_logp.size() == t.tokens.size());
        CHECK(t.rollout_length == len);
        CHECK(std::count(q.choices.begin(), q.choices.end(), t.answer()) == 1);
        for (int tok : t.tokens) {
            CHECK(tok >= 0);
            CHECK(tok < 16);
        }
        for (double lp : t.old_logp) CHECK(lp <= 0.0);
    }
}

TEST_CASE("old_logp is the unconstrained teacher-forced log-prob") {
    PolicyParams p = init_params(16, 6, 4);
    Question q = make_question();
    Rng rng(7);
    Trajectory t = sample_trajectory(p, q, 5, 0.8, rng);
    std::vector<double> ref = sequence_logprob(p, q.prompt_tokens, t.tokens, 0.8);
    REQUIRE(ref.size() == t.old_logp.size());
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(t.old_logp[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("greedy sampling is deterministic and argmaxes over choices at the end") {
    PolicyParams p = init_params(16, 6, 5);
    Question q = make_question();
    Rng r1(1), r2(2);
    Trajectory a = sample_trajectory(p, q, 4, 0.0, r1);
    Trajectory b = sample_trajectory(p, q, 4, 0.0, r2);
    CHECK(a.tokens == b.tokens);  // rng must not matter at temperature 0

    // Final token: argmax over the choice tokens of the full-vocab distribution.
    std::vector<int> ctx = q.prompt_tokens;
    ctx.insert(ctx.end(), a.tokens.begin(), a.tokens.end() - 1);
    TokenDistribution d = forward(p, ctx, 1.0);
    int best = q.choices[0];
    for (int c : q.choices)
        if (d.probs[c] > d.probs[best]) best = c;
    CHECK(a.answer() == best);

    // old_logp at temperature 0 is recorded at temperature 1.0.
    std::vector<double> ref = sequence_logprob(p, q.prompt_tokens, a.tokens, 1.0);
    for (size_t i = 0; i < ref.size(); ++i)
        CHECK(a.old_logp[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("constrained final step explores every choice under sampling") {
    PolicyParams p = init_params(16, 6, 6);
    Question q = make_question();
    Rng rng(11);
    std::set<int> answers;
    for (int i = 0; i < 400; ++i) answers.insert(sample_trajectory(p, q, 2, 1.5, rng).answer());
    CHECK(answers.size() == q.choices.size());  // near-uniform init covers all four
}

TEST_CASE("collect_group yields G trajectories for one question") {
    PolicyParams p = init_params(16, 6, 8);
    Question q = make_question();
    Rng rng(3);
    RolloutGroup g = collect_group(p, q, 8, 5, 1.0, rng);
    CHECK(g.question_id == q.id);
    REQUIRE(g.group_size() == 8);
    for (const Trajectory& t : g.trajectories) {
        CHECK(t.question_id == q.id);
        CHECK(int(t.tokens.size()) == 5);
    }
    Rng r2(3);
    RolloutGroup g2 = collect_group(p, q, 8, 5, 1.0, r2);
    for (int i = 0; i < 8; ++i) CHECK(g.trajectories[i].tokens == g2.trajectories[i].tokens);

    CHECK_THROWS_AS(collect_group(p, q, 1, 5, 1.0, rng), std::exception);
    CHECK_THROWS_AS(collect_group(p, q, 8, 5, 0.0, rng), std::exception);
}

TEST_CASE("trajectory jsonl round-trips") {
    PolicyParams p = init_params(16, 6, 9);
    Question q = make_question();
    Rng rng(4);
    Trajectory t1 = sample_trajectory(p, q, 5, 1.0, rng);
    t1.reward = 1.0;
    Trajectory t2 = sample_trajectory(p, q, 5, 1.0, rng);
    t2.reward = 0.0;

    fs::path path = fs::temp_directory_path() / "rlsft-rollout-traj.jsonl";
    {
        std::ofstream f(path, std::ios::trunc);
        append_trajectory_jsonl(f, t1);
        append_trajectory_jsonl(f, t2);
    }
    std::vector<Trajectory> back = load_trajectories_jsonl(path.string());
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        const Trajectory& a = i == 0 ? t1 : t2;
        CHECK(back[i].question_id == a.question_id);
        CHECK(back[i].tokens == a.tokens);
        CHECK(back[i].reward == a.reward);
        CHECK(back[i].rollout_length == a.rollout_length);
        REQUIRE(back[i].old_logp.size() == a.old_logp.size());
        for (size_t j = 0; j < a.old_logp.size(); ++j)
            CHECK(back[i].old_logp[j] == a.old_logp[j]);
    }
}
