#include "rlsft/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rlsft/dapo.hpp"
#include "rlsft/errors.hpp"
#include "rlsft/eval.hpp"
#include "rlsft/rng.hpp"
#include "rlsft/sft.hpp"

namespace rlsft {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

PipelineEnv prepare_bank(const PipelineConfig& cfg) {
    PipelineEnv env;
    if (!cfg.bank_file.empty())
        env.bank = load_bank(cfg.bank_file);
    else
        env.bank = generate_synthetic_bank(make_bank_spec(cfg));
    auto [train, holdout] = split_bank(env.bank, cfg.holdout_fraction, cfg.master_seed);
    env.train = std::move(train);
    env.holdout = std::move(holdout);
    return env;
}

PolicyParams init_policy(const PipelineConfig& cfg, int vocab_size) {
    return init_params(vocab_size, cfg.hidden_dim, derive_seed(cfg.master_seed, "init"));
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("file_hash_hex: cannot open " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", (unsigned long long)fnv1a64(buf.str()));
    return out;
}

void write_manifest(const std::string& path, const RunManifest& m) {
    ordered_json j;
    j["config"] = m.config;  // std::map: keys land sorted
    j["bank_id"] = m.bank_id;
    j["curriculum_hash"] = m.curriculum_hash;
    ordered_json stages = ordered_json::array();
    for (const StageRecord& s : m.stages) {
        ordered_json r;
        r["stage"] = s.stage;
        if (s.skipped) {
            r["skipped"] = true;
        } else {
            r["checkpoint"] = s.checkpoint;
            r["accuracy"] = s.accuracy;
            r["wall_ms"] = s.wall_ms;
        }
        stages.push_back(r);
    }
    j["phases"] = stages;
    if (m.aborted_stage.empty()) {
        j["aborted"] = nullptr;
    } else {
        ordered_json a;
        a["stage"] = m.aborted_stage;
        a["error"] = m.abort_message;
        j["aborted"] = a;
    }
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("write_manifest: cannot open " + path);
    f << j.dump(2) << "\n";
}

static std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.outdir) / name).string();
}

std::pair<PolicyParams, CurriculumDataset> run_phase1(const PipelineConfig& cfg,
                                                      const PipelineEnv& env,
                                                      const PolicyParams& theta0,
                                                      MetricsSink& sink) {
    std::vector<DifficultyRecord> records =
        measure_difficulty(theta0, env.train, cfg.profile_attempts, cfg.profile_temperature,
                           derive_seed(cfg.master_seed, "profile1"), cfg.rl_len_end, cfg.workers);
    CurriculumDataset curriculum = difficulty_filter(records, 0, cfg.rl_phases);
    save_curriculum(out_path(cfg, "curriculum.jsonl"), curriculum);
    PolicyParams rl1 =
        train_rl(theta0, curriculum, env.train, make_rl_config(cfg, derive_seed(cfg.master_seed, "rl1")),
                 sink, cfg.workers, make_reward_config(cfg));
    save_checkpoint(out_path(cfg, "ckpt-rl1.bin"), rl1, "rl1");
    return {std::move(rl1), std::move(curriculum)};
}

SyntheticDataset fallback_least_confident(const SyntheticDataset& clean, int k) {
    std::vector<size_t> reps;
    std::vector<std::string> seen;
    for (size_t i = 0; i < clean.examples.size(); ++i) {
        const std::string& qid = clean.examples[i].question_id;
        auto it = std::find(seen.begin(), seen.end(), qid);
        if (it == seen.end()) {
            seen.push_back(qid);
            reps.push_back(i);
        } else {
            size_t& best = reps[size_t(it - seen.begin())];
            if (clean.examples[i].logp > clean.examples[best].logp) best = i;
        }
    }
    std::stable_sort(reps.begin(), reps.end(), [&](size_t a, size_t b) {
        if (clean.examples[a].logp != clean.examples[b].logp)
            return clean.examples[a].logp < clean.examples[b].logp;
        return clean.examples[a].question_id < clean.examples[b].question_id;
    });
    if (int(reps.size()) > k) reps.resize(size_t(k));
    SyntheticDataset out = clean;
    out.stage = "selected";
    out.examples.clear();
    for (size_t i : reps) out.examples.push_back(clean.examples[i]);
    return out;
}

PolicyParams run_phase2(const PipelineConfig& cfg, const PipelineEnv& env,
                        const PolicyParams& theta_rl1, const CurriculumDataset& curriculum,
                        MetricsSink& sink) {
    (void)curriculum;  // Phase 2 generates across the full train split, not just the hard set
    SyntheticDataset raw =
        generate(theta_rl1, env.train, cfg.synth_n, cfg.synth_temperature,
                 derive_seed(cfg.master_seed, "synthgen"), cfg.rl_len_end, cfg.workers);
    save_synth(out_path(cfg, "synth-raw.jsonl"), raw);
    SyntheticDataset clean = retain_correct(raw);  // PhaseAbort when empty
    save_synth(out_path(cfg, "synth-clean.jsonl"), clean);

    // Selection baselines come from re-profiling theta_RL1: gradient_selection
    // requires a record for every clean question, and the phase-1 profile
    // (taken under theta0) no longer reflects what this policy finds hard.
    std::vector<DifficultyRecord> records =
        measure_difficulty(theta_rl1, env.train, cfg.profile_attempts, cfg.profile_temperature,
                           derive_seed(cfg.master_seed, "profile2"), cfg.rl_len_end, cfg.workers);
    SyntheticDataset selected = gradient_selection(clean, records, cfg.select_tau);
    if (selected.examples.empty()) {
        if (cfg.select_fallback_k <= 0)
            throw PhaseAbort("run_phase2: selection is empty (policy mastered every question) "
                             "and select_fallback_k disables the fallback");
        selected = fallback_least_confident(clean, cfg.select_fallback_k);
    }
    SyntheticDataset weighted = assign_weights(selected, records, cfg.select_alpha);
    save_synth(out_path(cfg, "synth-selected.jsonl"), weighted);

    PolicyParams sft_params =
        train_sft(theta_rl1, weighted, env.train, env.holdout,
                  make_sft_config(cfg, derive_seed(cfg.master_seed, "sft")), sink, cfg.workers);
    save_checkpoint(out_path(cfg, "ckpt-sft.bin"), sft_params, "sft");
    return sft_params;
}

PolicyParams run_phase3(const PipelineConfig& cfg, const PipelineEnv& env,
                        const PolicyParams& theta_sft,
                        const std::string& expected_curriculum_hash, MetricsSink& sink) {
    std::string path = out_path(cfg, "curriculum.jsonl");
    if (!fs::exists(path)) throw PhaseAbort("run_phase3: missing curriculum file " + path);
    std::string hash = file_hash_hex(path);
    if (!expected_curriculum_hash.empty() && hash != expected_curriculum_hash)
        throw PhaseAbort("run_phase3: curriculum file hash " + hash +
                         " does not match the Phase-1 hash " + expected_curriculum_hash);
    CurriculumDataset curriculum = load_curriculum(path, cfg.rl_phases);
    PolicyParams rl2 =
        train_rl(theta_sft, curriculum, env.train, make_rl_config(cfg, derive_seed(cfg.master_seed, "rl2")),
                 sink, cfg.workers, make_reward_config(cfg));
    save_checkpoint(out_path(cfg, "ckpt-rl2.bin"), rl2, "rl2");
    return rl2;
}

RunManifest run_all(const PipelineConfig& cfg) {
    validate_config(cfg);
    fs::create_directories(cfg.outdir);
    PipelineEnv env = prepare_bank(cfg);
    JsonlMetricsSink sink(out_path(cfg, "metrics.jsonl"));

    RunManifest man;
    man.config = config_snapshot(cfg);
    man.bank_id = bank_fingerprint(env.bank);

    DecodeMode greedy;
    greedy.rollout_length = cfg.rl_len_end;
    using clock = std::chrono::steady_clock;
    auto record = [&](const std::string& stage, const PolicyParams& params,
                      const std::string& ckpt, double wall_ms) {
        StageRecord r;
        r.stage = stage;
        r.checkpoint = ckpt;
        r.accuracy = evaluate(params, env.holdout, greedy, cfg.workers).accuracy_percent;
        r.wall_ms = wall_ms;
        man.stages.push_back(r);
    };

    std::string current_stage = "base";
    try {
        auto t0 = clock::now();
        PolicyParams theta0 = init_policy(cfg, env.bank.vocab_size);
        save_checkpoint(out_path(cfg, "ckpt-base.bin"), theta0, "base");
        record("base", theta0, "ckpt-base.bin",
               std::chrono::duration<double, std::milli>(clock::now() - t0).count());

        current_stage = "rl1";
        auto t1 = clock::now();
        auto [rl1, curriculum] = run_phase1(cfg, env, theta0, sink);
        man.curriculum_hash = file_hash_hex(out_path(cfg, "curriculum.jsonl"));
        record("rl1", rl1, "ckpt-rl1.bin",
               std::chrono::duration<double, std::milli>(clock::now() - t1).count());

        current_stage = "sft";
        auto t2 = clock::now();
        PolicyParams sft_params = run_phase2(cfg, env, rl1, curriculum, sink);
        record("sft", sft_params, "ckpt-sft.bin",
               std::chrono::duration<double, std::milli>(clock::now() - t2).count());

        current_stage = "rl2";
        if (cfg.run_phase3) {
            auto t3 = clock::now();
            PolicyParams rl2 = run_phase3(cfg, env, sft_params, man.curriculum_hash, sink);
            record("rl2", rl2, "ckpt-rl2.bin",
                   std::chrono::duration<double, std::milli>(clock::now() - t3).count());
        } else {
            StageRecord r;
            r.stage = "rl2";
            r.skipped = true;
            man.stages.push_back(r);
        }
    } catch (const PhaseAbort& e) {
        man.aborted_stage = current_stage;
        man.abort_message = e.what();
        write_manifest(out_path(cfg, "manifest.json"), man);
        throw;
    }
    write_manifest(out_path(cfg, "manifest.json"), man);
    return man;
}

}  // namespace rlsft
