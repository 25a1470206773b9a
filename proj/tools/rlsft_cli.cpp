#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlsft/dapo.hpp"
#include "rlsft/errors.hpp"
#include "rlsft/eval.hpp"
#include "rlsft/pipeline.hpp"
#include "rlsft/sft.hpp"

namespace fs = std::filesystem;
using namespace rlsft;

namespace {

struct CliState {
    std::string config_file;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* sub, CliState& st) {
    sub->add_option("--config", st.config_file, "flat key=value config file");
    for (const std::string& key : config_keys()) {
        sub->add_option_function<std::string>(
            "--" + key,
            [key, &st](const std::string& v) { st.overrides.emplace_back(key, v); },
            "override config key " + key);
    }
}

PipelineConfig make_config(const CliState& st) {
    PipelineConfig cfg;
    if (!st.config_file.empty()) load_config_file(cfg, st.config_file);
    apply_env_overrides(cfg);
    // profile first so later keys can override what it sets
    for (const auto& [k, v] : st.overrides)
        if (k == "profile") apply_kv(cfg, k, v);
    for (const auto& [k, v] : st.overrides)
        if (k != "profile") apply_kv(cfg, k, v);
    validate_config(cfg);
    return cfg;
}

std::string out_path(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.outdir) / name).string();
}

PolicyParams policy_from(const PipelineConfig& cfg, const PipelineEnv& env,
                         const std::string& ckpt) {
    if (ckpt.empty()) return init_policy(cfg, env.bank.vocab_size);
    return load_checkpoint(ckpt).first;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-phase RL->SFT->RL curriculum pipeline on synthetic multiple-choice banks"};
    app.require_subcommand(1);
    CliState st;
    std::function<void()> action;

    auto* genbank = app.add_subcommand("genbank", "synthesize the question bank to bank.jsonl");
    add_common(genbank, st);
    genbank->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            fs::create_directories(cfg.outdir);
            QuestionBank bank = cfg.bank_file.empty()
                                    ? generate_synthetic_bank(make_bank_spec(cfg))
                                    : load_bank(cfg.bank_file);
            std::string path = out_path(cfg, "bank.jsonl");
            save_bank(path, bank);
            std::printf("wrote %s (%zu questions, vocab %d)\n", path.c_str(), bank.size(),
                        bank.vocab_size);
        };
    });

    std::string ckpt_profile;
    auto* profile = app.add_subcommand("profile", "measure difficulty and build the curriculum");
    add_common(profile, st);
    profile->add_option("--ckpt", ckpt_profile, "policy checkpoint (default: fresh theta0)");
    profile->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            fs::create_directories(cfg.outdir);
            PipelineEnv env = prepare_bank(cfg);
            PolicyParams params = policy_from(cfg, env, ckpt_profile);
            std::vector<DifficultyRecord> records = measure_difficulty(
                params, env.train, cfg.profile_attempts, cfg.profile_temperature,
                derive_seed(cfg.master_seed, "profile1"), cfg.rl_len_end, cfg.workers);
            CurriculumDataset curriculum = difficulty_filter(records, 0, cfg.rl_phases);
            std::string path = out_path(cfg, "curriculum.jsonl");
            save_curriculum(path, curriculum);
            std::printf("curriculum: %zu of %zu train questions -> %s\n",
                        curriculum.records.size(), env.train.size(), path.c_str());
        };
    });

    std::string ckpt_trl, stage_trl = "rl1";
    auto* trainrl = app.add_subcommand("train-rl", "DAPO training over the saved curriculum");
    add_common(trainrl, st);
    trainrl->add_option("--ckpt", ckpt_trl, "input checkpoint (default: fresh theta0)");
    trainrl->add_option("--stage", stage_trl, "output stage tag: rl1 or rl2")
        ->check(CLI::IsMember({"rl1", "rl2"}));
    trainrl->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            fs::create_directories(cfg.outdir);
            PipelineEnv env = prepare_bank(cfg);
            std::string cur_path = out_path(cfg, "curriculum.jsonl");
            if (!fs::exists(cur_path))
                throw PhaseAbort("train-rl: missing " + cur_path + " (run profile first)");
            CurriculumDataset curriculum = load_curriculum(cur_path, cfg.rl_phases);
            PolicyParams params = policy_from(cfg, env, ckpt_trl);
            JsonlMetricsSink sink(out_path(cfg, "metrics.jsonl"), /*append=*/true);
            PolicyParams trained =
                train_rl(params, curriculum, env.train,
                         make_rl_config(cfg, derive_seed(cfg.master_seed, stage_trl)), sink,
                         cfg.workers, make_reward_config(cfg));
            std::string path = out_path(cfg, "ckpt-" + stage_trl + ".bin");
            save_checkpoint(path, trained, stage_trl);
            std::printf("wrote %s\n", path.c_str());
        };
    });

    std::string ckpt_gen;
    auto* gensynth = app.add_subcommand("gen-synth", "generate the raw synthetic dataset");
    add_common(gensynth, st);
    gensynth->add_option("--ckpt", ckpt_gen, "generating checkpoint (default: ckpt-rl1.bin)");
    gensynth->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            fs::create_directories(cfg.outdir);
            PipelineEnv env = prepare_bank(cfg);
            std::string ckpt = ckpt_gen.empty() ? out_path(cfg, "ckpt-rl1.bin") : ckpt_gen;
            PolicyParams params = load_checkpoint(ckpt).first;
            SyntheticDataset raw =
                generate(params, env.train, cfg.synth_n, cfg.synth_temperature,
                         derive_seed(cfg.master_seed, "synthgen"), cfg.rl_len_end, cfg.workers);
            std::string path = out_path(cfg, "synth-raw.jsonl");
            save_synth(path, raw);
            std::printf("wrote %s (%zu examples)\n", path.c_str(), raw.examples.size());
        };
    });

    std::string ckpt_sel;
    auto* select = app.add_subcommand("select",
                                      "retain correct generations, apply gradient selection and "
                                      "difficulty weights");
    add_common(select, st);
    select->add_option("--ckpt", ckpt_sel, "profiling checkpoint (default: ckpt-rl1.bin)");
    select->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            PipelineEnv env = prepare_bank(cfg);
            std::string ckpt = ckpt_sel.empty() ? out_path(cfg, "ckpt-rl1.bin") : ckpt_sel;
            PolicyParams params = load_checkpoint(ckpt).first;
            SyntheticDataset raw = load_synth(out_path(cfg, "synth-raw.jsonl"));
            SyntheticDataset clean = retain_correct(raw);
            save_synth(out_path(cfg, "synth-clean.jsonl"), clean);
            std::vector<DifficultyRecord> records = measure_difficulty(
                params, env.train, cfg.profile_attempts, cfg.profile_temperature,
                derive_seed(cfg.master_seed, "profile2"), cfg.rl_len_end, cfg.workers);
            SyntheticDataset selected = gradient_selection(clean, records, cfg.select_tau);
            if (selected.examples.empty() && cfg.select_fallback_k > 0)
                selected = fallback_least_confident(clean, cfg.select_fallback_k);
            SyntheticDataset weighted = assign_weights(selected, records, cfg.select_alpha);
            save_synth(out_path(cfg, "synth-selected.jsonl"), weighted);
            std::printf("raw %zu -> clean %zu -> selected %zu\n", raw.examples.size(),
                        clean.examples.size(), weighted.examples.size());
        };
    });

    std::string ckpt_sft;
    auto* trainsft = app.add_subcommand("train-sft", "weighted SFT on the selected dataset");
    add_common(trainsft, st);
    trainsft->add_option("--ckpt", ckpt_sft, "input checkpoint (default: ckpt-rl1.bin)");
    trainsft->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            PipelineEnv env = prepare_bank(cfg);
            std::string ckpt = ckpt_sft.empty() ? out_path(cfg, "ckpt-rl1.bin") : ckpt_sft;
            PolicyParams params = load_checkpoint(ckpt).first;
            SyntheticDataset selected = load_synth(out_path(cfg, "synth-selected.jsonl"));
            JsonlMetricsSink sink(out_path(cfg, "metrics.jsonl"), /*append=*/true);
            PolicyParams trained =
                train_sft(params, selected, env.train, env.holdout,
                          make_sft_config(cfg, derive_seed(cfg.master_seed, "sft")), sink,
                          cfg.workers);
            std::string path = out_path(cfg, "ckpt-sft.bin");
            save_checkpoint(path, trained, "sft");
            std::printf("wrote %s\n", path.c_str());
        };
    });

    std::string ckpt_eval, split_eval = "holdout", decode_eval = "greedy";
    int k_eval = 16;
    double temp_eval = 1.0;
    auto* evalc = app.add_subcommand("eval", "greedy or majority-vote accuracy");
    add_common(evalc, st);
    evalc->add_option("--ckpt", ckpt_eval, "checkpoint to evaluate")->required();
    evalc->add_option("--split", split_eval, "holdout | train | full")
        ->check(CLI::IsMember({"holdout", "train", "full"}));
    evalc->add_option("--decode", decode_eval, "greedy | sampled")
        ->check(CLI::IsMember({"greedy", "sampled"}));
    evalc->add_option("--k", k_eval, "samples per question in sampled mode");
    evalc->add_option("--temp", temp_eval, "sampling temperature in sampled mode");
    evalc->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            PipelineEnv env = prepare_bank(cfg);
            const QuestionBank& bank =
                split_eval == "train" ? env.train : (split_eval == "full" ? env.bank : env.holdout);
            PolicyParams params = load_checkpoint(ckpt_eval).first;
            DecodeMode mode;
            mode.kind = decode_eval;
            mode.k = k_eval;
            mode.temperature = temp_eval;
            mode.seed = derive_seed(cfg.master_seed, "evalcli");
            mode.rollout_length = cfg.rl_len_end;
            EvalReport r = evaluate(params, bank, mode, cfg.workers);
            std::printf("accuracy=%.2f n=%d\n", r.accuracy_percent, r.num_questions);
        };
    });

    auto* runall = app.add_subcommand("run-all", "execute the full three-phase pipeline");
    add_common(runall, st);
    runall->callback([&] {
        action = [&] {
            PipelineConfig cfg = make_config(st);
            RunManifest man = run_all(cfg);
            for (const StageRecord& s : man.stages) {
                if (s.skipped)
                    std::printf("%-5s skipped\n", s.stage.c_str());
                else
                    std::printf("%-5s accuracy=%.2f\n", s.stage.c_str(), s.accuracy);
            }
            std::printf("manifest: %s\n", out_path(cfg, "manifest.json").c_str());
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;  // bad flags are config errors
    }
    try {
        action();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const PhaseAbort& e) {
        std::fprintf(stderr, "phase abort: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
