#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rlsft/dapo.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/reward.hpp"
#include "rlsft/sft.hpp"

namespace rlsft {

// Flat key=value configuration. Precedence: built-in defaults < profile <
// --config file < RLSFT_<KEY> environment variables < command-line flags.
struct PipelineConfig {
    std::string profile = "desk";  // desk | paper (paper documents §-scale constants; not CI)
    std::string bank_file;         // load instead of synthesizing when non-empty

    int num_questions = 200;
    int num_choices = 4;
    int vocab_size = 64;
    int difficulty_levels = 4;
    int key_repeats = 4;
    double holdout_fraction = 0.2;

    int hidden_dim = 32;
    uint64_t master_seed = 42;
    std::string outdir = "out";
    int workers = 1;
    bool run_phase3 = true;

    double rl_lr = 1e-2;
    int rl_epochs = 8;
    double rl_escalation = 1.5;
    int rl_group = 8;
    double rl_eps_low = 0.2;
    double rl_eps_high = 0.28;
    double rl_temperature = 1.0;
    int rl_len_start = 5;
    int rl_len_end = 8;
    int rl_phases = 4;
    int rl_batch_questions = 16;
    int rl_inner_epochs = 1;
    bool rl_accumulate = true;

    int profile_attempts = 30;
    double profile_temperature = 1.0;

    int synth_n = 2000;
    double synth_temperature = 0.0;  // greedy generation

    double select_tau = 0.5;
    double select_alpha = 1.0;
    int select_fallback_k = 12;  // least-confident representatives kept when selection empties

    double sft_lr = 1e-2;
    int sft_epochs = 48;
    int sft_micro = 4;
    int sft_accum = 2;
    int sft_val_every = 25;
    int sft_patience = 8;

    std::string reward_scorer = "exact_match";
    double reward_shift = 0.0;
    double reward_scale = 1.0;
};

std::vector<std::string> config_keys();
void apply_kv(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string get_kv(const PipelineConfig& cfg, const std::string& key);
std::map<std::string, std::string> config_snapshot(const PipelineConfig& cfg);

void load_config_file(PipelineConfig& cfg, const std::string& path);
void apply_env_overrides(PipelineConfig& cfg);  // RLSFT_<UPPERCASED KEY>
void apply_profile(PipelineConfig& cfg, const std::string& profile);
void validate_config(const PipelineConfig& cfg);  // throws ConfigError

SynthBankSpec make_bank_spec(const PipelineConfig& cfg);
RlConfig make_rl_config(const PipelineConfig& cfg, uint64_t seed);
SftConfig make_sft_config(const PipelineConfig& cfg, uint64_t seed);
RewardConfig make_reward_config(const PipelineConfig& cfg);

}  // namespace rlsft
