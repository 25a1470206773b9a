#include "rlsft/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "rlsft/errors.hpp"

namespace rlsft {

namespace {

struct KeyEntry {
    std::string name;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
};

long long parse_ll(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected integer, got \"" + v + "\"");
    }
}

double parse_d(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": expected number, got \"" + v + "\"");
    }
}

bool parse_b(const std::string& key, const std::string& v) {
    std::string s = v;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("config key " + key + ": expected boolean, got \"" + v + "\"");
}

std::string fmt_d(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

std::vector<KeyEntry> build_registry() {
    std::vector<KeyEntry> r;
    auto add_s = [&](const char* k, std::string PipelineConfig::* m) {
        r.push_back({k, [m, k = std::string(k)](PipelineConfig& c, const std::string& v) {
                         if (k == "profile") apply_profile(c, v);
                         else c.*m = v;
                     },
                     [m](const PipelineConfig& c) { return c.*m; }});
    };
    auto add_i = [&](const char* k, int PipelineConfig::* m) {
        r.push_back({k,
                     [m, k = std::string(k)](PipelineConfig& c, const std::string& v) {
                         c.*m = int(parse_ll(k, v));
                     },
                     [m](const PipelineConfig& c) { return std::to_string(c.*m); }});
    };
    auto add_u64 = [&](const char* k, uint64_t PipelineConfig::* m) {
        r.push_back({k,
                     [m, k = std::string(k)](PipelineConfig& c, const std::string& v) {
                         c.*m = uint64_t(parse_ll(k, v));
                     },
                     [m](const PipelineConfig& c) { return std::to_string(c.*m); }});
    };
    auto add_f = [&](const char* k, double PipelineConfig::* m) {
        r.push_back({k,
                     [m, k = std::string(k)](PipelineConfig& c, const std::string& v) {
                         c.*m = parse_d(k, v);
                     },
                     [m](const PipelineConfig& c) { return fmt_d(c.*m); }});
    };
    auto add_bool = [&](const char* k, bool PipelineConfig::* m) {
        r.push_back({k,
                     [m, k = std::string(k)](PipelineConfig& c, const std::string& v) {
                         c.*m = parse_b(k, v);
                     },
                     [m](const PipelineConfig& c) { return c.*m ? "true" : "false"; }});
    };

    add_s("profile", &PipelineConfig::profile);
    add_s("bank_file", &PipelineConfig::bank_file);
    add_i("num_questions", &PipelineConfig::num_questions);
    add_i("num_choices", &PipelineConfig::num_choices);
    add_i("vocab_size", &PipelineConfig::vocab_size);
    add_i("difficulty_levels", &PipelineConfig::difficulty_levels);
    add_i("key_repeats", &PipelineConfig::key_repeats);
    add_f("holdout_fraction", &PipelineConfig::holdout_fraction);
    add_i("hidden_dim", &PipelineConfig::hidden_dim);
    add_u64("master_seed", &PipelineConfig::master_seed);
    add_s("outdir", &PipelineConfig::outdir);
    add_i("workers", &PipelineConfig::workers);
    add_bool("run_phase3", &PipelineConfig::run_phase3);
    add_f("rl_lr", &PipelineConfig::rl_lr);
    add_i("rl_epochs", &PipelineConfig::rl_epochs);
    add_f("rl_escalation", &PipelineConfig::rl_escalation);
    add_i("rl_group", &PipelineConfig::rl_group);
    add_f("rl_eps_low", &PipelineConfig::rl_eps_low);
    add_f("rl_eps_high", &PipelineConfig::rl_eps_high);
    add_f("rl_temperature", &PipelineConfig::rl_temperature);
    add_i("rl_len_start", &PipelineConfig::rl_len_start);
    add_i("rl_len_end", &PipelineConfig::rl_len_end);
    add_i("rl_phases", &PipelineConfig::rl_phases);
    add_i("rl_batch_questions", &PipelineConfig::rl_batch_questions);
    add_i("rl_inner_epochs", &PipelineConfig::rl_inner_epochs);
    add_bool("rl_accumulate", &PipelineConfig::rl_accumulate);
    add_i("profile_attempts", &PipelineConfig::profile_attempts);
    add_f("profile_temperature", &PipelineConfig::profile_temperature);
    add_i("synth_n", &PipelineConfig::synth_n);
    add_f("synth_temperature", &PipelineConfig::synth_temperature);
    add_f("select_tau", &PipelineConfig::select_tau);
    add_f("select_alpha", &PipelineConfig::select_alpha);
    add_i("select_fallback_k", &PipelineConfig::select_fallback_k);
    add_f("sft_lr", &PipelineConfig::sft_lr);
    add_i("sft_epochs", &PipelineConfig::sft_epochs);
    add_i("sft_micro", &PipelineConfig::sft_micro);
    add_i("sft_accum", &PipelineConfig::sft_accum);
    add_i("sft_val_every", &PipelineConfig::sft_val_every);
    add_i("sft_patience", &PipelineConfig::sft_patience);
    add_s("reward_scorer", &PipelineConfig::reward_scorer);
    add_f("reward_shift", &PipelineConfig::reward_shift);
    add_f("reward_scale", &PipelineConfig::reward_scale);
    return r;
}

const std::vector<KeyEntry>& registry() {
    static std::vector<KeyEntry> r = build_registry();
    return r;
}

const KeyEntry& find_key(const std::string& key) {
    for (const KeyEntry& e : registry())
        if (e.name == key) return e;
    throw ConfigError("unknown config key \"" + key + "\"");
}

}  // namespace

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const KeyEntry& e : registry()) out.push_back(e.name);
    return out;
}

void apply_kv(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, value);
}

std::string get_kv(const PipelineConfig& cfg, const std::string& key) {
    return find_key(key).get(cfg);
}

std::map<std::string, std::string> config_snapshot(const PipelineConfig& cfg) {
    std::map<std::string, std::string> out;
    for (const KeyEntry& e : registry()) out[e.name] = e.get(cfg);
    return out;
}

void load_config_file(PipelineConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto ltrim = line.find_first_not_of(" \t\r");
        if (ltrim == std::string::npos) continue;
        auto rtrim = line.find_last_not_of(" \t\r");
        line = line.substr(ltrim, rtrim - ltrim + 1);
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t");
            auto b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        apply_kv(cfg, key, value);
    }
}

void apply_env_overrides(PipelineConfig& cfg) {
    for (const KeyEntry& e : registry()) {
        std::string env = "RLSFT_" + e.name;
        std::transform(env.begin(), env.end(), env.begin(),
                       [](unsigned char c) { return std::toupper(c); });
        if (const char* v = std::getenv(env.c_str())) e.set(cfg, v);
    }
}

void apply_profile(PipelineConfig& cfg, const std::string& profile) {
    if (profile == "desk") {
        cfg.profile = "desk";
        return;  // the struct defaults are the desk profile
    }
    if (profile == "paper") {
        // documents the paper-scale constants (920-question bank, 40k
        // generations); hours of compute, not part of CI
        cfg.profile = "paper";
        cfg.num_questions = 920;
        cfg.synth_n = 40000;
        return;
    }
    throw ConfigError("unknown profile \"" + profile + "\" (expected desk or paper)");
}

void validate_config(const PipelineConfig& cfg) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (cfg.num_questions < 1) fail("num_questions must be >= 1");
    if (cfg.num_choices < 2 || cfg.num_choices > 8) fail("num_choices must lie in [2,8]");
    if (cfg.vocab_size < cfg.num_choices + 21) fail("vocab_size too small for choices + keys + noise");
    if (cfg.difficulty_levels < 1 || cfg.difficulty_levels > cfg.num_questions)
        fail("difficulty_levels must lie in [1, num_questions]");
    if (cfg.key_repeats < 1) fail("key_repeats must be >= 1");
    if (!(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0))
        fail("holdout_fraction must lie in (0,1)");
    if (cfg.hidden_dim < 1) fail("hidden_dim must be >= 1");
    if (cfg.workers < 0) fail("workers must be >= 0 (0 = auto)");
    if (cfg.rl_lr <= 0.0) fail("rl_lr must be > 0");
    if (cfg.rl_epochs < 1) fail("rl_epochs must be >= 1");
    if (cfg.rl_escalation < 1.0) fail("rl_escalation must be >= 1");
    if (cfg.rl_group < 2) fail("rl_group must be >= 2");
    if (!(cfg.rl_eps_low > 0.0 && cfg.rl_eps_low < 1.0)) fail("rl_eps_low must lie in (0,1)");
    if (cfg.rl_eps_high < cfg.rl_eps_low) fail("rl_eps_high must be >= rl_eps_low");
    if (cfg.rl_temperature <= 0.0) fail("rl_temperature must be > 0");
    if (cfg.rl_len_start < 1 || cfg.rl_len_end < cfg.rl_len_start)
        fail("rollout lengths must satisfy 1 <= rl_len_start <= rl_len_end");
    if (cfg.rl_phases < 1) fail("rl_phases must be >= 1");
    if (cfg.rl_batch_questions < 1) fail("rl_batch_questions must be >= 1");
    if (cfg.rl_inner_epochs < 1) fail("rl_inner_epochs must be >= 1");
    if (cfg.profile_attempts < 1) fail("profile_attempts must be >= 1");
    if (cfg.profile_temperature <= 0.0) fail("profile_temperature must be > 0");
    if (cfg.synth_n < cfg.num_questions) fail("synth_n must be >= bank size");
    if (cfg.synth_temperature < 0.0) fail("synth_temperature must be >= 0");
    if (!(cfg.select_tau > 0.0 && cfg.select_tau < 1.0)) fail("select_tau must lie in (0,1)");
    if (cfg.select_alpha < 0.0) fail("select_alpha must be >= 0");
    if (cfg.select_fallback_k < 0) fail("select_fallback_k must be >= 0");
    if (cfg.sft_lr <= 0.0) fail("sft_lr must be > 0");
    if (cfg.sft_epochs < 1) fail("sft_epochs must be >= 1");
    if (cfg.sft_micro < 1) fail("sft_micro must be >= 1");
    if (cfg.sft_accum < 1) fail("sft_accum must be >= 1");
    if (cfg.sft_val_every < 1) fail("sft_val_every must be >= 1");
    if (cfg.sft_patience < 1) fail("sft_patience must be >= 1");
    if (cfg.reward_scale <= 0.0) fail("reward_scale must be > 0");
    if (cfg.profile != "desk" && cfg.profile != "paper") fail("profile must be desk or paper");
}

SynthBankSpec make_bank_spec(const PipelineConfig& cfg) {
    SynthBankSpec spec;
    spec.num_questions = cfg.num_questions;
    spec.num_choices = cfg.num_choices;
    spec.vocab_size = cfg.vocab_size;
    spec.difficulty_levels = cfg.difficulty_levels;
    spec.key_repeats = cfg.key_repeats;
    spec.seed = cfg.master_seed;
    return spec;
}

RlConfig make_rl_config(const PipelineConfig& cfg, uint64_t seed) {
    RlConfig r;
    r.learning_rate = cfg.rl_lr;
    r.epochs = cfg.rl_epochs;
    r.escalation = cfg.rl_escalation;
    r.group_size = cfg.rl_group;
    r.clip = {cfg.rl_eps_low, cfg.rl_eps_high};
    r.schedule = {cfg.rl_len_start, cfg.rl_len_end, cfg.rl_phases};
    r.temperature = cfg.rl_temperature;
    r.batch_questions = cfg.rl_batch_questions;
    r.inner_epochs = cfg.rl_inner_epochs;
    r.accumulate_phases = cfg.rl_accumulate;
    r.seed = seed;
    return r;
}

SftConfig make_sft_config(const PipelineConfig& cfg, uint64_t seed) {
    SftConfig s;
    s.epochs = cfg.sft_epochs;
    s.learning_rate = cfg.sft_lr;
    s.micro_batch = cfg.sft_micro;
    s.accumulation_steps = cfg.sft_accum;
    s.validation_every = cfg.sft_val_every;
    s.patience = cfg.sft_patience;
    s.seed = seed;
    s.rollout_length = cfg.rl_len_end;
    return s;
}

RewardConfig make_reward_config(const PipelineConfig& cfg) {
    return {cfg.reward_scorer, cfg.reward_shift, cfg.reward_scale};
}

}  // namespace rlsft
