#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "rlsft/config.hpp"
#include "rlsft/curriculum.hpp"
#include "rlsft/metrics.hpp"
#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/synth.hpp"

namespace rlsft {

struct PipelineEnv {
    QuestionBank bank;
    QuestionBank train;
    QuestionBank holdout;
};

// Loads bank_file when set, otherwise synthesizes from the config spec; then
// splits train/holdout deterministically from the master seed.
PipelineEnv prepare_bank(const PipelineConfig& cfg);

PolicyParams init_policy(const PipelineConfig& cfg, int vocab_size);

std::string file_hash_hex(const std::string& path);

// Selection-empty fallback: one max-logp representative per question, ordered
// least-confident first, capped at k. Keeps Phase 2 trainable when the RL
// policy has mastered every surviving question.
SyntheticDataset fallback_least_confident(const SyntheticDataset& clean, int k);

struct StageRecord {
    std::string stage;       // base | rl1 | sft | rl2
    std::string checkpoint;  // path relative to outdir; empty when skipped
    double accuracy = 0.0;   // greedy holdout accuracy
    double wall_ms = 0.0;
    bool skipped = false;
};

struct RunManifest {
    std::map<std::string, std::string> config;
    std::string bank_id;
    std::string curriculum_hash;
    std::vector<StageRecord> stages;
    std::string aborted_stage;  // empty on a clean run
    std::string abort_message;
};

void write_manifest(const std::string& path, const RunManifest& m);

// Phase 1: profile difficulty with theta0 (threshold 0), build the ascending
// curriculum, DAPO-train over it. Writes curriculum.jsonl and ckpt-rl1.bin.
std::pair<PolicyParams, CurriculumDataset> run_phase1(const PipelineConfig& cfg,
                                                      const PipelineEnv& env,
                                                      const PolicyParams& theta0,
                                                      MetricsSink& sink);

// Phase 2: generate -> retain_correct -> gradient_selection (against a fresh
// difficulty profile of theta_RL1, so selection covers every clean question)
// -> assign_weights -> train_sft. When selection empties (every surviving
// question mastered), falls back to the select_fallback_k least-confident
// per-question representatives. Writes the three synth stages and
// ckpt-sft.bin.
PolicyParams run_phase2(const PipelineConfig& cfg, const PipelineEnv& env,
                        const PolicyParams& theta_rl1, const CurriculumDataset& curriculum,
                        MetricsSink& sink);

// Phase 3: re-runs DAPO on the exact Phase-1 curriculum file (hash-checked,
// no re-profiling). Writes ckpt-rl2.bin.
PolicyParams run_phase3(const PipelineConfig& cfg, const PipelineEnv& env,
                        const PolicyParams& theta_sft,
                        const std::string& expected_curriculum_hash, MetricsSink& sink);

RunManifest run_all(const PipelineConfig& cfg);

}  // namespace rlsft
