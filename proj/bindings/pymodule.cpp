#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rlsft/config.hpp"
#include "rlsft/curriculum.hpp"
#include "rlsft/dapo.hpp"
#include "rlsft/errors.hpp"
#include "rlsft/eval.hpp"
#include "rlsft/pipeline.hpp"
#include "rlsft/policy.hpp"
#include "rlsft/qbank.hpp"
#include "rlsft/rng.hpp"
#include "rlsft/rollout.hpp"
#include "rlsft/sft.hpp"
#include "rlsft/synth.hpp"

namespace py = pybind11;
using namespace rlsft;

namespace {

PipelineConfig config_from_dict(const py::dict& kv) {
    PipelineConfig cfg;
    if (kv.contains("profile"))
        apply_kv(cfg, "profile", py::str(kv["profile"]).cast<std::string>());
    for (auto item : kv) {
        std::string key = py::str(item.first).cast<std::string>();
        if (key == "profile") continue;
        apply_kv(cfg, key, py::str(item.second).cast<std::string>());
    }
    validate_config(cfg);
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "RL->SFT->RL pedagogical training pipeline (C++ core)";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<PhaseAbort>(m, "PhaseAbort");

    m.def("derive_seed", &derive_seed, py::arg("parent"), py::arg("tag"));

    py::class_<Question>(m, "Question")
        .def(py::init<>())
        .def_readwrite("id", &Question::id)
        .def_readwrite("prompt_tokens", &Question::prompt_tokens)
        .def_readwrite("choices", &Question::choices)
        .def_readwrite("correct_index", &Question::correct_index)
        .def_readwrite("tags", &Question::tags);

    py::class_<QuestionBank>(m, "QuestionBank")
        .def(py::init<>())
        .def_readwrite("questions", &QuestionBank::questions)
        .def_readwrite("vocab_size", &QuestionBank::vocab_size)
        .def("__len__", &QuestionBank::size);

    py::class_<SynthBankSpec>(m, "SynthBankSpec")
        .def(py::init<>())
        .def_readwrite("num_questions", &SynthBankSpec::num_questions)
        .def_readwrite("num_choices", &SynthBankSpec::num_choices)
        .def_readwrite("vocab_size", &SynthBankSpec::vocab_size)
        .def_readwrite("difficulty_levels", &SynthBankSpec::difficulty_levels)
        .def_readwrite("key_repeats", &SynthBankSpec::key_repeats)
        .def_readwrite("seed", &SynthBankSpec::seed);

    m.def("generate_synthetic_bank", &generate_synthetic_bank, py::arg("spec"));
    m.def("load_bank", &load_bank, py::arg("path"));
    m.def("save_bank", &save_bank, py::arg("path"), py::arg("bank"));
    m.def("split_bank", &split_bank, py::arg("bank"), py::arg("holdout_fraction"), py::arg("seed"));

    py::class_<PolicyParams>(m, "PolicyParams")
        .def_readonly("vocab", &PolicyParams::vocab)
        .def_readonly("d", &PolicyParams::d)
        .def("param_count", &PolicyParams::param_count)
        .def("flat", &PolicyParams::flat)
        .def("set_flat", &PolicyParams::set_flat);

    m.def("init_params", &init_params, py::arg("vocab"), py::arg("d"), py::arg("seed"));
    m.def(
        "forward",
        [](const PolicyParams& p, const std::vector<int>& ctx, double temperature) {
            TokenDistribution d = forward(p, ctx, temperature);
            return py::make_tuple(d.probs, d.logprobs);
        },
        py::arg("params"), py::arg("context"), py::arg("temperature") = 1.0);
    m.def(
        "sample_sequence",
        [](const PolicyParams& p, const std::vector<int>& prompt, int max_steps,
           double temperature, uint64_t seed) {
            Rng rng(seed);
            return sample_sequence(p, prompt, max_steps, temperature, rng);
        },
        py::arg("params"), py::arg("prompt"), py::arg("max_steps"), py::arg("temperature"),
        py::arg("seed"));
    m.def("sequence_logprob", &sequence_logprob, py::arg("params"), py::arg("prompt"),
          py::arg("generated"), py::arg("temperature") = 1.0);
    m.def("grad_sequence_logprob", &grad_sequence_logprob, py::arg("params"), py::arg("prompt"),
          py::arg("generated"), py::arg("coeffs"), py::arg("temperature") = 1.0);
    m.def("finite_diff_check", &finite_diff_check, py::arg("params"), py::arg("prompt"),
          py::arg("generated"), py::arg("coeffs"), py::arg("step"), py::arg("temperature") = 1.0);
    m.def("save_checkpoint", &save_checkpoint, py::arg("path"), py::arg("params"),
          py::arg("stage"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    m.def(
        "schedule_length",
        [](int start, int end, int phases, int phase) {
            return schedule_length({start, end, phases}, phase);
        },
        py::arg("start"), py::arg("end"), py::arg("total_phases"), py::arg("phase"));

    m.def(
        "group_advantage",
        [](const std::vector<double>& rewards) {
            AdvantageGroup g = group_advantage(rewards);
            return py::make_tuple(g.advantages, g.degenerate);
        },
        py::arg("rewards"));
    m.def(
        "clipped_surrogate_term",
        [](double ratio, double advantage, double eps_low, double eps_high) {
            return clipped_surrogate_term(ratio, advantage, {eps_low, eps_high});
        },
        py::arg("ratio"), py::arg("advantage"), py::arg("eps_low") = 0.2,
        py::arg("eps_high") = 0.28);

    py::class_<DifficultyRecord>(m, "DifficultyRecord")
        .def(py::init<>())
        .def_readwrite("question_id", &DifficultyRecord::question_id)
        .def_readwrite("attempts", &DifficultyRecord::attempts)
        .def_readwrite("errors", &DifficultyRecord::errors)
        .def("error_rate", &DifficultyRecord::error_rate);

    m.def("measure_difficulty", &measure_difficulty, py::arg("params"), py::arg("bank"),
          py::arg("attempts"), py::arg("temperature"), py::arg("seed"), py::arg("rollout_length"),
          py::arg("workers") = 1);
    m.def(
        "difficulty_filter",
        [](const std::vector<DifficultyRecord>& records, int threshold, int num_phases) {
            CurriculumDataset c = difficulty_filter(records, threshold, num_phases);
            return c.records;
        },
        py::arg("records"), py::arg("threshold") = 0, py::arg("num_phases") = 4);

    py::class_<SyntheticExample>(m, "SyntheticExample")
        .def(py::init<>())
        .def_readwrite("question_id", &SyntheticExample::question_id)
        .def_readwrite("tokens", &SyntheticExample::tokens)
        .def_readwrite("correct", &SyntheticExample::correct)
        .def_readwrite("logp", &SyntheticExample::logp)
        .def_readwrite("weight", &SyntheticExample::weight);

    py::class_<SyntheticDataset>(m, "SyntheticDataset")
        .def(py::init<>())
        .def_readwrite("stage", &SyntheticDataset::stage)
        .def_readwrite("examples", &SyntheticDataset::examples)
        .def("__len__", [](const SyntheticDataset& d) { return d.examples.size(); });

    m.def("generate", &generate, py::arg("params"), py::arg("bank"), py::arg("total"),
          py::arg("temperature"), py::arg("seed"), py::arg("rollout_length"),
          py::arg("workers") = 1);
    m.def("retain_correct", &retain_correct, py::arg("raw"));
    m.def("gradient_selection", &gradient_selection, py::arg("clean"), py::arg("records"),
          py::arg("tau"));
    m.def("assign_weights", &assign_weights, py::arg("selected"), py::arg("records"),
          py::arg("alpha"));

    m.def(
        "evaluate",
        [](const PolicyParams& params, const QuestionBank& bank, const std::string& kind, int k,
           double temperature, uint64_t seed, int rollout_length, int workers) {
            DecodeMode mode;
            mode.kind = kind;
            mode.k = k;
            mode.temperature = temperature;
            mode.seed = seed;
            mode.rollout_length = rollout_length;
            EvalReport r = evaluate(params, bank, mode, workers);
            py::dict out;
            out["bank_id"] = r.bank_id;
            out["n"] = r.num_questions;
            out["correct"] = r.num_correct;
            out["accuracy"] = r.accuracy_percent;
            out["decode"] = r.decode;
            return out;
        },
        py::arg("params"), py::arg("bank"), py::arg("decode") = "greedy", py::arg("k") = 1,
        py::arg("temperature") = 1.0, py::arg("seed") = 0, py::arg("rollout_length") = 8,
        py::arg("workers") = 1);

    m.def(
        "run_all",
        [](const py::dict& kv) {
            PipelineConfig cfg = config_from_dict(kv);
            RunManifest man = run_all(cfg);
            py::dict out;
            out["bank_id"] = man.bank_id;
            out["curriculum_hash"] = man.curriculum_hash;
            py::list stages;
            for (const StageRecord& s : man.stages) {
                py::dict r;
                r["stage"] = s.stage;
                r["skipped"] = s.skipped;
                if (!s.skipped) r["accuracy"] = s.accuracy;
                stages.append(r);
            }
            out["stages"] = stages;
            return out;
        },
        py::arg("config"),
        "Run the full pipeline from a {key: value} config dict; returns the manifest summary.");
}
