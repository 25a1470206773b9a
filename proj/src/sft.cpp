#include "rlsft/sft.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "rlsft/eval.hpp"
#include "rlsft/rng.hpp"

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

std::pair<double, std::vector<double>> weighted_ce_loss(const PolicyParams& params,
                                                        const SyntheticExample& example,
                                                        const Question& question) {
    if (example.weight <= 0.0) throw std::invalid_argument("weighted_ce_loss: weight must be > 0");
    std::vector<double> lp = sequence_logprob(params, question.prompt_tokens, example.tokens, 1.0);
    double loss = 0.0;
    for (double x : lp) loss -= x;
    loss *= example.weight;
    std::vector<double> coeffs(example.tokens.size(), -example.weight);
    std::vector<double> grad =
        grad_sequence_logprob(params, question.prompt_tokens, example.tokens, coeffs, 1.0);
    return {loss, std::move(grad)};
}

std::pair<PolicyParams, double> sft_step(const PolicyParams& params,
                                         const std::vector<std::vector<SyntheticExample>>& micro_batches,
                                         const QuestionBank& bank, const SftConfig& cfg,
                                         AdamState& opt) {
    if (micro_batches.empty() || int(micro_batches.size()) > cfg.accumulation_steps)
        throw std::invalid_argument("sft_step: need 1..accumulation_steps micro-batches");
    size_t total = 0;
    for (const auto& mb : micro_batches) {
        if (mb.empty()) throw std::invalid_argument("sft_step: empty micro-batch");
        total += mb.size();
    }
    std::vector<double> grad(params.param_count(), 0.0);
    double loss_sum = 0.0;
    for (const auto& mb : micro_batches) {
        for (const SyntheticExample& e : mb) {
            const Question& q = bank.by_id(e.question_id);
            auto [loss, g] = weighted_ce_loss(params, e, q);
            loss_sum += loss;
            for (size_t j = 0; j < grad.size(); ++j) grad[j] += g[j];
        }
    }
    for (double& x : grad) x /= double(total);
    PolicyParams out = params;
    std::vector<double> flat = out.flat();
    opt.descend(flat, grad);
    out.set_flat(flat);
    return {std::move(out), loss_sum / double(total)};
}

PolicyParams train_sft(const PolicyParams& params, const SyntheticDataset& selected,
                       const QuestionBank& bank, const QuestionBank& holdout, const SftConfig& cfg,
                       MetricsSink& sink, int workers) {
    if (selected.stage != "selected")
        throw std::invalid_argument("train_sft: dataset stage must be selected");
    if (selected.examples.empty()) throw std::invalid_argument("train_sft: empty dataset");
    if (cfg.epochs < 1 || cfg.learning_rate <= 0.0 || cfg.micro_batch < 1 ||
        cfg.accumulation_steps < 1 || cfg.validation_every < 1 || cfg.patience < 1)
        throw std::invalid_argument("train_sft: invalid config");

    PolicyParams cur = params;
    AdamState opt(cur.param_count(), cfg.learning_rate);
    bool monitor = !holdout.questions.empty();
    DecodeMode val_mode;
    val_mode.rollout_length = cfg.rollout_length;

    // Pre-training baseline seeds the best checkpoint: a run that never
    // improves the holdout hands back the entry parameters.
    PolicyParams best = cur;
    double best_acc = monitor ? evaluate(cur, holdout, val_mode, workers).accuracy_percent : 0.0;
    int non_improving = 0;
    bool stop = false;

    size_t n = selected.examples.size();
    size_t chunk = size_t(cfg.micro_batch) * size_t(cfg.accumulation_steps);
    int step = 0;
    for (int e = 0; e < cfg.epochs && !stop; ++e) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), size_t(0));
        Rng shuf(derive_seed(cfg.seed, "sft:ep" + std::to_string(e)));
        shuf.shuffle(order);
        for (size_t at = 0; at < n && !stop; at += chunk) {
            size_t hi = std::min(n, at + chunk);
            std::vector<std::vector<SyntheticExample>> micro_batches;
            for (size_t mb = at; mb < hi; mb += size_t(cfg.micro_batch)) {
                size_t mb_hi = std::min(hi, mb + size_t(cfg.micro_batch));
                std::vector<SyntheticExample> batch;
                for (size_t i = mb; i < mb_hi; ++i) batch.push_back(selected.examples[order[i]]);
                micro_batches.push_back(std::move(batch));
            }
            auto [next, loss] = sft_step(cur, micro_batches, bank, cfg, opt);
            cur = std::move(next);
            ordered_json ev;
            ev["phase"] = "sft";
            ev["step"] = step;
            ev["loss"] = loss;
            if (monitor && (step + 1) % cfg.validation_every == 0) {
                double acc = evaluate(cur, holdout, val_mode, workers).accuracy_percent;
                ev["val_acc"] = acc;
                if (acc > best_acc) {
                    best_acc = acc;
                    best = cur;
                    non_improving = 0;
                } else if (++non_improving >= cfg.patience) {
                    stop = true;
                }
            } else {
                ev["val_acc"] = nullptr;
            }
            sink.emit(ev);
            ++step;
        }
    }
    return monitor ? best : cur;
}

}  // namespace rlsft
