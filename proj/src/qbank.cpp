#include "rlsft/qbank.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "rlsft/rng.hpp"

namespace rlsft {

using ordered_json = nlohmann::ordered_json;

const Question& QuestionBank::by_id(const std::string& id) const {
    for (const Question& q : questions)
        if (q.id == id) return q;
    throw std::runtime_error("QuestionBank: unknown question id " + id);
}

bool QuestionBank::has_id(const std::string& id) const {
    for (const Question& q : questions)
        if (q.id == id) return true;
    return false;
}

static void validate_question(const Question& q, int vocab_size, const std::string& where) {
    if (q.id.empty()) throw std::runtime_error(where + ": empty question id");
    if (q.prompt_tokens.empty()) throw std::runtime_error(where + ": empty prompt (id " + q.id + ")");
    if (q.choices.size() < 2 || q.choices.size() > 8)
        throw std::runtime_error(where + ": need 2-8 choices (id " + q.id + ")");
    if (q.correct_index < 0 || q.correct_index >= int(q.choices.size()))
        throw std::runtime_error(where + ": correct_index " + std::to_string(q.correct_index) +
                                 " out of range for " + std::to_string(q.choices.size()) +
                                 " choices (id " + q.id + ")");
    std::set<int> uniq(q.choices.begin(), q.choices.end());
    if (uniq.size() != q.choices.size())
        throw std::runtime_error(where + ": duplicate choice tokens (id " + q.id + ")");
    for (int t : q.prompt_tokens)
        if (t < 0 || t >= vocab_size)
            throw std::runtime_error(where + ": prompt token " + std::to_string(t) +
                                     " outside vocab (id " + q.id + ")");
    for (int t : q.choices)
        if (t < 0 || t >= vocab_size)
            throw std::runtime_error(where + ": choice token " + std::to_string(t) +
                                     " outside vocab (id " + q.id + ")");
}

void validate_bank(const QuestionBank& bank) {
    if (bank.vocab_size <= 0) throw std::runtime_error("bank: nonpositive vocab_size");
    std::unordered_set<std::string> seen;
    for (const Question& q : bank.questions) {
        validate_question(q, bank.vocab_size, "bank");
        if (!seen.insert(q.id).second)
            throw std::runtime_error("bank: duplicate question id " + q.id);
    }
}

QuestionBank load_bank(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_bank: cannot open " + path);
    QuestionBank bank;
    int max_token = -1;
    std::unordered_set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(lineno);
        ordered_json j;
        try {
            j = ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": malformed JSON: " + e.what());
        }
        Question q;
        try {
            q.id = j.at("id").get<std::string>();
            q.prompt_tokens = j.at("prompt").get<std::vector<int>>();
            q.choices = j.at("choices").get<std::vector<int>>();
            q.correct_index = j.at("correct").get<int>();
            if (j.contains("tags")) q.tags = j.at("tags").get<std::vector<std::string>>();
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": bad question record: " + e.what());
        }
        if (!seen.insert(q.id).second)
            throw std::runtime_error(where + ": duplicate question id " + q.id);
        for (int t : q.prompt_tokens) max_token = std::max(max_token, t);
        for (int t : q.choices) max_token = std::max(max_token, t);
        validate_question(q, max_token + 1, where);
        bank.questions.push_back(std::move(q));
    }
    if (bank.questions.empty()) throw std::runtime_error("load_bank: " + path + " holds no questions");
    bank.vocab_size = max_token + 1;
    validate_bank(bank);
    return bank;
}

void save_bank(const std::string& path, const QuestionBank& bank) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_bank: cannot open " + path);
    for (const Question& q : bank.questions) {
        ordered_json j;
        j["id"] = q.id;
        j["prompt"] = q.prompt_tokens;
        j["choices"] = q.choices;
        j["correct"] = q.correct_index;
        j["tags"] = q.tags;
        f << j.dump() << "\n";
    }
}

int noise_count_for_level(int level, int num_levels) {
    if (num_levels <= 1) return 2;
    double expo = double(level) / double(num_levels - 1);
    return int(std::lround(2.0 * std::pow(6.0, expo)));
}

QuestionBank generate_synthetic_bank(const SynthBankSpec& spec) {
    if (spec.num_questions <= 0 || spec.num_choices < 2 || spec.difficulty_levels < 1 ||
        spec.key_repeats < 1)
        throw std::runtime_error("generate_synthetic_bank: invalid spec counts");
    if (spec.difficulty_levels > spec.num_questions)
        throw std::runtime_error("generate_synthetic_bank: more levels than questions");
    const int num_keys = 20;
    if (spec.vocab_size < spec.num_choices + num_keys + 1)
        throw std::runtime_error("generate_synthetic_bank: vocab too small for choices + keys + noise");
    const int key_base = spec.num_choices;
    const int noise_base = key_base + num_keys;

    Rng rng(spec.seed);
    std::vector<int> key_answer(num_keys);
    for (int k = 0; k < num_keys; ++k) key_answer[k] = rng.uniform_int(spec.num_choices);

    QuestionBank bank;
    bank.vocab_size = spec.vocab_size;
    int noise_pool = spec.vocab_size - noise_base;
    for (int i = 0; i < spec.num_questions; ++i) {
        int level = i % spec.difficulty_levels;
        int key = rng.uniform_int(num_keys);
        Question q;
        char buf[16];
        std::snprintf(buf, sizeof buf, "q%04d", i);
        q.id = buf;
        for (int r = 0; r < spec.key_repeats; ++r) q.prompt_tokens.push_back(key_base + key);
        int nn = noise_count_for_level(level, spec.difficulty_levels);
        for (int r = 0; r < nn; ++r) q.prompt_tokens.push_back(noise_base + rng.uniform_int(noise_pool));
        rng.shuffle(q.prompt_tokens);
        for (int c = 0; c < spec.num_choices; ++c) q.choices.push_back(c);
        q.correct_index = key_answer[key];
        q.tags.push_back("level:" + std::to_string(level));
        bank.questions.push_back(std::move(q));
    }
    validate_bank(bank);
    return bank;
}

std::pair<QuestionBank, QuestionBank> split_bank(const QuestionBank& bank,
                                                 double holdout_fraction, uint64_t seed) {
    if (bank.questions.empty()) throw std::runtime_error("split_bank: empty bank");
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
        throw std::runtime_error("split_bank: holdout_fraction must lie in (0,1)");
    size_t n = bank.questions.size();
    size_t h = size_t(std::llround(holdout_fraction * double(n)));
    if (h < 1) h = 1;
    if (h >= n) throw std::runtime_error("split_bank: fraction leaves empty train split");

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    std::vector<bool> held(n, false);
    for (size_t i = 0; i < h; ++i) held[order[i]] = true;
    QuestionBank train, holdout;
    train.vocab_size = holdout.vocab_size = bank.vocab_size;
    for (size_t i = 0; i < n; ++i)
        (held[i] ? holdout : train).questions.push_back(bank.questions[i]);
    return {std::move(train), std::move(holdout)};
}

}  // namespace rlsft
