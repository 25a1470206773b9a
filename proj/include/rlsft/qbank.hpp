#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rlsft {

struct Question {
    std::string id;
    std::vector<int> prompt_tokens;
    std::vector<int> choices;      // answer-token ids, pairwise distinct
    int correct_index = 0;         // index into choices
    std::vector<std::string> tags; // e.g. "level:2"
};

struct QuestionBank {
    std::vector<Question> questions;
    int vocab_size = 0;

    const Question& by_id(const std::string& id) const;
    bool has_id(const std::string& id) const;
    size_t size() const { return questions.size(); }
};

// Desk-scale stand-in for the 920-question exam set. Questions are built over a
// shared vocabulary: tokens [0, num_choices) are answer tokens, the next 20 are
// "key" tokens, and the remainder is a noise pool. Each question repeats one key
// token krep times and pads with level-dependent noise; the key determines the
// correct answer through a seeded key->answer map. More noise = harder.
struct SynthBankSpec {
    int num_questions = 200;
    int num_choices = 4;
    int vocab_size = 64;
    int difficulty_levels = 4;
    int key_repeats = 4;
    uint64_t seed = 42;
};

void validate_bank(const QuestionBank& bank); // throws std::runtime_error on violation

QuestionBank load_bank(const std::string& path);
void save_bank(const std::string& path, const QuestionBank& bank);

QuestionBank generate_synthetic_bank(const SynthBankSpec& spec);

// Noise-token count for a difficulty level: round(2 * 6^(level/(levels-1)))
// interpolates 2 -> 12 geometrically (levels=4 gives [2,4,7,12]).
int noise_count_for_level(int level, int num_levels);

std::pair<QuestionBank, QuestionBank> split_bank(const QuestionBank& bank,
                                                 double holdout_fraction, uint64_t seed);

}  // namespace rlsft
