#pragma once

#include <functional>
#include <string>
#include <vector>

#include "guesslab/guesser.hpp"
#include "guesslab/oracle.hpp"
#include "guesslab/questions.hpp"

namespace guesslab {

struct GameResult {
    std::string scene_id;
    Dialogue dialogue;
    std::size_t predicted = 0;
    std::size_t target = 0;
    bool success = false;
    std::vector<Vec> beliefs;  // per-turn candidate distribution snapshots
};

enum class PolicyKind { InfoGain = 0, Random = 1, Scripted = 2 };

struct QuestionerPolicy {
    PolicyKind kind = PolicyKind::InfoGain;
    bool memory = true;  // never re-ask an identical (qtype, argument) pair
    std::vector<std::size_t> script;  // template ids for the scripted kind
};

/// Answer source for self-play: a trained oracle or the ground-truth rules.
using AnswerFn = std::function<Answer(const Scene&, const Question&)>;

AnswerFn gold_answerer(const QuestionBank& bank);
AnswerFn model_answerer(const OracleModel& model, const QuestionBank& bank);

struct GameplayConfig {
    std::size_t max_turns = 10;
    double stop_threshold = 0.9;
    bool belief_from_filter = false;  // consistency filter instead of the guesser
};

/// Greedy-split question sequence that isolates the target under the
/// ground-truth answer rules, truncated at max_turns.
Dialogue synthesize_gold(const Scene& scene, const QuestionBank& bank, Rng& rng,
                         std::size_t max_turns = 10);

std::vector<GoldDialogue> synthesize_gold_set(const std::vector<Scene>& scenes,
                                              const QuestionBank& bank, std::uint64_t seed,
                                              std::size_t max_turns = 10);

/// Next question for the current belief. InfoGain maximizes expected entropy
/// reduction under ground-truth answer semantics weighted by the belief;
/// ties break toward the lowest template id. Once every template has been
/// asked the lowest-id template is returned (repetition past exhaustion).
std::size_t select_question(const QuestionerPolicy& policy, const Vec& belief,
                            const Scene& scene, const QuestionBank& bank,
                            const std::vector<std::size_t>& asked, Rng& rng);

/// Expected information gain of one template, exposed for testing.
double expected_information_gain(const Vec& belief, const Scene& scene,
                                 const QuestionBank& bank, std::size_t template_id);

GameResult play_game(const Scene& scene, const AnswerFn& answer_fn,
                     const GuesserModel& guesser, const QuestionerPolicy& policy,
                     const QuestionBank& bank, const GameplayConfig& config, Rng& rng);

struct GameplayStats {
    double accuracy = 0.0;
    std::size_t games = 0;
    std::size_t successes = 0;
};

GameplayStats evaluate_gameplay(const std::vector<Scene>& split, const AnswerFn& answer_fn,
                                const GuesserModel& guesser, const QuestionerPolicy& policy,
                                const QuestionBank& bank, const GameplayConfig& config,
                                std::uint64_t seed, std::vector<GameResult>* archive = nullptr);

// Dialogue archive JSONL.
void write_archive(const std::string& path, const std::vector<GameResult>& results);
std::vector<GameResult> read_archive(const std::string& path);

/// Multi-task schedule: every n-th epoch runs the first task, the others
/// round-robin across remaining epochs. Returns the executed schedule.
struct ScheduledTask {
    std::string name;
    std::function<void(std::size_t epoch)> run;
};

std::vector<std::string> modulo_n_train(std::vector<ScheduledTask> tasks, std::size_t n,
                                        std::size_t epochs);

void write_schedule(const std::string& path, const std::vector<std::string>& schedule);
std::vector<std::string> read_schedule(const std::string& path);

/// Candidates still consistent with every ground-truth answer so far.
std::vector<std::size_t> consistent_candidates(const Scene& scene, const Dialogue& dialogue,
                                               const QuestionBank& bank);

}  // namespace guesslab
