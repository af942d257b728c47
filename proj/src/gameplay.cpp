#include "guesslab/gameplay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <set>

#include "guesslab/common.hpp"

namespace guesslab {

using nlohmann::json;

AnswerFn gold_answerer(const QuestionBank& bank) {
    return [&bank](const Scene& scene, const Question& q) {
        return bank.ground_truth(scene, scene.target_object(), q);
    };
}

AnswerFn model_answerer(const OracleModel& model, const QuestionBank& bank) {
    return [&model, &bank](const Scene& scene, const Question& q) {
        return oracle_answer(model, q, scene, scene.target, bank);
    };
}

namespace {

double entropy(const Vec& p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log2(x);
    return h;
}

}  // namespace

double expected_information_gain(const Vec& belief, const Scene& scene,
                                 const QuestionBank& bank, std::size_t template_id) {
    const Question& q = bank.question(template_id);
    // Partition candidates by their ground-truth answer, weighted by belief.
    std::array<double, 3> mass{0.0, 0.0, 0.0};
    std::array<Vec, 3> split;
    for (auto& s : split) s.assign(belief.size(), 0.0);
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        Answer a = bank.ground_truth(scene, scene.objects[i], q);
        mass[static_cast<std::size_t>(a)] += belief[i];
        split[static_cast<std::size_t>(a)][i] = belief[i];
    }
    double after = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        if (mass[a] <= 0.0) continue;
        Vec posterior = split[a];
        for (double& x : posterior) x /= mass[a];
        after += mass[a] * entropy(posterior);
    }
    return entropy(belief) - after;
}

std::size_t select_question(const QuestionerPolicy& policy, const Vec& belief,
                            const Scene& scene, const QuestionBank& bank,
                            const std::vector<std::size_t>& asked, Rng& rng) {
    const auto& pool = bank.questioner_pool();
    std::set<std::size_t> used(asked.begin(), asked.end());

    std::vector<std::size_t> available;
    for (std::size_t id : pool)
        if (!policy.memory || !used.count(id)) available.push_back(id);
    if (available.empty()) return pool.front();  // exhaustion: repetition permitted

    switch (policy.kind) {
        case PolicyKind::Random:
            return available[rng.uniform_index(available.size())];
        case PolicyKind::Scripted: {
            const std::size_t t = asked.size();
            if (t < policy.script.size()) return policy.script[t];
            return available.front();
        }
        case PolicyKind::InfoGain: {
            std::size_t best = available.front();
            double best_gain = -1.0;
            for (std::size_t id : available) {
                double gain = expected_information_gain(belief, scene, bank, id);
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best = id;
                }
            }
            return best;
        }
    }
    throw validation_error("unknown policy kind");
}

Dialogue synthesize_gold(const Scene& scene, const QuestionBank& bank, Rng& rng,
                         std::size_t max_turns) {
    Dialogue dialogue;
    dialogue.scene_id = scene.id;
    std::vector<std::size_t> candidates(scene.objects.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
    std::set<std::size_t> asked;

    while (dialogue.turns.size() < max_turns && candidates.size() > 1) {
        // Greedy split: minimize the expected surviving candidate count.
        std::size_t best_id = SIZE_MAX;
        double best_value = std::numeric_limits<double>::infinity();
        for (std::size_t id : bank.questioner_pool()) {
            if (asked.count(id)) continue;
            const Question& q = bank.question(id);
            std::array<double, 3> counts{0.0, 0.0, 0.0};
            for (std::size_t i : candidates)
                counts[static_cast<std::size_t>(
                    bank.ground_truth(scene, scene.objects[i], q))] += 1.0;
            const double n = static_cast<double>(candidates.size());
            double expected = 0.0;
            for (double c : counts) expected += (c / n) * c;
            if (expected < best_value - 1e-12) {
                best_value = expected;
                best_id = id;
            }
        }
        if (best_id == SIZE_MAX ||
            best_value >= static_cast<double>(candidates.size()) - 1e-12)
            break;  // nothing splits the remaining set

        const Question& q = bank.question(best_id);
        asked.insert(best_id);
        Answer truth = bank.ground_truth(scene, scene.target_object(), q);
        dialogue.turns.emplace_back(q, truth);
        std::vector<std::size_t> next;
        for (std::size_t i : candidates)
            if (bank.ground_truth(scene, scene.objects[i], q) == truth) next.push_back(i);
        candidates = std::move(next);
    }

    // A dialogue must carry at least one turn for the guesser to pool over.
    if (dialogue.turns.empty()) {
        const auto& pool = bank.questioner_pool();
        std::size_t id = pool[rng.uniform_index(pool.size())];
        const Question& q = bank.question(id);
        dialogue.turns.emplace_back(q, bank.ground_truth(scene, scene.target_object(), q));
    }
    return dialogue;
}

std::vector<GoldDialogue> synthesize_gold_set(const std::vector<Scene>& scenes,
                                              const QuestionBank& bank, std::uint64_t seed,
                                              std::size_t max_turns) {
    Rng rng = Rng::named(seed, "gold");
    std::vector<GoldDialogue> out;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        GoldDialogue gd;
        gd.scene = s;
        gd.dialogue = synthesize_gold(scenes[s], bank, rng, max_turns);
        out.push_back(std::move(gd));
    }
    return out;
}

std::vector<std::size_t> consistent_candidates(const Scene& scene, const Dialogue& dialogue,
                                               const QuestionBank& bank) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        bool ok = true;
        for (const auto& [q, a] : dialogue.turns) {
            if (bank.ground_truth(scene, scene.objects[i], q) != a) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(i);
    }
    return out;
}

GameResult play_game(const Scene& scene, const AnswerFn& answer_fn,
                     const GuesserModel& guesser, const QuestionerPolicy& policy,
                     const QuestionBank& bank, const GameplayConfig& config, Rng& rng) {
    GameResult result;
    result.scene_id = scene.id;
    result.target = scene.target;
    result.dialogue.scene_id = scene.id;

    Vec belief(scene.objects.size(),
               1.0 / static_cast<double>(scene.objects.size()));
    std::vector<std::size_t> asked;

    for (std::size_t turn = 0; turn < config.max_turns; ++turn) {
        const std::size_t id = select_question(policy, belief, scene, bank, asked, rng);
        asked.push_back(id);
        const Question& q = bank.question(id);
        Answer a = answer_fn(scene, q);
        result.dialogue.turns.emplace_back(q, a);

        if (config.belief_from_filter) {
            std::vector<std::size_t> alive =
                consistent_candidates(scene, result.dialogue, bank);
            belief.assign(scene.objects.size(), 0.0);
            if (alive.empty()) {
                belief.assign(scene.objects.size(),
                              1.0 / static_cast<double>(scene.objects.size()));
            } else {
                for (std::size_t i : alive)
                    belief[i] = 1.0 / static_cast<double>(alive.size());
            }
        } else {
            Vec h = encode_dialogue(guesser, result.dialogue, bank);
            belief = score_candidates(guesser, h, scene, bank);
        }
        result.beliefs.push_back(belief);
        if (*std::max_element(belief.begin(), belief.end()) > config.stop_threshold) break;
    }

    std::size_t best = 0;
    for (std::size_t k = 1; k < belief.size(); ++k)
        if (belief[k] > belief[best]) best = k;
    result.predicted = best;
    result.success = result.predicted == result.target;
    return result;
}

GameplayStats evaluate_gameplay(const std::vector<Scene>& split, const AnswerFn& answer_fn,
                                const GuesserModel& guesser, const QuestionerPolicy& policy,
                                const QuestionBank& bank, const GameplayConfig& config,
                                std::uint64_t seed, std::vector<GameResult>* archive) {
    GameplayStats stats;
    Rng rng = Rng::named(seed, "gameplay");
    for (const auto& scene : split) {
        GameResult result = play_game(scene, answer_fn, guesser, policy, bank, config, rng);
        stats.games += 1;
        if (result.success) stats.successes += 1;
        if (archive) archive->push_back(std::move(result));
    }
    stats.accuracy =
        stats.games ? static_cast<double>(stats.successes) / static_cast<double>(stats.games)
                    : 0.0;
    return stats;
}

void write_archive(const std::string& path, const std::vector<GameResult>& results) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open archive for writing: " + path);
    for (const auto& r : results) {
        json turns = json::array();
        for (const auto& [q, a] : r.dialogue.turns)
            turns.push_back({{"qtype", qtype_name(q.qtype)},
                             {"argument", q.argument},
                             {"text", q.text},
                             {"answer", answer_name(a)}});
        json doc = {{"scene_id", r.scene_id},
                    {"turns", turns},
                    {"predicted", r.predicted},
                    {"target", r.target},
                    {"success", r.success}};
        out << doc.dump() << "\n";
    }
}

std::vector<GameResult> read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open archive: " + path);
    std::vector<GameResult> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json doc = json::parse(line);
            GameResult r;
            r.scene_id = doc.at("scene_id").get<std::string>();
            r.predicted = doc.at("predicted").get<std::size_t>();
            r.target = doc.at("target").get<std::size_t>();
            r.success = doc.at("success").get<bool>();
            r.dialogue.scene_id = r.scene_id;
            for (const auto& jt : doc.at("turns")) {
                Question q;
                q.qtype = qtype_from_name(jt.at("qtype").get<std::string>());
                q.argument = jt.at("argument").get<int>();
                q.text = jt.at("text").get<std::string>();
                r.dialogue.turns.emplace_back(
                    q, answer_from_name(jt.at("answer").get<std::string>()));
            }
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw parse_error(path + ": malformed game at line " + std::to_string(line_no) +
                              ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> modulo_n_train(std::vector<ScheduledTask> tasks, std::size_t n,
                                        std::size_t epochs) {
    if (n < 1) throw config_error("modulo_n_train: n must be >= 1");
    if (tasks.empty()) throw config_error("modulo_n_train: no tasks");
    std::vector<std::string> schedule;
    std::size_t other = 0;
    for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
        std::size_t task_idx;
        if (epoch % n == 0 || tasks.size() == 1) {
            task_idx = 0;
        } else {
            task_idx = 1 + other % (tasks.size() - 1);
            ++other;
        }
        tasks[task_idx].run(epoch);
        schedule.push_back(tasks[task_idx].name);
    }
    return schedule;
}

void write_schedule(const std::string& path, const std::vector<std::string>& schedule) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open schedule for writing: " + path);
    for (std::size_t i = 0; i < schedule.size(); ++i)
        out << (i + 1) << "," << schedule[i] << "\n";
}

std::vector<std::string> read_schedule(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open schedule: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw parse_error("bad schedule line: " + line);
        out.push_back(line.substr(comma + 1));
    }
    return out;
}

}  // namespace guesslab
