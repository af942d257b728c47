#include "guesslab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "guesslab/common.hpp"

namespace guesslab {

namespace fs = std::filesystem;

RunPaths RunPaths::at(const std::string& root) {
    RunPaths p;
    p.root = root;
    p.data = root + "/data";
    p.ckpt = root + "/ckpt";
    p.logs = root + "/logs";
    p.reports = root + "/reports";
    p.archives = root + "/archives";
    return p;
}

namespace {

void make_dirs(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw config_error("cannot create directory " + path + ": " + ec.message());
}

}  // namespace

void RunPaths::ensure_generate() const {
    make_dirs(data);
}

void RunPaths::ensure_train() const {
    make_dirs(ckpt);
    make_dirs(logs);
}

void RunPaths::ensure_eval() const {
    make_dirs(reports);
    make_dirs(archives);
}

std::set<QType> disabled_qtypes(const Config& config) {
    std::set<QType> out;
    std::stringstream ss(config.get_string("world.disabled_qtypes"));
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (token.empty()) continue;
        out.insert(qtype_from_name(token));
    }
    return out;
}

Dataset load_dataset(const RunPaths& paths) {
    const std::string vocab_path = paths.data + "/vocab.json";
    if (!fs::exists(vocab_path))
        throw config_error("dataset not found at " + paths.data + "; run generate first");
    Dataset ds;
    ds.vocab = read_vocabulary(vocab_path);
    ds.train = read_scenes(paths.data + "/train.jsonl");
    ds.val = read_scenes(paths.data + "/val.jsonl");
    ds.test = read_scenes(paths.data + "/test.jsonl");
    ds.nd_test = read_scenes(paths.data + "/nd_test.jsonl");
    ds.od_test = read_scenes(paths.data + "/od_test.jsonl");
    return ds;
}

ClassifierConfig classifier_config(const Config& config) {
    ClassifierConfig c;
    c.hidden = static_cast<std::size_t>(config.get_long("classifier.hidden"));
    c.lr = config.get_double("classifier.lr");
    c.epochs = static_cast<std::size_t>(config.get_long("classifier.epochs"));
    c.batch = static_cast<std::size_t>(config.get_long("classifier.batch"));
    c.patience = static_cast<std::size_t>(config.get_long("classifier.patience"));
    return c;
}

DenseNet make_category_classifier(const CategoryVocabulary& vocab,
                                  const ClassifierConfig& config, Rng& rng) {
    const std::size_t n_classes = vocab.in_domain_ids().size();
    return DenseNet::make({vocab.d_o, config.hidden, n_classes},
                          {Activation::Relu, Activation::Softmax}, rng);
}

namespace {

struct LabeledVec {
    const Vec* v;
    int label;
};

std::vector<LabeledVec> labeled_objects(const std::vector<Scene>& scenes,
                                        const CategoryVocabulary& vocab) {
    std::vector<LabeledVec> out;
    for (const auto& scene : scenes) {
        for (const auto& obj : scene.objects) {
            int idx = vocab.in_domain_index(obj.category);
            if (idx >= 0) out.push_back({&obj.perceptual, idx});
        }
    }
    return out;
}

}  // namespace

ClassifierCurve train_category_classifier(DenseNet& net, const std::vector<Scene>& train,
                                          const std::vector<Scene>& val,
                                          const CategoryVocabulary& vocab,
                                          const ClassifierConfig& config, Rng& rng) {
    std::vector<LabeledVec> data = labeled_objects(train, vocab);
    if (data.empty()) throw training_error("train_category_classifier: no labeled objects");

    ParamPack pack;
    pack.nets.push_back(&net);
    AdamState adam = AdamState::make(pack.count(), config.lr);

    ClassifierCurve curve;
    Vec best_params = pack.flatten();
    double best_acc = -1.0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(data);
        double epoch_loss = 0.0;
        std::size_t done = 0;
        while (done < data.size()) {
            const std::size_t take = std::min(config.batch, data.size() - done);
            Vec grads(pack.count(), 0.0);
            for (std::size_t b = 0; b < take; ++b) {
                const LabeledVec& s = data[done + b];
                ForwardTrace trace;
                Vec probs = forward_traced(net, *s.v, trace);
                const std::size_t y = static_cast<std::size_t>(s.label);
                const double p = std::max(probs[y], 1e-12);
                epoch_loss += -std::log(p);
                Vec upstream(probs.size(), 0.0);
                upstream[y] = -1.0 / p;
                BackwardResult back = backward_traced(net, trace, upstream);
                Vec flat;
                append_grads(back.grads, flat);
                for (std::size_t k = 0; k < flat.size(); ++k) grads[k] += flat[k];
            }
            for (double& g : grads) g /= static_cast<double>(take);
            Vec flat_params = pack.flatten();
            adam_step(flat_params, grads, adam, "classifier");
            pack.load(flat_params);
            done += take;
        }
        epoch_loss /= static_cast<double>(data.size());
        if (!std::isfinite(epoch_loss))
            throw training_error("train_category_classifier: diverged at epoch " +
                                 std::to_string(epoch));
        curve.train_loss.push_back(epoch_loss);
        const double acc = classifier_accuracy(net, val, vocab);
        curve.val_accuracy.push_back(acc);
        if (acc > best_acc) {
            best_acc = acc;
            best_params = pack.flatten();
            curve.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    pack.load(best_params);
    return curve;
}

double classifier_accuracy(const DenseNet& net, const std::vector<Scene>& scenes,
                           const CategoryVocabulary& vocab) {
    std::size_t correct = 0, total = 0;
    for (const auto& scene : scenes) {
        for (const auto& obj : scene.objects) {
            int idx = vocab.in_domain_index(obj.category);
            if (idx < 0) continue;
            Vec probs = net.forward(obj.perceptual);
            std::size_t pred = 0;
            for (std::size_t k = 1; k < probs.size(); ++k)
                if (probs[k] > probs[pred]) pred = k;
            if (pred == static_cast<std::size_t>(idx)) ++correct;
            ++total;
        }
    }
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

void cmd_generate(const Config& config, std::uint64_t seed, const RunPaths& paths,
                  std::ostream& log) {
    paths.ensure_generate();
    const WorldConfig world = config.world_config();
    const SplitConfig sizes = config.split_config();

    CategoryVocabulary vocab = generate_world(world, seed);
    SplitSet splits = build_splits(vocab, world, sizes, seed);

    write_vocabulary(paths.data + "/vocab.json", vocab);
    write_scenes(paths.data + "/train.jsonl", splits.train);
    write_scenes(paths.data + "/val.jsonl", splits.val);
    write_scenes(paths.data + "/test.jsonl", splits.test);
    write_scenes(paths.data + "/nd_test.jsonl", splits.nd_test);
    write_scenes(paths.data + "/od_test.jsonl", splits.od_test);

    QuestionBank bank(vocab, disabled_qtypes(config));
    write_template_table(paths.data + "/templates_v1.txt", bank);
    Lexicon::from_vocabulary(vocab).save(paths.data + "/lexicon_v1.txt");

    log << "world: " << vocab.categories.size() << " categories / "
        << vocab.supercategories.size() << " supercategories"
        << " (in-domain " << vocab.ids_in(Domain::InDomain).size() << ", nd "
        << vocab.ids_in(Domain::NearHeldout).size() << ", od "
        << vocab.ids_in(Domain::OutHeldout).size() << ")\n";
    log << "splits: train " << splits.train.size() << ", val " << splits.val.size()
        << ", test " << splits.test.size() << ", nd_test " << splits.nd_test.size()
        << ", od_test " << splits.od_test.size() << "\n";
}

namespace {

std::string component_file_stem(const std::string& component) {
    std::string stem = component;
    std::replace(stem.begin(), stem.end(), ':', '_');
    return stem;
}

void write_loss_csv(const std::string& path, const std::vector<double>& train_loss,
                    const std::vector<double>& val_metric, const std::string& val_name) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw config_error("cannot open loss csv for writing: " + path);
    out << "epoch,train_loss," << val_name << "\n";
    const std::size_t rows = std::max(train_loss.size(), val_metric.size());
    for (std::size_t i = 0; i < rows; ++i) {
        out << (i + 1) << ",";
        if (i < train_loss.size()) out << format_double(train_loss[i]);
        out << ",";
        if (i < val_metric.size()) out << format_double(val_metric[i]);
        out << "\n";
    }
}

ImaginationModel load_imagination(const RunPaths& paths) {
    const std::string path = paths.ckpt + "/imagination.ckpt";
    if (!fs::exists(path)) throw dependency_error("missing checkpoint: " + path);
    return ImaginationModel::from_checkpoint(Checkpoint::load(path));
}

DenseNet load_classifier(const RunPaths& paths) {
    const std::string path = paths.ckpt + "/classifier.ckpt";
    if (!fs::exists(path)) throw dependency_error("missing checkpoint: " + path);
    Checkpoint ckpt = Checkpoint::load(path);
    if (ckpt.kind != "classifier")
        throw parse_error("expected classifier checkpoint, got " + ckpt.kind);
    return ckpt.restore_net("classifier");
}

OracleModel load_oracle(const RunPaths& paths, const std::string& features,
                        const ImaginationModel* imagination) {
    const std::string path = paths.ckpt + "/oracle_" + features + ".ckpt";
    if (!fs::exists(path)) throw dependency_error("missing checkpoint: " + path);
    OracleModel model = OracleModel::from_checkpoint(Checkpoint::load(path));
    if (model.uses(OracleFeature::Imagination)) {
        if (!imagination)
            throw dependency_error("oracle " + features +
                                   " needs the imagination checkpoint attached");
        model.imagination = imagination;
    }
    return model;
}

GuesserModel load_guesser(const RunPaths& paths, ReprMode mode,
                          const ImaginationModel* imagination, const DenseNet* classifier) {
    const std::string path = paths.ckpt + "/guesser_" + repr_mode_name(mode) + ".ckpt";
    if (!fs::exists(path)) throw dependency_error("missing checkpoint: " + path);
    GuesserModel model = GuesserModel::from_checkpoint(Checkpoint::load(path));
    if (mode == ReprMode::Imagination) model.imagination = imagination;
    if (mode == ReprMode::PredCat) model.classifier = classifier;
    return model;
}

std::vector<ReprMode> available_guesser_modes(const RunPaths& paths) {
    std::vector<ReprMode> out;
    for (int m = 0; m <= static_cast<int>(ReprMode::Imagination); ++m) {
        const ReprMode mode = static_cast<ReprMode>(m);
        if (fs::exists(paths.ckpt + "/guesser_" + repr_mode_name(mode) + ".ckpt"))
            out.push_back(mode);
    }
    return out;
}

void train_one_guesser(const Config& config, std::uint64_t seed, const RunPaths& paths,
                       ReprMode mode, const Dataset& ds, const QuestionBank& bank,
                       std::ostream& log) {
    const GuesserTrainConfig gcfg = config.guesser_config();

    ImaginationModel imagination;
    DenseNet classifier;
    GuesserModel model;

    Rng rng = Rng::named(seed, "train.guesser." + repr_mode_name(mode));
    model = GuesserModel::make(mode, bank, gcfg, rng);
    if (mode == ReprMode::Imagination) {
        imagination = load_imagination(paths);
        model.imagination = &imagination;
    }
    if (mode == ReprMode::PredCat) {
        classifier = load_classifier(paths);
        model.classifier = &classifier;
    }

    auto train_gold = synthesize_gold_set(ds.train, bank, seed ^ fnv1a64("gold.train"),
                                          gcfg.max_turns);
    auto val_gold =
        synthesize_gold_set(ds.val, bank, seed ^ fnv1a64("gold.val"), gcfg.max_turns);

    GuesserCurve curve =
        train_guesser(model, ds.train, train_gold, ds.val, val_gold, bank, gcfg, rng);

    const std::string stem = component_file_stem(model.kind_tag());
    model.to_checkpoint().save(paths.ckpt + "/" + stem + ".ckpt");
    write_loss_csv(paths.logs + "/" + stem + "_loss.csv", curve.train_loss,
                   curve.val_accuracy, "val_accuracy");
    log << model.kind_tag() << ": best val accuracy "
        << (curve.val_accuracy.empty()
                ? 0.0
                : *std::max_element(curve.val_accuracy.begin(), curve.val_accuracy.end()))
        << " at epoch " << curve.best_epoch << "\n";
}

void train_one_oracle(const Config& config, std::uint64_t seed, const RunPaths& paths,
                      const std::string& features_spec, const Dataset& ds,
                      const QuestionBank& bank, std::ostream& log) {
    const OracleTrainConfig ocfg = config.oracle_config();
    Rng rng = Rng::named(seed, "train.oracle." + features_spec);

    ImaginationModel imagination;
    OracleModel model;
    if (features_spec == "majority") {
        model = OracleModel::make_majority();
    } else {
        model = OracleModel::make(parse_feature_set(features_spec), bank, ocfg, rng);
        if (model.uses(OracleFeature::Imagination)) {
            imagination = load_imagination(paths);
            model.imagination = &imagination;
        }
    }
    OracleCurve curve = train_oracle(model, ds.train, ds.val, bank, ocfg, rng);

    const std::string stem = component_file_stem(model.kind_tag());
    model.to_checkpoint().save(paths.ckpt + "/" + stem + ".ckpt");
    write_loss_csv(paths.logs + "/" + stem + "_loss.csv", curve.train_loss,
                   curve.val_accuracy, "val_accuracy");
    log << model.kind_tag() << ": best val accuracy "
        << (curve.val_accuracy.empty()
                ? 0.0
                : *std::max_element(curve.val_accuracy.begin(), curve.val_accuracy.end()))
        << " at epoch " << curve.best_epoch << "\n";
}

}  // namespace

std::string matched_oracle_features(ReprMode mode) {
    switch (mode) {
        case ReprMode::Category:
        case ReprMode::PredCat: return "question+spatial+category";
        case ReprMode::NoCat: return "question+spatial";
        case ReprMode::Imagination: return "question+spatial+imagination";
    }
    throw validation_error("unknown repr mode");
}

void cmd_train(const Config& config, std::uint64_t seed, const RunPaths& paths,
               const std::string& component, std::ostream& log) {
    paths.ensure_train();
    Dataset ds = load_dataset(paths);
    QuestionBank bank(ds.vocab, disabled_qtypes(config));

    if (component == "imagination") {
        ImaginationConfig icfg = config.imagination_config();
        Rng rng = Rng::named(seed, "train.imagination");
        ImaginationModel model = ImaginationModel::make(
            ds.vocab.d_o, icfg, ds.vocab.in_domain_ids().size(), rng);
        TrainCurve curve = train_imagination(model, ds.train, ds.val, ds.vocab, icfg, rng);
        model.to_checkpoint().save(paths.ckpt + "/imagination.ckpt");
        write_loss_csv(paths.logs + "/imagination_loss.csv", curve.train_loss,
                       curve.val_loss, "val_loss");
        log << "imagination: best val loss at epoch " << curve.best_epoch << " ("
            << curve.train_loss.size() << " epochs run)\n";
        return;
    }
    if (component == "classifier") {
        ClassifierConfig ccfg = classifier_config(config);
        Rng rng = Rng::named(seed, "train.classifier");
        DenseNet net = make_category_classifier(ds.vocab, ccfg, rng);
        ClassifierCurve curve =
            train_category_classifier(net, ds.train, ds.val, ds.vocab, ccfg, rng);
        Checkpoint ckpt;
        ckpt.kind = "classifier";
        ckpt.add_net("classifier", net);
        ckpt.save(paths.ckpt + "/classifier.ckpt");
        write_loss_csv(paths.logs + "/classifier_loss.csv", curve.train_loss,
                       curve.val_accuracy, "val_accuracy");
        log << "classifier: val accuracy "
            << classifier_accuracy(net, ds.val, ds.vocab) << "\n";
        return;
    }
    if (component.rfind("oracle:", 0) == 0) {
        train_one_oracle(config, seed, paths, component.substr(7), ds, bank, log);
        return;
    }
    if (component.rfind("guesser:", 0) == 0) {
        train_one_guesser(config, seed, paths, repr_mode_from_name(component.substr(8)), ds,
                          bank, log);
        return;
    }
    if (component == "joint") {
        // Modulo-n schedule: the guesser objective runs every n-th epoch,
        // oracle training fills the remaining epochs.
        const std::size_t n = static_cast<std::size_t>(config.get_long("train.modulo_n"));
        const std::size_t epochs =
            static_cast<std::size_t>(config.get_long("train.joint_epochs"));
        const GuesserTrainConfig gcfg = config.guesser_config();
        const OracleTrainConfig ocfg = config.oracle_config();

        Rng grng = Rng::named(seed, "train.joint.guesser");
        Rng orng = Rng::named(seed, "train.joint.oracle");
        GuesserModel guesser = GuesserModel::make(ReprMode::Category, bank, gcfg, grng);
        OracleModel oracle =
            OracleModel::make(parse_feature_set("question+spatial+category"), bank, ocfg,
                              orng);

        auto train_gold = synthesize_gold_set(ds.train, bank, seed ^ fnv1a64("gold.train"),
                                              gcfg.max_turns);
        auto val_gold =
            synthesize_gold_set(ds.val, bank, seed ^ fnv1a64("gold.val"), gcfg.max_turns);

        GuesserTrainer gtrainer(guesser, ds.train, train_gold, ds.val, val_gold, bank, gcfg,
                                grng);
        OracleTrainer otrainer(oracle, ds.train, ds.val, bank, ocfg, orng);

        std::vector<ScheduledTask> tasks;
        tasks.push_back({"guesser", [&](std::size_t) { gtrainer.run_epoch(); }});
        tasks.push_back({"oracle", [&](std::size_t) { otrainer.run_epoch(); }});
        std::vector<std::string> schedule = modulo_n_train(std::move(tasks), n, epochs);
        write_schedule(paths.logs + "/joint_schedule.csv", schedule);

        guesser.to_checkpoint().save(paths.ckpt + "/guesser_category.ckpt");
        oracle.to_checkpoint().save(paths.ckpt + "/oracle_question+spatial+category.ckpt");
        log << "joint: " << epochs << " epochs, guesser val accuracy "
            << gtrainer.val_accuracy() << ", oracle val accuracy " << otrainer.val_accuracy()
            << "\n";
        return;
    }
    throw config_error("unknown train component: " + component);
}

namespace {

struct EvalContext {
    const Config* config;
    std::uint64_t seed;
    const RunPaths* paths;
    Dataset ds;
    std::unique_ptr<QuestionBank> bank;
    ImaginationModel imagination;
    bool has_imagination = false;
    DenseNet classifier;
    bool has_classifier = false;

    const ImaginationModel* imagination_ptr() {
        if (!has_imagination) {
            imagination = load_imagination(*paths);
            has_imagination = true;
        }
        return &imagination;
    }
    const DenseNet* classifier_ptr() {
        if (!has_classifier) {
            classifier = load_classifier(*paths);
            has_classifier = true;
        }
        return &classifier;
    }
};

GameplayConfig gameplay_config(const Config& config) {
    GameplayConfig g;
    g.max_turns = static_cast<std::size_t>(config.get_long("eval.max_turns"));
    g.stop_threshold = config.get_double("eval.stop_threshold");
    g.belief_from_filter = config.get_bool("eval.belief_from_filter");
    return g;
}

std::vector<Scene> limited(const std::vector<Scene>& scenes, long limit) {
    if (limit <= 0 || static_cast<std::size_t>(limit) >= scenes.size()) return scenes;
    return std::vector<Scene>(scenes.begin(), scenes.begin() + limit);
}

void eval_oracle_suite(EvalContext& ctx, MetricsReport& report) {
    const OracleTrainConfig ocfg = ctx.config->oracle_config();
    bool any = false;
    for (const auto& entry : fs::directory_iterator(ctx.paths->ckpt)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("oracle_", 0) != 0 || entry.path().extension() != ".ckpt") continue;
        const std::string spec = name.substr(7, name.size() - 7 - 5);
        OracleModel model = load_oracle(
            *ctx.paths, spec,
            spec.find("imagination") != std::string::npos ? ctx.imagination_ptr() : nullptr);
        std::vector<std::size_t> correct, count;
        const double acc = oracle_accuracy(model, ctx.ds.test, *ctx.bank, ocfg,
                                           ctx.seed ^ fnv1a64("eval.oracle"), &correct,
                                           &count);
        report.set("oracle." + spec + ".accuracy", acc);
        auto table = per_type_accuracy(correct, count);
        for (const auto& [qtype, row] : table) {
            report.set("oracle." + spec + ".type." + qtype + ".accuracy", row.accuracy);
            report.set("oracle." + spec + ".type." + qtype + ".count",
                       static_cast<double>(row.count));
        }
        any = true;
    }
    if (!any)
        throw dependency_error("missing checkpoint: no oracle_*.ckpt under " +
                               ctx.paths->ckpt);
}

void eval_guesser_suite(EvalContext& ctx, MetricsReport& report) {
    const GuesserTrainConfig gcfg = ctx.config->guesser_config();
    auto modes = available_guesser_modes(*ctx.paths);
    if (modes.empty())
        throw dependency_error("missing checkpoint: no guesser_*.ckpt under " +
                               ctx.paths->ckpt);
    auto gold = synthesize_gold_set(ctx.ds.test, *ctx.bank,
                                    ctx.seed ^ fnv1a64("eval.gold"), gcfg.max_turns);
    for (ReprMode mode : modes) {
        GuesserModel model = load_guesser(
            *ctx.paths, mode,
            mode == ReprMode::Imagination ? ctx.imagination_ptr() : nullptr,
            mode == ReprMode::PredCat ? ctx.classifier_ptr() : nullptr);
        report.set("guesser." + repr_mode_name(mode) + ".accuracy",
                   guesser_accuracy(model, ctx.ds.test, gold, *ctx.bank));
    }
}

void eval_selfplay(EvalContext& ctx, MetricsReport& report, const std::string& metric_prefix,
                   const std::vector<Scene>& scenes, const std::string& archive_tag) {
    const GameplayConfig gp = gameplay_config(*ctx.config);
    const auto seeds = ctx.config->get_seed_list("eval.seeds");
    const bool gold_oracle = ctx.config->get_bool("eval.gold_answer_oracle");
    const long limit = ctx.config->get_long("eval.games_limit");
    const std::vector<Scene> split = limited(scenes, limit);

    auto modes = available_guesser_modes(*ctx.paths);
    if (modes.empty())
        throw dependency_error("missing checkpoint: no guesser_*.ckpt under " +
                               ctx.paths->ckpt);

    // Chance baseline: uniform random prediction.
    {
        double acc_sum = 0.0;
        for (std::uint64_t s : seeds) {
            Rng rng = Rng::named(ctx.seed ^ s, "eval.random." + archive_tag);
            std::size_t ok = 0;
            for (const auto& scene : split)
                if (rng.uniform_index(scene.objects.size()) == scene.target) ++ok;
            acc_sum += static_cast<double>(ok) / static_cast<double>(split.size());
        }
        report.set(metric_prefix + ".random.accuracy",
                   acc_sum / static_cast<double>(seeds.size()));
        double inv_sum = 0.0;
        for (const auto& scene : split)
            inv_sum += 1.0 / static_cast<double>(scene.objects.size());
        report.set(metric_prefix + ".chance_rate",
                   inv_sum / static_cast<double>(split.size()));
    }

    for (ReprMode mode : modes) {
        GuesserModel guesser = load_guesser(
            *ctx.paths, mode,
            mode == ReprMode::Imagination ? ctx.imagination_ptr() : nullptr,
            mode == ReprMode::PredCat ? ctx.classifier_ptr() : nullptr);
        OracleModel oracle;
        AnswerFn answer_fn;
        if (gold_oracle) {
            answer_fn = gold_answerer(*ctx.bank);
        } else {
            oracle = load_oracle(
                *ctx.paths, matched_oracle_features(mode),
                mode == ReprMode::Imagination ? ctx.imagination_ptr() : nullptr);
            answer_fn = model_answerer(oracle, *ctx.bank);
        }
        QuestionerPolicy policy;
        double acc_sum = 0.0;
        std::vector<GameResult> first_archive;
        for (std::size_t si = 0; si < seeds.size(); ++si) {
            std::vector<GameResult> archive;
            GameplayStats stats =
                evaluate_gameplay(split, answer_fn, guesser, policy, *ctx.bank, gp,
                                  ctx.seed ^ seeds[si], si == 0 ? &archive : nullptr);
            acc_sum += stats.accuracy;
            if (si == 0) first_archive = std::move(archive);
        }
        const double acc = acc_sum / static_cast<double>(seeds.size());
        report.set(metric_prefix + "." + repr_mode_name(mode) + ".accuracy", acc);

        const std::string archive_path = ctx.paths->archives + "/" + archive_tag + "_" +
                                         repr_mode_name(mode) + ".jsonl";
        write_archive(archive_path, first_archive);
        DialogueStats stats = dialogue_stats(first_archive);
        const std::string p = metric_prefix + "." + repr_mode_name(mode) + ".";
        report.set(p + "lexical_diversity", stats.lexical_diversity);
        report.set(p + "question_diversity", stats.question_diversity);
        report.set(p + "repeated_question_rate", stats.repeated_question_rate);
        report.set(p + "supercat_to_obj_attr_rate", stats.supercat_to_obj_attr_rate);
        report.set(p + "object_to_attr_rate", stats.object_to_attr_rate);
        report.set(p + "location_turn_rate", stats.location_turn_rate);
        report.set(p + "vocabulary_size", static_cast<double>(stats.vocabulary_size));
    }
}

void eval_attributes_suite(EvalContext& ctx, MetricsReport& report) {
    const GameplayConfig gp = gameplay_config(*ctx.config);
    const bool gold_oracle = ctx.config->get_bool("eval.gold_answer_oracle");
    const long probe_train_games = ctx.config->get_long("eval.probe_train_games");
    ProbeConfig pcfg;
    pcfg.lr = ctx.config->get_double("eval.probe_lr");
    pcfg.epochs = static_cast<std::size_t>(ctx.config->get_long("eval.probe_epochs"));

    auto modes = available_guesser_modes(*ctx.paths);
    if (modes.empty())
        throw dependency_error("missing checkpoint: no guesser_*.ckpt under " +
                               ctx.paths->ckpt);
    const std::vector<Scene> probe_train = limited(ctx.ds.train, probe_train_games);

    for (ReprMode mode : modes) {
        GuesserModel guesser = load_guesser(
            *ctx.paths, mode,
            mode == ReprMode::Imagination ? ctx.imagination_ptr() : nullptr,
            mode == ReprMode::PredCat ? ctx.classifier_ptr() : nullptr);
        OracleModel oracle;
        AnswerFn answer_fn;
        if (gold_oracle) {
            answer_fn = gold_answerer(*ctx.bank);
        } else {
            oracle = load_oracle(
                *ctx.paths, matched_oracle_features(mode),
                mode == ReprMode::Imagination ? ctx.imagination_ptr() : nullptr);
            answer_fn = model_answerer(oracle, *ctx.bank);
        }
        QuestionerPolicy policy;
        std::vector<GameResult> train_archive, test_archive;
        evaluate_gameplay(probe_train, answer_fn, guesser, policy, *ctx.bank, gp,
                          ctx.seed ^ fnv1a64("probe.train"), &train_archive);
        evaluate_gameplay(ctx.ds.test, answer_fn, guesser, policy, *ctx.bank, gp,
                          ctx.seed ^ fnv1a64("probe.test"), &test_archive);
        Rng rng = Rng::named(ctx.seed, "probe." + repr_mode_name(mode));
        ProbeScores scores = attribute_probe(guesser, *ctx.bank, probe_train, train_archive,
                                             ctx.ds.test, test_archive, pcfg, rng);
        const std::string p = "attributes." + repr_mode_name(mode) + ".";
        report.set(p + "a_f1", scores.abstract_f1);
        report.set(p + "s_f1", scores.situated_f1);
        report.set(p + "as_f1", scores.abstract_situated_f1);
        report.set(p + "l_f1", scores.location_f1);
    }
}

}  // namespace

void cmd_eval(const Config& config, std::uint64_t seed, const RunPaths& paths,
              const std::string& suite, std::ostream& log) {
    paths.ensure_eval();
    EvalContext ctx;
    ctx.config = &config;
    ctx.seed = seed;
    ctx.paths = &paths;
    ctx.ds = load_dataset(paths);
    ctx.bank = std::make_unique<QuestionBank>(ctx.ds.vocab, disabled_qtypes(config));

    MetricsReport report;
    if (suite == "oracle") {
        eval_oracle_suite(ctx, report);
    } else if (suite == "guesser") {
        eval_guesser_suite(ctx, report);
    } else if (suite == "gameplay") {
        eval_selfplay(ctx, report, "gameplay", ctx.ds.test, "gameplay");
    } else if (suite == "zeroshot") {
        eval_selfplay(ctx, report, "zeroshot.nd", ctx.ds.nd_test, "zeroshot_nd");
        eval_selfplay(ctx, report, "zeroshot.od", ctx.ds.od_test, "zeroshot_od");
    } else if (suite == "attributes") {
        eval_attributes_suite(ctx, report);
    } else if (suite == "all") {
        eval_oracle_suite(ctx, report);
        eval_guesser_suite(ctx, report);
        eval_selfplay(ctx, report, "gameplay", ctx.ds.test, "gameplay");
        eval_selfplay(ctx, report, "zeroshot.nd", ctx.ds.nd_test, "zeroshot_nd");
        eval_selfplay(ctx, report, "zeroshot.od", ctx.ds.od_test, "zeroshot_od");
        eval_attributes_suite(ctx, report);
        for (ReprMode mode : available_guesser_modes(paths)) {
            const std::string m = repr_mode_name(mode);
            const auto& v = report.values;
            auto need = {std::string("gameplay.") + m + ".accuracy",
                         "attributes." + m + ".as_f1", "zeroshot.nd." + m + ".accuracy",
                         "zeroshot.od." + m + ".accuracy"};
            bool ok = true;
            for (const auto& k : need)
                if (!v.count(k)) ok = false;
            if (!ok) continue;
            report.set("grolla." + m,
                       grolla({v.at("gameplay." + m + ".accuracy"),
                               v.at("attributes." + m + ".as_f1"),
                               (v.at("zeroshot.nd." + m + ".accuracy") +
                                v.at("zeroshot.od." + m + ".accuracy")) /
                                   2.0}));
        }
    } else {
        throw config_error("unknown eval suite: " + suite);
    }

    report.write_json(paths.reports + "/" + suite + "_report.json");
    report.write_csv(paths.reports + "/" + suite + "_report.csv");
    log << suite << ": " << report.values.size() << " metrics written\n";
}

void cmd_compare(const std::vector<std::string>& report_paths, const std::string& out_csv,
                 std::ostream& log) {
    if (report_paths.size() < 2)
        throw config_error("compare needs at least two report files");
    std::vector<MetricsReport> reports;
    for (const auto& p : report_paths) reports.push_back(MetricsReport::read_json(p));

    // Metrics present in every report.
    std::vector<std::string> keys;
    for (const auto& [k, v] : reports.front().values) {
        bool everywhere = true;
        for (std::size_t i = 1; i < reports.size(); ++i)
            if (!reports[i].values.count(k)) everywhere = false;
        if (everywhere) keys.push_back(k);
    }
    if (keys.empty()) throw validation_error("compare: no overlapping metrics");

    std::ostringstream csv;
    csv << "metric,base";
    for (std::size_t i = 1; i < reports.size(); ++i) csv << ",report" << i << ",delta" << i;
    csv << "\n";
    for (const auto& k : keys) {
        const double base = reports.front().values.at(k);
        csv << k << "," << format_double(base);
        for (std::size_t i = 1; i < reports.size(); ++i) {
            const double v = reports[i].values.at(k);
            csv << "," << format_double(v) << "," << format_double(v - base);
        }
        csv << "\n";
    }
    if (!out_csv.empty()) {
        std::ofstream out(out_csv, std::ios::binary);
        if (!out) throw config_error("cannot open compare output: " + out_csv);
        out << csv.str();
    }
    log << csv.str();
}

}  // namespace guesslab
