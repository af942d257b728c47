#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "guesslab/common.hpp"
#include "guesslab/pipeline.hpp"

namespace {

// Exit codes: 0 success, 2 config/path error, 3 dependency error,
// 4 numeric/training failure.
constexpr int kExitConfig = 2;
constexpr int kExitDependency = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::vector<std::string> overrides;
    std::string out_dir = "runs";
};

guesslab::Config resolve_config(const CommonArgs& args) {
    guesslab::Config cfg = args.config_path.empty()
                               ? guesslab::Config::defaults()
                               : guesslab::Config::load(args.config_path);
    for (const auto& kv : args.overrides) cfg.apply_override(kv);
    return cfg;
}

std::uint64_t resolve_seed(const CommonArgs& args, const guesslab::Config& cfg) {
    return args.seed_given ? args.seed
                           : static_cast<std::uint64_t>(cfg.get_long("seed"));
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "config file (key=value lines)");
    cmd->add_option("--seed", args.seed, "root seed")->each([&](const std::string&) {
        args.seed_given = true;
    });
    cmd->add_option("--set", args.overrides, "override, key=value (repeatable)");
    cmd->add_option("--out", args.out_dir, "run directory (default: runs)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic guessing-game pipeline with label-free object embeddings"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string component;
    std::string suite = "all";
    std::vector<std::string> compare_reports;

    CLI::App* generate = app.add_subcommand("generate", "generate world and scene splits");
    add_common(generate, args);

    CLI::App* train = app.add_subcommand("train", "train a component");
    add_common(train, args);
    train->add_option("component", component,
                      "imagination | classifier | oracle:<features> | guesser:<mode> | joint")
        ->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate trained checkpoints");
    add_common(eval, args);
    eval->add_option("suite", suite, "oracle | guesser | gameplay | zeroshot | attributes | all");

    CLI::App* compare = app.add_subcommand("compare", "delta table between metric reports");
    add_common(compare, args);
    compare->add_option("reports", compare_reports, "report JSON files")->expected(-2);

    CLI11_PARSE(app, argc, argv);

    try {
        if (compare->parsed()) {
            guesslab::cmd_compare(compare_reports, "", std::cout);
            return 0;
        }
        guesslab::Config cfg = resolve_config(args);
        const std::uint64_t seed = resolve_seed(args, cfg);
        guesslab::RunPaths paths = guesslab::RunPaths::at(args.out_dir);
        if (generate->parsed()) {
            guesslab::cmd_generate(cfg, seed, paths, std::cout);
        } else if (train->parsed()) {
            guesslab::cmd_train(cfg, seed, paths, component, std::cout);
        } else if (eval->parsed()) {
            guesslab::cmd_eval(cfg, seed, paths, suite, std::cout);
        }
        return 0;
    } catch (const guesslab::dependency_error& e) {
        std::cerr << "dependency error: " << e.what() << "\n";
        return kExitDependency;
    } catch (const guesslab::numeric_error& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const guesslab::training_error& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const guesslab::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const guesslab::parse_error& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const guesslab::validation_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
