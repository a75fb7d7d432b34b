// Command-line driver: train | attack | eig | sweep-t | fcgen | eval.
// Every run writes its resolved configuration next to its outputs so any
// result can be reproduced byte-for-byte with --config.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sodef/attacks.hpp"
#include "sodef/checkpoint.hpp"
#include "sodef/data.hpp"
#include "sodef/evaluate.hpp"
#include "sodef/fcgen.hpp"
#include "sodef/model.hpp"
#include "sodef/rng.hpp"
#include "sodef/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DatasetOpts {
    std::string dataset = "blobs";
    std::size_t classes = 3;
    std::size_t dim = 8;
    std::size_t per_class = 200;
    double spread = 0.5;
    double noise = 0.1;
    std::string mnist_images, mnist_labels;
    std::size_t limit = 2000;
    double train_frac = 0.5;
};

struct ModelOpts {
    std::string variant = "mlp2";
    std::string fc = "simplex";
    std::string solver = "rk38";
    double T = 5.0;
    double step = 0.05;
    double rtol = 1e-6;
    double atol = 1e-6;
    std::size_t feature_dim = 8;
    std::vector<std::size_t> hidden{32};
};

struct TrainOpts {
    double alpha1 = 1.0, alpha2 = 0.05, alpha3 = 0.05;
    std::size_t epochs_phase1 = 10, epochs_phase2 = 40;
    double lr = 0.05;
    std::size_t batch = 32;
    double exp_clamp = 30.0;
    std::string preset = "desk";
    bool train_head = false;
    bool freeze_extractor = false;
};

struct AttackOpts {
    std::string attack = "pgd";
    double epsilon = 0.1;
    std::size_t pgd_iters = 20;
    double pgd_alpha = 0.1;
    bool random_start = false;
    std::vector<double> sweep_epsilon;
};

void add_dataset_opts(CLI::App* cmd, DatasetOpts& o) {
    cmd->add_option("--dataset", o.dataset, "Dataset family")
        ->check(CLI::IsMember({"blobs", "moons", "mnist"}))
        ->capture_default_str();
    cmd->add_option("--classes", o.classes, "Blob class count")->capture_default_str();
    cmd->add_option("--dim", o.dim, "Blob input dimension")->capture_default_str();
    cmd->add_option("--per-class", o.per_class, "Samples per class")->capture_default_str();
    cmd->add_option("--spread", o.spread, "Blob noise std")->capture_default_str();
    cmd->add_option("--noise", o.noise, "Moons noise std")->capture_default_str();
    cmd->add_option("--mnist-images", o.mnist_images, "IDX image file");
    cmd->add_option("--mnist-labels", o.mnist_labels, "IDX label file");
    cmd->add_option("--limit", o.limit, "Max IDX samples")->capture_default_str();
    cmd->add_option("--train-frac", o.train_frac, "Train split fraction")->capture_default_str();
}

void add_model_opts(CLI::App* cmd, ModelOpts& o) {
    cmd->add_option("--variant", o.variant, "ODE field variant")
        ->check(CLI::IsMember({"mlp2", "neg_gram", "affine"}))
        ->capture_default_str();
    cmd->add_option("--fc", o.fc, "FC head kind")
        ->check(CLI::IsMember({"simplex", "trainable", "orthogonal"}))
        ->capture_default_str();
    cmd->add_option("--solver", o.solver, "ODE solver")
        ->check(CLI::IsMember({"euler", "midpoint", "heun2", "rk38", "dopri5"}))
        ->capture_default_str();
    cmd->add_option("--T", o.T, "Integration time")->capture_default_str();
    cmd->add_option("--step", o.step, "Fixed solver step")->capture_default_str();
    cmd->add_option("--rtol", o.rtol, "dopri5 relative tolerance")->capture_default_str();
    cmd->add_option("--atol", o.atol, "dopri5 absolute tolerance")->capture_default_str();
    cmd->add_option("--feature-dim", o.feature_dim, "Feature dimension n")->capture_default_str();
    cmd->add_option("--hidden", o.hidden, "Extractor hidden widths")->capture_default_str();
}

void add_train_opts(CLI::App* cmd, TrainOpts& o) {
    cmd->add_option("--alpha1", o.alpha1, "Weight on ||f(z0)||")->capture_default_str();
    cmd->add_option("--alpha2", o.alpha2, "Weight on exp(trace)")->capture_default_str();
    cmd->add_option("--alpha3", o.alpha3, "Weight on exp(dominance excess)")
        ->capture_default_str();
    cmd->add_option("--epochs-phase1", o.epochs_phase1, "Extractor-only epochs")
        ->capture_default_str();
    cmd->add_option("--epochs-phase2", o.epochs_phase2, "Joint epochs")->capture_default_str();
    cmd->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
    cmd->add_option("--batch", o.batch, "Minibatch size")->capture_default_str();
    cmd->add_option("--exp-clamp", o.exp_clamp, "Clamp on exp arguments")->capture_default_str();
    cmd->add_option("--preset", o.preset, "Epoch preset (desk: 10+40, paper: 30+120)")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    cmd->add_flag("--train-head", o.train_head, "Update the FC head in phase 2");
    cmd->add_flag("--freeze-extractor", o.freeze_extractor, "Freeze the extractor in phase 2");
}

void add_attack_opts(CLI::App* cmd, AttackOpts& o) {
    cmd->add_option("--attack", o.attack, "Attack kind")
        ->check(CLI::IsMember({"fgsm", "pgd"}))
        ->capture_default_str();
    cmd->add_option("--epsilon", o.epsilon, "l-inf budget")->capture_default_str();
    cmd->add_option("--pgd-iters", o.pgd_iters, "PGD iterations")->capture_default_str();
    cmd->add_option("--pgd-alpha", o.pgd_alpha, "PGD step size")->capture_default_str();
    cmd->add_flag("--random-start", o.random_start, "Random start inside the ball");
    cmd->add_option("--sweep-epsilon", o.sweep_epsilon, "Evaluate several epsilons");
}

std::pair<sodef::LabeledDataset, sodef::LabeledDataset> build_splits(const DatasetOpts& o,
                                                                     std::uint64_t seed) {
    sodef::LabeledDataset all;
    if (o.dataset == "blobs") {
        all = sodef::make_blobs(o.classes, o.dim, o.per_class, o.spread, seed);
    } else if (o.dataset == "moons") {
        all = sodef::make_moons(o.per_class, o.noise, seed);
    } else {
        if (o.mnist_images.empty() || o.mnist_labels.empty())
            throw std::runtime_error("mnist dataset needs --mnist-images and --mnist-labels");
        all = sodef::load_idx(o.mnist_images, o.mnist_labels, o.limit);
    }
    return sodef::shuffle_split(all, o.train_frac, seed);
}

sodef::SolverConfig build_solver(const ModelOpts& o) {
    sodef::SolverConfig cfg;
    cfg.kind = sodef::solver_kind_from_string(o.solver);
    cfg.step = o.step;
    cfg.rtol = o.rtol;
    cfg.atol = o.atol;
    cfg.t_end = o.T;
    cfg.validate();
    return cfg;
}

sodef::SodefModel build_model(const ModelOpts& o, std::size_t d, std::size_t num_classes,
                              std::uint64_t seed) {
    return sodef::make_model(d, o.hidden, o.feature_dim, num_classes,
                             sodef::field_variant_from_string(o.variant),
                             sodef::head_kind_from_string(o.fc), build_solver(o), seed);
}

sodef::TrainConfig build_train_config(CLI::App* cmd, const TrainOpts& o, std::uint64_t seed) {
    sodef::TrainConfig cfg;
    if (o.preset == "paper") cfg = sodef::TrainConfig::paper_preset();
    cfg.alpha1 = o.alpha1;
    cfg.alpha2 = o.alpha2;
    cfg.alpha3 = o.alpha3;
    if (o.preset != "paper" || cmd->count("--epochs-phase1")) cfg.epochs_phase1 = o.epochs_phase1;
    if (o.preset != "paper" || cmd->count("--epochs-phase2")) cfg.epochs_phase2 = o.epochs_phase2;
    cfg.lr = o.lr;
    cfg.batch = o.batch;
    cfg.exp_clamp = o.exp_clamp;
    cfg.seed = seed;
    cfg.train_head = o.train_head;
    cfg.freeze_extractor_phase2 = o.freeze_extractor;
    cfg.validate();
    // The saved run_config.ini must replay byte-for-byte, so the written
    // epoch counts are the preset-resolved ones, not the struct defaults.
    cmd->get_option("--epochs-phase1")->default_str(std::to_string(cfg.epochs_phase1));
    cmd->get_option("--epochs-phase2")->default_str(std::to_string(cfg.epochs_phase2));
    return cfg;
}

sodef::AttackConfig build_attack_config(const AttackOpts& o, const sodef::LabeledDataset& data,
                                        std::uint64_t seed) {
    sodef::AttackConfig cfg = sodef::attack_config_for(data);
    cfg.kind = sodef::attack_kind_from_string(o.attack);
    cfg.epsilon = o.epsilon;
    cfg.iters = o.pgd_iters;
    cfg.step_alpha = o.pgd_alpha;
    cfg.random_start = o.random_start;
    cfg.seed = sodef::Rng(seed).substream("attack").next_u64();
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_run_config(CLI::App* cmd, const fs::path& out_dir) {
    write_text(out_dir / "run_config.ini", cmd->config_to_str(true, false));
}

json attack_record(const sodef::SodefModel& model, const sodef::LabeledDataset& test,
                   const sodef::AttackConfig& cfg, double clean_acc) {
    const double adv = sodef::attack_accuracy(model, test, cfg);
    return json{{"attack", to_string(cfg.kind)}, {"epsilon", cfg.epsilon},
                {"iters", cfg.kind == sodef::AttackKind::Pgd ? cfg.iters : 1},
                {"clean_acc", clean_acc},        {"adv_acc", adv},
                {"n", test.size()}};
}

}  // namespace

int main(int argc, char** argv) {
    struct Command {
        const char* name;
        const char* help;
    };
    const std::vector<Command> commands = {
        {"train", "Train a model, write checkpoint + history"},
        {"attack", "Attack a checkpoint, write accuracy JSON"},
        {"eig", "Jacobian eigenvalue scatter + stability summary"},
        {"sweep-t", "Accuracy/robustness/damping across T"},
        {"fcgen", "Emit the simplex FC matrix as CSV"},
        {"eval", "Clean accuracy of a checkpoint"},
    };
    const auto usage = [&](std::FILE* to) {
        std::fprintf(to,
                     "Stability-regularized neural-ODE classifier toolkit\n\n"
                     "Usage: sodef COMMAND [OPTIONS]\n\nCommands:\n");
        for (const Command& c : commands) std::fprintf(to, "  %-8s %s\n", c.name, c.help);
        std::fprintf(to,
                     "\nRun 'sodef COMMAND --help' for the command's options. Evaluation\n"
                     "parallelism is capped by the SODEF_NUM_THREADS env var.\n");
    };
    if (argc < 2) {
        usage(stderr);
        return 1;
    }
    const std::string name = argv[1];
    if (name == "-h" || name == "--help") {
        usage(stdout);
        return 0;
    }
    if (std::none_of(commands.begin(), commands.end(),
                     [&](const Command& c) { return name == c.name; })) {
        std::fprintf(stderr, "sodef: unknown command '%s'\n\n", name.c_str());
        usage(stderr);
        return 1;
    }

    // One root-level App per command rather than CLI11 subcommands: config
    // files (--config) are only processed on a root app.
    CLI::App cmd{std::find_if(commands.begin(), commands.end(),
                              [&](const Command& c) { return name == c.name; })
                     ->help};
    cmd.name("sodef " + name);

    std::uint64_t seed = 1;
    std::string out_dir = "run";
    std::string checkpoint_path;

    DatasetOpts data_opts;
    ModelOpts model_opts;
    TrainOpts train_opts;
    AttackOpts attack_opts;
    std::vector<double> t_list{1.0, 3.0, 5.0, 10.0};
    bool train_inline = false;
    std::vector<std::string> checkpoint_list;
    std::size_t fc_k = 10, fc_n = 64;

    cmd.add_option("--seed", seed, "Root seed; all sub-streams derive from it")
        ->capture_default_str();
    cmd.add_option("--out", out_dir, "Output directory")->capture_default_str();
    cmd.set_config("--config", "", "Load options from a saved run_config.ini");

    if (name == "train") {
        add_dataset_opts(&cmd, data_opts);
        add_model_opts(&cmd, model_opts);
        add_train_opts(&cmd, train_opts);
    } else if (name == "attack") {
        add_dataset_opts(&cmd, data_opts);
        add_attack_opts(&cmd, attack_opts);
        cmd.add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
    } else if (name == "eig") {
        add_dataset_opts(&cmd, data_opts);
        cmd.add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
    } else if (name == "sweep-t") {
        add_dataset_opts(&cmd, data_opts);
        add_model_opts(&cmd, model_opts);
        add_train_opts(&cmd, train_opts);
        add_attack_opts(&cmd, attack_opts);
        cmd.add_option("--t-list", t_list, "Integration times to sweep")->capture_default_str();
        cmd.add_flag("--train-inline", train_inline, "Train one model per T");
        cmd.add_option("--checkpoints", checkpoint_list, "Pre-trained checkpoint per T");
    } else if (name == "fcgen") {
        cmd.add_option("--k", fc_k, "Number of classes")->capture_default_str();
        cmd.add_option("--n", fc_n, "Feature dimension (>= k)")->capture_default_str();
    } else if (name == "eval") {
        add_dataset_opts(&cmd, data_opts);
        cmd.add_option("--checkpoint", checkpoint_path, "Model checkpoint")->required();
    }

    std::vector<std::string> args(argv + 2, argv + argc);
    std::reverse(args.begin(), args.end());
    try {
        cmd.parse(args);
    } catch (const CLI::ParseError& e) {
        return cmd.exit(e);
    }

    try {
        fs::create_directories(out_dir);

        if (name == "train") {
            auto [train_set, test_set] = build_splits(data_opts, seed);
            sodef::SodefModel model =
                build_model(model_opts, train_set.d, train_set.num_classes, seed);
            sodef::TrainConfig cfg = build_train_config(&cmd, train_opts, seed);
            auto history = sodef::train(model, train_set, cfg);
            sodef::save_checkpoint(model, seed, (fs::path(out_dir) / "checkpoint.bin").string());
            sodef::save_history_csv(history, (fs::path(out_dir) / "history.csv").string());
            write_run_config(&cmd, out_dir);
            const double test_acc = sodef::evaluate_accuracy(model, test_set);
            std::printf("train: epochs=%zu final_loss=%.6f train_acc=%.4f test_acc=%.4f\n",
                        history.size(), history.back().loss, history.back().accuracy, test_acc);
        } else if (name == "attack") {
            sodef::SodefModel model = sodef::load_checkpoint(checkpoint_path).model;
            auto [train_set, test_set] = build_splits(data_opts, seed);
            const double clean = sodef::evaluate_accuracy(model, test_set);
            json result;
            if (attack_opts.sweep_epsilon.empty()) {
                sodef::AttackConfig cfg = build_attack_config(attack_opts, test_set, seed);
                result = attack_record(model, test_set, cfg, clean);
            } else {
                result = json::array();
                for (double eps : attack_opts.sweep_epsilon) {
                    sodef::AttackConfig cfg = build_attack_config(attack_opts, test_set, seed);
                    cfg.epsilon = eps;
                    result.push_back(attack_record(model, test_set, cfg, clean));
                }
            }
            write_text(fs::path(out_dir) / "attack_results.json", result.dump(2) + "\n");
            write_run_config(&cmd, out_dir);
            std::printf("attack: results in %s\n",
                        (fs::path(out_dir) / "attack_results.json").c_str());
        } else if (name == "eig") {
            sodef::SodefModel model = sodef::load_checkpoint(checkpoint_path).model;
            auto [train_set, test_set] = build_splits(data_opts, seed);
            sodef::StabilityReport rep = sodef::stability_report(model, test_set);
            sodef::save_stability_csv(rep, (fs::path(out_dir) / "eig_scatter.csv").string());
            json summary{{"n", test_set.size()},
                         {"frac_abscissa_negative", rep.frac_abscissa_negative},
                         {"frac_certificate", rep.frac_certificate}};
            write_text(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
            write_run_config(&cmd, out_dir);
            std::printf("eig: frac_abscissa_negative=%.4f frac_certificate=%.4f\n",
                        rep.frac_abscissa_negative, rep.frac_certificate);
        } else if (name == "sweep-t") {
            if (!train_inline && checkpoint_list.size() != t_list.size())
                throw std::runtime_error(
                    "sweep-t needs --train-inline or one --checkpoints entry per T");
            auto [train_set, test_set] = build_splits(data_opts, seed);

            std::ofstream csv(fs::path(out_dir) / "sweep.csv");
            if (!csv) throw std::runtime_error("cannot open sweep.csv");
            csv << "T,clean_acc,adv_acc,median_damping\n";
            for (std::size_t i = 0; i < t_list.size(); ++i) {
                sodef::SodefModel model;
                if (train_inline) {
                    ModelOpts mo = model_opts;
                    mo.T = t_list[i];
                    model = build_model(mo, train_set.d, train_set.num_classes, seed);
                    sodef::train(model, train_set, build_train_config(&cmd, train_opts, seed));
                } else {
                    model = sodef::load_checkpoint(checkpoint_list[i]).model;
                    model.solver.t_end = t_list[i];
                }
                const double clean = sodef::evaluate_accuracy(model, test_set);
                sodef::AttackConfig acfg = build_attack_config(attack_opts, test_set, seed);
                const double adv = sodef::attack_accuracy(model, test_set, acfg);

                sodef::Rng drng = sodef::Rng(seed).substream("damping");
                sodef::Tensor delta = sodef::Tensor::zeros({model.feature_dim()});
                for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = drng.normal();
                const double nrm = sodef::norm2(delta).value();
                for (std::size_t j = 0; j < delta.size(); ++j) delta[j] *= 0.1 / nrm;
                const double damp =
                    sodef::median_damping(model, test_set, delta, {t_list[i]}).front();

                char buf[160];
                std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", t_list[i], clean,
                              adv, damp);
                csv << buf;
            }
            if (!csv) throw std::runtime_error("write failed for sweep.csv");
            write_run_config(&cmd, out_dir);
            std::printf("sweep-t: wrote %s\n", (fs::path(out_dir) / "sweep.csv").c_str());
        } else if (name == "fcgen") {
            sodef::SimplexFC fc = sodef::build_simplex_fc(fc_k, fc_n, seed);
            sodef::save_matrix_csv(fc.v, (fs::path(out_dir) / "V.csv").string());
            write_run_config(&cmd, out_dir);
            const double cosine = sodef::max_pairwise_cosine(fc.v);
            std::fprintf(stderr, "fcgen: max pairwise cosine %.12f (target %.12f)\n", cosine,
                         1.0 / (1.0 - static_cast<double>(fc_k)));
            std::printf("fcgen: wrote %s\n", (fs::path(out_dir) / "V.csv").c_str());
        } else if (name == "eval") {
            sodef::SodefModel model = sodef::load_checkpoint(checkpoint_path).model;
            auto [train_set, test_set] = build_splits(data_opts, seed);
            const double clean = sodef::evaluate_accuracy(model, test_set);
            json result{{"clean_acc", clean}, {"n", test_set.size()}};
            write_text(fs::path(out_dir) / "eval.json", result.dump(2) + "\n");
            write_run_config(&cmd, out_dir);
            std::printf("eval: clean_acc=%.4f n=%zu\n", clean, test_set.size());
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
