// vox3d: synthesize volumes, train and cross-validate the two architectures,
// compute occlusion attention maps, and run the verification suites.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "vox3d/attention.hpp"
#include "vox3d/data.hpp"
#include "vox3d/errors.hpp"
#include "vox3d/eval.hpp"
#include "vox3d/models.hpp"
#include "vox3d/network.hpp"
#include "vox3d/optim.hpp"
#include "vox3d/verify.hpp"

namespace fs = std::filesystem;
using namespace vox3d;

namespace {

std::pair<Label, Label> parse_task(const std::string& s) {
    auto sep = s.find(':');
    if (sep == std::string::npos)
        throw ConfigError("task must look like AD:NC, got '" + s + "'");
    return {label_from_string(s.substr(0, sep)), label_from_string(s.substr(sep + 1))};
}

std::vector<Label> parse_classes(const std::string& s) {
    std::vector<Label> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) out.push_back(label_from_string(item));
    return out;
}

// Every run directory gets the resolved configuration so it can be replayed.
void write_effective_config(const fs::path& dir, const CLI::App* cmd) {
    fs::create_directories(dir);
    std::ofstream os(dir / "effective_config.txt");
    os << "[" << cmd->get_name() << "]\n";
    for (const CLI::Option* opt : cmd->get_options()) {
        if (opt->get_lnames().empty()) continue;
        std::string value = opt->results().empty() ? opt->get_default_str()
                                                   : opt->results().front();
        os << opt->get_lnames().front() << " = " << value << '\n';
    }
}

struct TrainArgs {
    std::string arch = "voxcnn";
    std::string data;
    std::string task = "AD:NC";
    std::string optimizer;
    int epochs = -1;
    double lr = -1.0;
    int batch = -1;
    double dropout = -1.0;
    double val_frac = 0.2;
    uint64_t seed = 0;
    std::string out;
};

TrainConfig resolve_config(const TrainArgs& a) {
    TrainConfig cfg = default_train_config(arch_from_string(a.arch));
    if (!a.optimizer.empty()) cfg.optimizer = opt_from_string(a.optimizer);
    if (a.epochs >= 0) cfg.epochs = a.epochs;
    if (a.lr >= 0.0) cfg.lr = a.lr;
    if (a.batch > 0) cfg.batch_size = a.batch;
    if (a.dropout >= 0.0) cfg.dropout_p = static_cast<float>(a.dropout);
    cfg.seed = a.seed;
    return cfg;
}

int cmd_synth(const std::string& out, const std::string& classes, int per_class, int cube,
              double separability, uint64_t seed, const CLI::App* cmd) {
    Dataset ds = generate_synthetic(per_class, parse_classes(classes), cube,
                                    static_cast<float>(separability), seed);
    save_dataset(out, ds);
    write_effective_config(out, cmd);
    std::cout << "wrote " << ds.samples.size() << " volumes (cube " << cube << ") to " << out
              << '\n';
    return 0;
}

int cmd_train(const TrainArgs& a, const CLI::App* cmd) {
    const TrainConfig cfg = resolve_config(a);
    Dataset ds = load_dataset(a.data);
    auto [la, lb] = parse_task(a.task);
    TaskView task = make_task(ds, la, lb);

    TaskView train_view{task.task, {}, {}}, val_view{task.task, {}, {}};
    if (a.val_frac > 0.0) {
        int n_folds = std::max(2, static_cast<int>(std::lround(1.0 / a.val_frac)));
        FoldSplit split = stratified_folds(task.classes, n_folds, 1, mix_seed(cfg.seed, 0x5B));
        for (size_t p = 0; p < task.classes.size(); ++p) {
            TaskView& dst = split.assignments[0][p] == 0 ? val_view : train_view;
            dst.sample_indices.push_back(task.sample_indices[p]);
            dst.classes.push_back(task.classes[p]);
        }
    } else {
        train_view = task;
    }

    fs::create_directories(a.out);
    Network net = build_model(cfg.arch, 2, cfg.dropout_p, ds.cube, mix_seed(cfg.seed, 0x11));
    TrainConfig run_cfg = cfg;
    run_cfg.checkpoint_path = fs::path(a.out) / "last_good.vox3d";
    EpochLog log = train(net, ds, train_view, val_view, run_cfg, [](const EpochStats& e) {
        std::cout << "epoch " << e.epoch << " loss " << e.train_loss << " val_auc " << e.val_auc
                  << " val_acc " << e.val_acc << '\n';
    });
    net.save(fs::path(a.out) / "model.vox3d");
    write_epoch_log_csv(fs::path(a.out) / "epoch_log.csv", log);
    write_effective_config(a.out, cmd);
    return 0;
}

int cmd_cv(const TrainArgs& a, int n_folds, int repeats, const CLI::App* cmd) {
    const TrainConfig cfg = resolve_config(a);
    Dataset ds = load_dataset(a.data);

    std::vector<std::pair<Label, Label>> tasks;
    if (a.task == "all") tasks = all_tasks();
    else tasks.push_back(parse_task(a.task));

    fs::create_directories(a.out);
    std::vector<MetricsSummary> summaries;
    for (size_t t = 0; t < tasks.size(); ++t) {
        TaskView task = make_task(ds, tasks[t].first, tasks[t].second);
        FoldSplit folds = stratified_folds(task.classes, n_folds, repeats,
                                           mix_seed(cfg.seed, t, 0xF01D));
        CvResult res = cross_validate(ds, task, cfg, folds);
        summaries.push_back(res.summary);

        fs::path task_dir = fs::path(a.out) /
                            (label_name(tasks[t].first) + "_vs_" + label_name(tasks[t].second));
        fs::create_directories(task_dir);
        std::ofstream fm(task_dir / "fold_metrics.csv");
        fm << "repeat,fold,auc,acc\n";
        fm.precision(12);
        for (int r = 0; r < repeats; ++r)
            for (int f = 0; f < n_folds; ++f) {
                size_t i = static_cast<size_t>(r * n_folds + f);
                fm << r << ',' << f << ',' << res.fold_aucs[i] << ',' << res.fold_accs[i] << '\n';
            }
        for (int r = 0; r < repeats; ++r)
            for (int f = 0; f < n_folds; ++f)
                write_epoch_log_csv(task_dir / ("curve_r" + std::to_string(r) + "_f" +
                                                std::to_string(f) + ".csv"),
                                    res.fold_logs[static_cast<size_t>(r * n_folds + f)]);
        std::cout << label_name(tasks[t].first) << " vs " << label_name(tasks[t].second)
                  << ": AUC " << format_pm(res.summary.auc_mean, res.summary.auc_std) << " Acc "
                  << format_pm(res.summary.acc_mean, res.summary.acc_std) << '\n';
    }

    std::ofstream(fs::path(a.out) / "summary.csv") << tabulate_csv(summaries);
    std::ofstream(fs::path(a.out) / "summary.txt")
        << tabulate_text(summaries)
        << "std over all " << n_folds << "x" << repeats << " fold runs (population)\n";
    write_effective_config(a.out, cmd);
    std::cout << tabulate_text(summaries);
    return 0;
}

int cmd_explain(const std::string& model_path, const std::string& volume_path, int target_class,
                int box, int stride, double fill, const std::string& out, const CLI::App* cmd) {
    Network net = load_model(model_path);
    net.set_mode(Mode::infer);
    Tensor volume = read_volume(volume_path);
    AttentionMap map = occlusion_map(net, volume, target_class, {box, box, box}, stride,
                                     static_cast<float>(fill));
    fs::create_directories(out);
    write_volume(fs::path(out) / "attention_map.vox", map.grid);
    write_volume(fs::path(out) / "attention_upsampled.vox",
                 upsample_map(map, {volume.extent(0), volume.extent(1), volume.extent(2)}));
    export_slices(volume, map, SliceAxis::axial, volume.extent(0) / 2, out, "axial");
    export_slices(volume, map, SliceAxis::sagittal, volume.extent(2) / 2, out, "sagittal");
    std::ofstream(fs::path(out) / "baseline.txt")
        << "baseline_prob " << map.baseline_prob << "\ntarget_class " << target_class << '\n';
    write_effective_config(out, cmd);
    std::cout << "baseline p(class " << target_class << ") = " << map.baseline_prob
              << ", grid " << map.grid.shape_str() << '\n';
    return 0;
}

int cmd_describe(const std::string& arch, int cube, int classes, bool as_json) {
    Network net = build_model(arch_from_string(arch), classes, 0.1f, cube, 0);
    ArchitectureTable table = describe(net);
    std::cout << (as_json ? table.to_json() : table.to_text());
    return 0;
}

int run_verify_suite(const std::string& suite, uint64_t seed) {
    bool all_ok = true;
    auto report = [&all_ok](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        all_ok = all_ok && ok;
    };

    if (suite == "conv-oracle" || suite == "all") {
        Rng rng(mix_seed(seed, 1));
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            auto dim = [&rng](int64_t lo, int64_t hi) {
                return lo + static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(hi - lo + 1));
            };
            ConvSpec spec;
            spec.in_channels = dim(1, 3);
            spec.out_channels = dim(1, 4);
            Dims3 in{dim(1, 7), dim(1, 7), dim(1, 7)};
            for (int a = 0; a < 3; ++a) {
                spec.kernel[a] = dim(1, in[a]);
                spec.stride[a] = dim(1, 2);
                spec.padding[a] = dim(0, 1);
            }
            Tensor x({dim(1, 2), spec.in_channels, in[0], in[1], in[2]});
            Tensor w({spec.out_channels, spec.in_channels, spec.kernel[0], spec.kernel[1],
                      spec.kernel[2]});
            Tensor b({spec.out_channels});
            for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.normal();
            for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal();
            for (int64_t i = 0; i < b.numel(); ++i) b[i] = rng.normal();
            Tensor got = conv3d(x, w, b, spec);
            Tensor want = verify::conv3d_reference(x, w, b, spec);
            for (int64_t i = 0; i < got.numel(); ++i) {
                double denom = std::max(1.0, std::abs(static_cast<double>(want[i])));
                worst = std::max(worst, std::abs(static_cast<double>(got[i] - want[i])) / denom);
            }
        }
        report("conv-oracle", worst <= 1e-4,
               "worst relative deviation " + std::to_string(worst) + " over 100 random shapes");
    }

    if (suite == "auc-oracle" || suite == "all") {
        Rng rng(mix_seed(seed, 2));
        int mismatches = 0;
        double worst = 0.0;
        for (int trial = 0; trial < 500; ++trial) {
            int n = 2 + static_cast<int>(rng.next_u64() % 11);
            std::vector<double> scores;
            std::vector<int> labels;
            bool has0 = false, has1 = false;
            for (int i = 0; i < n; ++i) {
                // Coarse grid of score values forces plenty of ties.
                scores.push_back(static_cast<double>(rng.next_u64() % 5) / 4.0);
                labels.push_back(static_cast<int>(rng.next_u64() & 1));
                (labels.back() ? has1 : has0) = true;
            }
            if (!has0) labels[0] = 0;
            if (!has1) labels[static_cast<size_t>(n - 1)] = 1;
            double got = roc_auc(scores, labels);
            double want = verify::roc_auc_reference(scores, labels);
            if (got != want) ++mismatches;
            worst = std::max(worst, std::abs(got - want));
            // Monotone-transform invariance must hold exactly.
            std::vector<double> warped(scores.size());
            for (size_t i = 0; i < scores.size(); ++i) warped[i] = 3.0 * scores[i] + 1.0;
            if (roc_auc(warped, labels) != got) ++mismatches;
        }
        report("auc-oracle", mismatches == 0,
               std::to_string(mismatches) + " mismatches over 500 instances, worst deviation " +
                   std::to_string(worst));
    }

    if (suite == "batch-balance" || suite == "all") {
        bool ok = true;
        std::ostringstream detail;
        for (int b : {3, 5}) {
            auto res = verify::batch_balance_check(20, b, 10000, mix_seed(seed, 3, static_cast<uint64_t>(b)));
            bool naive_ok = std::abs(res.naive_rate - res.analytic_rate) <= 0.2 * res.analytic_rate;
            ok = ok && res.balanced_single_class == 0 && naive_ok;
            detail << "b=" << b << " balanced single-class " << res.balanced_single_class
                   << ", naive rate " << res.naive_rate << " (analytic " << res.analytic_rate
                   << "); ";
        }
        report("batch-balance", ok, detail.str());
    }

    if (suite == "gradcheck" || suite == "all") {
        bool ok = true;
        std::ostringstream detail;
        for (Arch arch : {Arch::voxcnn, Arch::voxresnet}) {
            Network net = build_model(arch, 2, arch == Arch::voxcnn ? 0.3f : 0.0f, 12,
                                      mix_seed(seed, 4));
            Tensor x({1, 1, 12, 12, 12});
            Rng rng(mix_seed(seed, 5));
            for (int64_t i = 0; i < x.numel(); ++i) x[i] = rng.normal(1.0f, 0.3f);
            auto res = verify::gradcheck(net, x, {1}, 20, 1e-2, 1e-2, 1e-4, 1e-2,
                                         mix_seed(seed, 6));
            ok = ok && res.passed;
            detail << arch_name(arch) << " checked " << res.checked << ", worst rel "
                   << res.worst_rel << ", worst abs " << res.worst_abs << " ("
                   << res.worst_param << "); ";
        }
        report("gradcheck", ok, detail.str());
    }

    return all_ok ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"volumetric CNN training, evaluation and occlusion attention"};
    app.require_subcommand(1);
    app.set_config("--config")->configurable(false);
    app.allow_config_extras(false);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    std::string synth_out, synth_classes = "AD,NC";
    int per_class = 40, synth_cube = 32;
    double separability = 1.0;
    uint64_t synth_seed = 1;
    synth->add_option("--out", synth_out, "output dataset directory")->required();
    synth->add_option("--classes", synth_classes, "comma-separated class labels")
        ->capture_default_str();
    synth->add_option("--per-class", per_class, "volumes per class")->capture_default_str();
    synth->add_option("--cube", synth_cube, "volume edge length")->capture_default_str();
    synth->add_option("--separability", separability, "class signal amplitude in [0,1]")
        ->capture_default_str();
    synth->add_option("--seed", synth_seed, "generation seed")->capture_default_str();

    // shared train/cv options
    TrainArgs targs, cargs;
    auto add_common = [](CLI::App* cmd, TrainArgs& a) {
        cmd->add_option("--arch", a.arch, "voxcnn or voxresnet")->capture_default_str();
        cmd->add_option("--data", a.data, "dataset directory")->required();
        cmd->add_option("--task", a.task, "binary task, e.g. AD:NC")->capture_default_str();
        cmd->add_option("--optimizer", a.optimizer, "adam or nesterov (default per arch)");
        cmd->add_option("--epochs", a.epochs, "epoch count (default per arch)");
        cmd->add_option("--lr", a.lr, "learning rate (default per arch)");
        cmd->add_option("--batch", a.batch, "batch size (default per arch)");
        cmd->add_option("--dropout", a.dropout, "dropout probability (voxcnn)");
        cmd->add_option("--seed", a.seed, "master seed")->capture_default_str();
        cmd->add_option("--out", a.out, "output directory")->required();
    };

    auto* train_cmd = app.add_subcommand("train", "train one model on a train/val split");
    add_common(train_cmd, targs);
    train_cmd->add_option("--val-frac", targs.val_frac, "validation fraction (0 disables)")
        ->capture_default_str();

    auto* cv = app.add_subcommand("cv", "repeated stratified cross-validation");
    add_common(cv, cargs);
    int n_folds = 5, repeats = 5;
    cv->add_option("--folds", n_folds, "folds per repeat")->capture_default_str();
    cv->add_option("--repeats", repeats, "independent fold splits")->capture_default_str();

    auto* explain = app.add_subcommand("explain", "occlusion attention map for one volume");
    std::string model_path, volume_path, explain_out;
    int target_class = 1, box = 7, ostride = 7;
    double fill = 0.0;
    explain->add_option("--model", model_path, "trained model file")->required();
    explain->add_option("--volume", volume_path, "input volume file")->required();
    explain->add_option("--class", target_class, "target class index")->capture_default_str();
    explain->add_option("--box", box, "occlusion box edge")->capture_default_str();
    explain->add_option("--stride", ostride, "occlusion stride")->capture_default_str();
    explain->add_option("--fill", fill, "occlusion fill value")->capture_default_str();
    explain->add_option("--out", explain_out, "output directory")->required();

    auto* describe_cmd = app.add_subcommand("describe", "print an architecture table");
    std::string desc_arch = "voxcnn";
    int desc_cube = 110, desc_classes = 2;
    bool desc_json = false;
    describe_cmd->add_option("--arch", desc_arch, "voxcnn or voxresnet")->capture_default_str();
    describe_cmd->add_option("--cube", desc_cube, "input edge length")->capture_default_str();
    describe_cmd->add_option("--classes", desc_classes, "output classes")->capture_default_str();
    describe_cmd->add_flag("--json", desc_json, "machine-readable output");

    auto* verify_cmd = app.add_subcommand("verify", "run the independent oracle suites");
    std::string suite = "all";
    uint64_t verify_seed = 7;
    verify_cmd->add_option("--suite", suite, "gradcheck|conv-oracle|auc-oracle|batch-balance|all")
        ->check(CLI::IsMember({"gradcheck", "conv-oracle", "auc-oracle", "batch-balance", "all"}))
        ->capture_default_str();
    verify_cmd->add_option("--seed", verify_seed, "suite seed")->capture_default_str();

    try {
        app.parse(argc, argv);
        if (synth->parsed())
            return cmd_synth(synth_out, synth_classes, per_class, synth_cube, separability,
                             synth_seed, synth);
        if (train_cmd->parsed()) return cmd_train(targs, train_cmd);
        if (cv->parsed()) return cmd_cv(cargs, n_folds, repeats, cv);
        if (explain->parsed())
            return cmd_explain(model_path, volume_path, target_class, box, ostride, fill,
                               explain_out, explain);
        if (describe_cmd->parsed()) return cmd_describe(desc_arch, desc_cube, desc_classes, desc_json);
        if (verify_cmd->parsed()) return run_verify_suite(suite, verify_seed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
