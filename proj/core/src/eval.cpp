#include "vox3d/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "vox3d/errors.hpp"
#include "vox3d/rng.hpp"

namespace vox3d {

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ShapeError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    int64_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw ConfigError("roc_auc undefined: only one class present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    int64_t concordant2 = 0;  // doubled counts keep everything integral
    int64_t neg_below = 0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        int64_t pos_in_group = 0, neg_in_group = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] == 1 ? pos_in_group : neg_in_group)++;
            ++j;
        }
        concordant2 += 2 * pos_in_group * neg_below + pos_in_group * neg_in_group;
        neg_below += neg_in_group;
        i = j;
    }
    return static_cast<double>(concordant2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw ShapeError("accuracy: " + std::to_string(scores.size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
    if (scores.empty()) throw ConfigError("accuracy of an empty set is undefined");
    int64_t correct = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        int pred = scores[i] > 0.5 ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {
std::pair<double, double> mean_std(const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size());
    return {mean, std::sqrt(var)};
}
}  // namespace

CvResult cross_validate(const Dataset& ds, const TaskView& task, const TrainConfig& cfg,
                        const FoldSplit& folds) {
    if (folds.assignments.empty())
        throw ConfigError("cross_validate: empty fold split");
    for (const auto& assign : folds.assignments)
        if (assign.size() != task.classes.size())
            throw ConfigError("fold split was not computed on this task view");

    CvResult result;
    result.summary.task = task.task;
    for (int r = 0; r < folds.repeats; ++r) {
        const std::vector<int>& assign = folds.assignments[static_cast<size_t>(r)];
        for (int f = 0; f < folds.n_folds; ++f) {
            TaskView train_view{task.task, {}, {}}, val_view{task.task, {}, {}};
            for (size_t p = 0; p < assign.size(); ++p) {
                TaskView& dst = (assign[p] == f) ? val_view : train_view;
                dst.sample_indices.push_back(task.sample_indices[p]);
                dst.classes.push_back(task.classes[p]);
            }
            // No subject may sit on both sides of the split.
            for (int vi : val_view.sample_indices)
                for (int ti : train_view.sample_indices)
                    if (ds.samples[static_cast<size_t>(vi)].subject_id ==
                        ds.samples[static_cast<size_t>(ti)].subject_id)
                        throw ConfigError("subject leak between train and validation folds: " +
                                          ds.samples[static_cast<size_t>(vi)].subject_id);

            const uint64_t fold_salt = static_cast<uint64_t>(r) * static_cast<uint64_t>(folds.n_folds) +
                                       static_cast<uint64_t>(f);
            TrainConfig fold_cfg = cfg;
            fold_cfg.seed = mix_seed(cfg.seed, fold_salt, 0x7EA1);
            Network net = build_model(cfg.arch, 2, cfg.dropout_p, ds.cube,
                                      mix_seed(cfg.seed, fold_salt, 0x1217));
            EpochLog log;
            try {
                log = train(net, ds, train_view, val_view, fold_cfg);
            } catch (const NumericError& e) {
                throw NumericError("repeat " + std::to_string(r) + " fold " + std::to_string(f) +
                                   ": " + e.what());
            }
            std::vector<double> scores = score_task(net, ds, val_view);
            result.fold_aucs.push_back(roc_auc(scores, val_view.classes));
            result.fold_accs.push_back(accuracy(scores, val_view.classes));
            result.fold_logs.push_back(std::move(log));
        }
    }
    auto [am, as] = mean_std(result.fold_aucs);
    auto [cm, cs] = mean_std(result.fold_accs);
    result.summary.auc_mean = am;
    result.summary.auc_std = as;
    result.summary.acc_mean = cm;
    result.summary.acc_std = cs;
    result.summary.runs = static_cast<int>(result.fold_aucs.size());
    return result;
}

std::string format_pm(double mean, double std) {
    char m[16], s[16];
    std::snprintf(m, sizeof(m), "%.2f", mean);
    std::snprintf(s, sizeof(s), "%.2f", std);
    auto strip = [](std::string v) {
        if (v.rfind("0.", 0) == 0) return v.substr(1);
        if (v.rfind("-0.", 0) == 0) return "-" + v.substr(2);
        return v;
    };
    return strip(m) + " ± " + strip(s);
}

static std::string task_label(const std::pair<Label, Label>& t) {
    return label_name(t.first) + " vs " + label_name(t.second);
}

std::string tabulate_text(const std::vector<MetricsSummary>& summaries) {
    std::ostringstream os;
    os << "task           AUC          Acc.\n";
    for (const auto& s : summaries) {
        std::string name = task_label(s.task);
        name.resize(14, ' ');
        os << name << ' ' << format_pm(s.auc_mean, s.auc_std) << "    "
           << format_pm(s.acc_mean, s.acc_std) << '\n';
    }
    return os.str();
}

std::string tabulate_csv(const std::vector<MetricsSummary>& summaries) {
    std::ostringstream os;
    os << "task,auc_mean,auc_std,acc_mean,acc_std\n";
    os.precision(12);
    for (const auto& s : summaries)
        os << task_label(s.task) << ',' << s.auc_mean << ',' << s.auc_std << ',' << s.acc_mean
           << ',' << s.acc_std << '\n';
    return os.str();
}

}  // namespace vox3d
