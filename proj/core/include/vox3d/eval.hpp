#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vox3d/data.hpp"
#include "vox3d/optim.hpp"

namespace vox3d {

// Normalized Mann-Whitney statistic:
// (#concordant pairs + 0.5 * #tied pairs) / (n_pos * n_neg).
// Exact for any tie pattern; requires both classes present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Fraction of samples whose p(class 1) crosses the 0.5 threshold correctly.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels);

struct MetricsSummary {
    std::pair<Label, Label> task;
    double auc_mean, auc_std;
    double acc_mean, acc_std;
    int runs;  // n_folds * repeats
};

struct CvResult {
    MetricsSummary summary;
    // fold_aucs/fold_accs indexed by repeat * n_folds + fold.
    std::vector<double> fold_aucs, fold_accs;
    std::vector<EpochLog> fold_logs;
};

// For every (repeat, fold): trains a fresh network with a deterministically
// derived seed on the train folds, scores the held-out fold, and aggregates
// mean +/- std over all repeat x fold runs.
CvResult cross_validate(const Dataset& ds, const TaskView& task, const TrainConfig& cfg,
                        const FoldSplit& folds);

// Renders summaries as a fixed-width text table; ".88 +/- .08" style with the
// leading zero stripped, two decimals.
std::string tabulate_text(const std::vector<MetricsSummary>& summaries);
// CSV: task,auc_mean,auc_std,acc_mean,acc_std
std::string tabulate_csv(const std::vector<MetricsSummary>& summaries);

std::string format_pm(double mean, double std);

}  // namespace vox3d
