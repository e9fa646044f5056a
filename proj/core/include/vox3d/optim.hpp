#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "vox3d/data.hpp"
#include "vox3d/models.hpp"
#include "vox3d/network.hpp"

namespace vox3d {

enum class OptKind { adam, nesterov };

std::string opt_name(OptKind k);
OptKind opt_from_string(const std::string& s);

class Optimizer {
public:
    virtual ~Optimizer() = default;
    // Applies one update using the gradients currently in the slots.
    // Throws NumericError naming the parameter on non-finite gradients.
    virtual void step(std::vector<ParamSlot>& slots) = 0;
    // Nesterov evaluates gradients at the lookahead point theta + mu*v; the
    // training loop brackets forward/backward with these two calls.
    virtual bool wants_lookahead() const { return false; }
    virtual void apply_lookahead(std::vector<ParamSlot>&) {}
    virtual void revert_lookahead(std::vector<ParamSlot>&) {}
};

std::unique_ptr<Optimizer> make_adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                                     double eps = 1e-8);
std::unique_ptr<Optimizer> make_nesterov(double lr, double mu = 0.9);

struct TrainConfig {
    Arch arch = Arch::voxcnn;
    OptKind optimizer = OptKind::adam;
    double lr = 2.7e-5;
    int batch_size = 5;
    int epochs = 150;
    float dropout_p = 0.1f;
    uint64_t seed = 0;
    // When set, the last epoch-end parameters are dumped here if the loss
    // goes non-finite mid-training.
    std::filesystem::path checkpoint_path;
};

// Paper defaults: voxcnn trains with AdaM, lr 2.7e-5, batch 5, 150 epochs;
// voxresnet with Nesterov momentum, lr 1e-4, batch 3, 70 epochs.
TrainConfig default_train_config(Arch arch);

struct EpochStats {
    int epoch;
    double train_loss;
    double val_auc;  // NaN when no validation set or a single class
    double val_acc;
};
using EpochLog = std::vector<EpochStats>;
using EpochCallback = std::function<void(const EpochStats&)>;

// Trains `net` on the task samples, re-planning class-balanced batches with
// a derived seed each epoch. Per epoch emits (epoch, mean train loss,
// validation AUC, validation accuracy). Deterministic given config + seed.
EpochLog train(Network& net, const Dataset& ds, const TaskView& train_view,
               const TaskView& val_view, const TrainConfig& cfg,
               const EpochCallback& callback = {});

// Infer-mode p(class 1) for every sample in the view.
std::vector<double> score_task(Network& net, const Dataset& ds, const TaskView& view);

void write_epoch_log_csv(const std::filesystem::path& path, const EpochLog& log);

}  // namespace vox3d
