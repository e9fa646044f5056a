#include "vox3d/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "vox3d/errors.hpp"
#include "vox3d/eval.hpp"

namespace vox3d {

std::string opt_name(OptKind k) { return k == OptKind::adam ? "adam" : "nesterov"; }

OptKind opt_from_string(const std::string& s) {
    if (s == "adam") return OptKind::adam;
    if (s == "nesterov") return OptKind::nesterov;
    throw ConfigError("unknown optimizer '" + s + "' (expected adam or nesterov)");
}

namespace {

void check_finite_grad(const ParamSlot& s) {
    if (!s.grad->all_finite())
        throw NumericError("non-finite gradient in parameter " + s.name);
}

class AdamOptimizer final : public Optimizer {
public:
    AdamOptimizer(double lr, double beta1, double beta2, double eps)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamSlot>& slots) override {
        if (m_.empty()) {
            for (const ParamSlot& s : slots)
                if (s.trainable) {
                    m_.emplace_back(s.value->shape());
                    v_.emplace_back(s.value->shape());
                }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        size_t slot = 0;
        for (ParamSlot& s : slots) {
            if (!s.trainable) continue;
            check_finite_grad(s);
            Tensor& m = m_[slot];
            Tensor& v = v_[slot];
            ++slot;
            for (int64_t i = 0; i < s.value->numel(); ++i) {
                const double g = (*s.grad)[i];
                const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
                const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
                m[i] = static_cast<float>(mi);
                v[i] = static_cast<float>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                (*s.value)[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;
};

class NesterovOptimizer final : public Optimizer {
public:
    NesterovOptimizer(double lr, double mu) : lr_(lr), mu_(mu) {}

    bool wants_lookahead() const override { return true; }

    void apply_lookahead(std::vector<ParamSlot>& slots) override {
        ensure_state(slots);
        saved_.clear();
        size_t slot = 0;
        for (ParamSlot& s : slots) {
            if (!s.trainable) continue;
            saved_.push_back(s.value->buffer());
            const Tensor& v = velocity_[slot++];
            for (int64_t i = 0; i < s.value->numel(); ++i)
                (*s.value)[i] += static_cast<float>(mu_ * v[i]);
        }
    }

    void revert_lookahead(std::vector<ParamSlot>& slots) override {
        size_t idx = 0;
        for (ParamSlot& s : slots) {
            if (!s.trainable) continue;
            s.value->buffer() = saved_[idx++];
        }
        saved_.clear();
    }

    void step(std::vector<ParamSlot>& slots) override {
        ensure_state(slots);
        size_t slot = 0;
        for (ParamSlot& s : slots) {
            if (!s.trainable) continue;
            check_finite_grad(s);
            Tensor& v = velocity_[slot++];
            for (int64_t i = 0; i < s.value->numel(); ++i) {
                v[i] = static_cast<float>(mu_ * v[i] - lr_ * (*s.grad)[i]);
                (*s.value)[i] += v[i];
            }
        }
    }

private:
    void ensure_state(const std::vector<ParamSlot>& slots) {
        if (!velocity_.empty()) return;
        for (const ParamSlot& s : slots)
            if (s.trainable) velocity_.emplace_back(s.value->shape());
    }

    double lr_, mu_;
    std::vector<Tensor> velocity_;
    std::vector<std::vector<float>> saved_;
};

}  // namespace

std::unique_ptr<Optimizer> make_adam(double lr, double beta1, double beta2, double eps) {
    return std::make_unique<AdamOptimizer>(lr, beta1, beta2, eps);
}

std::unique_ptr<Optimizer> make_nesterov(double lr, double mu) {
    return std::make_unique<NesterovOptimizer>(lr, mu);
}

TrainConfig default_train_config(Arch arch) {
    TrainConfig cfg;
    cfg.arch = arch;
    if (arch == Arch::voxcnn) {
        cfg.optimizer = OptKind::adam;
        cfg.lr = 27e-6;
        cfg.batch_size = 5;
        cfg.epochs = 150;
        cfg.dropout_p = 0.1f;
    } else {
        cfg.optimizer = OptKind::nesterov;
        cfg.lr = 1e-4;
        cfg.batch_size = 3;
        cfg.epochs = 70;
        cfg.dropout_p = 0.0f;
    }
    return cfg;
}

namespace {

Tensor assemble_batch(const Dataset& ds, const TaskView& view, const std::vector<int>& batch,
                      std::vector<int>& labels) {
    const int cube = ds.cube;
    const int64_t bs = static_cast<int64_t>(batch.size());
    Tensor x({bs, 1, cube, cube, cube});
    labels.clear();
    const int64_t vol = static_cast<int64_t>(cube) * cube * cube;
    for (int64_t i = 0; i < bs; ++i) {
        const int pos = batch[static_cast<size_t>(i)];
        const LabeledSample& s =
            ds.samples[static_cast<size_t>(view.sample_indices[static_cast<size_t>(pos)])];
        std::copy(s.volume.data(), s.volume.data() + vol, x.data() + i * vol);
        labels.push_back(view.classes[static_cast<size_t>(pos)]);
    }
    return x;
}

std::vector<std::vector<float>> snapshot_params(Network& net) {
    std::vector<std::vector<float>> snap;
    for (const ParamSlot& s : net.params()) snap.push_back(s.value->buffer());
    return snap;
}

void restore_params(Network& net, const std::vector<std::vector<float>>& snap) {
    size_t i = 0;
    for (ParamSlot& s : net.params()) s.value->buffer() = snap[i++];
}

}  // namespace

std::vector<double> score_task(Network& net, const Dataset& ds, const TaskView& view) {
    const Mode prev = net.mode();
    net.set_mode(Mode::infer);
    std::vector<double> scores;
    scores.reserve(view.sample_indices.size());
    const int cube = ds.cube;
    const int64_t vol = static_cast<int64_t>(cube) * cube * cube;
    constexpr int64_t kChunk = 8;
    for (size_t start = 0; start < view.sample_indices.size(); start += kChunk) {
        const int64_t bs = std::min<int64_t>(kChunk,
            static_cast<int64_t>(view.sample_indices.size() - start));
        Tensor x({bs, 1, cube, cube, cube});
        for (int64_t i = 0; i < bs; ++i) {
            const LabeledSample& s =
                ds.samples[static_cast<size_t>(view.sample_indices[start + static_cast<size_t>(i)])];
            std::copy(s.volume.data(), s.volume.data() + vol, x.data() + i * vol);
        }
        Tensor probs = net.forward(x);
        const int64_t k = probs.extent(1);
        for (int64_t i = 0; i < bs; ++i) scores.push_back(probs[i * k + 1]);
    }
    net.set_mode(prev);
    return scores;
}

EpochLog train(Network& net, const Dataset& ds, const TaskView& train_view,
               const TaskView& val_view, const TrainConfig& cfg,
               const EpochCallback& callback) {
    if (train_view.sample_indices.empty())
        throw ConfigError("training set is empty");
    std::unique_ptr<Optimizer> opt =
        cfg.optimizer == OptKind::adam ? make_adam(cfg.lr) : make_nesterov(cfg.lr);

    net.set_mode(Mode::train);
    net.reseed(mix_seed(cfg.seed, 0xD0));

    EpochLog log;
    std::vector<std::vector<float>> last_good = snapshot_params(net);
    std::vector<int> labels;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        BatchPlan plan = balanced_batches(train_view.classes, cfg.batch_size,
                                          mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
        double loss_sum = 0.0;
        auto slots = net.params();
        for (const auto& batch : plan.batches) {
            Tensor x = assemble_batch(ds, train_view, batch, labels);
            if (opt->wants_lookahead()) opt->apply_lookahead(slots);
            Tensor probs = net.forward(x);
            double loss;
            try {
                loss = cross_entropy(probs, labels);
                if (!std::isfinite(loss)) throw NumericError("training loss is non-finite");
                net.backward(labels);
            } catch (const NumericError&) {
                if (!cfg.checkpoint_path.empty()) {
                    restore_params(net, last_good);
                    net.save(cfg.checkpoint_path);
                }
                throw;
            }
            if (opt->wants_lookahead()) opt->revert_lookahead(slots);
            opt->step(slots);
            loss_sum += loss;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(plan.batches.size());
        if (!val_view.sample_indices.empty()) {
            std::vector<double> scores = score_task(net, ds, val_view);
            stats.val_acc = accuracy(scores, val_view.classes);
            bool both = false;
            for (size_t i = 1; i < val_view.classes.size(); ++i)
                if (val_view.classes[i] != val_view.classes[0]) both = true;
            stats.val_auc = both ? roc_auc(scores, val_view.classes)
                                 : std::numeric_limits<double>::quiet_NaN();
        } else {
            stats.val_auc = std::numeric_limits<double>::quiet_NaN();
            stats.val_acc = std::numeric_limits<double>::quiet_NaN();
        }
        log.push_back(stats);
        if (callback) callback(stats);
        last_good = snapshot_params(net);
        net.set_mode(Mode::train);
    }
    net.clear_caches();
    return log;
}

void write_epoch_log_csv(const std::filesystem::path& path, const EpochLog& log) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write epoch log: " + path.string());
    os << "epoch,train_loss,val_auc,val_acc\n";
    os << std::setprecision(12);
    for (const EpochStats& e : log)
        os << e.epoch << ',' << e.train_loss << ',' << e.val_auc << ',' << e.val_acc << '\n';
    if (!os) throw IoError("short write to epoch log: " + path.string());
}

}  // namespace vox3d
