#include "vox3d/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "vox3d/data.hpp"
#include "vox3d/errors.hpp"
#include "vox3d/rng.hpp"

namespace vox3d::verify {

Tensor conv3d_reference(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        const ConvSpec& spec) {
    const int64_t b = input.extent(0), ci = input.extent(1);
    const int64_t D = input.extent(2), H = input.extent(3), W = input.extent(4);
    const Dims3 o = spec.out_extent({D, H, W});
    const int64_t co = spec.out_channels;
    const int64_t kd = spec.kernel[0], kh = spec.kernel[1], kw = spec.kernel[2];
    Tensor out({b, co, o[0], o[1], o[2]});
    int64_t oi = 0;
    for (int64_t s = 0; s < b; ++s)
        for (int64_t oc = 0; oc < co; ++oc)
            for (int64_t z = 0; z < o[0]; ++z)
                for (int64_t y = 0; y < o[1]; ++y)
                    for (int64_t x = 0; x < o[2]; ++x, ++oi) {
                        double acc = bias[oc];
                        for (int64_t c = 0; c < ci; ++c)
                            for (int64_t i = 0; i < kd; ++i)
                                for (int64_t j = 0; j < kh; ++j)
                                    for (int64_t k = 0; k < kw; ++k) {
                                        const int64_t iz = z * spec.stride[0] - spec.padding[0] + i;
                                        const int64_t iy = y * spec.stride[1] - spec.padding[1] + j;
                                        const int64_t ix = x * spec.stride[2] - spec.padding[2] + k;
                                        if (iz < 0 || iz >= D || iy < 0 || iy >= H || ix < 0 ||
                                            ix >= W)
                                            continue;
                                        const double xv =
                                            input[(((s * ci + c) * D + iz) * H + iy) * W + ix];
                                        const double wv =
                                            weights[(((oc * ci + c) * kd + i) * kh + j) * kw + k];
                                        acc += xv * wv;
                                    }
                        out[oi] = static_cast<float>(acc);
                    }
    return out;
}

Tensor maxpool3d_reference(const Tensor& input, const Dims3& window, const Dims3& stride) {
    const int64_t b = input.extent(0), c = input.extent(1);
    const int64_t D = input.extent(2), H = input.extent(3), W = input.extent(4);
    Dims3 o{};
    for (int a = 0; a < 3; ++a)
        o[a] = (input.extent(a + 2) - window[a]) / stride[a] + 1;
    Tensor out({b, c, o[0], o[1], o[2]});
    int64_t oi = 0;
    for (int64_t s = 0; s < b; ++s)
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t z = 0; z < o[0]; ++z)
                for (int64_t y = 0; y < o[1]; ++y)
                    for (int64_t x = 0; x < o[2]; ++x, ++oi) {
                        float best = -std::numeric_limits<float>::infinity();
                        for (int64_t i = 0; i < window[0]; ++i)
                            for (int64_t j = 0; j < window[1]; ++j)
                                for (int64_t k = 0; k < window[2]; ++k)
                                    best = std::max(
                                        best,
                                        input[(((s * c + ch) * D + z * stride[0] + i) * H +
                                               y * stride[1] + j) * W + x * stride[2] + k]);
                        out[oi] = best;
                    }
    return out;
}

Tensor dense_reference(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const int64_t b = input.extent(0), n = input.extent(1), m = weights.extent(0);
    Tensor out({b, m});
    for (int64_t s = 0; s < b; ++s)
        for (int64_t o = 0; o < m; ++o) {
            double acc = bias[o];
            for (int64_t i = 0; i < n; ++i) acc += static_cast<double>(input[s * n + i]) *
                                                   static_cast<double>(weights[o * n + i]);
            out[s * m + o] = static_cast<float>(acc);
        }
    return out;
}

double roc_auc_reference(const std::vector<double>& scores, const std::vector<int>& labels) {
    int64_t concordant2 = 0, pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) concordant2 += 2;
            else if (scores[i] == scores[j]) concordant2 += 1;
        }
    }
    if (pairs == 0) throw ConfigError("roc_auc_reference undefined: only one class present");
    return static_cast<double>(concordant2) / (2.0 * static_cast<double>(pairs));
}

namespace {

double frozen_loss(Network& net, const Tensor& input, const std::vector<int>& labels,
                   uint64_t seed) {
    net.reseed(seed);
    Tensor probs = net.forward(input);
    return cross_entropy(probs, labels);
}

}  // namespace

GradCheckResult gradcheck(Network& net, const Tensor& input, const std::vector<int>& labels,
                          int per_layer, double h, double rel_tol, double abs_tol,
                          double abs_floor, uint64_t seed) {
    net.set_mode(Mode::train);
    const uint64_t mask_seed = mix_seed(seed, 0xF0);

    // Analytic pass.
    net.reseed(mask_seed);
    net.forward(input);
    net.backward(labels);
    auto slots = net.params();
    std::vector<std::vector<float>> analytic;
    for (const ParamSlot& s : slots)
        analytic.push_back(s.grad ? s.grad->buffer() : std::vector<float>{});

    // Group slots by their owning layer ("layerN." prefix).
    std::vector<std::vector<size_t>> by_layer;
    std::string current;
    for (size_t i = 0; i < slots.size(); ++i) {
        if (!slots[i].trainable) continue;
        std::string prefix = slots[i].name.substr(0, slots[i].name.find('.'));
        if (prefix != current) {
            by_layer.emplace_back();
            current = prefix;
        }
        by_layer.back().push_back(i);
    }

    Rng rng(mix_seed(seed, 0xA5));
    GradCheckResult res;
    double worst_ratio = 0.0;
    for (const auto& layer_slots : by_layer) {
        int64_t total = 0;
        for (size_t si : layer_slots) total += slots[si].value->numel();
        int accepted = 0;
        // Redraw kink-straddling picks, but bound the total work per layer.
        for (int draw = 0; draw < per_layer * 10 && accepted < per_layer; ++draw) {
            int64_t flat = static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(total));
            size_t si = 0;
            for (size_t cand : layer_slots) {
                if (flat < slots[cand].value->numel()) {
                    si = cand;
                    break;
                }
                flat -= slots[cand].value->numel();
            }
            Tensor& value = *slots[si].value;
            const float orig = value[flat];
            const double g = analytic[si][static_cast<size_t>(flat)];
            // Every kink-free step size gives a valid estimate; each has its
            // own error tradeoff (curvature at large steps, f32 quantization
            // at small ones), so score against the closest.
            double fd = 0.0;
            double best_err = std::numeric_limits<double>::infinity();
            bool smooth = false;
            // The bottom rung stays above ~h/10: the f32 forward quantizes
            // the loss at ~1e-7, and (lp - lm) must stay well clear of that.
            for (double hs = h; hs >= h / 10.0; hs /= 3.0) {
                value[flat] = orig + static_cast<float>(hs);
                const double lp = frozen_loss(net, input, labels, mask_seed);
                const uint64_t sig_p = net.activation_signature();
                value[flat] = orig - static_cast<float>(hs);
                const double lm = frozen_loss(net, input, labels, mask_seed);
                const uint64_t sig_m = net.activation_signature();
                value[flat] = orig;
                if (sig_p != sig_m) continue;
                smooth = true;
                const double est = (lp - lm) / (2.0 * hs);
                if (std::abs(est - g) < best_err) {
                    best_err = std::abs(est - g);
                    fd = est;
                }
            }
            if (!smooth) {
                ++res.skipped;
                continue;
            }
            ++res.checked;
            ++accepted;
            const std::string where = slots[si].name + "[" + std::to_string(flat) + "]";
            // Combined tolerance: |fd - g| <= abs_tol + rel_tol * |g|.
            const double err = std::abs(fd - g);
            const double allowed = abs_tol + rel_tol * std::abs(g);
            if (err > allowed) res.passed = false;
            if (err / allowed > worst_ratio) {
                worst_ratio = err / allowed;
                res.worst_param = where;
            }
            if (std::abs(g) >= abs_floor)
                res.worst_rel = std::max(res.worst_rel, err / std::max(std::abs(g), std::abs(fd)));
            else
                res.worst_abs = std::max(res.worst_abs, err);
        }
    }
    net.clear_caches();
    return res;
}

BalanceCheckResult batch_balance_check(int n_samples_per_class, int batch_size, int n_plans,
                                       uint64_t seed) {
    BalanceCheckResult res;
    std::vector<int> classes;
    for (int i = 0; i < n_samples_per_class; ++i) {
        classes.push_back(0);
        classes.push_back(1);
    }
    for (int p = 0; p < n_plans; ++p) {
        BatchPlan plan = balanced_batches(classes, batch_size, mix_seed(seed, static_cast<uint64_t>(p)));
        for (const auto& batch : plan.batches) {
            bool single = true;
            for (size_t i = 1; i < batch.size(); ++i)
                if (classes[static_cast<size_t>(batch[i])] !=
                    classes[static_cast<size_t>(batch[0])])
                    single = false;
            if (single) ++res.balanced_single_class;
        }
    }

    // Naive baseline: every batch element drawn iid from the two classes.
    Rng rng(mix_seed(seed, 0xBA));
    res.naive_batches = 100000;
    for (int64_t i = 0; i < res.naive_batches; ++i) {
        int first = static_cast<int>(rng.next_u64() & 1);
        bool single = true;
        for (int j = 1; j < batch_size; ++j)
            if (static_cast<int>(rng.next_u64() & 1) != first) single = false;
        if (single) ++res.naive_single_class;
    }
    res.naive_rate = static_cast<double>(res.naive_single_class) /
                     static_cast<double>(res.naive_batches);
    res.analytic_rate = 2.0 * std::pow(0.5, batch_size);
    return res;
}

}  // namespace vox3d::verify
