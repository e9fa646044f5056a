#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vox3d/network.hpp"
#include "vox3d/ops.hpp"

namespace vox3d {
// Independent reference implementations used to cross-check the production
// kernels. These deliberately share no code with the main paths: the
// convolution is a direct six-nested loop, the AUC is exhaustive pair
// counting, gradients come from central finite differences.
namespace verify {

// Direct-loop convolution with 64-bit accumulators.
Tensor conv3d_reference(const Tensor& input, const Tensor& weights, const Tensor& bias,
                        const ConvSpec& spec);

// Per-window scan maximum (no argmax bookkeeping).
Tensor maxpool3d_reference(const Tensor& input, const Dims3& window, const Dims3& stride);

// Triple-loop input * weights^T + bias.
Tensor dense_reference(const Tensor& input, const Tensor& weights, const Tensor& bias);

// Exhaustive (pos, neg) pair counting, 0.5 credit for ties.
double roc_auc_reference(const std::vector<double>& scores, const std::vector<int>& labels);

struct GradCheckResult {
    std::string worst_param;  // largest |fd - g| relative to its allowance
    double worst_rel = 0.0;   // over params with |analytic| >= abs_floor
    double worst_abs = 0.0;   // over params with |analytic| <  abs_floor
    int checked = 0;
    int skipped = 0;  // draws whose FD interval straddles a kink at every step size
    bool passed = true;  // every check satisfied |fd - g| <= abs_tol + rel_tol * |g|
};

// Central finite differences with step h on `per_layer` randomly chosen
// trainable parameters of every layer, against the analytic gradients of one
// backward pass on the same batch. The network rng is re-seeded before every
// forward so dropout masks are frozen. The loss is kinked (relu, maxpool):
// when the two FD evaluations land in different differentiable regions
// (detected via Network::activation_signature) the step is shrunk, and a draw
// that crosses a kink at every step is skipped and redrawn — the derivative
// does not exist there, so no finite difference can validate it.
GradCheckResult gradcheck(Network& net, const Tensor& input, const std::vector<int>& labels,
                          int per_layer, double h = 1e-2, double rel_tol = 1e-2,
                          double abs_tol = 1e-4, double abs_floor = 1e-2,
                          uint64_t seed = 0);

struct BalanceCheckResult {
    int64_t balanced_single_class = 0;   // over all balanced plans
    int64_t naive_single_class = 0;      // over the naive Monte-Carlo baseline
    int64_t naive_batches = 0;
    double naive_rate = 0.0;
    double analytic_rate = 0.0;  // c * (1/c)^b for equiprobable classes
};

// Plans `n_plans` seeded balanced batch plans over an even two-class set and
// counts single-class batches; also samples the naive unbalanced iterator to
// estimate its single-class rate.
BalanceCheckResult batch_balance_check(int n_samples_per_class, int batch_size, int n_plans,
                                       uint64_t seed);

}  // namespace verify
}  // namespace vox3d
