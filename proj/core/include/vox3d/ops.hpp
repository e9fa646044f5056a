#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vox3d/rng.hpp"
#include "vox3d/tensor.hpp"

namespace vox3d {

using Dims3 = std::array<int64_t, 3>;

struct ConvSpec {
    int64_t in_channels = 1;
    int64_t out_channels = 1;
    Dims3 kernel{1, 1, 1};
    Dims3 stride{1, 1, 1};
    Dims3 padding{0, 0, 0};

    // Throws ConfigError on non-positive kernel/stride or negative padding,
    // or when any output extent would be < 1 for the given input extents.
    Dims3 out_extent(const Dims3& in) const;
};

// input [b,ci,D,H,W], weights [co,ci,kd,kh,kw], bias [co] -> [b,co,D',H',W'].
// Zero padding; im2col + f64 gemm under the hood (f32 storage, 64-bit
// accumulation inside the reductions).
Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec);

void conv3d_backward(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                     const Tensor& dout, Tensor& dinput, Tensor& dweights, Tensor& dbias);

struct PoolResult {
    Tensor output;
    // Flat index into the input tensor of the max of each output cell,
    // lowest flat index wins ties.
    std::vector<int64_t> argmax;
};

// Windows truncate at the boundary; window must fit at least once per axis.
PoolResult maxpool3d(const Tensor& input, const Dims3& window, const Dims3& stride);

Tensor maxpool3d_backward(const Tensor& dout, const std::vector<int64_t>& argmax,
                          const std::vector<int64_t>& input_shape);

struct BatchNormCache {
    Tensor input;
    std::vector<double> mean;    // per channel
    std::vector<double> invstd;  // per channel, 1/sqrt(var + eps)
    bool valid = false;
};

// input [b,c,...]; normalizes over all non-channel axes. Train mode uses
// batch statistics and updates running stats: run = (1-momentum)*run + momentum*batch.
Tensor batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, Mode mode,
                         float momentum, float epsilon, BatchNormCache* cache);

void batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                        const Tensor& dout, Tensor& dinput, Tensor& dgamma,
                        Tensor& dbeta);

// input [b,n], weights [m,n], bias [m] -> [b,m]: out = input * weights^T + bias.
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& dout,
                    Tensor& dinput, Tensor& dweights, Tensor& dbias);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& dout, const Tensor& input);

struct DropoutResult {
    Tensor output;
    Tensor mask;  // 0 or 1/(1-p) per element; empty in infer mode
};

// Inverted dropout: train mode zeroes with probability p and scales survivors
// by 1/(1-p); infer mode is the identity. Requires 0 <= p < 1.
DropoutResult dropout(const Tensor& input, float p, Mode mode, Rng& rng);

// logits [b,k], k >= 2; max-shifted, rows sum to 1.
Tensor softmax(const Tensor& logits);

// probs [b,k] rows summing to 1; mean over batch of -log(probs[i, labels[i]]),
// probabilities clamped to >= 1e-12 before the log.
double cross_entropy(const Tensor& probs, const std::vector<int>& labels);

}  // namespace vox3d
