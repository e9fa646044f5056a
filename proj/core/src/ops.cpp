#include "vox3d/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "vox3d/errors.hpp"

namespace vox3d {

Dims3 ConvSpec::out_extent(const Dims3& in) const {
    Dims3 out{};
    for (int a = 0; a < 3; ++a) {
        if (kernel[a] < 1) throw ConfigError("conv kernel extent must be >= 1 on axis " + std::to_string(a));
        if (stride[a] < 1) throw ConfigError("conv stride must be >= 1 on axis " + std::to_string(a));
        if (padding[a] < 0) throw ConfigError("conv padding must be >= 0 on axis " + std::to_string(a));
        int64_t o = (in[a] + 2 * padding[a] - kernel[a]) / stride[a] + 1;
        if (in[a] + 2 * padding[a] < kernel[a] || o < 1)
            throw ConfigError("conv output extent on spatial axis " + std::to_string(a) +
                              " is non-positive (in=" + std::to_string(in[a]) + ")");
        out[a] = o;
    }
    return out;
}

static void check_conv_shapes(const Tensor& input, const Tensor& weights,
                              const Tensor& bias, const ConvSpec& spec) {
    if (input.rank() != 5)
        throw ShapeError("conv3d input must be rank 5 [b,c,d,h,w], got " + input.shape_str());
    if (weights.rank() != 5)
        throw ShapeError("conv3d weights must be rank 5 [co,ci,kd,kh,kw], got " + weights.shape_str());
    if (input.extent(1) != spec.in_channels)
        throw ShapeError("conv3d channel axis 1 mismatch: input has " +
                         std::to_string(input.extent(1)) + " channels, spec expects " +
                         std::to_string(spec.in_channels));
    if (weights.extent(0) != spec.out_channels || weights.extent(1) != spec.in_channels ||
        weights.extent(2) != spec.kernel[0] || weights.extent(3) != spec.kernel[1] ||
        weights.extent(4) != spec.kernel[2])
        throw ShapeError("conv3d weights " + weights.shape_str() + " do not match spec");
    if (bias.rank() != 1 || bias.extent(0) != spec.out_channels)
        throw ShapeError("conv3d bias axis 0 must have " + std::to_string(spec.out_channels) +
                         " entries, got " + bias.shape_str());
}

// All gemms run in f64 (values stay f32 at rest): the column buffers and
// operand copies below are double so every reduction has a 64-bit accumulator.
static std::vector<double> widen(const float* p, int64_t n) {
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = p[i];
    return out;
}

// Scatters one input sample [ci,D,H,W] into columns [K, N] with
// K = ci*kd*kh*kw and N = Do*Ho*Wo. Out-of-range reads are zeros.
static void im2col(const float* in, const Dims3& ext, int64_t ci, const ConvSpec& s,
                   const Dims3& oext, double* col) {
    const int64_t D = ext[0], H = ext[1], W = ext[2];
    const int64_t Do = oext[0], Ho = oext[1], Wo = oext[2];
    const int64_t N = Do * Ho * Wo;
    int64_t row = 0;
    for (int64_t c = 0; c < ci; ++c) {
        const float* chan = in + c * D * H * W;
        for (int64_t i = 0; i < s.kernel[0]; ++i)
            for (int64_t j = 0; j < s.kernel[1]; ++j)
                for (int64_t k = 0; k < s.kernel[2]; ++k, ++row) {
                    double* dst = col + row * N;
                    for (int64_t z = 0; z < Do; ++z) {
                        int64_t iz = z * s.stride[0] - s.padding[0] + i;
                        if (iz < 0 || iz >= D) {
                            std::memset(dst + z * Ho * Wo, 0, sizeof(double) * Ho * Wo);
                            continue;
                        }
                        for (int64_t y = 0; y < Ho; ++y) {
                            int64_t iy = y * s.stride[1] - s.padding[1] + j;
                            double* d = dst + (z * Ho + y) * Wo;
                            if (iy < 0 || iy >= H) {
                                std::memset(d, 0, sizeof(double) * Wo);
                                continue;
                            }
                            const float* src = chan + (iz * H + iy) * W;
                            for (int64_t x = 0; x < Wo; ++x) {
                                int64_t ix = x * s.stride[2] - s.padding[2] + k;
                                d[x] = (ix < 0 || ix >= W) ? 0.0 : static_cast<double>(src[ix]);
                            }
                        }
                    }
                }
    }
}

// Accumulates columns [K, N] back into one input-gradient sample [ci,D,H,W].
static void col2im(const double* col, const Dims3& ext, int64_t ci, const ConvSpec& s,
                   const Dims3& oext, double* in) {
    const int64_t D = ext[0], H = ext[1], W = ext[2];
    const int64_t Do = oext[0], Ho = oext[1], Wo = oext[2];
    const int64_t N = Do * Ho * Wo;
    int64_t row = 0;
    for (int64_t c = 0; c < ci; ++c) {
        double* chan = in + c * D * H * W;
        for (int64_t i = 0; i < s.kernel[0]; ++i)
            for (int64_t j = 0; j < s.kernel[1]; ++j)
                for (int64_t k = 0; k < s.kernel[2]; ++k, ++row) {
                    const double* src = col + row * N;
                    for (int64_t z = 0; z < Do; ++z) {
                        int64_t iz = z * s.stride[0] - s.padding[0] + i;
                        if (iz < 0 || iz >= D) continue;
                        for (int64_t y = 0; y < Ho; ++y) {
                            int64_t iy = y * s.stride[1] - s.padding[1] + j;
                            if (iy < 0 || iy >= H) continue;
                            double* d = chan + (iz * H + iy) * W;
                            const double* srow = src + (z * Ho + y) * Wo;
                            for (int64_t x = 0; x < Wo; ++x) {
                                int64_t ix = x * s.stride[2] - s.padding[2] + k;
                                if (ix >= 0 && ix < W) d[ix] += srow[x];
                            }
                        }
                    }
                }
    }
}

Tensor conv3d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvSpec& spec) {
    check_conv_shapes(input, weights, bias, spec);
    const int64_t b = input.extent(0);
    const Dims3 ext{input.extent(2), input.extent(3), input.extent(4)};
    const Dims3 oext = spec.out_extent(ext);
    const int64_t co = spec.out_channels, ci = spec.in_channels;
    const int64_t K = ci * spec.kernel[0] * spec.kernel[1] * spec.kernel[2];
    const int64_t N = oext[0] * oext[1] * oext[2];

    Tensor out({b, co, oext[0], oext[1], oext[2]});
    std::vector<double> col(static_cast<size_t>(K * N));
    std::vector<double> y64(static_cast<size_t>(co * N));
    const std::vector<double> w64 = widen(weights.data(), weights.numel());
    for (int64_t s = 0; s < b; ++s) {
        im2col(input.data() + s * ci * ext[0] * ext[1] * ext[2], ext, ci, spec, oext, col.data());
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)co, (int)N, (int)K,
                    1.0, w64.data(), (int)K, col.data(), (int)N, 0.0, y64.data(), (int)N);
        float* y = out.data() + s * co * N;
        for (int64_t o = 0; o < co; ++o) {
            const double bo = bias[o];
            const double* row = y64.data() + o * N;
            for (int64_t n = 0; n < N; ++n) y[o * N + n] = static_cast<float>(row[n] + bo);
        }
    }
    return out;
}

void conv3d_backward(const Tensor& input, const Tensor& weights, const ConvSpec& spec,
                     const Tensor& dout, Tensor& dinput, Tensor& dweights, Tensor& dbias) {
    const int64_t b = input.extent(0);
    const Dims3 ext{input.extent(2), input.extent(3), input.extent(4)};
    const Dims3 oext = spec.out_extent(ext);
    const int64_t co = spec.out_channels, ci = spec.in_channels;
    const int64_t K = ci * spec.kernel[0] * spec.kernel[1] * spec.kernel[2];
    const int64_t N = oext[0] * oext[1] * oext[2];
    if (dout.shape() != std::vector<int64_t>{b, co, oext[0], oext[1], oext[2]})
        throw ShapeError("conv3d_backward: dout shape " + dout.shape_str() + " unexpected");

    dinput = Tensor(input.shape());
    dweights = Tensor(weights.shape());
    dbias = Tensor({co});

    const int64_t sample = ci * ext[0] * ext[1] * ext[2];
    std::vector<double> col(static_cast<size_t>(K * N));
    std::vector<double> dcol(static_cast<size_t>(K * N));
    std::vector<double> dx64(static_cast<size_t>(sample));
    std::vector<double> dw64(static_cast<size_t>(co * K), 0.0);
    std::vector<double> db64(static_cast<size_t>(co), 0.0);
    const std::vector<double> w64 = widen(weights.data(), weights.numel());
    for (int64_t s = 0; s < b; ++s) {
        const float* x = input.data() + s * sample;
        const std::vector<double> dy = widen(dout.data() + s * co * N, co * N);
        im2col(x, ext, ci, spec, oext, col.data());
        // dW += dy * col^T
        cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)co, (int)K, (int)N,
                    1.0, dy.data(), (int)N, col.data(), (int)N, 1.0, dw64.data(), (int)K);
        // dcol = W^T * dy
        cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)K, (int)N, (int)co,
                    1.0, w64.data(), (int)K, dy.data(), (int)N, 0.0, dcol.data(), (int)N);
        std::fill(dx64.begin(), dx64.end(), 0.0);
        col2im(dcol.data(), ext, ci, spec, oext, dx64.data());
        float* dxp = dinput.data() + s * sample;
        for (int64_t i = 0; i < sample; ++i) dxp[i] = static_cast<float>(dx64[static_cast<size_t>(i)]);
        for (int64_t o = 0; o < co; ++o) {
            double acc = 0.0;
            const double* row = dy.data() + o * N;
            for (int64_t n = 0; n < N; ++n) acc += row[n];
            db64[static_cast<size_t>(o)] += acc;
        }
    }
    for (int64_t i = 0; i < dweights.numel(); ++i)
        dweights[i] = static_cast<float>(dw64[static_cast<size_t>(i)]);
    for (int64_t o = 0; o < co; ++o) dbias[o] = static_cast<float>(db64[static_cast<size_t>(o)]);
}

PoolResult maxpool3d(const Tensor& input, const Dims3& window, const Dims3& stride) {
    if (input.rank() != 5)
        throw ShapeError("maxpool3d input must be rank 5, got " + input.shape_str());
    const int64_t b = input.extent(0), c = input.extent(1);
    const Dims3 ext{input.extent(2), input.extent(3), input.extent(4)};
    Dims3 oext{};
    for (int a = 0; a < 3; ++a) {
        if (window[a] < 1 || stride[a] < 1)
            throw ConfigError("maxpool window/stride must be >= 1 on axis " + std::to_string(a));
        if (window[a] > ext[a])
            throw ConfigError("maxpool window " + std::to_string(window[a]) +
                              " larger than input extent " + std::to_string(ext[a]) +
                              " on spatial axis " + std::to_string(a));
        oext[a] = (ext[a] - window[a]) / stride[a] + 1;
    }
    const int64_t D = ext[0], H = ext[1], W = ext[2];
    PoolResult res{Tensor({b, c, oext[0], oext[1], oext[2]}), {}};
    res.argmax.resize(static_cast<size_t>(res.output.numel()));
    int64_t oi = 0;
    for (int64_t s = 0; s < b; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const int64_t base = (s * c + ch) * D * H * W;
            for (int64_t z = 0; z < oext[0]; ++z)
                for (int64_t y = 0; y < oext[1]; ++y)
                    for (int64_t x = 0; x < oext[2]; ++x, ++oi) {
                        float best = -std::numeric_limits<float>::infinity();
                        int64_t best_idx = -1;
                        for (int64_t i = 0; i < window[0]; ++i)
                            for (int64_t j = 0; j < window[1]; ++j)
                                for (int64_t k = 0; k < window[2]; ++k) {
                                    int64_t idx = base +
                                        ((z * stride[0] + i) * H + y * stride[1] + j) * W +
                                        x * stride[2] + k;
                                    float v = input[idx];
                                    if (v > best) { best = v; best_idx = idx; }
                                }
                        res.output[oi] = best;
                        res.argmax[static_cast<size_t>(oi)] = best_idx;
                    }
        }
    return res;
}

Tensor maxpool3d_backward(const Tensor& dout, const std::vector<int64_t>& argmax,
                          const std::vector<int64_t>& input_shape) {
    Tensor dinput(input_shape);
    for (int64_t i = 0; i < dout.numel(); ++i)
        dinput[argmax[static_cast<size_t>(i)]] += dout[i];
    return dinput;
}

static int64_t bn_group_size(const Tensor& t) {
    int64_t n = t.extent(0);
    for (int64_t a = 2; a < t.rank(); ++a) n *= t.extent(a);
    return n;
}

Tensor batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                         Tensor& running_mean, Tensor& running_var, Mode mode,
                         float momentum, float epsilon, BatchNormCache* cache) {
    if (input.rank() < 2)
        throw ShapeError("batchnorm input must have a channel axis, got " + input.shape_str());
    const int64_t c = input.extent(1);
    if (gamma.numel() != c || beta.numel() != c)
        throw ShapeError("batchnorm channel axis mismatch: input has " + std::to_string(c) +
                         " channels, gamma/beta have " + std::to_string(gamma.numel()) + "/" +
                         std::to_string(beta.numel()));
    const int64_t b = input.extent(0);
    const int64_t spatial = bn_group_size(input) / b;
    const int64_t n = b * spatial;

    std::vector<double> mean(static_cast<size_t>(c)), invstd(static_cast<size_t>(c));
    if (mode == Mode::train) {
        for (int64_t ch = 0; ch < c; ++ch) {
            double m = 0.0;
            for (int64_t s = 0; s < b; ++s) {
                const float* p = input.data() + (s * c + ch) * spatial;
                for (int64_t i = 0; i < spatial; ++i) m += p[i];
            }
            m /= static_cast<double>(n);
            double var = 0.0;
            for (int64_t s = 0; s < b; ++s) {
                const float* p = input.data() + (s * c + ch) * spatial;
                for (int64_t i = 0; i < spatial; ++i) {
                    double d = p[i] - m;
                    var += d * d;
                }
            }
            var /= static_cast<double>(n);
            mean[ch] = m;
            invstd[ch] = 1.0 / std::sqrt(var + epsilon);
            running_mean[ch] = static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * m);
            running_var[ch] = static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * var);
        }
    } else {
        for (int64_t ch = 0; ch < c; ++ch) {
            mean[ch] = running_mean[ch];
            invstd[ch] = 1.0 / std::sqrt(static_cast<double>(running_var[ch]) + epsilon);
        }
    }

    Tensor out(input.shape());
    for (int64_t s = 0; s < b; ++s)
        for (int64_t ch = 0; ch < c; ++ch) {
            const float* p = input.data() + (s * c + ch) * spatial;
            float* q = out.data() + (s * c + ch) * spatial;
            const float g = gamma[ch], bt = beta[ch];
            const float m = static_cast<float>(mean[ch]), is = static_cast<float>(invstd[ch]);
            for (int64_t i = 0; i < spatial; ++i) q[i] = g * ((p[i] - m) * is) + bt;
        }

    if (cache && mode == Mode::train) {
        cache->input = input;
        cache->mean = std::move(mean);
        cache->invstd = std::move(invstd);
        cache->valid = true;
    }
    return out;
}

void batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                        const Tensor& dout, Tensor& dinput, Tensor& dgamma, Tensor& dbeta) {
    if (!cache.valid) throw StateError("batchnorm_backward without a cached train forward");
    const Tensor& x = cache.input;
    const int64_t b = x.extent(0), c = x.extent(1);
    const int64_t spatial = bn_group_size(x) / b;
    const int64_t n = b * spatial;

    dinput = Tensor(x.shape());
    dgamma = Tensor({c});
    dbeta = Tensor({c});

    for (int64_t ch = 0; ch < c; ++ch) {
        const double m = cache.mean[static_cast<size_t>(ch)];
        const double is = cache.invstd[static_cast<size_t>(ch)];
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int64_t s = 0; s < b; ++s) {
            const float* xp = x.data() + (s * c + ch) * spatial;
            const float* dp = dout.data() + (s * c + ch) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
                double xhat = (xp[i] - m) * is;
                sum_dy += dp[i];
                sum_dy_xhat += dp[i] * xhat;
            }
        }
        dgamma[ch] = static_cast<float>(sum_dy_xhat);
        dbeta[ch] = static_cast<float>(sum_dy);
        const double g = gamma[ch];
        for (int64_t s = 0; s < b; ++s) {
            const float* xp = x.data() + (s * c + ch) * spatial;
            const float* dp = dout.data() + (s * c + ch) * spatial;
            float* dq = dinput.data() + (s * c + ch) * spatial;
            for (int64_t i = 0; i < spatial; ++i) {
                double xhat = (xp[i] - m) * is;
                double dxhat = dp[i] * g;
                dq[i] = static_cast<float>(
                    is * (dxhat - sum_dy * g / n - xhat * sum_dy_xhat * g / n));
            }
        }
    }
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 2 || weights.rank() != 2)
        throw ShapeError("dense expects rank-2 input and weights, got " + input.shape_str() +
                         " and " + weights.shape_str());
    const int64_t b = input.extent(0), n = input.extent(1);
    const int64_t m = weights.extent(0);
    if (weights.extent(1) != n)
        throw ShapeError("dense inner axis mismatch: input axis 1 is " + std::to_string(n) +
                         ", weights axis 1 is " + std::to_string(weights.extent(1)));
    if (bias.numel() != m)
        throw ShapeError("dense bias must have " + std::to_string(m) + " entries");
    Tensor out({b, m});
    const std::vector<double> x64 = widen(input.data(), input.numel());
    const std::vector<double> w64 = widen(weights.data(), weights.numel());
    std::vector<double> y64(static_cast<size_t>(b * m));
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, (int)b, (int)m, (int)n,
                1.0, x64.data(), (int)n, w64.data(), (int)n, 0.0, y64.data(), (int)m);
    for (int64_t s = 0; s < b; ++s)
        for (int64_t o = 0; o < m; ++o)
            out[s * m + o] = static_cast<float>(y64[static_cast<size_t>(s * m + o)] + bias[o]);
    return out;
}

void dense_backward(const Tensor& input, const Tensor& weights, const Tensor& dout,
                    Tensor& dinput, Tensor& dweights, Tensor& dbias) {
    const int64_t b = input.extent(0), n = input.extent(1), m = weights.extent(0);
    if (dout.rank() != 2 || dout.extent(0) != b || dout.extent(1) != m)
        throw ShapeError("dense_backward: dout shape " + dout.shape_str() + " unexpected");
    dinput = Tensor({b, n});
    dweights = Tensor({m, n});
    dbias = Tensor({m});
    const std::vector<double> dy64 = widen(dout.data(), dout.numel());
    const std::vector<double> x64 = widen(input.data(), input.numel());
    const std::vector<double> w64 = widen(weights.data(), weights.numel());
    std::vector<double> dx64(static_cast<size_t>(b * n)), dw64(static_cast<size_t>(m * n));
    // dX = dY * W
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, (int)b, (int)n, (int)m,
                1.0, dy64.data(), (int)m, w64.data(), (int)n, 0.0, dx64.data(), (int)n);
    // dW = dY^T * X
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, (int)m, (int)n, (int)b,
                1.0, dy64.data(), (int)m, x64.data(), (int)n, 0.0, dw64.data(), (int)n);
    for (int64_t i = 0; i < b * n; ++i) dinput[i] = static_cast<float>(dx64[static_cast<size_t>(i)]);
    for (int64_t i = 0; i < m * n; ++i) dweights[i] = static_cast<float>(dw64[static_cast<size_t>(i)]);
    for (int64_t o = 0; o < m; ++o) {
        double acc = 0.0;
        for (int64_t s = 0; s < b; ++s) acc += dout[s * m + o];
        dbias[o] = static_cast<float>(acc);
    }
}

Tensor relu(const Tensor& input) {
    Tensor out(input.shape());
    for (int64_t i = 0; i < input.numel(); ++i) out[i] = input[i] > 0.0f ? input[i] : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& dout, const Tensor& input) {
    Tensor dinput(input.shape());
    for (int64_t i = 0; i < input.numel(); ++i)
        dinput[i] = input[i] > 0.0f ? dout[i] : 0.0f;
    return dinput;
}

DropoutResult dropout(const Tensor& input, float p, Mode mode, Rng& rng) {
    if (p < 0.0f || p >= 1.0f)
        throw ConfigError("dropout probability must be in [0,1), got " + std::to_string(p));
    if (mode == Mode::infer || p == 0.0f) return {input, Tensor{}};
    const float keep_scale = 1.0f / (1.0f - p);
    DropoutResult res{Tensor(input.shape()), Tensor(input.shape())};
    for (int64_t i = 0; i < input.numel(); ++i) {
        float m = rng.uniform() < p ? 0.0f : keep_scale;
        res.mask[i] = m;
        res.output[i] = input[i] * m;
    }
    return res;
}

Tensor softmax(const Tensor& logits) {
    if (logits.rank() != 2 || logits.extent(1) < 2)
        throw ShapeError("softmax expects [b,k] with k >= 2, got " + logits.shape_str());
    const int64_t b = logits.extent(0), k = logits.extent(1);
    Tensor out({b, k});
    for (int64_t s = 0; s < b; ++s) {
        const float* row = logits.data() + s * k;
        float mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (int64_t j = 0; j < k; ++j) denom += std::exp(static_cast<double>(row[j] - mx));
        for (int64_t j = 0; j < k; ++j)
            out[s * k + j] = static_cast<float>(std::exp(static_cast<double>(row[j] - mx)) / denom);
    }
    return out;
}

double cross_entropy(const Tensor& probs, const std::vector<int>& labels) {
    const int64_t b = probs.extent(0), k = probs.extent(1);
    if (static_cast<int64_t>(labels.size()) != b)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(b));
    double loss = 0.0;
    for (int64_t s = 0; s < b; ++s) {
        int lab = labels[static_cast<size_t>(s)];
        if (lab < 0 || lab >= k)
            throw ConfigError("cross_entropy label " + std::to_string(lab) + " out of range [0," +
                              std::to_string(k) + ")");
        double p = std::max(static_cast<double>(probs[s * k + lab]), 1e-12);
        loss -= std::log(p);
    }
    return loss / static_cast<double>(b);
}

}  // namespace vox3d
