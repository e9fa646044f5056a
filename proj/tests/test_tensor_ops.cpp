#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "vox3d/errors.hpp"
#include "vox3d/ops.hpp"
#include "vox3d/verify.hpp"

using namespace vox3d;
using testutil::random_tensor;

TEST_SUITE("conv3d") {
    TEST_CASE("1x1x1 identity kernel is the identity map exactly") {
        Tensor x = random_tensor({1, 1, 3, 3, 3}, 11);
        Tensor w({1, 1, 1, 1, 1}, {1.0f});
        Tensor b({1}, {0.0f});
        Tensor y = conv3d(x, w, b, ConvSpec{1, 1, {1, 1, 1}, {1, 1, 1}, {0, 0, 0}});
        CHECK(testutil::bitwise_equal(y, x));
    }

    TEST_CASE("all-ones input under a 2^3 ones kernel counts the footprint") {
        Tensor x = Tensor::full({1, 1, 3, 3, 3}, 1.0f);
        Tensor w = Tensor::full({1, 1, 2, 2, 2}, 1.0f);
        Tensor b({1}, {0.0f});
        Tensor y = conv3d(x, w, b, ConvSpec{1, 1, {2, 2, 2}, {1, 1, 1}, {0, 0, 0}});
        CHECK(y.shape() == std::vector<int64_t>{1, 1, 2, 2, 2});
        for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(8.0).epsilon(1e-7));
    }

    TEST_CASE("5^3 ramp volume, 3^3 ones kernel, stride 2 pad 1 matches the direct oracle") {
        Tensor x({1, 1, 5, 5, 5});
        for (int64_t z = 0; z < 5; ++z)
            for (int64_t y = 0; y < 5; ++y)
                for (int64_t k = 0; k < 5; ++k)
                    x[(z * 5 + y) * 5 + k] = static_cast<float>(z + y + k);
        Tensor w = Tensor::full({1, 1, 3, 3, 3}, 1.0f);
        Tensor b({1}, {0.0f});
        ConvSpec spec{1, 1, {3, 3, 3}, {2, 2, 2}, {1, 1, 1}};
        Tensor got = conv3d(x, w, b, spec);
        Tensor want = verify::conv3d_reference(x, w, b, spec);
        CHECK(got.shape() == want.shape());
        CHECK(testutil::max_rel_dev(got, want) <= 1e-6);
    }

    TEST_CASE("matches the direct-loop oracle on 100 random shapes within 1e-4 relative") {
        Rng rng(2024);
        auto dim = [&rng](int64_t lo, int64_t hi) {
            return lo + static_cast<int64_t>(rng.next_u64() % static_cast<uint64_t>(hi - lo + 1));
        };
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            ConvSpec spec;
            spec.in_channels = dim(1, 3);
            spec.out_channels = dim(1, 4);
            Dims3 in{dim(1, 7), dim(1, 7), dim(1, 7)};
            for (int a = 0; a < 3; ++a) {
                spec.kernel[a] = dim(1, in[a]);
                spec.stride[a] = dim(1, 2);
                spec.padding[a] = dim(0, 1);
            }
            Tensor x = random_tensor({dim(1, 2), spec.in_channels, in[0], in[1], in[2]},
                                     rng.next_u64());
            Tensor w = random_tensor({spec.out_channels, spec.in_channels, spec.kernel[0],
                                      spec.kernel[1], spec.kernel[2]},
                                     rng.next_u64());
            Tensor b = random_tensor({spec.out_channels}, rng.next_u64());
            worst = std::max(worst,
                             testutil::max_rel_dev(conv3d(x, w, b, spec),
                                                   verify::conv3d_reference(x, w, b, spec)));
        }
        CHECK(worst <= 1e-4);
    }

    TEST_CASE("channel mismatch between input and weights raises ShapeError") {
        Tensor x = random_tensor({1, 2, 4, 4, 4}, 5);
        Tensor w = random_tensor({1, 3, 3, 3, 3}, 6);
        Tensor b({1}, {0.0f});
        CHECK_THROWS_AS(conv3d(x, w, b, ConvSpec{3, 1, {3, 3, 3}, {1, 1, 1}, {0, 0, 0}}),
                        ShapeError);
    }

    TEST_CASE("non-positive output extent raises ConfigError") {
        ConvSpec spec{1, 1, {5, 5, 5}, {1, 1, 1}, {0, 0, 0}};
        CHECK_THROWS_AS(spec.out_extent({3, 3, 3}), ConfigError);
    }

    TEST_CASE("deterministic: identical inputs give bitwise identical outputs") {
        Tensor x = random_tensor({2, 2, 5, 5, 5}, 31);
        Tensor w = random_tensor({3, 2, 3, 3, 3}, 32);
        Tensor b = random_tensor({3}, 33);
        ConvSpec spec{2, 3, {3, 3, 3}, {1, 1, 1}, {1, 1, 1}};
        CHECK(testutil::bitwise_equal(conv3d(x, w, b, spec), conv3d(x, w, b, spec)));
    }
}

TEST_SUITE("maxpool3d") {
    TEST_CASE("max of the enumeration 1..8") {
        Tensor x({1, 1, 2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
        PoolResult r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
        CHECK(r.output.shape() == std::vector<int64_t>{1, 1, 1, 1, 1});
        CHECK(r.output[0] == 8.0f);
        CHECK(r.argmax == std::vector<int64_t>{7});
    }

    TEST_CASE("constant input: ties break to the lowest flat index per window") {
        Tensor x = Tensor::full({1, 1, 4, 4, 4}, 2.5f);
        PoolResult r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
        for (int64_t i = 0; i < r.output.numel(); ++i) CHECK(r.output[i] == 2.5f);
        // First index of each window: window origin in input coordinates.
        std::vector<int64_t> want;
        for (int64_t z = 0; z < 4; z += 2)
            for (int64_t y = 0; y < 4; y += 2)
                for (int64_t k = 0; k < 4; k += 2) want.push_back((z * 4 + y) * 4 + k);
        CHECK(r.argmax == want);
    }

    TEST_CASE("[1,128,14,14,14] window 7^3 stride 7 matches the per-window scan oracle") {
        Tensor x = random_tensor({1, 128, 14, 14, 14}, 77);
        PoolResult r = maxpool3d(x, {7, 7, 7}, {7, 7, 7});
        CHECK(r.output.shape() == std::vector<int64_t>{1, 128, 2, 2, 2});
        Tensor want = verify::maxpool3d_reference(x, {7, 7, 7}, {7, 7, 7});
        CHECK(testutil::bitwise_equal(r.output, want));
    }

    TEST_CASE("output values are invariant to permutations inside one window") {
        Tensor x = random_tensor({1, 1, 2, 2, 2}, 91);
        PoolResult before = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
        std::swap(x.buffer()[0], x.buffer()[5]);
        std::swap(x.buffer()[2], x.buffer()[7]);
        PoolResult after = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
        CHECK(before.output[0] == after.output[0]);
    }

    TEST_CASE("window larger than the input raises ConfigError") {
        Tensor x = random_tensor({1, 1, 3, 3, 3}, 17);
        CHECK_THROWS_AS(maxpool3d(x, {4, 4, 4}, {1, 1, 1}), ConfigError);
    }

    TEST_CASE("partial windows truncate: 5 -> 2 under 2^3 stride 2") {
        Tensor x = random_tensor({1, 1, 5, 5, 5}, 19);
        PoolResult r = maxpool3d(x, {2, 2, 2}, {2, 2, 2});
        CHECK(r.output.shape() == std::vector<int64_t>{1, 1, 2, 2, 2});
    }
}

TEST_SUITE("batchnorm") {
    TEST_CASE("train mode with gamma=1 beta=0 normalizes every channel") {
        Tensor x = random_tensor({4, 3, 5, 5, 5}, 23, 2.0f, 1.7f);
        Tensor gamma = Tensor::full({3}, 1.0f), beta = Tensor::full({3}, 0.0f);
        Tensor rm = Tensor::full({3}, 0.0f), rv = Tensor::full({3}, 1.0f);
        Tensor y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.1f, 1e-5f, nullptr);
        const int64_t per = 4 * 5 * 5 * 5;
        for (int64_t c = 0; c < 3; ++c) {
            double mean = 0.0, var = 0.0;
            for (int64_t s = 0; s < 4; ++s)
                for (int64_t i = 0; i < 125; ++i) mean += y[(s * 3 + c) * 125 + i];
            mean /= static_cast<double>(per);
            for (int64_t s = 0; s < 4; ++s)
                for (int64_t i = 0; i < 125; ++i) {
                    double d = y[(s * 3 + c) * 125 + i] - mean;
                    var += d * d;
                }
            var /= static_cast<double>(per);
            CHECK(std::abs(mean) <= 1e-5);
            CHECK(std::abs(var - 1.0) <= 1e-3);
        }
    }

    TEST_CASE("constant channel collapses to beta") {
        Tensor x = Tensor::full({2, 1, 3, 3, 3}, 4.2f);
        Tensor gamma = Tensor::full({1}, 2.0f), beta = Tensor::full({1}, -0.75f);
        Tensor rm({1}, {0.0f}), rv({1}, {1.0f});
        Tensor y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.1f, 1e-5f, nullptr);
        for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == doctest::Approx(-0.75).epsilon(1e-6));
    }

    TEST_CASE("two-sample batch {2,4} with gamma=3 beta=1 epsilon=0 gives {-2,4}") {
        Tensor x({2, 1, 1, 1, 1}, {2.0f, 4.0f});
        Tensor gamma({1}, {3.0f}), beta({1}, {1.0f});
        Tensor rm({1}, {0.0f}), rv({1}, {1.0f});
        Tensor y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.1f, 0.0f, nullptr);
        CHECK(y[0] == doctest::Approx(-2.0).epsilon(1e-6));
        CHECK(y[1] == doctest::Approx(4.0).epsilon(1e-6));
    }

    TEST_CASE("gamma/beta channel mismatch raises ShapeError") {
        Tensor x = random_tensor({1, 2, 2, 2, 2}, 3);
        Tensor gamma = Tensor::full({3}, 1.0f), beta = Tensor::full({3}, 0.0f);
        Tensor rm = Tensor::full({3}, 0.0f), rv = Tensor::full({3}, 1.0f);
        CHECK_THROWS_AS(
            batchnorm_forward(x, gamma, beta, rm, rv, Mode::train, 0.1f, 1e-5f, nullptr),
            ShapeError);
    }

    TEST_CASE("infer mode uses running stats and ignores the batch") {
        Tensor gamma({1}, {1.0f}), beta({1}, {0.0f});
        Tensor rm({1}, {10.0f}), rv({1}, {4.0f});
        Tensor x({1, 1, 1, 1, 2}, {10.0f, 12.0f});
        Tensor y = batchnorm_forward(x, gamma, beta, rm, rv, Mode::infer, 0.1f, 0.0f, nullptr);
        CHECK(y[0] == doctest::Approx(0.0).epsilon(1e-6));
        CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_SUITE("dense") {
    TEST_CASE("identity weights and zero bias are the identity") {
        Tensor x = random_tensor({2, 4}, 41);
        Tensor w({4, 4});
        for (int64_t i = 0; i < 4; ++i) w[i * 4 + i] = 1.0f;
        Tensor b = Tensor::full({4}, 0.0f);
        CHECK(testutil::bitwise_equal(dense(x, w, b), x));
    }

    TEST_CASE("hand 2x2 example: (1,2) through [[1,1],[0,1]] plus (1,0) gives (4,2)") {
        Tensor x({1, 2}, {1.0f, 2.0f});
        Tensor w({2, 2}, {1.0f, 1.0f, 0.0f, 1.0f});
        Tensor b({2}, {1.0f, 0.0f});
        Tensor y = dense(x, w, b);
        CHECK(y[0] == doctest::Approx(4.0).epsilon(1e-7));
        CHECK(y[1] == doctest::Approx(2.0).epsilon(1e-7));
    }

    TEST_CASE("random [3,13824] x [128,13824] matches the triple-loop oracle") {
        Tensor x = random_tensor({3, 13824}, 51);
        Tensor w = random_tensor({128, 13824}, 52, 0.0f, 0.05f);
        Tensor b = random_tensor({128}, 53);
        CHECK(testutil::max_rel_dev(dense(x, w, b), verify::dense_reference(x, w, b)) <= 1e-4);
    }

    TEST_CASE("feature-count mismatch raises ShapeError") {
        Tensor x = random_tensor({1, 5}, 61);
        Tensor w = random_tensor({2, 4}, 62);
        Tensor b({2}, {0.0f, 0.0f});
        CHECK_THROWS_AS(dense(x, w, b), ShapeError);
    }
}

TEST_SUITE("activations") {
    TEST_CASE("softmax of (0,0) is (0.5,0.5)") {
        Tensor y = softmax(Tensor({1, 2}, {0.0f, 0.0f}));
        CHECK(y[0] == doctest::Approx(0.5).epsilon(1e-7));
        CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-7));
    }

    TEST_CASE("softmax of (1000, 1000+ln3) is (0.25, 0.75) with no overflow") {
        Tensor y = softmax(Tensor({1, 2}, {1000.0f, 1000.0f + std::log(3.0f)}));
        CHECK(y.all_finite());
        CHECK(y[0] == doctest::Approx(0.25).epsilon(1e-5));
        CHECK(y[1] == doctest::Approx(0.75).epsilon(1e-5));
    }

    TEST_CASE("softmax rows sum to 1 within 1e-5 for logits up to 1e4") {
        Rng rng(71);
        Tensor logits({8, 4});
        for (int64_t i = 0; i < logits.numel(); ++i)
            logits[i] = static_cast<float>((rng.uniform() * 2.0 - 1.0) * 1e4);
        Tensor y = softmax(logits);
        for (int64_t r = 0; r < 8; ++r) {
            double s = 0.0;
            for (int64_t k = 0; k < 4; ++k) s += y[r * 4 + k];
            CHECK(std::abs(s - 1.0) <= 1e-5);
        }
    }

    TEST_CASE("relu zeroes negatives and keeps positives; backward gates on the input") {
        Tensor x({1, 4}, {-2.0f, 0.0f, 1.5f, -0.1f});
        Tensor y = relu(x);
        CHECK(y.buffer() == std::vector<float>{0.0f, 0.0f, 1.5f, 0.0f});
        Tensor dy = Tensor::full({1, 4}, 1.0f);
        Tensor dx = relu_backward(dy, x);
        CHECK(dx.buffer() == std::vector<float>{0.0f, 0.0f, 1.0f, 0.0f});
    }

    TEST_CASE("dropout p=0.5 over 1e6 ones: mean 1.0 +/- 0.01, zero fraction 0.5 +/- 0.005") {
        Tensor x = Tensor::full({1000000}, 1.0f);
        Rng rng(81);
        DropoutResult r = dropout(x, 0.5f, Mode::train, rng);
        double sum = 0.0;
        int64_t zeros = 0;
        for (int64_t i = 0; i < r.output.numel(); ++i) {
            sum += r.output[i];
            if (r.output[i] == 0.0f) ++zeros;
        }
        CHECK(std::abs(sum / 1e6 - 1.0) <= 0.01);
        CHECK(std::abs(static_cast<double>(zeros) / 1e6 - 0.5) <= 0.005);
    }

    TEST_CASE("dropout is the identity in infer mode and reproducible from the seed") {
        Tensor x = random_tensor({1, 64}, 83);
        Rng rng(5);
        CHECK(testutil::bitwise_equal(dropout(x, 0.4f, Mode::infer, rng).output, x));
        Rng r1(9), r2(9);
        CHECK(testutil::bitwise_equal(dropout(x, 0.4f, Mode::train, r1).output,
                                      dropout(x, 0.4f, Mode::train, r2).output));
    }

    TEST_CASE("dropout p outside [0,1) raises ConfigError") {
        Tensor x = Tensor::full({4}, 1.0f);
        Rng rng(1);
        CHECK_THROWS_AS(dropout(x, 1.0f, Mode::train, rng), ConfigError);
        CHECK_THROWS_AS(dropout(x, -0.1f, Mode::train, rng), ConfigError);
    }
}

TEST_SUITE("cross_entropy") {
    TEST_CASE("perfect one-hot prediction costs at most 1e-11") {
        Tensor p({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
        CHECK(cross_entropy(p, {0, 1}) <= 1e-11);
    }

    TEST_CASE("uniform two-class probabilities cost ln 2") {
        Tensor p({1, 2}, {0.5f, 0.5f});
        CHECK(cross_entropy(p, {0}) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    }

    TEST_CASE("rows (0.9,0.1),(0.2,0.8) with labels (0,1) cost about 0.16425") {
        Tensor p({2, 2}, {0.9f, 0.1f, 0.2f, 0.8f});
        const double want = (-std::log(0.9) - std::log(0.8)) / 2.0;
        CHECK(cross_entropy(p, {0, 1}) == doctest::Approx(want).epsilon(1e-6));
        CHECK(cross_entropy(p, {0, 1}) == doctest::Approx(0.16425).epsilon(1e-3));
    }

    TEST_CASE("label out of range raises") {
        Tensor p({1, 2}, {0.5f, 0.5f});
        CHECK_THROWS_AS(cross_entropy(p, {2}), ConfigError);
        CHECK_THROWS_AS(cross_entropy(p, {-1}), ConfigError);
    }
}
