#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "vox3d/ops.hpp"
#include "vox3d/rng.hpp"
#include "vox3d/tensor.hpp"

namespace vox3d {

// One named parameter of a layer together with its gradient slot.
// Non-trainable slots (batchnorm running stats) are serialized but never
// touched by optimizers.
struct ParamSlot {
    std::string name;
    Tensor* value;
    Tensor* grad;
    bool trainable;
};

class Layer {
public:
    virtual ~Layer() = default;
    virtual std::string kind() const = 0;
    // One-line hyperparameter summary; feeds the architecture hash.
    virtual std::string spec_string() const = 0;
    virtual std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const = 0;
    virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
    // dy -> dx; parameter gradients land in the layer's grad slots.
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<ParamSlot> params() { return {}; }
    virtual void clear_cache() {}
    // Hash of the discrete choices the last train-mode forward made (relu
    // sign patterns, pool argmax). Two forwards with equal signatures lie in
    // the same differentiable region, so finite differences between them are
    // meaningful. 0 for layers without kinks.
    virtual uint64_t activation_signature() const { return 0; }
};

std::unique_ptr<Layer> make_conv3d(const ConvSpec& spec);
std::unique_ptr<Layer> make_batchnorm(int64_t channels, float momentum = 0.1f,
                                      float epsilon = 1e-5f);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_maxpool3d(const Dims3& window, const Dims3& stride);
std::unique_ptr<Layer> make_dense(int64_t in_features, int64_t out_features);
std::unique_ptr<Layer> make_dropout(float p);
std::unique_ptr<Layer> make_flatten();
// Pre-activation residual block: x + conv(relu(bn(conv(relu(bn(x)))))),
// both convs 3^3 stride 1 pad 1 with `channels` filters.
std::unique_ptr<Layer> make_voxres_block(int64_t channels);
std::unique_ptr<Layer> make_softmax_output();

class Network {
public:
    Network() = default;
    Network(std::vector<int64_t> input_shape /* [c,d,h,w] */, uint64_t seed);

    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    void add(std::unique_ptr<Layer> layer);
    // Validates the layer chain end to end and fails on incompatible shapes.
    void finalize();

    // He-normal init for conv/dense weights, zero biases, gamma=1, beta=0.
    void init_params(uint64_t seed);

    Tensor forward(const Tensor& input);
    // Requires a train-mode forward on the same batch first. Fuses the
    // softmax/cross-entropy gradient: dlogits = (probs - onehot)/b.
    void backward(const std::vector<int>& labels);

    std::vector<ParamSlot> params();
    int64_t num_params();  // trainable only
    void zero_grads();
    void clear_caches();

    void set_mode(Mode m) { mode_ = m; }
    Mode mode() const { return mode_; }
    void reseed(uint64_t seed) { rng_.reseed(seed); }

    const std::vector<int64_t>& input_shape() const { return input_shape_; }
    const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
    std::vector<int64_t> output_shape() const;

    std::string spec_string() const;
    uint64_t architecture_hash() const;
    // Combined layer signatures of the last train-mode forward.
    uint64_t activation_signature() const;

    // Free-form tag recorded in the model file so a saved network can be
    // rebuilt by the models module (e.g. "voxcnn;cube=32;classes=2;dropout=0.5").
    void set_builder_tag(std::string tag) { builder_tag_ = std::move(tag); }
    const std::string& builder_tag() const { return builder_tag_; }

    void save(const std::filesystem::path& path);
    // Reads parameters into `skeleton`, which must hash-match the file.
    static Network load_with(const std::filesystem::path& path, Network skeleton);
    // Reads only the builder tag from a model file header.
    static std::string read_builder_tag(const std::filesystem::path& path);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<int64_t> input_shape_;  // without batch axis
    Mode mode_ = Mode::train;
    uint64_t seed_ = 0;
    Rng rng_{0};
    bool forward_cached_ = false;
    Tensor last_probs_;
    bool finalized_ = false;
    std::string builder_tag_;
};

uint64_t fnv1a_hash(const std::string& s);

}  // namespace vox3d
