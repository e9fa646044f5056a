#include "vox3d/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vox3d/errors.hpp"

namespace vox3d {

uint64_t fnv1a_hash(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

namespace {

void he_init(Tensor& w, int64_t fan_in, Rng& rng) {
    const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0f, stddev);
}

uint64_t sig_mix(uint64_t h, uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

std::string dims_str(const Dims3& d) {
    std::ostringstream os;
    os << d[0] << 'x' << d[1] << 'x' << d[2];
    return os.str();
}

class InitializableLayer : public Layer {
public:
    virtual void init(Rng& rng) = 0;
};

class Conv3dLayer final : public InitializableLayer {
public:
    explicit Conv3dLayer(const ConvSpec& spec)
        : spec_(spec),
          w_({spec.out_channels, spec.in_channels, spec.kernel[0], spec.kernel[1], spec.kernel[2]}),
          b_({spec.out_channels}),
          dw_(w_.shape()),
          db_(b_.shape()) {}

    std::string kind() const override { return "conv3d"; }

    std::string spec_string() const override {
        std::ostringstream os;
        os << "conv3d ci=" << spec_.in_channels << " co=" << spec_.out_channels
           << " k=" << dims_str(spec_.kernel) << " s=" << dims_str(spec_.stride)
           << " p=" << dims_str(spec_.padding);
        return os.str();
    }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() != 5)
            throw ShapeError("conv3d expects rank-5 input, got " + shape_to_string(in));
        if (in[1] != spec_.in_channels)
            throw ShapeError("conv3d channel mismatch: input has " + std::to_string(in[1]) +
                             ", layer expects " + std::to_string(spec_.in_channels));
        Dims3 o = spec_.out_extent({in[2], in[3], in[4]});
        return {in[0], spec_.out_channels, o[0], o[1], o[2]};
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        Tensor y = conv3d(x, w_, b_, spec_);
        if (mode == Mode::train) {
            input_ = x;
            cached_ = true;
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("conv3d backward without cached forward");
        Tensor dx;
        conv3d_backward(input_, w_, spec_, dy, dx, dw_, db_);
        return dx;
    }

    std::vector<ParamSlot> params() override {
        return {{"weights", &w_, &dw_, true}, {"bias", &b_, &db_, true}};
    }

    void init(Rng& rng) override {
        he_init(w_, spec_.in_channels * spec_.kernel[0] * spec_.kernel[1] * spec_.kernel[2], rng);
        b_.fill(0.0f);
    }

    void clear_cache() override {
        input_ = Tensor{};
        cached_ = false;
    }

private:
    ConvSpec spec_;
    Tensor w_, b_, dw_, db_;
    Tensor input_;
    bool cached_ = false;
};

class BatchNormLayer final : public InitializableLayer {
public:
    BatchNormLayer(int64_t channels, float momentum, float epsilon)
        : channels_(channels), momentum_(momentum), epsilon_(epsilon),
          gamma_({channels}), beta_({channels}),
          run_mean_({channels}), run_var_({channels}),
          dgamma_({channels}), dbeta_({channels}) {
        gamma_.fill(1.0f);
        run_var_.fill(1.0f);
    }

    std::string kind() const override { return "batchnorm"; }

    std::string spec_string() const override {
        std::ostringstream os;
        os << "batchnorm c=" << channels_ << " momentum=" << momentum_ << " eps=" << epsilon_;
        return os.str();
    }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() < 2 || in[1] != channels_)
            throw ShapeError("batchnorm expects channel axis " + std::to_string(channels_) +
                             ", got input " + shape_to_string(in));
        return in;
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        return batchnorm_forward(x, gamma_, beta_, run_mean_, run_var_, mode, momentum_,
                                 epsilon_, mode == Mode::train ? &cache_ : nullptr);
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx;
        batchnorm_backward(cache_, gamma_, dy, dx, dgamma_, dbeta_);
        return dx;
    }

    std::vector<ParamSlot> params() override {
        return {{"gamma", &gamma_, &dgamma_, true},
                {"beta", &beta_, &dbeta_, true},
                {"running_mean", &run_mean_, nullptr, false},
                {"running_var", &run_var_, nullptr, false}};
    }

    void init(Rng&) override {
        gamma_.fill(1.0f);
        beta_.fill(0.0f);
        run_mean_.fill(0.0f);
        run_var_.fill(1.0f);
    }

    void clear_cache() override { cache_ = BatchNormCache{}; }

private:
    int64_t channels_;
    float momentum_, epsilon_;
    Tensor gamma_, beta_, run_mean_, run_var_, dgamma_, dbeta_;
    BatchNormCache cache_;
};

class ReluLayer final : public Layer {
public:
    std::string kind() const override { return "relu"; }
    std::string spec_string() const override { return "relu"; }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        if (mode == Mode::train) {
            input_ = x;
            cached_ = true;
        }
        return relu(x);
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("relu backward without cached forward");
        return relu_backward(dy, input_);
    }

    uint64_t activation_signature() const override {
        if (!cached_) return 0;
        uint64_t h = 14695981039346656037ULL;
        uint64_t word = 0;
        for (int64_t i = 0; i < input_.numel(); ++i) {
            word = (word << 1) | static_cast<uint64_t>(input_[i] > 0.0f);
            if ((i & 63) == 63) {
                h = sig_mix(h, word);
                word = 0;
            }
        }
        return sig_mix(h, word);
    }

    void clear_cache() override {
        input_ = Tensor{};
        cached_ = false;
    }

private:
    Tensor input_;
    bool cached_ = false;
};

class MaxPool3dLayer final : public Layer {
public:
    MaxPool3dLayer(const Dims3& window, const Dims3& stride)
        : window_(window), stride_(stride) {}

    std::string kind() const override { return "maxpool3d"; }

    std::string spec_string() const override {
        return "maxpool3d w=" + dims_str(window_) + " s=" + dims_str(stride_);
    }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() != 5)
            throw ShapeError("maxpool3d expects rank-5 input, got " + shape_to_string(in));
        std::vector<int64_t> out{in[0], in[1]};
        for (int a = 0; a < 3; ++a) {
            if (window_[a] > in[static_cast<size_t>(a + 2)])
                throw ConfigError("maxpool window exceeds input on spatial axis " +
                                  std::to_string(a));
            out.push_back((in[static_cast<size_t>(a + 2)] - window_[a]) / stride_[a] + 1);
        }
        return out;
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        PoolResult res = maxpool3d(x, window_, stride_);
        if (mode == Mode::train) {
            argmax_ = std::move(res.argmax);
            in_shape_ = x.shape();
            cached_ = true;
        }
        return std::move(res.output);
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("maxpool backward without cached forward");
        return maxpool3d_backward(dy, argmax_, in_shape_);
    }

    uint64_t activation_signature() const override {
        if (!cached_) return 0;
        uint64_t h = 14695981039346656037ULL;
        for (int64_t idx : argmax_) h = sig_mix(h, static_cast<uint64_t>(idx));
        return h;
    }

    void clear_cache() override {
        argmax_.clear();
        cached_ = false;
    }

private:
    Dims3 window_, stride_;
    std::vector<int64_t> argmax_;
    std::vector<int64_t> in_shape_;
    bool cached_ = false;
};

class DenseLayer final : public InitializableLayer {
public:
    DenseLayer(int64_t in_features, int64_t out_features)
        : in_(in_features), out_(out_features),
          w_({out_features, in_features}), b_({out_features}),
          dw_(w_.shape()), db_(b_.shape()) {}

    std::string kind() const override { return "dense"; }

    std::string spec_string() const override {
        return "dense in=" + std::to_string(in_) + " out=" + std::to_string(out_);
    }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() != 2 || in[1] != in_)
            throw ShapeError("dense expects [b," + std::to_string(in_) + "], got " +
                             shape_to_string(in));
        return {in[0], out_};
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        Tensor y = dense(x, w_, b_);
        if (mode == Mode::train) {
            input_ = x;
            cached_ = true;
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("dense backward without cached forward");
        Tensor dx;
        dense_backward(input_, w_, dy, dx, dw_, db_);
        return dx;
    }

    std::vector<ParamSlot> params() override {
        return {{"weights", &w_, &dw_, true}, {"bias", &b_, &db_, true}};
    }

    void init(Rng& rng) override {
        he_init(w_, in_, rng);
        b_.fill(0.0f);
    }

    void clear_cache() override {
        input_ = Tensor{};
        cached_ = false;
    }

private:
    int64_t in_, out_;
    Tensor w_, b_, dw_, db_;
    Tensor input_;
    bool cached_ = false;
};

class DropoutLayer final : public Layer {
public:
    explicit DropoutLayer(float p) : p_(p) {
        if (p < 0.0f || p >= 1.0f)
            throw ConfigError("dropout probability must be in [0,1), got " + std::to_string(p));
    }

    std::string kind() const override { return "dropout"; }
    std::string spec_string() const override { return "dropout p=" + std::to_string(p_); }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override { return in; }

    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override {
        DropoutResult res = dropout(x, p_, mode, rng);
        if (mode == Mode::train) {
            mask_ = std::move(res.mask);
            cached_ = true;
        }
        return std::move(res.output);
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("dropout backward without cached forward");
        if (mask_.empty()) return dy;  // p == 0
        Tensor dx(dy.shape());
        for (int64_t i = 0; i < dy.numel(); ++i) dx[i] = dy[i] * mask_[i];
        return dx;
    }

    void clear_cache() override {
        mask_ = Tensor{};
        cached_ = false;
    }

private:
    float p_;
    Tensor mask_;
    bool cached_ = false;
};

class FlattenLayer final : public Layer {
public:
    std::string kind() const override { return "flatten"; }
    std::string spec_string() const override { return "flatten"; }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        int64_t n = 1;
        for (size_t i = 1; i < in.size(); ++i) n *= in[i];
        return {in[0], n};
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        if (mode == Mode::train) {
            in_shape_ = x.shape();
            cached_ = true;
        }
        return x.reshaped(output_shape(x.shape()));
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("flatten backward without cached forward");
        return dy.reshaped(in_shape_);
    }

    void clear_cache() override { cached_ = false; }

private:
    std::vector<int64_t> in_shape_;
    bool cached_ = false;
};

class VoxResBlock final : public InitializableLayer {
public:
    explicit VoxResBlock(int64_t channels) : channels_(channels) {
        ConvSpec cs;
        cs.in_channels = channels;
        cs.out_channels = channels;
        cs.kernel = {3, 3, 3};
        cs.stride = {1, 1, 1};
        cs.padding = {1, 1, 1};
        branch_.push_back(make_batchnorm(channels));
        branch_.push_back(make_relu());
        branch_.push_back(make_conv3d(cs));
        branch_.push_back(make_batchnorm(channels));
        branch_.push_back(make_relu());
        branch_.push_back(make_conv3d(cs));
    }

    std::string kind() const override { return "voxres_block"; }
    std::string spec_string() const override {
        return "voxres_block c=" + std::to_string(channels_);
    }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() != 5 || in[1] != channels_)
            throw ShapeError("voxres_block expects " + std::to_string(channels_) +
                             " channels, got input " + shape_to_string(in));
        std::vector<int64_t> shape = in;
        for (const auto& l : branch_) shape = l->output_shape(shape);
        if (shape != in)
            throw ShapeError("voxres_block branch does not preserve shape");
        return in;
    }

    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override {
        Tensor y = x;
        for (auto& l : branch_) y = l->forward(y, mode, rng);
        if (!y.same_shape(x))
            throw ShapeError("voxres_block branch output " + y.shape_str() +
                             " does not match input " + x.shape_str());
        for (int64_t i = 0; i < y.numel(); ++i) y[i] += x[i];
        cached_ = (mode == Mode::train);
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!cached_) throw StateError("voxres_block backward without cached forward");
        Tensor dbranch = dy;
        for (auto it = branch_.rbegin(); it != branch_.rend(); ++it)
            dbranch = (*it)->backward(dbranch);
        for (int64_t i = 0; i < dbranch.numel(); ++i) dbranch[i] += dy[i];
        return dbranch;
    }

    std::vector<ParamSlot> params() override {
        std::vector<ParamSlot> out;
        int idx = 0;
        for (auto& l : branch_) {
            for (ParamSlot s : l->params()) {
                s.name = "branch" + std::to_string(idx) + "." + s.name;
                out.push_back(s);
            }
            ++idx;
        }
        return out;
    }

    void init(Rng& rng) override {
        for (auto& l : branch_)
            if (auto* il = dynamic_cast<InitializableLayer*>(l.get())) il->init(rng);
    }

    uint64_t activation_signature() const override {
        uint64_t h = 14695981039346656037ULL;
        for (const auto& l : branch_) h = sig_mix(h, l->activation_signature());
        return h;
    }

    void clear_cache() override {
        for (auto& l : branch_) l->clear_cache();
        cached_ = false;
    }

private:
    int64_t channels_;
    std::vector<std::unique_ptr<Layer>> branch_;
    bool cached_ = false;
};

class SoftmaxOutputLayer final : public Layer {
public:
    std::string kind() const override { return "softmax_output"; }
    std::string spec_string() const override { return "softmax_output"; }

    std::vector<int64_t> output_shape(const std::vector<int64_t>& in) const override {
        if (in.size() != 2 || in[1] < 2)
            throw ShapeError("softmax_output expects [b,k] with k >= 2, got " +
                             shape_to_string(in));
        return in;
    }

    Tensor forward(const Tensor& x, Mode mode, Rng&) override {
        Tensor probs = softmax(x);
        if (mode == Mode::train) {
            probs_ = probs;
            cached_ = true;
        }
        return probs;
    }

    Tensor backward(const Tensor&) override {
        throw StateError("softmax_output backward requires labels; use Network::backward");
    }

    // Fused softmax + cross-entropy gradient wrt the logits.
    Tensor backward_from_labels(const std::vector<int>& labels) {
        if (!cached_) throw StateError("softmax_output backward without cached forward");
        const int64_t b = probs_.extent(0), k = probs_.extent(1);
        if (static_cast<int64_t>(labels.size()) != b)
            throw ShapeError("label count does not match cached batch size");
        Tensor dlogits = probs_;
        for (int64_t s = 0; s < b; ++s) {
            dlogits[s * k + labels[static_cast<size_t>(s)]] -= 1.0f;
            for (int64_t j = 0; j < k; ++j) dlogits[s * k + j] /= static_cast<float>(b);
        }
        return dlogits;
    }

    void clear_cache() override {
        probs_ = Tensor{};
        cached_ = false;
    }

private:
    Tensor probs_;
    bool cached_ = false;
};

}  // namespace

std::unique_ptr<Layer> make_conv3d(const ConvSpec& spec) {
    return std::make_unique<Conv3dLayer>(spec);
}
std::unique_ptr<Layer> make_batchnorm(int64_t channels, float momentum, float epsilon) {
    return std::make_unique<BatchNormLayer>(channels, momentum, epsilon);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<ReluLayer>(); }
std::unique_ptr<Layer> make_maxpool3d(const Dims3& window, const Dims3& stride) {
    return std::make_unique<MaxPool3dLayer>(window, stride);
}
std::unique_ptr<Layer> make_dense(int64_t in_features, int64_t out_features) {
    return std::make_unique<DenseLayer>(in_features, out_features);
}
std::unique_ptr<Layer> make_dropout(float p) { return std::make_unique<DropoutLayer>(p); }
std::unique_ptr<Layer> make_flatten() { return std::make_unique<FlattenLayer>(); }
std::unique_ptr<Layer> make_voxres_block(int64_t channels) {
    return std::make_unique<VoxResBlock>(channels);
}
std::unique_ptr<Layer> make_softmax_output() { return std::make_unique<SoftmaxOutputLayer>(); }

Network::Network(std::vector<int64_t> input_shape, uint64_t seed)
    : input_shape_(std::move(input_shape)), seed_(seed), rng_(seed) {}

void Network::add(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
    finalized_ = false;
}

void Network::finalize() {
    if (layers_.empty()) throw ConfigError("network has no layers");
    if (layers_.back()->kind() != "softmax_output")
        throw ConfigError("network must end with exactly one softmax_output layer");
    for (size_t i = 0; i + 1 < layers_.size(); ++i)
        if (layers_[i]->kind() == "softmax_output")
            throw ConfigError("softmax_output must be the terminal layer");
    output_shape();  // shape-checks the whole chain
    finalized_ = true;
}

std::vector<int64_t> Network::output_shape() const {
    std::vector<int64_t> shape;
    shape.reserve(input_shape_.size() + 1);
    shape.push_back(1);  // placeholder batch
    for (int64_t e : input_shape_) shape.push_back(e);
    for (size_t i = 0; i < layers_.size(); ++i) {
        try {
            shape = layers_[i]->output_shape(shape);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layers_[i]->kind() +
                             "): " + e.what());
        }
    }
    return shape;
}

void Network::init_params(uint64_t seed) {
    seed_ = seed;
    rng_.reseed(seed);
    for (auto& l : layers_)
        if (auto* il = dynamic_cast<InitializableLayer*>(l.get())) il->init(rng_);
}

Tensor Network::forward(const Tensor& input) {
    if (!finalized_) finalize();
    if (input.rank() != static_cast<int64_t>(input_shape_.size()) + 1)
        throw ShapeError("network input must be rank " +
                         std::to_string(input_shape_.size() + 1) + ", got " + input.shape_str());
    for (size_t i = 0; i < input_shape_.size(); ++i)
        if (input.extent(static_cast<int64_t>(i) + 1) != input_shape_[i])
            throw ShapeError("network input " + input.shape_str() + " does not match declared " +
                             shape_to_string(input_shape_) + " on axis " + std::to_string(i + 1));
    Tensor x = input;
    for (size_t i = 0; i < layers_.size(); ++i) {
        try {
            x = layers_[i]->forward(x, mode_, rng_);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layers_[i]->kind() +
                             "): " + e.what());
        }
    }
    if (mode_ == Mode::train) {
        forward_cached_ = true;
        last_probs_ = x;
    }
    return x;
}

void Network::backward(const std::vector<int>& labels) {
    if (!forward_cached_)
        throw StateError("backward called without a train-mode forward on this batch");
    zero_grads();
    auto* head = dynamic_cast<SoftmaxOutputLayer*>(layers_.back().get());
    Tensor grad = head->backward_from_labels(labels);
    for (size_t i = layers_.size() - 1; i-- > 0;) grad = layers_[i]->backward(grad);
    forward_cached_ = false;
}

std::vector<ParamSlot> Network::params() {
    std::vector<ParamSlot> out;
    for (size_t i = 0; i < layers_.size(); ++i)
        for (ParamSlot s : layers_[i]->params()) {
            s.name = "layer" + std::to_string(i) + "." + layers_[i]->kind() + "." + s.name;
            out.push_back(s);
        }
    return out;
}

int64_t Network::num_params() {
    int64_t n = 0;
    for (const ParamSlot& s : params())
        if (s.trainable) n += s.value->numel();
    return n;
}

void Network::zero_grads() {
    for (ParamSlot& s : params())
        if (s.grad) s.grad->fill(0.0f);
}

void Network::clear_caches() {
    for (auto& l : layers_) l->clear_cache();
    forward_cached_ = false;
    last_probs_ = Tensor{};
}

std::string Network::spec_string() const {
    std::ostringstream os;
    os << "input " << shape_to_string(input_shape_) << '\n';
    for (const auto& l : layers_) os << l->spec_string() << '\n';
    return os.str();
}

uint64_t Network::architecture_hash() const { return fnv1a_hash(spec_string()); }

uint64_t Network::activation_signature() const {
    uint64_t h = 14695981039346656037ULL;
    for (const auto& l : layers_) h = sig_mix(h, l->activation_signature());
    return h;
}

namespace {
constexpr char kMagic[6] = {'V', 'O', 'X', '3', 'D', '\0'};
constexpr uint16_t kFormatVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError(std::string("model file truncated while reading ") + what);
    return v;
}
}  // namespace

void Network::save(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open model file for writing: " + path.string());
    os.write(kMagic, sizeof(kMagic));
    write_pod(os, kFormatVersion);
    write_pod(os, architecture_hash());
    uint32_t tag_len = static_cast<uint32_t>(builder_tag_.size());
    write_pod(os, tag_len);
    os.write(builder_tag_.data(), tag_len);
    for (ParamSlot& s : params())
        os.write(reinterpret_cast<const char*>(s.value->data()),
                 static_cast<std::streamsize>(s.value->numel() * sizeof(float)));
    if (!os) throw IoError("short write to model file: " + path.string());
}

Network Network::load_with(const std::filesystem::path& path, Network skeleton) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open model file: " + path.string());
    char magic[6];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("bad magic in model file: " + path.string());
    uint16_t version = read_pod<uint16_t>(is, "format version");
    if (version != kFormatVersion)
        throw IoError("unsupported model format version " + std::to_string(version));
    uint64_t hash = read_pod<uint64_t>(is, "architecture hash");
    if (hash != skeleton.architecture_hash())
        throw IoError("architecture hash mismatch: file does not match the requested network");
    uint32_t tag_len = read_pod<uint32_t>(is, "builder tag length");
    std::string tag(tag_len, '\0');
    is.read(tag.data(), tag_len);
    if (!is) throw IoError("model file truncated while reading builder tag");
    skeleton.set_builder_tag(tag);
    for (ParamSlot& s : skeleton.params()) {
        is.read(reinterpret_cast<char*>(s.value->data()),
                static_cast<std::streamsize>(s.value->numel() * sizeof(float)));
        if (!is) throw IoError("model file truncated while reading parameter " + s.name);
    }
    return skeleton;
}

std::string Network::read_builder_tag(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open model file: " + path.string());
    char magic[6];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw IoError("bad magic in model file: " + path.string());
    read_pod<uint16_t>(is, "format version");
    read_pod<uint64_t>(is, "architecture hash");
    uint32_t tag_len = read_pod<uint32_t>(is, "builder tag length");
    std::string tag(tag_len, '\0');
    is.read(tag.data(), tag_len);
    if (!is) throw IoError("model file truncated while reading builder tag");
    return tag;
}

}  // namespace vox3d
