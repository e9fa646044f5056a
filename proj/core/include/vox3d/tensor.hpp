#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace vox3d {

enum class Mode { train, infer };

// Dense row-major float tensor, rank 1..5.
// Convention for rank-5: [batch, channel, depth, height, width].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<float> data);

    static Tensor full(std::vector<int64_t> shape, float value);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t extent(int64_t axis) const { return shape_[static_cast<size_t>(axis)]; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& buffer() { return data_; }
    const std::vector<float>& buffer() const { return data_; }

    float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    void fill(float value);
    // Reinterprets the buffer under a new shape with equal element count.
    Tensor reshaped(std::vector<int64_t> new_shape) const;

    std::string shape_str() const;

    static int64_t numel_of(const std::vector<int64_t>& shape);

private:
    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

std::string shape_to_string(const std::vector<int64_t>& shape);

}  // namespace vox3d
