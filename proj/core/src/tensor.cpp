#include "vox3d/tensor.hpp"

#include <cmath>
#include <sstream>

#include "vox3d/errors.hpp"

namespace vox3d {

int64_t Tensor::numel_of(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

static void check_shape(const std::vector<int64_t>& shape) {
    if (shape.empty() || shape.size() > 5)
        throw ShapeError("tensor rank must be 1..5, got " + std::to_string(shape.size()));
    for (size_t i = 0; i < shape.size(); ++i)
        if (shape[i] < 1)
            throw ShapeError("tensor extent on axis " + std::to_string(i) +
                             " must be >= 1, got " + std::to_string(shape[i]));
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    check_shape(shape_);
    data_.assign(static_cast<size_t>(numel_of(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape(shape_);
    if (numel_of(shape_) != static_cast<int64_t>(data_.size()))
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

bool Tensor::all_finite() const {
    for (float v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void Tensor::fill(float value) {
    for (float& v : data_) v = value;
}

Tensor Tensor::reshaped(std::vector<int64_t> new_shape) const {
    if (numel_of(new_shape) != numel())
        throw ShapeError("reshape from " + shape_str() + " to " +
                         shape_to_string(new_shape) + " changes element count");
    return Tensor(std::move(new_shape), data_);
}

std::string Tensor::shape_str() const { return shape_to_string(shape_); }

std::string shape_to_string(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

}  // namespace vox3d
