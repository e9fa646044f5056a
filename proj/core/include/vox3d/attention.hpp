#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "vox3d/network.hpp"
#include "vox3d/tensor.hpp"

namespace vox3d {

enum class SliceAxis { axial, sagittal, coronal };

SliceAxis slice_axis_from_string(const std::string& s);

struct AttentionMap {
    Tensor grid;  // [gd,gh,gw] probability drops, negatives retained
    Dims3 box{7, 7, 7};
    int64_t stride = 7;
    double baseline_prob = 0.0;
    int target_class = 0;
};

// Slides an occlusion box of `fill` values over the volume and records the
// drop of p(target_class) against the intact baseline at every position.
// The network must be in infer mode; the input volume is left untouched.
AttentionMap occlusion_map(Network& net, const Tensor& volume, int target_class,
                           const Dims3& box = {7, 7, 7}, int64_t stride = 7,
                           float fill = 0.0f);

// Nearest-neighbor expansion of the grid to volume coordinates.
Tensor upsample_map(const AttentionMap& map, const Dims3& to_shape);

// Writes <prefix>_volume.{csv,pgm} and <prefix>_map.{csv,pgm}: the volume
// slice and the aligned upsampled heatmap slice at the given index.
void export_slices(const Tensor& volume, const AttentionMap& map, SliceAxis axis,
                   int64_t index, const std::filesystem::path& out_dir,
                   const std::string& prefix);

}  // namespace vox3d
