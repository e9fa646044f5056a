#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vox3d/network.hpp"

namespace vox3d {

enum class Arch { voxcnn, voxresnet };

std::string arch_name(Arch a);
Arch arch_from_string(const std::string& s);

struct ArchitectureRow {
    std::string kind;
    std::string spec;
    std::vector<int64_t> output_shape;  // with batch placeholder 1
    int64_t param_count;
};

struct ArchitectureTable {
    std::string name;
    int64_t cube;
    std::vector<ArchitectureRow> rows;
    int64_t total_params;

    std::string to_text() const;
    std::string to_json() const;
};

// Plain VGG-style stack: four conv(3^3, pad 1)+relu+maxpool(2^3) blocks with
// filters (8,16,32,64), then dense 128 / dense 64 classifier with batchnorm
// and dropout, softmax head. `cube` is the input edge length (110 for
// full-size volumes); the pooling windows shrink to fit small cubes.
Network build_voxcnn(int num_classes = 2, float dropout_p = 0.1f, int cube = 110,
                     uint64_t seed = 0);

// Residual network: 32-filter stem, three strided 3^3 convs (64, 64, 128
// filters) each followed by two shape-preserving VoxRes blocks, then
// BN/ReLU, a pool down to 2^3 spatial, dense 128 and the softmax head.
Network build_voxresnet(int num_classes = 2, int cube = 110, uint64_t seed = 0);

Network build_model(Arch arch, int num_classes, float dropout_p, int cube, uint64_t seed);

ArchitectureTable describe(const Network& net);

// Rebuilds the architecture recorded in a model file's builder tag and loads
// the parameters into it.
Network load_model(const std::filesystem::path& path);

}  // namespace vox3d
