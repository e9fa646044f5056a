#include "vox3d/attention.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "vox3d/errors.hpp"

namespace vox3d {

SliceAxis slice_axis_from_string(const std::string& s) {
    if (s == "axial") return SliceAxis::axial;
    if (s == "sagittal") return SliceAxis::sagittal;
    if (s == "coronal") return SliceAxis::coronal;
    throw ConfigError("unknown slice axis '" + s + "' (expected axial, sagittal or coronal)");
}

namespace {

double predict(Network& net, const Tensor& batched, int target_class) {
    Tensor probs = net.forward(batched);
    if (target_class < 0 || target_class >= probs.extent(1))
        throw ConfigError("target class " + std::to_string(target_class) + " out of range");
    return probs[target_class];
}

}  // namespace

AttentionMap occlusion_map(Network& net, const Tensor& volume, int target_class,
                           const Dims3& box, int64_t stride, float fill) {
    if (net.mode() != Mode::infer)
        throw StateError("occlusion_map requires the network in infer mode");
    if (volume.rank() != 3)
        throw ShapeError("occlusion_map expects a rank-3 volume, got " + volume.shape_str());
    if (stride < 1) throw ConfigError("occlusion stride must be >= 1");
    const Dims3 ext{volume.extent(0), volume.extent(1), volume.extent(2)};
    Dims3 gext{};
    for (int a = 0; a < 3; ++a) {
        if (box[a] < 1 || box[a] > ext[a])
            throw ConfigError("occlusion box extent " + std::to_string(box[a]) +
                              " does not fit volume axis " + std::to_string(a));
        gext[a] = (ext[a] - box[a]) / stride + 1;
    }

    // All edits happen on a working copy; the caller's volume stays intact.
    Tensor work = volume.reshaped({1, 1, ext[0], ext[1], ext[2]});
    AttentionMap map;
    map.grid = Tensor({gext[0], gext[1], gext[2]});
    map.box = box;
    map.stride = stride;
    map.target_class = target_class;
    map.baseline_prob = predict(net, work, target_class);

    const int64_t H = ext[1], W = ext[2];
    std::vector<float> stash(static_cast<size_t>(box[0] * box[1] * box[2]));
    int64_t gi = 0;
    for (int64_t gz = 0; gz < gext[0]; ++gz)
        for (int64_t gy = 0; gy < gext[1]; ++gy)
            for (int64_t gx = 0; gx < gext[2]; ++gx, ++gi) {
                const int64_t z0 = gz * stride, y0 = gy * stride, x0 = gx * stride;
                size_t si = 0;
                for (int64_t z = z0; z < z0 + box[0]; ++z)
                    for (int64_t y = y0; y < y0 + box[1]; ++y)
                        for (int64_t x = x0; x < x0 + box[2]; ++x, ++si) {
                            const int64_t idx = (z * H + y) * W + x;
                            stash[si] = work[idx];
                            work[idx] = fill;
                        }
                const double p = predict(net, work, target_class);
                map.grid[gi] = static_cast<float>(map.baseline_prob - p);
                si = 0;
                for (int64_t z = z0; z < z0 + box[0]; ++z)
                    for (int64_t y = y0; y < y0 + box[1]; ++y)
                        for (int64_t x = x0; x < x0 + box[2]; ++x, ++si)
                            work[(z * H + y) * W + x] = stash[si];
            }
    return map;
}

Tensor upsample_map(const AttentionMap& map, const Dims3& to_shape) {
    const Dims3 g{map.grid.extent(0), map.grid.extent(1), map.grid.extent(2)};
    for (int a = 0; a < 3; ++a)
        if (to_shape[a] < g[a])
            throw ShapeError("upsample target extent " + std::to_string(to_shape[a]) +
                             " smaller than grid extent on axis " + std::to_string(a));
    Tensor out({to_shape[0], to_shape[1], to_shape[2]});
    int64_t i = 0;
    for (int64_t z = 0; z < to_shape[0]; ++z) {
        const int64_t gz = std::min(g[0] - 1, z * g[0] / to_shape[0]);
        for (int64_t y = 0; y < to_shape[1]; ++y) {
            const int64_t gy = std::min(g[1] - 1, y * g[1] / to_shape[1]);
            for (int64_t x = 0; x < to_shape[2]; ++x, ++i) {
                const int64_t gx = std::min(g[2] - 1, x * g[2] / to_shape[2]);
                out[i] = map.grid[(gz * g[1] + gy) * g[2] + gx];
            }
        }
    }
    return out;
}

namespace {

// Extracts slice `index` along `axis` from a [d,h,w] tensor as rows x cols.
std::vector<std::vector<float>> take_slice(const Tensor& vol, SliceAxis axis, int64_t index) {
    const int64_t D = vol.extent(0), H = vol.extent(1), W = vol.extent(2);
    auto at = [&](int64_t z, int64_t y, int64_t x) { return vol[(z * H + y) * W + x]; };
    std::vector<std::vector<float>> out;
    switch (axis) {
        case SliceAxis::axial:  // fixed z
            if (index < 0 || index >= D) throw ConfigError("axial slice index out of range");
            for (int64_t y = 0; y < H; ++y) {
                std::vector<float> row(static_cast<size_t>(W));
                for (int64_t x = 0; x < W; ++x) row[static_cast<size_t>(x)] = at(index, y, x);
                out.push_back(std::move(row));
            }
            break;
        case SliceAxis::coronal:  // fixed y
            if (index < 0 || index >= H) throw ConfigError("coronal slice index out of range");
            for (int64_t z = 0; z < D; ++z) {
                std::vector<float> row(static_cast<size_t>(W));
                for (int64_t x = 0; x < W; ++x) row[static_cast<size_t>(x)] = at(z, index, x);
                out.push_back(std::move(row));
            }
            break;
        case SliceAxis::sagittal:  // fixed x
            if (index < 0 || index >= W) throw ConfigError("sagittal slice index out of range");
            for (int64_t z = 0; z < D; ++z) {
                std::vector<float> row(static_cast<size_t>(H));
                for (int64_t y = 0; y < H; ++y) row[static_cast<size_t>(y)] = at(z, y, index);
                out.push_back(std::move(row));
            }
            break;
    }
    return out;
}

void write_csv_matrix(const std::filesystem::path& path,
                      const std::vector<std::vector<float>>& m) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write slice csv: " + path.string());
    os.precision(8);
    for (const auto& row : m) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << '\n';
    }
}

void write_pgm(const std::filesystem::path& path, const std::vector<std::vector<float>>& m) {
    float lo = m[0][0], hi = m[0][0];
    for (const auto& row : m)
        for (float v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    const float span = hi > lo ? hi - lo : 1.0f;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write slice pgm: " + path.string());
    os << "P5\n" << m[0].size() << ' ' << m.size() << "\n255\n";
    for (const auto& row : m)
        for (float v : row) {
            unsigned char b = static_cast<unsigned char>(
                std::lround(255.0f * (v - lo) / span));
            os.write(reinterpret_cast<const char*>(&b), 1);
        }
}

}  // namespace

void export_slices(const Tensor& volume, const AttentionMap& map, SliceAxis axis,
                   int64_t index, const std::filesystem::path& out_dir,
                   const std::string& prefix) {
    std::filesystem::create_directories(out_dir);
    Tensor up = upsample_map(map, {volume.extent(0), volume.extent(1), volume.extent(2)});
    auto vol_slice = take_slice(volume, axis, index);
    auto map_slice = take_slice(up, axis, index);
    write_csv_matrix(out_dir / (prefix + "_volume.csv"), vol_slice);
    write_pgm(out_dir / (prefix + "_volume.pgm"), vol_slice);
    write_csv_matrix(out_dir / (prefix + "_map.csv"), map_slice);
    write_pgm(out_dir / (prefix + "_map.pgm"), map_slice);
}

}  // namespace vox3d
