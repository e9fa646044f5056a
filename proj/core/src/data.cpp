#include "vox3d/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "vox3d/errors.hpp"
#include "vox3d/rng.hpp"

namespace vox3d {

std::string label_name(Label l) {
    switch (l) {
        case Label::AD: return "AD";
        case Label::LMCI: return "LMCI";
        case Label::EMCI: return "EMCI";
        case Label::NC: return "NC";
    }
    return "?";
}

Label label_from_string(const std::string& s) {
    if (s == "AD") return Label::AD;
    if (s == "LMCI") return Label::LMCI;
    if (s == "EMCI") return Label::EMCI;
    if (s == "NC") return Label::NC;
    throw ConfigError("unknown class label '" + s + "' (expected AD, LMCI, EMCI or NC)");
}

const std::vector<Label>& all_labels() {
    static const std::vector<Label> labels{Label::AD, Label::LMCI, Label::EMCI, Label::NC};
    return labels;
}

const std::vector<std::pair<Label, Label>>& all_tasks() {
    static const std::vector<std::pair<Label, Label>> tasks{
        {Label::AD, Label::NC},     {Label::AD, Label::EMCI}, {Label::AD, Label::LMCI},
        {Label::LMCI, Label::NC},   {Label::LMCI, Label::EMCI}, {Label::EMCI, Label::NC}};
    return tasks;
}

std::map<Label, int> Dataset::class_histogram() const {
    std::map<Label, int> hist;
    for (const auto& s : samples) ++hist[s.label];
    return hist;
}

Dataset dedup_first_scan(const std::vector<LabeledSample>& samples) {
    std::set<std::pair<std::string, int>> seen;
    std::map<std::string, const LabeledSample*> best;
    for (const auto& s : samples) {
        if (!seen.insert({s.subject_id, s.acquisition_index}).second)
            throw IoError("duplicate (subject, acquisition) pair: " + s.subject_id + ", " +
                          std::to_string(s.acquisition_index));
        auto it = best.find(s.subject_id);
        if (it == best.end() || s.acquisition_index < it->second->acquisition_index)
            best[s.subject_id] = &s;
    }
    Dataset ds;
    for (const auto& s : samples)  // keep original order
        if (best.at(s.subject_id) == &s) ds.samples.push_back(s);
    if (!ds.samples.empty()) ds.cube = static_cast<int>(ds.samples.front().volume.extent(0));
    return ds;
}

TaskView make_task(const Dataset& ds, Label a, Label b) {
    if (a == b) throw ConfigError("task classes must differ");
    TaskView view;
    view.task = {a, b};
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].label == a) {
            view.sample_indices.push_back(static_cast<int>(i));
            view.classes.push_back(0);
        } else if (ds.samples[i].label == b) {
            view.sample_indices.push_back(static_cast<int>(i));
            view.classes.push_back(1);
        }
    }
    return view;
}

BatchPlan balanced_batches(const std::vector<int>& classes, int batch_size, uint64_t seed) {
    const int n = static_cast<int>(classes.size());
    int c = 0;
    for (int k : classes) c = std::max(c, k + 1);
    std::vector<std::vector<int>> by_class(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) by_class[static_cast<size_t>(classes[static_cast<size_t>(i)])].push_back(i);
    for (int k = 0; k < c; ++k)
        if (by_class[static_cast<size_t>(k)].empty())
            throw ConfigError("task class " + std::to_string(k) + " has no samples");
    if (batch_size < c)
        throw ConfigError("batch size " + std::to_string(batch_size) +
                          " is smaller than the number of classes " + std::to_string(c));

    Rng rng(seed);
    for (auto& lst : by_class) std::shuffle(lst.begin(), lst.end(), rng.engine());

    const int nb = (n + batch_size - 1) / batch_size;
    BatchPlan plan{c, batch_size, std::vector<std::vector<int>>(static_cast<size_t>(nb))};

    // Reservation pass: one sample of every class per batch. A class shorter
    // than the batch count recycles reshuffled copies of itself.
    std::vector<size_t> cursor(static_cast<size_t>(c), 0);
    std::vector<std::vector<int>> recycle(static_cast<size_t>(c));
    std::vector<size_t> recycle_cursor(static_cast<size_t>(c), 0);
    for (int i = 0; i < nb; ++i)
        for (int k = 0; k < c; ++k) {
            auto& lst = by_class[static_cast<size_t>(k)];
            int pick;
            if (cursor[static_cast<size_t>(k)] < lst.size()) {
                pick = lst[cursor[static_cast<size_t>(k)]++];
            } else {
                auto& rec = recycle[static_cast<size_t>(k)];
                if (recycle_cursor[static_cast<size_t>(k)] >= rec.size()) {
                    rec = lst;
                    std::shuffle(rec.begin(), rec.end(), rng.engine());
                    recycle_cursor[static_cast<size_t>(k)] = 0;
                }
                pick = rec[recycle_cursor[static_cast<size_t>(k)]++];
            }
            plan.batches[static_cast<size_t>(i)].push_back(pick);
        }

    // Fill pass from the merged pool of unreserved samples.
    std::vector<int> pool;
    for (int k = 0; k < c; ++k)
        for (size_t j = cursor[static_cast<size_t>(k)]; j < by_class[static_cast<size_t>(k)].size(); ++j)
            pool.push_back(by_class[static_cast<size_t>(k)][j]);
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    size_t next = 0;
    for (int i = 0; i < nb && next < pool.size(); ++i) {
        auto& batch = plan.batches[static_cast<size_t>(i)];
        while (static_cast<int>(batch.size()) < batch_size && next < pool.size())
            batch.push_back(pool[next++]);
    }
    // Spill anything left into the last batch (happens only with recycling).
    while (next < pool.size()) plan.batches.back().push_back(pool[next++]);
    return plan;
}

FoldSplit stratified_folds(const std::vector<int>& classes, int n_folds, int repeats,
                           uint64_t seed) {
    if (n_folds < 2) throw ConfigError("need at least 2 folds");
    const int n = static_cast<int>(classes.size());
    int c = 0;
    for (int k : classes) c = std::max(c, k + 1);
    std::vector<std::vector<int>> by_class(static_cast<size_t>(c));
    for (int i = 0; i < n; ++i) by_class[static_cast<size_t>(classes[static_cast<size_t>(i)])].push_back(i);
    for (int k = 0; k < c; ++k)
        if (static_cast<int>(by_class[static_cast<size_t>(k)].size()) < n_folds)
            throw ConfigError("class " + std::to_string(k) + " has " +
                              std::to_string(by_class[static_cast<size_t>(k)].size()) +
                              " samples, fewer than " + std::to_string(n_folds) + " folds");

    FoldSplit split{n_folds, repeats, {}};
    for (int r = 0; r < repeats; ++r) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(r)));
        std::vector<int> assign(static_cast<size_t>(n), -1);
        for (int k = 0; k < c; ++k) {
            std::vector<int> idx = by_class[static_cast<size_t>(k)];
            std::shuffle(idx.begin(), idx.end(), rng.engine());
            // Rotate the starting fold so remainders do not pile up in fold 0.
            int offset = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(n_folds));
            for (size_t j = 0; j < idx.size(); ++j)
                assign[static_cast<size_t>(idx[j])] = static_cast<int>((j + static_cast<size_t>(offset)) % static_cast<size_t>(n_folds));
        }
        split.assignments.push_back(std::move(assign));
    }
    return split;
}

namespace {

void box_blur_axis(std::vector<float>& v, int cube, int axis) {
    std::vector<float> out(v.size());
    const int strides[3] = {cube * cube, cube, 1};
    const int s = strides[axis];
    for (int z = 0; z < cube; ++z)
        for (int y = 0; y < cube; ++y)
            for (int x = 0; x < cube; ++x) {
                int coord[3] = {z, y, x};
                int idx = z * cube * cube + y * cube + x;
                float acc = 0.0f;
                int cnt = 0;
                for (int d = -1; d <= 1; ++d) {
                    int t = coord[axis] + d;
                    if (t < 0 || t >= cube) continue;
                    acc += v[static_cast<size_t>(idx + d * s)];
                    ++cnt;
                }
                out[static_cast<size_t>(idx)] = acc / static_cast<float>(cnt);
            }
    v.swap(out);
}

struct Ellipsoid {
    double cz, cy, cx, r;
    bool contains(int z, int y, int x) const {
        double dz = (z - cz) / r, dy = (y - cy) / r, dx = (x - cx) / r;
        return dz * dz + dy * dy + dx * dx <= 1.0;
    }
};

Ellipsoid center_ellipsoid(int cube, int class_pos) {
    double c = cube / 2.0;
    return {c, c, c, cube * (0.16 + 0.015 * class_pos)};
}

Ellipsoid offset_ellipsoid(int cube) {
    return {cube * 0.68, cube / 2.0, cube / 2.0, cube * 0.10};
}

}  // namespace

Dataset generate_synthetic(int n_per_class, const std::vector<Label>& classes, int cube,
                           float separability, uint64_t seed) {
    if (cube < 16) throw ConfigError("synthetic cube must be >= 16");
    if (separability < 0.0f || separability > 1.0f)
        throw ConfigError("separability must be in [0,1]");
    if (n_per_class < 1) throw ConfigError("need at least one sample per class");
    if (classes.size() < 2) throw ConfigError("need at least two classes");

    Dataset ds;
    ds.cube = cube;
    for (size_t k = 0; k < classes.size(); ++k) {
        const Ellipsoid core = center_ellipsoid(cube, static_cast<int>(k));
        const Ellipsoid off = offset_ellipsoid(cube);
        const float core_amp = separability * 0.5f * static_cast<float>(k);
        const float off_amp = separability * 0.35f * static_cast<float>(k);
        for (int i = 0; i < n_per_class; ++i) {
            Rng rng(mix_seed(seed, k, static_cast<uint64_t>(i)));
            std::vector<float> v(static_cast<size_t>(cube) * cube * cube);
            for (float& x : v) x = rng.normal(1.0f, 0.3f);
            for (int pass = 0; pass < 2; ++pass)
                for (int axis = 0; axis < 3; ++axis) box_blur_axis(v, cube, axis);
            for (int z = 0; z < cube; ++z)
                for (int y = 0; y < cube; ++y)
                    for (int x = 0; x < cube; ++x) {
                        size_t idx = static_cast<size_t>((z * cube + y) * cube + x);
                        if (core_amp != 0.0f && core.contains(z, y, x)) v[idx] += core_amp;
                        if (off_amp != 0.0f && off.contains(z, y, x)) v[idx] += off_amp;
                        if (v[idx] < 0.0f) v[idx] = 0.0f;
                    }
            LabeledSample s;
            s.subject_id = "SYN-" + label_name(classes[k]) + "-" + std::to_string(i);
            s.acquisition_index = 1;
            s.label = classes[k];
            s.volume = Tensor({cube, cube, cube}, std::move(v));
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

Tensor synthetic_signature_mask(int cube) {
    // Union of every class signature that differs from class 0.
    const Ellipsoid core = center_ellipsoid(cube, 3);
    const Ellipsoid off = offset_ellipsoid(cube);
    Tensor mask({cube, cube, cube});
    int64_t i = 0;
    for (int z = 0; z < cube; ++z)
        for (int y = 0; y < cube; ++y)
            for (int x = 0; x < cube; ++x, ++i)
                mask[i] = (core.contains(z, y, x) || off.contains(z, y, x)) ? 1.0f : 0.0f;
    return mask;
}

namespace {
constexpr char kVolMagic[8] = {'V', 'O', 'X', 'V', 'O', 'L', '\0', '\0'};
constexpr uint16_t kVolVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError(std::string("volume file truncated while reading ") + what);
    return v;
}
}  // namespace

void write_volume(const std::filesystem::path& path, const Tensor& volume) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open volume file for writing: " + path.string());
    os.write(kVolMagic, sizeof(kVolMagic));
    write_pod(os, kVolVersion);
    write_pod(os, static_cast<uint16_t>(volume.rank()));
    for (int64_t a = 0; a < volume.rank(); ++a)
        write_pod(os, static_cast<uint32_t>(volume.extent(a)));
    os.write(reinterpret_cast<const char*>(volume.data()),
             static_cast<std::streamsize>(volume.numel() * sizeof(float)));
    if (!os) throw IoError("short write to volume file: " + path.string());
}

Tensor read_volume(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open volume file: " + path.string());
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kVolMagic, sizeof(kVolMagic)) != 0)
        throw IoError("bad magic in volume file: " + path.string());
    uint16_t version = read_pod<uint16_t>(is, "version");
    if (version != kVolVersion)
        throw IoError("unsupported volume format version " + std::to_string(version));
    uint16_t rank = read_pod<uint16_t>(is, "rank");
    if (rank < 1 || rank > 5) throw IoError("volume rank " + std::to_string(rank) + " out of range");
    std::vector<int64_t> shape;
    for (uint16_t a = 0; a < rank; ++a)
        shape.push_back(static_cast<int64_t>(read_pod<uint32_t>(is, "extent")));
    std::vector<float> data(static_cast<size_t>(Tensor::numel_of(shape)));
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
    if (!is)
        throw IoError("volume file truncated: header declares " + shape_to_string(shape) +
                      " but fewer voxels are present in " + path.string());
    return Tensor(std::move(shape), std::move(data));
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "volumes");
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest in " + dir.string());
    manifest << "subject_id,acquisition_index,label,path\n";
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& s = ds.samples[i];
        std::string rel = "volumes/" + s.subject_id + "_" +
                          std::to_string(s.acquisition_index) + ".vox";
        write_volume(dir / rel, s.volume);
        manifest << s.subject_id << ',' << s.acquisition_index << ',' << label_name(s.label)
                 << ',' << rel << '\n';
    }
    if (!manifest) throw IoError("short write to manifest in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.csv");
    if (!manifest) throw IoError("cannot open manifest: " + (dir / "manifest.csv").string());
    std::string line;
    if (!std::getline(manifest, line) || line != "subject_id,acquisition_index,label,path")
        throw IoError("manifest header mismatch in " + dir.string());
    Dataset ds;
    int cube = -1;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream is(line);
        std::string subject, acq, label, path;
        if (!std::getline(is, subject, ',') || !std::getline(is, acq, ',') ||
            !std::getline(is, label, ',') || !std::getline(is, path))
            throw IoError("malformed manifest record: " + line);
        LabeledSample s;
        s.subject_id = subject;
        s.acquisition_index = std::stoi(acq);
        s.label = label_from_string(label);
        s.volume = read_volume(dir / path);
        if (s.volume.rank() != 3 || s.volume.extent(0) != s.volume.extent(1) ||
            s.volume.extent(1) != s.volume.extent(2))
            throw IoError("volume " + path + " is not a cube");
        if (cube < 0) cube = static_cast<int>(s.volume.extent(0));
        else if (cube != static_cast<int>(s.volume.extent(0)))
            throw IoError("volume " + path + " extent differs from the rest of the dataset");
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw IoError("manifest lists no samples in " + dir.string());
    ds.cube = cube;
    return ds;
}

}  // namespace vox3d
