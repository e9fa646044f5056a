#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vox3d/tensor.hpp"

namespace vox3d {

enum class Label { AD, LMCI, EMCI, NC };

std::string label_name(Label l);
Label label_from_string(const std::string& s);
const std::vector<Label>& all_labels();
// The six one-versus-one tasks in reporting order:
// AD:NC, AD:EMCI, AD:LMCI, LMCI:NC, LMCI:EMCI, EMCI:NC.
const std::vector<std::pair<Label, Label>>& all_tasks();

struct LabeledSample {
    std::string subject_id;
    int acquisition_index = 0;
    Label label = Label::NC;
    Tensor volume;  // [d,h,w]
};

struct Dataset {
    std::vector<LabeledSample> samples;
    int cube = 110;

    std::map<Label, int> class_histogram() const;
};

// Keeps exactly the lowest acquisition_index per subject. Throws IoError on
// duplicate (subject, acquisition) pairs.
Dataset dedup_first_scan(const std::vector<LabeledSample>& samples);

// A binary classification task: indices into the dataset plus 0/1 class ids
// (0 = first label of the pair, 1 = second; scores are p(class 1)).
struct TaskView {
    std::pair<Label, Label> task;
    std::vector<int> sample_indices;
    std::vector<int> classes;
};

TaskView make_task(const Dataset& ds, Label a, Label b);

struct BatchPlan {
    int num_classes = 0;
    int batch_size = 0;
    std::vector<std::vector<int>> batches;  // positions into the TaskView
};

// Reserve-one-per-class, then fill from a merged shuffled pool. Guarantees
// that no batch is single-class; batches have size b except possibly the
// last. When a class has fewer samples than there are batches, its samples
// are recycled for the reservation step.
BatchPlan balanced_batches(const std::vector<int>& classes, int batch_size, uint64_t seed);

struct FoldSplit {
    int n_folds = 0;
    int repeats = 0;
    // assignments[repeat][sample] = fold index in [0, n_folds)
    std::vector<std::vector<int>> assignments;
};

// Stratified: within each repeat, per-fold class counts differ by at most one
// sample from an even split. Every class must have >= n_folds samples.
FoldSplit stratified_folds(const std::vector<int>& classes, int n_folds, int repeats,
                           uint64_t seed);

// Synthetic volumes: smoothed Gaussian noise plus class-specific ellipsoidal
// signatures whose intensity scales with `separability` (0 = identical class
// distributions). Deterministic in the seed.
Dataset generate_synthetic(int n_per_class, const std::vector<Label>& classes, int cube,
                           float separability, uint64_t seed);

// 1.0 inside the discriminative ellipsoids used by generate_synthetic.
Tensor synthetic_signature_mask(int cube);

// Binary volume file: magic "VOXVOL\0\0", u16 version, u16 rank, u32 extents,
// then little-endian f32 voxels in row-major order.
void write_volume(const std::filesystem::path& path, const Tensor& volume);
Tensor read_volume(const std::filesystem::path& path);

// Dataset directory: manifest.csv (subject_id,acquisition_index,label,path)
// plus one volume file per sample.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace vox3d
