#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <vector>

#include "helpers.hpp"
#include "vox3d/data.hpp"
#include "vox3d/errors.hpp"

using namespace vox3d;

namespace {

LabeledSample sample(const std::string& subject, int acq, Label label, int cube = 2,
                     float fill = 0.0f) {
    LabeledSample s;
    s.subject_id = subject;
    s.acquisition_index = acq;
    s.label = label;
    s.volume = Tensor::full({cube, cube, cube}, fill);
    return s;
}

}  // namespace

TEST_SUITE("data.dedup") {
    TEST_CASE("a subject scanned at indices (3,1,2) keeps only the index-1 scan") {
        std::vector<LabeledSample> in{sample("s1", 3, Label::AD, 2, 3.0f),
                                      sample("s1", 1, Label::AD, 2, 1.0f),
                                      sample("s1", 2, Label::AD, 2, 2.0f)};
        Dataset ds = dedup_first_scan(in);
        REQUIRE(ds.samples.size() == 1);
        CHECK(ds.samples[0].acquisition_index == 1);
        CHECK(ds.samples[0].volume[0] == 1.0f);
    }

    TEST_CASE("unique subjects pass through unchanged (idempotence)") {
        std::vector<LabeledSample> in{sample("a", 0, Label::AD), sample("b", 0, Label::NC),
                                      sample("c", 2, Label::EMCI)};
        Dataset once = dedup_first_scan(in);
        CHECK(once.samples.size() == 3);
        Dataset twice = dedup_first_scan(once.samples);
        CHECK(twice.samples.size() == 3);
    }

    TEST_CASE("duplicate (subject, acquisition) pairs raise IoError") {
        std::vector<LabeledSample> in{sample("a", 1, Label::AD), sample("a", 1, Label::AD)};
        CHECK_THROWS_AS(dedup_first_scan(in), IoError);
    }

    TEST_CASE("an ADNI-shaped manifest yields the 50/43/77/61 class histogram") {
        // 231 subjects split across the four diagnostic groups, some with
        // repeat scans that dedup must drop without changing the histogram.
        std::vector<LabeledSample> in;
        auto add_group = [&in](Label l, int count, const std::string& prefix) {
            for (int i = 0; i < count; ++i) {
                in.push_back(sample(prefix + std::to_string(i), 1, l));
                if (i % 10 == 0) in.push_back(sample(prefix + std::to_string(i), 2, l));
            }
        };
        add_group(Label::AD, 50, "ad");
        add_group(Label::LMCI, 43, "lmci");
        add_group(Label::EMCI, 77, "emci");
        add_group(Label::NC, 61, "nc");
        Dataset ds = dedup_first_scan(in);
        CHECK(ds.samples.size() == 231);
        auto hist = ds.class_histogram();
        CHECK(hist[Label::AD] == 50);
        CHECK(hist[Label::LMCI] == 43);
        CHECK(hist[Label::EMCI] == 77);
        CHECK(hist[Label::NC] == 61);
    }
}

TEST_SUITE("data.batches") {
    TEST_CASE("c=2 b=2 with 3+3 samples gives 3 batches, each one of each class") {
        std::vector<int> classes{0, 0, 0, 1, 1, 1};
        BatchPlan plan = balanced_batches(classes, 2, 7);
        REQUIRE(plan.batches.size() == 3);
        std::multiset<int> used;
        for (const auto& b : plan.batches) {
            REQUIRE(b.size() == 2);
            CHECK(classes[static_cast<size_t>(b[0])] + classes[static_cast<size_t>(b[1])] == 1);
            for (int p : b) used.insert(p);
        }
        CHECK(used.size() == 6);
    }

    TEST_CASE("no plan ever contains a single-class batch") {
        std::vector<int> classes;
        for (int i = 0; i < 9; ++i) classes.push_back(i % 2);
        for (uint64_t seed = 0; seed < 300; ++seed) {
            BatchPlan plan = balanced_batches(classes, 3, seed);
            for (const auto& b : plan.batches) {
                bool single = true;
                for (size_t i = 1; i < b.size(); ++i)
                    if (classes[static_cast<size_t>(b[i])] != classes[static_cast<size_t>(b[0])])
                        single = false;
                CHECK_FALSE(single);
            }
        }
    }

    TEST_CASE("same seed reproduces the plan; different seeds shuffle") {
        std::vector<int> classes{0, 0, 0, 0, 1, 1, 1, 1};
        BatchPlan a = balanced_batches(classes, 4, 5);
        BatchPlan b = balanced_batches(classes, 4, 5);
        CHECK(a.batches == b.batches);
    }

    TEST_CASE("batch size below the class count raises ConfigError") {
        std::vector<int> classes{0, 1};
        CHECK_THROWS_AS(balanced_batches(classes, 1, 0), ConfigError);
    }
}

TEST_SUITE("data.folds") {
    TEST_CASE("50 samples of one class split 10 per fold") {
        std::vector<int> classes(50, 0);
        classes.insert(classes.end(), 50, 1);
        FoldSplit split = stratified_folds(classes, 5, 1, 3);
        std::vector<int> count(5, 0);
        for (size_t i = 0; i < 50; ++i) ++count[static_cast<size_t>(split.assignments[0][i])];
        for (int c : count) CHECK(c == 10);
    }

    TEST_CASE("43 samples over 5 folds give fold sizes in {8,9} summing to 43") {
        std::vector<int> classes(43, 0);
        classes.insert(classes.end(), 40, 1);
        FoldSplit split = stratified_folds(classes, 5, 1, 4);
        std::vector<int> count(5, 0);
        for (size_t i = 0; i < 43; ++i) ++count[static_cast<size_t>(split.assignments[0][i])];
        int sum = 0;
        for (int c : count) {
            CHECK((c == 8 || c == 9));
            sum += c;
        }
        CHECK(sum == 43);
    }

    TEST_CASE("validation folds of one repeat partition the dataset") {
        std::vector<int> classes;
        for (int i = 0; i < 37; ++i) classes.push_back(i % 2);
        FoldSplit split = stratified_folds(classes, 5, 3, 9);
        REQUIRE(split.assignments.size() == 3);
        for (const auto& rep : split.assignments) {
            REQUIRE(rep.size() == classes.size());
            for (int f : rep) CHECK((f >= 0 && f < 5));
        }
    }

    TEST_CASE("per-fold class counts deviate from even by at most one") {
        std::vector<int> classes;
        for (int i = 0; i < 23; ++i) classes.push_back(0);
        for (int i = 0; i < 31; ++i) classes.push_back(1);
        FoldSplit split = stratified_folds(classes, 5, 2, 13);
        for (const auto& rep : split.assignments) {
            for (int cls = 0; cls < 2; ++cls) {
                std::vector<int> count(5, 0);
                for (size_t i = 0; i < classes.size(); ++i)
                    if (classes[i] == cls) ++count[static_cast<size_t>(rep[i])];
                int lo = *std::min_element(count.begin(), count.end());
                int hi = *std::max_element(count.begin(), count.end());
                CHECK(hi - lo <= 1);
            }
        }
    }

    TEST_CASE("a class smaller than the fold count raises") {
        std::vector<int> classes{0, 0, 0, 1, 1, 1, 1, 1};
        CHECK_THROWS_AS(stratified_folds(classes, 5, 1, 0), ConfigError);
    }
}

TEST_SUITE("data.synthetic") {
    TEST_CASE("same seed gives bitwise identical volumes") {
        Dataset a = generate_synthetic(3, {Label::AD, Label::NC}, 16, 0.8f, 42);
        Dataset b = generate_synthetic(3, {Label::AD, Label::NC}, 16, 0.8f, 42);
        REQUIRE(a.samples.size() == b.samples.size());
        for (size_t i = 0; i < a.samples.size(); ++i)
            CHECK(testutil::bitwise_equal(a.samples[i].volume, b.samples[i].volume));
    }

    TEST_CASE("separability 0 leaves per-class voxel means indistinguishable") {
        Dataset ds = generate_synthetic(50, {Label::AD, Label::NC}, 16, 0.0f, 7);
        std::vector<double> means[2];
        for (const LabeledSample& s : ds.samples) {
            double m = 0.0;
            for (int64_t i = 0; i < s.volume.numel(); ++i) m += s.volume[i];
            means[s.label == Label::AD ? 0 : 1].push_back(m / s.volume.numel());
        }
        auto stats = [](const std::vector<double>& v) {
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x;
            mean /= v.size();
            for (double x : v) var += (x - mean) * (x - mean);
            var /= (v.size() - 1);
            return std::pair<double, double>(mean, var);
        };
        auto [m0, v0] = stats(means[0]);
        auto [m1, v1] = stats(means[1]);
        double se = std::sqrt(v0 / means[0].size() + v1 / means[1].size());
        CHECK(std::abs(m0 - m1) < 3.0 * se);
    }

    TEST_CASE("separability raises intensity inside the signature region") {
        Dataset lo = generate_synthetic(4, {Label::AD, Label::NC}, 16, 0.0f, 5);
        Dataset hi = generate_synthetic(4, {Label::AD, Label::NC}, 16, 1.0f, 5);
        Tensor mask = synthetic_signature_mask(16);
        double dlo = 0.0, dhi = 0.0;
        for (size_t i = 0; i < lo.samples.size(); ++i)
            for (int64_t v = 0; v < mask.numel(); ++v)
                if (mask[v] > 0.0f) {
                    dlo += lo.samples[i].volume[v];
                    dhi += hi.samples[i].volume[v];
                }
        CHECK(dhi != dlo);
    }

    TEST_CASE("requested classes and counts are honored") {
        Dataset ds = generate_synthetic(5, {Label::AD, Label::LMCI, Label::NC}, 16, 0.5f, 1);
        auto hist = ds.class_histogram();
        CHECK(ds.samples.size() == 15);
        CHECK(hist[Label::AD] == 5);
        CHECK(hist[Label::LMCI] == 5);
        CHECK(hist[Label::NC] == 5);
        CHECK(ds.cube == 16);
    }
}

TEST_SUITE("data.io") {
    TEST_CASE("volume write/read round-trips bitwise") {
        testutil::TempDir tmp("vol");
        Tensor v = testutil::random_tensor({9, 9, 9}, 33);
        write_volume(tmp.path / "v.vox", v);
        CHECK(testutil::bitwise_equal(read_volume(tmp.path / "v.vox"), v));
    }

    TEST_CASE("truncated volume file raises IoError") {
        testutil::TempDir tmp("trunc");
        Tensor v = testutil::random_tensor({8, 8, 8}, 34);
        write_volume(tmp.path / "v.vox", v);
        auto size = std::filesystem::file_size(tmp.path / "v.vox");
        std::filesystem::resize_file(tmp.path / "v.vox", size - 64);
        CHECK_THROWS_AS(read_volume(tmp.path / "v.vox"), IoError);
    }

    TEST_CASE("bad magic raises IoError") {
        testutil::TempDir tmp("magic");
        std::ofstream(tmp.path / "v.vox") << "NOTAVOLUMEFILE____________";
        CHECK_THROWS_AS(read_volume(tmp.path / "v.vox"), IoError);
    }

    TEST_CASE("dataset save/load round-trips samples, labels and volumes") {
        testutil::TempDir tmp("ds");
        Dataset ds = generate_synthetic(3, {Label::AD, Label::NC}, 16, 1.0f, 55);
        save_dataset(tmp.path / "d", ds);
        Dataset back = load_dataset(tmp.path / "d");
        REQUIRE(back.samples.size() == ds.samples.size());
        CHECK(back.cube == ds.cube);
        for (size_t i = 0; i < ds.samples.size(); ++i) {
            CHECK(back.samples[i].subject_id == ds.samples[i].subject_id);
            CHECK(back.samples[i].label == ds.samples[i].label);
            CHECK(testutil::bitwise_equal(back.samples[i].volume, ds.samples[i].volume));
        }
    }

    TEST_CASE("a 231-entry manifest loads with the 50/43/77/61 histogram") {
        testutil::TempDir tmp("manifest");
        Dataset ds;
        ds.cube = 2;
        auto add = [&ds](Label l, int count, const std::string& prefix) {
            for (int i = 0; i < count; ++i) ds.samples.push_back(sample(prefix + std::to_string(i), 1, l));
        };
        add(Label::AD, 50, "ad");
        add(Label::LMCI, 43, "lmci");
        add(Label::EMCI, 77, "emci");
        add(Label::NC, 61, "nc");
        save_dataset(tmp.path / "d", ds);
        Dataset back = load_dataset(tmp.path / "d");
        CHECK(back.samples.size() == 231);
        auto hist = back.class_histogram();
        CHECK(hist[Label::AD] == 50);
        CHECK(hist[Label::LMCI] == 43);
        CHECK(hist[Label::EMCI] == 77);
        CHECK(hist[Label::NC] == 61);
    }

    TEST_CASE("the six reporting tasks are ordered as in Table 1") {
        const auto& tasks = all_tasks();
        REQUIRE(tasks.size() == 6);
        CHECK(tasks[0] == std::pair{Label::AD, Label::NC});
        CHECK(tasks[1] == std::pair{Label::AD, Label::EMCI});
        CHECK(tasks[2] == std::pair{Label::AD, Label::LMCI});
        CHECK(tasks[3] == std::pair{Label::LMCI, Label::NC});
        CHECK(tasks[4] == std::pair{Label::LMCI, Label::EMCI});
        CHECK(tasks[5] == std::pair{Label::EMCI, Label::NC});
    }

    TEST_CASE("make_task maps the pair to 0/1 classes over matching samples only") {
        Dataset ds = generate_synthetic(4, {Label::AD, Label::EMCI, Label::NC}, 16, 1.0f, 2);
        TaskView view = make_task(ds, Label::AD, Label::NC);
        CHECK(view.sample_indices.size() == 8);
        for (size_t i = 0; i < view.sample_indices.size(); ++i) {
            Label l = ds.samples[static_cast<size_t>(view.sample_indices[i])].label;
            CHECK(l == (view.classes[i] == 0 ? Label::AD : Label::NC));
        }
    }
}
