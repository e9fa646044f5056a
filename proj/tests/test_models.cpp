#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "vox3d/models.hpp"

using namespace vox3d;

namespace {

// Spatial edge length after each maxpool (voxcnn) or before each strided
// stage (voxresnet), pulled from the describe() table.
std::vector<int64_t> spatial_trace(const ArchitectureTable& t, const std::string& kind) {
    std::vector<int64_t> out;
    for (const ArchitectureRow& r : t.rows)
        if (r.kind == kind && r.output_shape.size() == 5) out.push_back(r.output_shape[2]);
    return out;
}

std::vector<float> snapshot(Network& net) {
    std::vector<float> flat;
    for (const ParamSlot& s : net.params())
        flat.insert(flat.end(), s.value->buffer().begin(), s.value->buffer().end());
    return flat;
}

}  // namespace

TEST_SUITE("models.voxcnn") {
    TEST_CASE("spatial extents trace 110 -> 55 -> 27 -> 13 -> 6") {
        Network net = build_voxcnn(2, 0.1f, 110, 0);
        ArchitectureTable t = describe(net);
        CHECK(spatial_trace(t, "maxpool3d") == std::vector<int64_t>{55, 27, 13, 6});
    }

    TEST_CASE("filter progression is (8, 16, 32, 64)") {
        Network net = build_voxcnn(2, 0.1f, 110, 0);
        ArchitectureTable t = describe(net);
        std::vector<int64_t> filters;
        for (const ArchitectureRow& r : t.rows)
            if (r.kind == "conv3d") filters.push_back(r.output_shape[1]);
        CHECK(filters == std::vector<int64_t>{8, 16, 32, 64});
    }

    TEST_CASE("flatten feeds 13824 features into a dense-128 classifier") {
        Network net = build_voxcnn(2, 0.1f, 110, 0);
        bool saw_flatten = false, saw_dense128 = false;
        ArchitectureTable t = describe(net);
        for (size_t i = 0; i < t.rows.size(); ++i) {
            if (t.rows[i].kind == "flatten") {
                saw_flatten = true;
                CHECK(t.rows[i].output_shape == std::vector<int64_t>{1, 13824});
                REQUIRE(i + 1 < t.rows.size());
                CHECK(t.rows[i + 1].kind == "dense");
                saw_dense128 = t.rows[i + 1].output_shape == std::vector<int64_t>{1, 128};
            }
        }
        CHECK(saw_flatten);
        CHECK(saw_dense128);
    }

    TEST_CASE("logits shape on a full-size input is [1,2]") {
        Network net = build_voxcnn(2, 0.1f, 110, 0);
        CHECK(net.input_shape() == std::vector<int64_t>{1, 110, 110, 110});
        CHECK(net.output_shape() == std::vector<int64_t>{1, 2});
    }
}

TEST_SUITE("models.voxresnet") {
    TEST_CASE("spatial extents trace 110 -> 55 -> 28 -> 14 and pool to [1,128,2,2,2]") {
        Network net = build_voxresnet(2, 110, 0);
        ArchitectureTable t = describe(net);
        // Strided convs step the edge down; the final pool reaches 2^3.
        std::vector<int64_t> conv_edges = spatial_trace(t, "conv3d");
        CHECK(conv_edges == std::vector<int64_t>{110, 55, 28, 14});
        bool pooled = false;
        for (const ArchitectureRow& r : t.rows)
            if (r.kind == "maxpool3d") {
                pooled = true;
                CHECK(r.output_shape == std::vector<int64_t>{1, 128, 2, 2, 2});
            }
        CHECK(pooled);
    }

    TEST_CASE("six voxres blocks, shape-preserving") {
        Network net = build_voxresnet(2, 110, 0);
        ArchitectureTable t = describe(net);
        int blocks = 0;
        for (size_t i = 0; i < t.rows.size(); ++i)
            if (t.rows[i].kind == "voxres_block") {
                ++blocks;
                CHECK(t.rows[i].output_shape == t.rows[i - 1].output_shape);
            }
        CHECK(blocks == 6);
    }

    TEST_CASE("classifier is dense 128 into the softmax head") {
        Network net = build_voxresnet(2, 110, 0);
        ArchitectureTable t = describe(net);
        std::vector<int64_t> dense_widths;
        for (const ArchitectureRow& r : t.rows)
            if (r.kind == "dense") dense_widths.push_back(r.output_shape[1]);
        CHECK(dense_widths == std::vector<int64_t>{128, 2});
    }
}

TEST_SUITE("models.common") {
    TEST_CASE("builders are deterministic in the seed") {
        Network a = build_voxresnet(2, 12, 99);
        Network b = build_voxresnet(2, 12, 99);
        CHECK(snapshot(a) == snapshot(b));
        Network c = build_voxcnn(3, 0.2f, 12, 99);
        Network d = build_voxcnn(3, 0.2f, 12, 99);
        CHECK(snapshot(c) == snapshot(d));
    }

    TEST_CASE("describe row count equals layer count and params sum to the total") {
        for (Arch arch : {Arch::voxcnn, Arch::voxresnet}) {
            Network net = build_model(arch, 2, 0.1f, 110, 0);
            ArchitectureTable t = describe(net);
            CHECK(t.rows.size() == net.layers().size());
            int64_t sum = 0;
            for (const ArchitectureRow& r : t.rows) sum += r.param_count;
            CHECK(sum == t.total_params);
            CHECK(t.total_params == net.num_params());
        }
    }

    TEST_CASE("num_classes generalizes past 2") {
        Network net = build_voxcnn(4, 0.1f, 12, 0);
        CHECK(net.output_shape() == std::vector<int64_t>{1, 4});
    }

    TEST_CASE("arch names round-trip") {
        CHECK(arch_from_string("voxcnn") == Arch::voxcnn);
        CHECK(arch_from_string("voxresnet") == Arch::voxresnet);
        CHECK(arch_name(Arch::voxcnn) == "voxcnn");
        CHECK(arch_name(Arch::voxresnet) == "voxresnet");
    }
}
