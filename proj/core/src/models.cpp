#include "vox3d/models.hpp"

#include <algorithm>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vox3d/errors.hpp"

namespace vox3d {

std::string arch_name(Arch a) { return a == Arch::voxcnn ? "voxcnn" : "voxresnet"; }

Arch arch_from_string(const std::string& s) {
    if (s == "voxcnn") return Arch::voxcnn;
    if (s == "voxresnet" || s == "resnet") return Arch::voxresnet;
    throw ConfigError("unknown architecture '" + s + "' (expected voxcnn or voxresnet)");
}

namespace {

ConvSpec conv_spec(int64_t ci, int64_t co, int64_t k, int64_t s, int64_t p) {
    ConvSpec cs;
    cs.in_channels = ci;
    cs.out_channels = co;
    cs.kernel = {k, k, k};
    cs.stride = {s, s, s};
    cs.padding = {p, p, p};
    return cs;
}

std::string make_tag(const std::string& name, int num_classes, float dropout_p, int cube) {
    std::ostringstream os;
    os << name << ";classes=" << num_classes << ";dropout=" << dropout_p << ";cube=" << cube;
    return os.str();
}

}  // namespace

Network build_voxcnn(int num_classes, float dropout_p, int cube, uint64_t seed) {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (cube < 8) throw ConfigError("voxcnn needs cube >= 8");
    Network net({1, cube, cube, cube}, seed);
    const int64_t filters[4] = {8, 16, 32, 64};
    int64_t ci = 1;
    int64_t extent = cube;
    for (int64_t co : filters) {
        net.add(make_conv3d(conv_spec(ci, co, 3, 1, 1)));
        net.add(make_relu());
        int64_t w = std::min<int64_t>(2, extent);
        net.add(make_maxpool3d({w, w, w}, {w, w, w}));
        extent = (extent - w) / w + 1;
        ci = co;
    }
    const int64_t flat = 64 * extent * extent * extent;
    net.add(make_flatten());
    net.add(make_dense(flat, 128));
    net.add(make_batchnorm(128));
    net.add(make_relu());
    net.add(make_dropout(dropout_p));
    net.add(make_dense(128, 64));
    net.add(make_batchnorm(64));
    net.add(make_relu());
    net.add(make_dropout(dropout_p));
    net.add(make_dense(64, num_classes));
    net.add(make_softmax_output());
    net.finalize();
    net.init_params(seed);
    net.set_builder_tag(make_tag("voxcnn", num_classes, dropout_p, cube));
    return net;
}

Network build_voxresnet(int num_classes, int cube, uint64_t seed) {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (cube < 8) throw ConfigError("voxresnet needs cube >= 8");
    Network net({1, cube, cube, cube}, seed);
    net.add(make_conv3d(conv_spec(1, 32, 3, 1, 1)));
    net.add(make_batchnorm(32));
    net.add(make_relu());

    int64_t extent = cube;
    auto strided = [&extent](int64_t e) { return (e + 2 - 3) / 2 + 1; };

    net.add(make_conv3d(conv_spec(32, 64, 3, 2, 1)));
    extent = strided(extent);
    net.add(make_voxres_block(64));
    net.add(make_voxres_block(64));

    net.add(make_conv3d(conv_spec(64, 64, 3, 2, 1)));
    extent = strided(extent);
    net.add(make_voxres_block(64));
    net.add(make_voxres_block(64));

    net.add(make_conv3d(conv_spec(64, 128, 3, 2, 1)));
    extent = strided(extent);
    net.add(make_voxres_block(128));
    net.add(make_voxres_block(128));

    net.add(make_batchnorm(128));
    net.add(make_relu());

    // Pool the remaining extent down to 2^3 (7^3/stride-7 at cube 110).
    int64_t w = extent >= 2 ? extent / 2 : 1;
    net.add(make_maxpool3d({w, w, w}, {w, w, w}));
    int64_t pooled = (extent - w) / w + 1;

    net.add(make_flatten());
    net.add(make_dense(128 * pooled * pooled * pooled, 128));
    net.add(make_relu());
    net.add(make_dense(128, num_classes));
    net.add(make_softmax_output());
    net.finalize();
    net.init_params(seed);
    net.set_builder_tag(make_tag("voxresnet", num_classes, 0.0f, cube));
    return net;
}

Network build_model(Arch arch, int num_classes, float dropout_p, int cube, uint64_t seed) {
    return arch == Arch::voxcnn ? build_voxcnn(num_classes, dropout_p, cube, seed)
                                : build_voxresnet(num_classes, cube, seed);
}

ArchitectureTable describe(const Network& net) {
    ArchitectureTable table;
    const std::string& tag = net.builder_tag();
    table.name = tag.substr(0, tag.find(';'));
    table.cube = net.input_shape().size() == 4 ? net.input_shape()[1] : 0;
    table.total_params = 0;

    std::vector<int64_t> shape{1};
    for (int64_t e : net.input_shape()) shape.push_back(e);
    for (const auto& layer : net.layers()) {
        shape = layer->output_shape(shape);
        ArchitectureRow row;
        row.kind = layer->kind();
        row.spec = layer->spec_string();
        row.output_shape = shape;
        row.param_count = 0;
        for (const ParamSlot& s : const_cast<Layer&>(*layer).params())
            if (s.trainable) row.param_count += s.value->numel();
        table.total_params += row.param_count;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string ArchitectureTable::to_text() const {
    std::ostringstream os;
    os << name << " (input cube " << cube << ")\n";
    for (size_t i = 0; i < rows.size(); ++i)
        os << i << "\t" << rows[i].spec << "\t-> " << shape_to_string(rows[i].output_shape)
           << "\tparams " << rows[i].param_count << '\n';
    os << "total trainable parameters: " << total_params << '\n';
    return os.str();
}

std::string ArchitectureTable::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["cube"] = cube;
    j["total_params"] = total_params;
    j["layers"] = nlohmann::json::array();
    for (const auto& r : rows)
        j["layers"].push_back({{"kind", r.kind},
                               {"spec", r.spec},
                               {"output_shape", r.output_shape},
                               {"params", r.param_count}});
    return j.dump(2);
}

Network load_model(const std::filesystem::path& path) {
    const std::string tag = Network::read_builder_tag(path);
    std::string name;
    int num_classes = 2, cube = 110;
    float dropout_p = 0.0f;
    std::istringstream is(tag);
    std::string field;
    while (std::getline(is, field, ';')) {
        auto eq = field.find('=');
        if (eq == std::string::npos) {
            name = field;
        } else {
            const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
            if (key == "classes") num_classes = std::stoi(val);
            else if (key == "cube") cube = std::stoi(val);
            else if (key == "dropout") dropout_p = std::stof(val);
            else throw IoError("unknown builder tag field '" + key + "' in " + path.string());
        }
    }
    Network skeleton = build_model(arch_from_string(name), num_classes, dropout_p, cube, 0);
    return Network::load_with(path, std::move(skeleton));
}

}  // namespace vox3d
