#include "fp/dataset.hpp"

#include <filesystem>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"

namespace fp {

namespace fs = std::filesystem;

void save_labels(const std::vector<uint8_t>& labels, uint32_t m, const std::string& path) {
    io::Writer out(path);
    out.bytes("FPLB", 4);
    out.u32(static_cast<uint32_t>(labels.size()));
    out.u32(m);
    out.bytes(labels.data(), labels.size());
    out.close();
}

std::vector<uint8_t> load_labels(const std::string& path, uint32_t* m_out) {
    io::Reader in(path);
    in.expect_magic("FPLB");
    const uint32_t n = in.u32();
    const uint32_t m = in.u32();
    if (m_out) *m_out = m;
    std::vector<uint8_t> labels(n);
    in.bytes(labels.data(), n);
    return labels;
}

// The 3D corruption seed is derived from the scene seed so a repaint of the
// directory reproduces p3d.fpsc byte for byte.
static uint64_t confusion_seed(uint64_t scene_seed) {
    return Rng(scene_seed).fork(0x3D).next_u64();
}

void write_scene_dir(const Scene& scene, const SceneSpec& spec, const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create scene directory " + dir + ": " + ec.message());
    const auto p = [&](const char* name) { return (fs::path(dir) / name).string(); };

    save_point_cloud(scene.points, p("points.bin"));
    save_labels(scene.true_labels, spec.class_count(), p("labels.bin"));
    save_boxes(scene.boxes, p("boxes.json"));
    save_calib(scene.calib, p("calib.json"));
    save_mask(scene.mask_clean, p("mask_clean.pgm"));
    save_mask(scene.mask_corrupt, p("mask_corrupt.pgm"));

    const auto p2d = paint_2d(scene.points, scene.mask_corrupt, scene.calib);
    save_scores(p2d, p("p2d.fpsc"));
    const auto clean3d = paint_3d(scene.points, scene.boxes, spec.class_count());
    const auto p3d = corrupt_scores(clean3d, CorruptionSpec{spec.confusion_prob},
                                    confusion_seed(spec.seed));
    save_scores(p3d, p("p3d.fpsc"));

    nlohmann::json meta;
    meta["seed"] = spec.seed;
    meta["m"] = spec.class_count();
    meta["confusion_prob"] = spec.confusion_prob;
    io::write_text_file(p("scene.json"), meta.dump(2) + "\n");
}

Dataset Dataset::load(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(io::read_text_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest_path + ": " + e.what());
    }
    Dataset ds;
    try {
        ds.m = manifest.at("m").get<uint32_t>();
        for (const auto& entry : manifest.at("scenes")) {
            LoadedScene scene;
            scene.dir = (fs::path(dir) / entry.at("dir").get<std::string>()).string();
            scene.seed = entry.at("seed").get<uint64_t>();
            scene.train = entry.at("split").get<std::string>() == "train";
            ds.scenes.push_back(std::move(scene));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest " + manifest_path + ": " + e.what());
    }
    for (size_t i = 0; i < ds.scenes.size(); ++i) {
        auto& scene = ds.scenes[i];
        const auto p = [&](const char* name) { return (fs::path(scene.dir) / name).string(); };
        scene.points = load_point_cloud(p("points.bin"));
        uint32_t label_m = 0;
        scene.labels = load_labels(p("labels.bin"), &label_m);
        if (label_m != ds.m) throw DataError("scene " + scene.dir + ": label class count differs from manifest");
        scene.boxes = load_boxes(p("boxes.json"));
        scene.calib = load_calib(p("calib.json"));
        scene.p2d = load_scores(p("p2d.fpsc"));
        scene.p3d = load_scores(p("p3d.fpsc"));
        if (scene.p2d.n != scene.points.size() || scene.p3d.n != scene.points.size() ||
            scene.p2d.m != ds.m || scene.p3d.m != ds.m) {
            throw DataError("scene " + scene.dir + ": painted score shapes do not match the scene");
        }
        (scene.train ? ds.train_indices : ds.val_indices).push_back(i);
    }
    return ds;
}

const std::vector<size_t>& Dataset::split(const std::string& name) const {
    if (name == "train") return train_indices;
    if (name == "val") return val_indices;
    throw ConfigError("unknown split '" + name + "' (expected train or val)");
}

}  // namespace fp
