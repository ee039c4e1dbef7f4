#include "fp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"

namespace fp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

json parse_config(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(what + ": " + e.what());
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) {
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config field '") + key + "': " + e.what());
        }
    }
}

VoxelConfig voxel_from(const json& j) {
    VoxelConfig cfg;
    if (j.is_null()) return cfg;
    std::vector<double> v;
    auto triple = [&](const char* key, std::array<double, 3>& out) {
        if (!j.contains(key)) return;
        v = j.at(key).get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError(std::string("voxel '") + key + "' needs 3 numbers");
        std::copy(v.begin(), v.end(), out.begin());
    };
    triple("size", cfg.size);
    triple("min", cfg.range_min);
    triple("max", cfg.range_max);
    maybe(j, "max_points", cfg.max_points);
    maybe(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

}  // namespace

DatasetSpec dataset_spec_from_json(const std::string& json_text) {
    const json j = parse_config(json_text, "synth config");
    DatasetSpec spec;
    spec.scene.classes = default_classes();
    maybe(j, "num_scenes", spec.num_scenes);
    maybe(j, "train_frac", spec.train_frac);
    auto& s = spec.scene;
    maybe(j, "seed", s.seed);
    maybe(j, "min_boxes", s.min_boxes);
    maybe(j, "max_boxes", s.max_boxes);
    maybe(j, "ground_density", s.ground_density);
    maybe(j, "box_surface_density", s.box_surface_density);
    maybe(j, "extent", s.extent);
    maybe(j, "size_jitter", s.size_jitter);
    maybe(j, "ground_sigma_z", s.ground_sigma_z);
    maybe(j, "bleed_radius", s.bleed_radius);
    maybe(j, "confusion_prob", s.confusion_prob);
    if (j.contains("sensor_origin")) {
        const auto v = j.at("sensor_origin").get<std::vector<double>>();
        if (v.size() != 3) throw ConfigError("synth config: sensor_origin needs 3 numbers");
        std::copy(v.begin(), v.end(), s.sensor_origin.begin());
    }
    if (j.contains("camera")) {
        const auto& c = j.at("camera");
        maybe(c, "fx", s.cam_fx);
        maybe(c, "fy", s.cam_fy);
        maybe(c, "cx", s.cam_cx);
        maybe(c, "cy", s.cam_cy);
        maybe(c, "width", s.cam_width);
        maybe(c, "height", s.cam_height);
        maybe(c, "pitch", s.cam_pitch);
    }
    if (j.contains("classes")) {
        s.classes.clear();
        for (const auto& e : j.at("classes")) {
            ClassSpec cs;
            cs.name = e.at("name").get<std::string>();
            const auto sz = e.at("size").get<std::vector<double>>();
            if (sz.size() != 3) throw ConfigError("synth config: class size needs 3 numbers");
            cs.length = sz[0];
            cs.width = sz[1];
            cs.height = sz[2];
            s.classes.push_back(cs);
        }
    }
    if (!(spec.train_frac >= 0.0 && spec.train_frac <= 1.0)) {
        throw ConfigError("synth config: train_frac must lie in [0, 1]");
    }
    s.validate();
    return spec;
}

TrainConfig train_config_from_json(const std::string& json_text) {
    const json j = parse_config(json_text, "train config");
    TrainConfig cfg;
    maybe(j, "epochs", cfg.epochs);
    maybe(j, "batch_scenes", cfg.batch_scenes);
    maybe(j, "max_lr", cfg.max_lr);
    maybe(j, "warmup_frac", cfg.warmup_frac);
    maybe(j, "weight_decay", cfg.weight_decay);
    maybe(j, "gate_freeze_frac", cfg.gate_freeze_frac);
    maybe(j, "seed", cfg.seed);
    if (j.contains("modality")) {
        cfg.modality = modality_from_string(j.at("modality").get<std::string>());
    }
    if (j.contains("voxel")) cfg.voxel = voxel_from(j.at("voxel"));
    cfg.validate();
    return cfg;
}

EvalConfig eval_config_from_json(const std::string& json_text) {
    const json j = parse_config(json_text, "eval config");
    EvalConfig cfg;
    maybe(j, "split", cfg.split);
    if (j.contains("voxel")) cfg.voxel = voxel_from(j.at("voxel"));
    if (j.contains("cluster")) {
        maybe(j.at("cluster"), "min_pts", cfg.cluster_min_pts);
        maybe(j.at("cluster"), "radius", cfg.cluster_radius);
    }
    if (j.contains("thresholds")) {
        cfg.ap.thresholds = j.at("thresholds").get<std::vector<double>>();
    }
    cfg.ap.validate();
    if (!j.contains("checkpoints") || !j.at("checkpoints").is_object() ||
        j.at("checkpoints").empty()) {
        throw ConfigError("eval config: 'checkpoints' must map modality names to paths");
    }
    for (const auto& [arm, path] : j.at("checkpoints").items()) {
        modality_from_string(arm);  // validates the arm name
        cfg.checkpoints[arm] = path.get<std::string>();
    }
    return cfg;
}

void cmd_synth(const std::string& config_path, const std::string& out_dir, int64_t seed_override) {
    DatasetSpec spec = dataset_spec_from_json(read_config_file(config_path));
    if (seed_override >= 0) spec.scene.seed = uint64_t(seed_override);
    build_dataset(make_scene_specs(spec), spec.train_frac, out_dir);
}

void cmd_paint(const std::string& scene_dir, const std::string& mode) {
    if (mode != "2d" && mode != "3d" && mode != "both") {
        throw ConfigError("paint: mode must be 2d, 3d or both");
    }
    const auto p = [&](const char* name) { return (fs::path(scene_dir) / name).string(); };
    const json meta = parse_config(io::read_text_file(p("scene.json")), "scene.json");
    const auto m = meta.at("m").get<uint32_t>();
    const auto points = load_point_cloud(p("points.bin"));
    if (mode == "2d" || mode == "both") {
        const auto calib = load_calib(p("calib.json"));
        const auto mask = load_mask(p("mask_corrupt.pgm"), int(m));
        save_scores(paint_2d(points, mask, calib), p("p2d.fpsc"));
    }
    if (mode == "3d" || mode == "both") {
        const auto boxes = load_boxes(p("boxes.json"));
        const auto clean = paint_3d(points, boxes, m);
        const CorruptionSpec corruption{meta.at("confusion_prob").get<double>()};
        const uint64_t seed = Rng(meta.at("seed").get<uint64_t>()).fork(0x3D).next_u64();
        save_scores(corrupt_scores(clean, corruption, seed), p("p3d.fpsc"));
    }
}

void cmd_fuse(const std::string& scene_dir, const std::string& checkpoint_path,
              const std::string& voxel_config_path, const std::string& out_path) {
    const auto params = FusionParams::load(checkpoint_path);
    VoxelConfig voxel;
    if (!voxel_config_path.empty()) {
        voxel = voxel_from(parse_config(read_config_file(voxel_config_path), "voxel config"));
    }
    const auto p = [&](const char* name) { return (fs::path(scene_dir) / name).string(); };
    const auto points = load_point_cloud(p("points.bin"));
    const auto p2d = load_scores(p("p2d.fpsc"));
    const auto p3d = load_scores(p("p3d.fpsc"));
    if (p2d.m != params.dims.m) {
        throw ShapeError("fuse: checkpoint class count does not match the scene scores");
    }
    VoxelBatch batch = voxelize(points, p2d, p3d, voxel);
    const auto stages = fusion_forward(params, batch, Modality::FusedAttention);
    VoxelBatch fused = batch;
    for (Eigen::Index r = 0; r < stages.fused.fused.rows(); ++r) {
        for (Eigen::Index c = 0; c < stages.fused.fused.cols(); ++c) {
            fused.features[size_t(r) * fused.channels + size_t(c)] = stages.fused.fused(r, c);
        }
    }
    save_voxels(fused, out_path);
}

void cmd_train(const std::string& dataset_dir, const std::string& config_path,
               const std::string& modality_override, int64_t seed_override,
               const std::string& out_dir) {
    TrainConfig cfg = train_config_from_json(read_config_file(config_path));
    if (!modality_override.empty()) cfg.modality = modality_from_string(modality_override);
    if (seed_override >= 0) cfg.seed = uint64_t(seed_override);

    const Dataset dataset = Dataset::load(dataset_dir);
    const TrainResult result = train(cfg, dataset);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());
    const std::string tag = modality_to_string(cfg.modality);
    result.params.save((fs::path(out_dir) / ("ckpt_" + tag + ".fpnn")).string());
    io::write_text_file((fs::path(out_dir) / "metrics.csv").string(), metrics_csv(result.log));
}

// Builds the per-point fused feature rows for every in-range point of a
// scene and classifies them with the head.
PerPointProbs per_point_probs(const FusionParams& params, const LoadedScene& scene,
                              const VoxelConfig& voxel_cfg, const VoxelBatch& batch,
                              const Eigen::VectorXf& sigma, Modality modality) {
    std::unordered_map<int64_t, uint32_t> voxel_of;
    voxel_of.reserve(batch.e);
    auto key = [](const std::array<int32_t, 3>& c) {
        return (int64_t(c[0]) << 42) ^ (int64_t(c[1]) << 21) ^ int64_t(c[2]);
    };
    for (uint32_t v = 0; v < batch.e; ++v) voxel_of[key(batch.coords[v])] = v;

    const uint32_t m = params.dims.m;
    PerPointProbs out;
    for (uint32_t i = 0; i < scene.points.size(); ++i) {
        const auto& p = scene.points.xyz[i];
        if (voxel_index(p[0], p[1], p[2], voxel_cfg)) out.point_ids.push_back(i);
    }
    FusedBatch fused;
    fused.fused.resize(Eigen::Index(out.point_ids.size()), 3 + 2 * m);
    for (size_t r = 0; r < out.point_ids.size(); ++r) {
        const uint32_t i = out.point_ids[r];
        const auto& p = scene.points.xyz[i];
        const auto idx = voxel_index(p[0], p[1], p[2], voxel_cfg);
        const auto it = voxel_of.find(key(*idx));
        if (it == voxel_of.end()) throw InternalError("eval: in-range point has no voxel");
        const float s = sigma[it->second];
        fused.fused(Eigen::Index(r), 0) = p[0];
        fused.fused(Eigen::Index(r), 1) = p[1];
        fused.fused(Eigen::Index(r), 2) = p[2];
        const float* r2d = scene.p2d.row(i);
        const float* r3d = scene.p3d.row(i);
        const float w2d = (modality == Modality::ThreeDOnly) ? 0.0f : s;
        const float w3d = (modality == Modality::TwoDOnly) ? 0.0f : (1.0f - s);
        for (uint32_t c = 0; c < m; ++c) {
            fused.fused(Eigen::Index(r), 3 + Eigen::Index(c)) = w2d * r2d[c];
            fused.fused(Eigen::Index(r), 3 + Eigen::Index(m + c)) = w3d * r3d[c];
        }
    }
    const nn::MatF logits = classify_points(fused, params);
    out.probs.resize(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const float mx = logits.row(r).maxCoeff();
        float sum = 0.0f;
        for (Eigen::Index c = 0; c < logits.cols(); ++c) {
            out.probs(r, c) = std::exp(logits(r, c) - mx);
            sum += out.probs(r, c);
        }
        out.probs.row(r) /= sum;
    }
    return out;
}

namespace {

Eigen::VectorXf sigma_for_scene(const FusionParams& params, const VoxelBatch& batch,
                                Modality modality) {
    switch (modality) {
        case Modality::TwoDOnly: return Eigen::VectorXf::Constant(batch.e, 1.0f);
        case Modality::ThreeDOnly: return Eigen::VectorXf::Constant(batch.e, 0.0f);
        case Modality::FusedFixedHalf: return Eigen::VectorXf::Constant(batch.e, 0.5f);
        case Modality::FusedAttention: break;
    }
    return fusion_forward(params, batch, Modality::FusedAttention).attention;
}

}  // namespace

MeanApResult detection_metrics(const FusionParams& params, const Dataset& dataset,
                               const std::vector<size_t>& scene_indices, Modality modality,
                               const EvalConfig& cfg) {
    std::vector<Detection> dets;
    std::vector<GroundTruthBox> gts;
    double offset = 0.0;
    constexpr double kSceneSpacing = 10000.0;  // keeps scenes unmatchable
    for (size_t idx : scene_indices) {
        const LoadedScene& scene = dataset.scenes[idx];
        const VoxelBatch batch = voxelize(scene.points, scene.p2d, scene.p3d, cfg.voxel);
        if (batch.e == 0) {
            offset += kSceneSpacing;
            continue;
        }
        const Eigen::VectorXf sigma = sigma_for_scene(params, batch, modality);
        const PerPointProbs probs =
            per_point_probs(params, scene, cfg.voxel, batch, sigma, modality);
        PointCloud sub;
        sub.xyz.reserve(probs.point_ids.size());
        for (uint32_t id : probs.point_ids) sub.xyz.push_back(scene.points.xyz[id]);
        for (auto det :
             cluster_detections(sub, probs.probs, cfg.cluster_min_pts, cfg.cluster_radius)) {
            det.x += offset;
            dets.push_back(det);
        }
        for (const auto& box : scene.boxes) {
            gts.push_back({box.center[0] + offset, box.center[1], box.class_id});
        }
        offset += kSceneSpacing;
    }
    return mean_ap(dets, gts, cfg.ap);
}

void cmd_eval(const std::string& dataset_dir, const std::string& config_path,
              const std::string& out_path) {
    const EvalConfig cfg = eval_config_from_json(read_config_file(config_path));
    const Dataset dataset = Dataset::load(dataset_dir);
    const auto& indices = dataset.split(cfg.split);
    if (indices.empty()) throw ConfigError("eval: split '" + cfg.split + "' is empty");

    json report;
    report["split"] = cfg.split;
    report["arms"] = json::object();
    for (const auto& [arm, ckpt_path] : cfg.checkpoints) {
        const Modality modality = modality_from_string(arm);
        const FusionParams params = FusionParams::load(ckpt_path);
        if (params.dims.m != dataset.m) {
            throw ShapeError("eval: checkpoint " + ckpt_path + " class count does not match dataset");
        }
        const EvalResult r = evaluate(params, dataset, indices, modality, cfg.voxel);
        json arm_json;
        arm_json["loss"] = r.loss;
        arm_json["accuracy"] = r.accuracy;
        arm_json["macro_f1"] = r.macro_f1;
        arm_json["mean_sigma_clean"] = r.clean_voxels ? json(r.mean_sigma_clean) : json();
        arm_json["mean_sigma_bleed"] = r.bleed_voxels ? json(r.mean_sigma_bleed) : json();
        json per_class = json::object();
        for (size_t c = 0; c < r.per_class.size(); ++c) {
            if (!r.per_class[c].present) continue;
            per_class[std::to_string(c)] = {{"precision", r.per_class[c].precision},
                                            {"recall", r.per_class[c].recall},
                                            {"f1", r.per_class[c].f1},
                                            {"support", r.per_class[c].support}};
        }
        arm_json["per_class"] = per_class;

        const MeanApResult ap = detection_metrics(params, dataset, indices, modality, cfg);
        json ap_json;
        if (ap.has_gt) {
            json apc = json::object(), apt = json::object();
            for (const auto& [cls, v] : ap.per_class) apc[std::to_string(cls)] = v;
            for (const auto& [thr, v] : ap.per_threshold) {
                char key[32];
                std::snprintf(key, sizeof(key), "%g", thr);
                apt[key] = v;
            }
            ap_json = {{"per_class", apc}, {"per_threshold", apt}, {"map", ap.map}};
        } else {
            ap_json = {{"per_class", json::object()},
                       {"per_threshold", json::object()},
                       {"map", nullptr},
                       {"note", "no ground truth"}};
        }
        arm_json["ap"] = ap_json;
        report["arms"][arm] = arm_json;
    }
    io::write_text_file(out_path, report.dump(2) + "\n");
}

void cmd_export(const std::string& dataset_dir, const std::string& checkpoint_path,
                const std::string& split, const std::string& voxel_config_path,
                const std::string& out_dir) {
    const FusionParams params = FusionParams::load(checkpoint_path);
    VoxelConfig voxel;
    if (!voxel_config_path.empty()) {
        voxel = voxel_from(parse_config(read_config_file(voxel_config_path), "voxel config"));
    }
    const Dataset dataset = Dataset::load(dataset_dir);
    if (params.dims.m != dataset.m) {
        throw ShapeError("export: checkpoint class count does not match the dataset");
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("cannot create output directory " + out_dir + ": " + ec.message());
    size_t ordinal = 0;
    for (size_t idx : dataset.split(split)) {
        const LoadedScene& scene = dataset.scenes[idx];
        const VoxelBatch batch = voxelize(scene.points, scene.p2d, scene.p3d, voxel);
        const Eigen::VectorXf sigma = sigma_for_scene(params, batch, Modality::FusedAttention);
        char name[32];
        std::snprintf(name, sizeof(name), "painted_%04zu.fppt", ordinal++);
        export_painted_cloud(scene.points, scene.p2d, scene.p3d, batch, sigma, voxel,
                             (fs::path(out_dir) / name).string());
    }
}

}  // namespace fp::pipeline
