#include "fusionpaint/fusionpaint.h"

#include <filesystem>
#include <memory>
#include <string>

#include "fp/pipeline.hpp"

namespace {

thread_local std::string g_last_error;

fp_status fail(int code, const std::string& what) {
    g_last_error = what;
    return static_cast<fp_status>(code);
}

template <typename Fn>
fp_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return FP_OK;
    } catch (const fp::Error& e) {
        return fail(e.code(), e.what());
    } catch (const std::exception& e) {
        return fail(FP_ERROR_INTERNAL, e.what());
    }
}

fp_status require(const char* arg, const char* name) {
    if (arg != nullptr) return FP_OK;
    return fail(FP_ERROR_CONFIG, std::string(name) + " must not be NULL");
}

}  // namespace

struct fp_scene {
    fp::LoadedScene scene;
    uint32_t m = 0;
};

struct fp_model {
    fp::FusionParams params;
};

extern "C" {

const char* fp_version(void) { return "1.0.0"; }

const char* fp_last_error(void) { return g_last_error.c_str(); }

fp_status fp_synth(const char* config_path, const char* out_dir, int64_t seed_override) {
    if (require(config_path, "config_path") || require(out_dir, "out_dir")) return FP_ERROR_CONFIG;
    return guarded([&] { fp::pipeline::cmd_synth(config_path, out_dir, seed_override); });
}

fp_status fp_paint(const char* scene_dir, const char* mode) {
    if (require(scene_dir, "scene_dir") || require(mode, "mode")) return FP_ERROR_CONFIG;
    return guarded([&] { fp::pipeline::cmd_paint(scene_dir, mode); });
}

fp_status fp_fuse(const char* scene_dir, const char* checkpoint_path,
                  const char* voxel_config_path, const char* out_path) {
    if (require(scene_dir, "scene_dir") || require(checkpoint_path, "checkpoint_path") ||
        require(out_path, "out_path")) {
        return FP_ERROR_CONFIG;
    }
    return guarded([&] {
        fp::pipeline::cmd_fuse(scene_dir, checkpoint_path,
                               voxel_config_path ? voxel_config_path : "", out_path);
    });
}

fp_status fp_train(const char* dataset_dir, const char* config_path,
                   const char* modality_override, int64_t seed_override, const char* out_dir) {
    if (require(dataset_dir, "dataset_dir") || require(config_path, "config_path") ||
        require(out_dir, "out_dir")) {
        return FP_ERROR_CONFIG;
    }
    return guarded([&] {
        fp::pipeline::cmd_train(dataset_dir, config_path,
                                modality_override ? modality_override : "", seed_override,
                                out_dir);
    });
}

fp_status fp_eval(const char* dataset_dir, const char* config_path, const char* report_path) {
    if (require(dataset_dir, "dataset_dir") || require(config_path, "config_path") ||
        require(report_path, "report_path")) {
        return FP_ERROR_CONFIG;
    }
    return guarded([&] { fp::pipeline::cmd_eval(dataset_dir, config_path, report_path); });
}

fp_status fp_export(const char* dataset_dir, const char* checkpoint_path, const char* split,
                    const char* voxel_config_path, const char* out_dir) {
    if (require(dataset_dir, "dataset_dir") || require(checkpoint_path, "checkpoint_path") ||
        require(split, "split") || require(out_dir, "out_dir")) {
        return FP_ERROR_CONFIG;
    }
    return guarded([&] {
        fp::pipeline::cmd_export(dataset_dir, checkpoint_path, split,
                                 voxel_config_path ? voxel_config_path : "", out_dir);
    });
}

fp_status fp_scene_open(const char* scene_dir, fp_scene** out) {
    if (out == nullptr) return fail(FP_ERROR_CONFIG, "out must not be NULL");
    if (require(scene_dir, "scene_dir")) return FP_ERROR_CONFIG;
    *out = nullptr;
    return guarded([&] {
        namespace fs = std::filesystem;
        auto handle = std::make_unique<fp_scene>();
        auto& s = handle->scene;
        s.dir = scene_dir;
        const auto p = [&](const char* name) { return (fs::path(scene_dir) / name).string(); };
        s.points = fp::load_point_cloud(p("points.bin"));
        s.labels = fp::load_labels(p("labels.bin"), &handle->m);
        s.boxes = fp::load_boxes(p("boxes.json"));
        s.calib = fp::load_calib(p("calib.json"));
        s.p2d = fp::load_scores(p("p2d.fpsc"));
        s.p3d = fp::load_scores(p("p3d.fpsc"));
        if (s.p2d.n != s.points.size() || s.p3d.n != s.points.size() || s.p2d.m != handle->m) {
            throw fp::DataError("scene " + s.dir + ": painted score shapes do not match");
        }
        *out = handle.release();
    });
}

void fp_scene_close(fp_scene* scene) { delete scene; }

fp_status fp_scene_stats(const fp_scene* scene, uint32_t* points, uint32_t* boxes,
                         uint32_t* classes) {
    if (scene == nullptr) return fail(FP_ERROR_CONFIG, "scene must not be NULL");
    if (points) *points = static_cast<uint32_t>(scene->scene.points.size());
    if (boxes) *boxes = static_cast<uint32_t>(scene->scene.boxes.size());
    if (classes) *classes = scene->m;
    g_last_error.clear();
    return FP_OK;
}

fp_status fp_model_open(const char* checkpoint_path, fp_model** out) {
    if (out == nullptr) return fail(FP_ERROR_CONFIG, "out must not be NULL");
    if (require(checkpoint_path, "checkpoint_path")) return FP_ERROR_CONFIG;
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<fp_model>();
        handle->params = fp::FusionParams::load(checkpoint_path);
        *out = handle.release();
    });
}

fp_status fp_model_init(uint32_t classes, uint64_t seed, fp_model** out) {
    if (out == nullptr) return fail(FP_ERROR_CONFIG, "out must not be NULL");
    *out = nullptr;
    return guarded([&] {
        if (classes < 2) throw fp::ConfigError("model: need at least 2 classes");
        fp::FusionDims dims;
        dims.m = classes;
        auto handle = std::make_unique<fp_model>();
        handle->params = fp::FusionParams::init(dims, seed);
        *out = handle.release();
    });
}

void fp_model_close(fp_model* model) { delete model; }

fp_status fp_model_save(const fp_model* model, const char* path) {
    if (model == nullptr) return fail(FP_ERROR_CONFIG, "model must not be NULL");
    if (require(path, "path")) return FP_ERROR_CONFIG;
    return guarded([&] { model->params.save(path); });
}

fp_status fp_model_dims(const fp_model* model, uint32_t* classes, uint32_t* c1, uint32_t* c2) {
    if (model == nullptr) return fail(FP_ERROR_CONFIG, "model must not be NULL");
    if (classes) *classes = model->params.dims.m;
    if (c1) *c1 = model->params.dims.c1;
    if (c2) *c2 = model->params.dims.c2;
    g_last_error.clear();
    return FP_OK;
}

fp_status fp_scene_attention(const fp_scene* scene, const fp_model* model,
                             const char* voxel_config_path, float* out_sigma, uint32_t capacity,
                             uint32_t* count) {
    if (scene == nullptr || model == nullptr) {
        return fail(FP_ERROR_CONFIG, "scene and model must not be NULL");
    }
    return guarded([&] {
        fp::VoxelConfig voxel;
        if (voxel_config_path != nullptr) {
            voxel = fp::voxel_config_from_json(fp::pipeline::read_config_file(voxel_config_path));
        }
        if (model->params.dims.m != scene->m) {
            throw fp::ShapeError("attention: model class count does not match the scene");
        }
        const auto batch =
            fp::voxelize(scene->scene.points, scene->scene.p2d, scene->scene.p3d, voxel);
        const auto stages = fp::fusion_forward(model->params, batch, fp::Modality::FusedAttention);
        if (count) *count = batch.e;
        if (out_sigma != nullptr) {
            const uint32_t n = std::min(capacity, batch.e);
            for (uint32_t i = 0; i < n; ++i) out_sigma[i] = stages.attention[i];
        }
    });
}

}  // extern "C"
