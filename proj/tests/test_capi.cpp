#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "fusionpaint/fusionpaint.h"

namespace fs = std::filesystem;

namespace {

std::string scratch(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("fusionpaint_capi_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const char* kBenchJson = R"({
  "seed": 5, "num_scenes": 3, "train_frac": 0.67,
  "extent": 7.0, "min_boxes": 1, "max_boxes": 2,
  "ground_density": 0.4, "box_surface_density": 4.0,
  "bleed_radius": 3, "confusion_prob": 0.2,
  "camera": {"fx": 160, "fy": 160, "cx": 160, "cy": 120, "width": 320, "height": 240}
})";

const char* kTrainJson = R"({
  "epochs": 2, "batch_scenes": 2, "max_lr": 0.001, "seed": 4,
  "modality": "fused-attention",
  "voxel": {"size": [0.5, 0.5, 8.0], "max_points": 6, "seed": 17}
})";

}  // namespace

TEST_CASE("missing config file returns the config error code") {
    const auto dir = scratch("missing");
    CHECK(fp_synth((dir + "/nope.json").c_str(), (dir + "/out").c_str(), -1) == FP_ERROR_CONFIG);
    CHECK(std::string(fp_last_error()).find("nope.json") != std::string::npos);
}

TEST_CASE("null arguments are config errors, not crashes") {
    CHECK(fp_synth(nullptr, "x", -1) == FP_ERROR_CONFIG);
    CHECK(fp_paint("x", nullptr) == FP_ERROR_CONFIG);
    CHECK(fp_model_save(nullptr, "x") == FP_ERROR_CONFIG);
}

TEST_CASE("full pipeline through the C ABI") {
    const auto dir = scratch("pipeline");
    const std::string bench = dir + "/bench.json";
    const std::string train_cfg = dir + "/train.json";
    write_file(bench, kBenchJson);
    write_file(train_cfg, kTrainJson);

    REQUIRE(fp_synth(bench.c_str(), (dir + "/data").c_str(), -1) == FP_OK);
    CHECK(fs::exists(dir + "/data/manifest.json"));
    CHECK(fs::exists(dir + "/data/scenes/0002/p3d.fpsc"));

    SUBCASE("painting is idempotent") {
        const std::string scene = dir + "/data/scenes/0000";
        const auto before2d = slurp(scene + "/p2d.fpsc");
        const auto before3d = slurp(scene + "/p3d.fpsc");
        REQUIRE(fp_paint(scene.c_str(), "both") == FP_OK);
        CHECK(slurp(scene + "/p2d.fpsc") == before2d);
        CHECK(slurp(scene + "/p3d.fpsc") == before3d);
        CHECK(fp_paint(scene.c_str(), "sideways") == FP_ERROR_CONFIG);
    }

    SUBCASE("scene handles expose counts") {
        fp_scene* scene = nullptr;
        REQUIRE(fp_scene_open((dir + "/data/scenes/0000").c_str(), &scene) == FP_OK);
        uint32_t points = 0, boxes = 0, classes = 0;
        CHECK(fp_scene_stats(scene, &points, &boxes, &classes) == FP_OK);
        CHECK(points > 50);
        CHECK(boxes >= 1);
        CHECK(classes == 11);

        fp_model* model = nullptr;
        REQUIRE(fp_model_init(11, 42, &model) == FP_OK);
        float sigma[4096];
        uint32_t count = 0;
        CHECK(fp_scene_attention(scene, model, nullptr, sigma, 4096, &count) == FP_OK);
        CHECK(count > 0);
        for (uint32_t i = 0; i < std::min(count, 4096u); ++i) {
            CHECK(sigma[i] > 0.0f);
            CHECK(sigma[i] < 1.0f);
        }

        // A model with the wrong class count is a shape error.
        fp_model* wrong = nullptr;
        REQUIRE(fp_model_init(5, 1, &wrong) == FP_OK);
        CHECK(fp_scene_attention(scene, wrong, nullptr, sigma, 4096, &count) == FP_ERROR_SHAPE);
        fp_model_close(wrong);
        fp_model_close(model);
        fp_scene_close(scene);
    }

    SUBCASE("train, fuse, eval and export") {
        REQUIRE(fp_train((dir + "/data").c_str(), train_cfg.c_str(), nullptr, -1,
                         (dir + "/run").c_str()) == FP_OK);
        const std::string ckpt = dir + "/run/ckpt_fused-attention.fpnn";
        REQUIRE(fs::exists(ckpt));
        REQUIRE(fs::exists(dir + "/run/metrics.csv"));

        const std::string voxel_cfg = dir + "/voxel.json";
        write_file(voxel_cfg, R"({"size": [0.5, 0.5, 8.0], "max_points": 6, "seed": 17})");
        CHECK(fp_fuse((dir + "/data/scenes/0000").c_str(), ckpt.c_str(), voxel_cfg.c_str(),
                      (dir + "/fused.fpvx").c_str()) == FP_OK);
        CHECK(fs::exists(dir + "/fused.fpvx"));

        const std::string eval_cfg = dir + "/eval.json";
        write_file(eval_cfg, std::string(R"({
          "split": "val",
          "voxel": {"size": [0.5, 0.5, 8.0], "max_points": 6, "seed": 17},
          "cluster": {"min_pts": 4, "radius": 0.9},
          "thresholds": [0.5, 1, 2, 4],
          "checkpoints": {"fused-attention": ")") + ckpt + R"("}})");
        REQUIRE(fp_eval((dir + "/data").c_str(), eval_cfg.c_str(),
                        (dir + "/report.json").c_str()) == FP_OK);
        const auto report = slurp(dir + "/report.json");
        CHECK(report.find("macro_f1") != std::string::npos);
        CHECK(report.find("\"map\"") != std::string::npos);

        REQUIRE(fp_export((dir + "/data").c_str(), ckpt.c_str(), "val", voxel_cfg.c_str(),
                          (dir + "/painted").c_str()) == FP_OK);
        CHECK(fs::exists(dir + "/painted/painted_0000.fppt"));

        // Checkpoint with mismatched class count: shape error code.
        fp_model* wrong = nullptr;
        REQUIRE(fp_model_init(4, 2, &wrong) == FP_OK);
        REQUIRE(fp_model_save(wrong, (dir + "/wrong.fpnn").c_str()) == FP_OK);
        fp_model_close(wrong);
        CHECK(fp_export((dir + "/data").c_str(), (dir + "/wrong.fpnn").c_str(), "val",
                        voxel_cfg.c_str(), (dir + "/painted2").c_str()) == FP_ERROR_SHAPE);
    }

    SUBCASE("eval on an untrained random checkpoint still produces a report") {
        fp_model* fresh = nullptr;
        REQUIRE(fp_model_init(11, 99, &fresh) == FP_OK);
        REQUIRE(fp_model_save(fresh, (dir + "/fresh.fpnn").c_str()) == FP_OK);
        fp_model_close(fresh);
        const std::string eval_cfg = dir + "/eval_fresh.json";
        write_file(eval_cfg, std::string(R"({
          "split": "val",
          "voxel": {"size": [0.5, 0.5, 8.0], "max_points": 6, "seed": 17},
          "cluster": {"min_pts": 4, "radius": 0.9},
          "checkpoints": {"fused-attention": ")") + dir + R"(/fresh.fpnn"}})");
        REQUIRE(fp_eval((dir + "/data").c_str(), eval_cfg.c_str(),
                        (dir + "/report_fresh.json").c_str()) == FP_OK);
        const auto report = slurp(dir + "/report_fresh.json");
        CHECK(report.find("macro_f1") != std::string::npos);
        // An untrained head scores near chance; anything near-perfect would
        // mean the report is not reading the checkpoint it was given.
        CHECK(report.find("\"accuracy\": 0.9") == std::string::npos);
    }

    SUBCASE("corrupt score file is a data error") {
        const std::string scene = dir + "/data/scenes/0001";
        write_file(scene + "/p2d.fpsc", "JUNKJUNKJUNKJUNK");
        fp_scene* handle = nullptr;
        CHECK(fp_scene_open(scene.c_str(), &handle) == FP_ERROR_DATA);
        CHECK(handle == nullptr);
        CHECK(std::string(fp_last_error()).find("p2d.fpsc") != std::string::npos);
    }
}

TEST_CASE("model round trip keeps dimensions") {
    const auto dir = scratch("model");
    fp_model* model = nullptr;
    REQUIRE(fp_model_init(11, 7, &model) == FP_OK);
    uint32_t m = 0, c1 = 0, c2 = 0;
    CHECK(fp_model_dims(model, &m, &c1, &c2) == FP_OK);
    CHECK(m == 11);
    CHECK(c1 == 64);
    CHECK(c2 == 128);
    REQUIRE(fp_model_save(model, (dir + "/m.fpnn").c_str()) == FP_OK);
    fp_model_close(model);

    fp_model* back = nullptr;
    REQUIRE(fp_model_open((dir + "/m.fpnn").c_str(), &back) == FP_OK);
    CHECK(fp_model_dims(back, &m, &c1, &c2) == FP_OK);
    CHECK(m == 11);
    fp_model_close(back);

    CHECK(fp_model_open((dir + "/missing.fpnn").c_str(), &back) == FP_ERROR_DATA);
}

TEST_CASE("version string is present") {
    CHECK(std::string(fp_version()).find('.') != std::string::npos);
}
