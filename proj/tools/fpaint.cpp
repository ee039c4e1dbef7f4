// fpaint: command-line front end over the fusionpaint C API.
//
// Exit codes: 0 ok, 2 config error, 3 generation error, 4 data error,
// 5 shape mismatch.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fusionpaint/fusionpaint.h"

namespace {

int finish(fp_status status) {
    if (status != FP_OK) std::fprintf(stderr, "fpaint: %s\n", fp_last_error());
    return static_cast<int>(status);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiDAR point painting with adaptively fused 2D/3D semantic labels"};
    app.require_subcommand(1);

    std::string config, out, scene_dir, mode = "both", dataset, checkpoint, modality, split = "val";
    std::string voxel_config, report;
    int64_t seed = -1;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
    synth->add_option("--config", config, "SceneSpec JSON")->required();
    synth->add_option("--out", out, "Output dataset directory")->required();
    synth->add_option("--seed", seed, "Override the config seed");

    auto* paint = app.add_subcommand("paint", "Re-paint score files inside a scene directory");
    paint->add_option("--scene", scene_dir, "Scene directory")->required();
    paint->add_option("--mode", mode, "2d, 3d or both")->capture_default_str();

    auto* fuse = app.add_subcommand("fuse", "Write attention-gated voxels for one scene");
    fuse->add_option("--scene", scene_dir, "Scene directory")->required();
    fuse->add_option("--checkpoint", checkpoint, "FusionParams checkpoint")->required();
    fuse->add_option("--voxel-config", voxel_config, "Voxel grid JSON (defaults apply)");
    fuse->add_option("--out", out, "Output FPVX path")->required();

    auto* train = app.add_subcommand("train", "Train one modality arm");
    train->add_option("--dataset", dataset, "Dataset directory")->required();
    train->add_option("--config", config, "TrainConfig JSON")->required();
    train->add_option("--modality", modality,
                      "2d-only, 3d-only, fused-fixed-half or fused-attention");
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--out", out, "Output directory")->required();

    auto* eval = app.add_subcommand("eval", "Evaluate checkpoints and write the report JSON");
    eval->add_option("--dataset", dataset, "Dataset directory")->required();
    eval->add_option("--config", config, "EvalConfig JSON")->required();
    eval->add_option("--out", report, "Report JSON path")->required();

    auto* exp = app.add_subcommand("export", "Write painted point clouds for a split");
    exp->add_option("--dataset", dataset, "Dataset directory")->required();
    exp->add_option("--checkpoint", checkpoint, "FusionParams checkpoint")->required();
    exp->add_option("--split", split, "train or val")->capture_default_str();
    exp->add_option("--voxel-config", voxel_config, "Voxel grid JSON (defaults apply)");
    exp->add_option("--out", out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : FP_ERROR_CONFIG;
    }

    if (synth->parsed()) return finish(fp_synth(config.c_str(), out.c_str(), seed));
    if (paint->parsed()) return finish(fp_paint(scene_dir.c_str(), mode.c_str()));
    if (fuse->parsed()) {
        return finish(fp_fuse(scene_dir.c_str(), checkpoint.c_str(),
                              voxel_config.empty() ? nullptr : voxel_config.c_str(), out.c_str()));
    }
    if (train->parsed()) {
        return finish(fp_train(dataset.c_str(), config.c_str(),
                               modality.empty() ? nullptr : modality.c_str(), seed, out.c_str()));
    }
    if (eval->parsed()) return finish(fp_eval(dataset.c_str(), config.c_str(), report.c_str()));
    if (exp->parsed()) {
        return finish(fp_export(dataset.c_str(), checkpoint.c_str(), split.c_str(),
                                voxel_config.empty() ? nullptr : voxel_config.c_str(),
                                out.c_str()));
    }
    return FP_ERROR_CONFIG;
}
