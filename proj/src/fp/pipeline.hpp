#pragma once

#include <cstdint>
#include <string>

#include "fp/dataset.hpp"
#include "fp/evalmetrics.hpp"
#include "fp/trainer.hpp"

namespace fp::pipeline {

// All commands are deterministic under their seeds, never mutate inputs, and
// write outputs only under the given output locations. Seed overrides < 0
// mean "use the config value".

// Builds a synthetic dataset from a JSON config (see dataset_spec_from_json);
// writes scenes plus manifest.json under out_dir.
void cmd_synth(const std::string& config_path, const std::string& out_dir, int64_t seed_override);

// Re-paints score files inside one scene directory. mode: "2d", "3d", "both".
void cmd_paint(const std::string& scene_dir, const std::string& mode);

// Voxelizes one scene, runs the attention gate with the given checkpoint and
// writes the gated voxels as an FPVX file (features hold the fused layout).
void cmd_fuse(const std::string& scene_dir, const std::string& checkpoint_path,
              const std::string& voxel_config_path, const std::string& out_path);

// Trains one modality arm; writes <out_dir>/ckpt_<modality>.fpnn and
// <out_dir>/metrics.csv.
void cmd_train(const std::string& dataset_dir, const std::string& config_path,
               const std::string& modality_override, int64_t seed_override,
               const std::string& out_dir);

// Evaluates the checkpoints named in the config on one split; writes the
// report JSON (per-arm point metrics plus the AP block) to out_path.
void cmd_eval(const std::string& dataset_dir, const std::string& config_path,
              const std::string& out_path);

// Writes one painted point cloud (.fppt) per scene of the split.
void cmd_export(const std::string& dataset_dir, const std::string& checkpoint_path,
                const std::string& split, const std::string& voxel_config_path,
                const std::string& out_dir);

DatasetSpec dataset_spec_from_json(const std::string& json_text);
TrainConfig train_config_from_json(const std::string& json_text);

struct EvalConfig {
    std::string split = "val";
    VoxelConfig voxel;
    uint32_t cluster_min_pts = 5;
    double cluster_radius = 0.9;
    APConfig ap;
    std::map<std::string, std::string> checkpoints;  // modality name -> path
};
EvalConfig eval_config_from_json(const std::string& json_text);

// Per-point class probabilities for the in-range points of a scene: each
// point is painted with its voxel's sigma, then classified by the head.
// Returns the in-range point ids alongside the probability rows.
struct PerPointProbs {
    std::vector<uint32_t> point_ids;
    nn::MatF probs;  // rows parallel to point_ids
};
PerPointProbs per_point_probs(const FusionParams& params, const LoadedScene& scene,
                              const VoxelConfig& voxel_cfg, const VoxelBatch& batch,
                              const Eigen::VectorXf& sigma, Modality modality);

// Detection-metric evaluation of one arm over a split: clusters per-point
// predictions into detections scene by scene and pools them against the box
// ground truth (scenes are offset so cross-scene matches cannot happen).
MeanApResult detection_metrics(const FusionParams& params, const Dataset& dataset,
                               const std::vector<size_t>& scene_indices, Modality modality,
                               const EvalConfig& cfg);

std::string read_config_file(const std::string& path);

}  // namespace fp::pipeline
