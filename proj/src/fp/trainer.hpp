#pragma once

#include <string>
#include <vector>

#include "fp/dataset.hpp"
#include "fp/fusion.hpp"

namespace fp {

struct TrainConfig {
    int epochs = 30;
    int batch_scenes = 2;  // whole scenes per optimizer step
    double max_lr = 0.001;
    double warmup_frac = 0.1;  // linear warmup, then cosine decay
    double weight_decay = 0.01;
    // Fraction of steps with the attention parameters held at initialization
    // (sigma stays at 0.5). Freezing the gate until the classifier carries
    // signal keeps the optimizer from saturating the sigmoid on noise.
    double gate_freeze_frac = 0.3;
    uint64_t seed = 1;
    VoxelConfig voxel;
    Modality modality = Modality::FusedAttention;

    void validate() const;
};

// A scene turned into network inputs: the voxel batch, per-slot target labels,
// the non-pad loss mask, and a per-voxel flag marking voxels that contain
// bleed-corrupted background points (true label background, 2D label
// foreground).
struct SceneTensors {
    VoxelBatch batch;
    std::vector<int32_t> targets;
    std::vector<uint8_t> mask;
    std::vector<uint8_t> voxel_bleed;
};

SceneTensors prepare_scene(const LoadedScene& scene, const VoxelConfig& cfg);

struct ClassPRF {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    uint64_t support = 0;   // true slots of this class
    uint64_t predicted = 0;
    bool present = false;   // in ground truth or predictions
};

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;  // over classes present in truth or predictions
    double mean_sigma_clean = 0.0;
    double mean_sigma_bleed = 0.0;
    uint64_t clean_voxels = 0, bleed_voxels = 0;
    std::vector<ClassPRF> per_class;
};

struct EpochRow {
    int epoch = 0;
    std::string split;
    double loss = 0.0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double mean_sigma_clean = 0.0;
    double mean_sigma_bleed = 0.0;
    uint64_t clean_voxels = 0, bleed_voxels = 0;
};

struct TrainResult {
    FusionParams params;  // best validation macro-F1 (final params when no val split)
    std::vector<EpochRow> log;
    int best_epoch = -1;
    double best_val_macro_f1 = -1.0;
};

// Deterministic under cfg.seed. Train rows log the running training-mode
// metrics of each epoch; val rows come from a full evaluation pass.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset);

EvalResult evaluate(const FusionParams& params, const Dataset& dataset,
                    const std::vector<size_t>& scene_indices, Modality modality,
                    const VoxelConfig& voxel_cfg);

// Linear warmup to max_lr, then cosine decay; exposed for tests.
double lr_at(const TrainConfig& cfg, int64_t step, int64_t total_steps);

// metrics.csv serialization: epoch, split, loss, accuracy, macro_f1,
// mean_sigma_clean, mean_sigma_bleed.
std::string metrics_csv(const std::vector<EpochRow>& rows);

}  // namespace fp
