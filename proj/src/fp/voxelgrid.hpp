#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fp/painting.hpp"

namespace fp {

struct VoxelConfig {
    std::array<double, 3> size{0.2, 0.2, 8.0};          // meters per voxel
    std::array<double, 3> range_min{-20.0, -20.0, -2.0};
    std::array<double, 3> range_max{20.0, 20.0, 6.0};   // exclusive
    uint32_t max_points = 16;                            // M slots per voxel
    uint64_t seed = 0;                                   // sampling seed

    void validate() const;
};

// Non-empty voxels with exactly M feature slots each. Slot layout per row:
// [x, y, z | 2D scores (m) | 3D scores (m)]. The first counts[i] slots of a
// voxel hold distinct member points; the remaining slots repeat sampled
// members and are flagged in pad_mask.
struct VoxelBatch {
    uint32_t e = 0;         // non-empty voxel count
    uint32_t max_points = 0;
    uint32_t channels = 0;  // 3 + 2m
    std::vector<std::array<int32_t, 3>> coords;
    std::vector<uint32_t> counts;
    std::vector<float> features;       // e * M * channels
    std::vector<uint8_t> pad_mask;     // e * M
    std::vector<uint32_t> point_index; // e * M, original point id per slot

    const float* slot(uint32_t voxel, uint32_t s) const {
        return features.data() + (size_t(voxel) * max_points + s) * channels;
    }
    float* slot(uint32_t voxel, uint32_t s) {
        return features.data() + (size_t(voxel) * max_points + s) * channels;
    }
};

// floor((coord - min) / size) per axis; nullopt when the point falls outside
// the range (upper bound exclusive).
std::optional<std::array<int32_t, 3>> voxel_index(double x, double y, double z,
                                                  const VoxelConfig& cfg);

// Groups in-range points by voxel, samples voxels with more than M members
// down to M without replacement, and pads voxels with fewer than M members by
// repeating sampled members. Deterministic under cfg.seed.
VoxelBatch voxelize(const PointCloud& points, const SemanticScores& p2d,
                    const SemanticScores& p3d, const VoxelConfig& cfg);

// Voxel file: header (magic "FPVX", u32 e, u32 M, u32 channels), then coords
// as i32 triples, counts as u32, features as little-endian f32.
void save_voxels(const VoxelBatch& batch, const std::string& path);
VoxelBatch load_voxels(const std::string& path);

VoxelConfig voxel_config_from_json(const std::string& json_text);

}  // namespace fp
