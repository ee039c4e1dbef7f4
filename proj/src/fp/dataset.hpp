#pragma once

#include <string>
#include <vector>

#include "fp/synthbench.hpp"

namespace fp {

// labels.bin: magic "FPLB", u32 n, u32 m, then n bytes of class indices.
void save_labels(const std::vector<uint8_t>& labels, uint32_t m, const std::string& path);
std::vector<uint8_t> load_labels(const std::string& path, uint32_t* m_out = nullptr);

// Writes one scene directory including the painted score files: p2d.fpsc from
// the corrupt mask, p3d.fpsc from the boxes plus label confusion. scene.json
// records seed, class count and the confusion probability so painting can be
// reproduced from the directory alone.
void write_scene_dir(const Scene& scene, const SceneSpec& spec, const std::string& dir);

struct LoadedScene {
    std::string dir;
    uint64_t seed = 0;
    bool train = true;
    PointCloud points;
    std::vector<uint8_t> labels;
    std::vector<Box3D> boxes;
    CameraCalib calib;
    SemanticScores p2d, p3d;
};

struct Dataset {
    uint32_t m = 0;
    std::vector<LoadedScene> scenes;
    std::vector<size_t> train_indices, val_indices;

    static Dataset load(const std::string& dir);
    const std::vector<size_t>& split(const std::string& name) const;
};

}  // namespace fp
