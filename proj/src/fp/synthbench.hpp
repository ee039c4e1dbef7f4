#pragma once

#include <string>
#include <vector>

#include "fp/painting.hpp"

namespace fp {

struct ClassSpec {
    std::string name;
    double length = 1.0, width = 1.0, height = 1.0;  // meters
};

// Foreground classes with nuScenes-flavored nominal sizes; class_id is the
// index + 1, class 0 is background.
std::vector<ClassSpec> default_classes();

struct SceneSpec {
    uint64_t seed = 1;
    int min_boxes = 3, max_boxes = 6;
    std::vector<ClassSpec> classes;
    double ground_density = 0.6;       // ground points per m^2
    double box_surface_density = 8.0;  // surface points per m^2
    double extent = 15.0;              // ground square half-size, meters
    double size_jitter = 0.1;          // +- fraction on each box dimension
    double ground_sigma_z = 0.02;      // meters
    std::array<double, 3> sensor_origin{0.0, 0.0, 1.6};
    double cam_fx = 300.0, cam_fy = 300.0, cam_cx = 320.0, cam_cy = 240.0;
    int cam_width = 640, cam_height = 480;
    double cam_pitch = 0.0;  // radians, positive tilts the view downward
    int bleed_radius = 4;       // 2D corruption, pixels
    double confusion_prob = 0.2;  // 3D corruption

    uint32_t class_count() const { return static_cast<uint32_t>(classes.size()) + 1; }
    void validate() const;
};

struct Scene {
    PointCloud points;
    std::vector<uint8_t> true_labels;  // consistent with paint_3d over boxes
    std::vector<Box3D> boxes;
    SemanticMask mask_clean;
    SemanticMask mask_corrupt;
    CameraCalib calib;
};

// Camera sits at the sensor origin looking along +x (LiDAR frame), z up
// mapped to image -y.
CameraCalib camera_from_spec(const SceneSpec& spec);

// Deterministic under spec.seed: places non-overlapping boxes, samples ground
// and box-surface points, renders the clean mask by nearest-depth
// rasterization of a dense surface sampling, and derives the corrupt mask by
// bleeding.
Scene generate_scene(const SceneSpec& spec);

// Chebyshev dilation of every foreground class region by radius r; overlaps
// resolve to the lowest class index. Background only ever shrinks.
SemanticMask bleed_mask(const SemanticMask& mask, int r);

struct DatasetSpec {
    SceneSpec scene;  // per-scene seed = scene.seed + index
    int num_scenes = 40;
    double train_frac = 0.8;
};

std::vector<SceneSpec> make_scene_specs(const DatasetSpec& spec);

// Writes scenes/NNNN/{points.bin, labels.bin, boxes.json, calib.json,
// mask_clean.pgm, mask_corrupt.pgm, p2d.fpsc, p3d.fpsc, scene.json} plus a
// manifest.json listing files, seeds and the split.
void build_dataset(const std::vector<SceneSpec>& specs, double train_frac,
                   const std::string& out_dir);

}  // namespace fp
