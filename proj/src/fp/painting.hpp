#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fp/geometry.hpp"

namespace fp {

// Segmentation mask stored as class indices; one-hot expansion happens when
// points are painted.
struct SemanticMask {
    int width = 0, height = 0;
    int classes = 0;  // m, including background as class 0
    std::vector<uint8_t> data;  // height x width, row-major

    uint8_t at(int v, int u) const { return data[size_t(v) * size_t(width) + size_t(u)]; }
    uint8_t& at(int v, int u) { return data[size_t(v) * size_t(width) + size_t(u)]; }
};

// Per-point class score rows. Rows produced by the painters are exactly
// one-hot.
struct SemanticScores {
    uint32_t n = 0, m = 0;
    std::vector<float> scores;  // n x m, row-major

    const float* row(uint32_t i) const { return scores.data() + size_t(i) * m; }
    float* row(uint32_t i) { return scores.data() + size_t(i) * m; }
    uint32_t argmax(uint32_t i) const;

    static SemanticScores zeros(uint32_t n, uint32_t m);
    void set_one_hot(uint32_t i, uint32_t cls);
};

struct Box3D {
    std::array<double, 3> center{};   // meters
    std::array<double, 3> size{};     // length, width, height; all > 0
    double yaw = 0.0;                 // rotation about world z
    int class_id = 0;                 // in [1, m)
};

// Paints each point with the one-hot of the mask pixel it projects into;
// points with invalid projections (behind camera or out of frame) become
// background.
SemanticScores paint_2d(const PointCloud& points, const SemanticMask& mask,
                        const CameraCalib& calib);

// Boundary-inclusive oriented-box containment.
bool point_in_box(double x, double y, double z, const Box3D& box);

// Paints points inside boxes with the box class; overlap ties go to the box
// with the nearest center, then the lowest box index. Points outside every
// box are background.
SemanticScores paint_3d(const PointCloud& points, const std::vector<Box3D>& boxes, uint32_t m);

struct CorruptionSpec {
    double flip_prob = 0.0;  // in [0, 1]
};

// Flips each foreground one-hot row, with probability flip_prob, to a
// different foreground class chosen uniformly. Background rows are never
// touched. Deterministic under the seed.
SemanticScores corrupt_scores(const SemanticScores& scores, const CorruptionSpec& model,
                              uint64_t seed);

// Mask file: binary 8-bit PGM (P5), pixel value = class index.
SemanticMask load_mask(const std::string& path, int classes);
void save_mask(const SemanticMask& mask, const std::string& path);

// Score file: 16-byte header (magic "FPSC", u32 n, u32 m, u32 reserved zero),
// then n x m little-endian f32, row-major.
SemanticScores load_scores(const std::string& path);
void save_scores(const SemanticScores& scores, const std::string& path);

// Box file: JSON array of {center:[x,y,z], size:[l,w,h], yaw, class_id}.
std::vector<Box3D> load_boxes(const std::string& path);
void save_boxes(const std::vector<Box3D>& boxes, const std::string& path);

}  // namespace fp
