#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fp {

// Row-major 4x4 homogeneous transform.
struct Mat4 {
    std::array<double, 16> m;

    static Mat4 identity();
    double at(int r, int c) const { return m[size_t(r) * 4 + size_t(c)]; }
    double& at(int r, int c) { return m[size_t(r) * 4 + size_t(c)]; }
    std::array<double, 3> apply_point(double x, double y, double z) const;
    Mat4 operator*(const Mat4& rhs) const;
};

struct PointCloud {
    std::vector<std::array<float, 3>> xyz;
    std::vector<float> intensity;  // empty, or one value per point in [0,1]

    size_t size() const { return xyz.size(); }
    bool has_intensity() const { return !intensity.empty(); }
};

// Pinhole camera: intrinsics as (fx, fy, cx, cy), extrinsic maps LiDAR-frame
// homogeneous points into the camera frame (z forward, x right, y down).
struct CameraCalib {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat4 extrinsic = Mat4::identity();

    // Checks fx,fy > 0, image size >= 1, rotation block orthonormal with
    // positive determinant and homogeneous bottom row.
    void validate() const;
};

struct PixelProjection {
    std::vector<uint8_t> valid;
    std::vector<int32_t> u, v;
    std::vector<float> depth;

    size_t size() const { return valid.size(); }
};

// Applies the extrinsic to every point. Rejects non-finite coordinates with a
// DataError naming the point index.
std::vector<std::array<double, 3>> transform_to_camera(const PointCloud& points,
                                                       const CameraCalib& calib);

// Full projection chain: extrinsic, perspective divide, floor() pixel
// quantization, image-bounds check. z <= 0 yields valid = false, never an error.
PixelProjection project(const PointCloud& points, const CameraCalib& calib);

// Calibration file: JSON with fx, fy, cx, cy, width, height, extrinsic (16
// numbers, row-major).
CameraCalib load_calib(const std::string& path);
void save_calib(const CameraCalib& calib, const std::string& path);

// points.bin: magic "FPPC", u32 n, u8 has_intensity, then per point
// x,y,z[,intensity] as little-endian f32.
PointCloud load_point_cloud(const std::string& path);
void save_point_cloud(const PointCloud& points, const std::string& path);

}  // namespace fp
