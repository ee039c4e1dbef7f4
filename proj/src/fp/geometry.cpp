#include "fp/geometry.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"

namespace fp {

Mat4 Mat4::identity() {
    Mat4 out{};
    out.m.fill(0.0);
    out.at(0, 0) = out.at(1, 1) = out.at(2, 2) = out.at(3, 3) = 1.0;
    return out;
}

std::array<double, 3> Mat4::apply_point(double x, double y, double z) const {
    std::array<double, 3> out;
    for (int r = 0; r < 3; ++r) {
        out[size_t(r)] = at(r, 0) * x + at(r, 1) * y + at(r, 2) * z + at(r, 3);
    }
    return out;
}

Mat4 Mat4::operator*(const Mat4& rhs) const {
    Mat4 out{};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += at(r, k) * rhs.at(k, c);
            out.at(r, c) = acc;
        }
    }
    return out;
}

void CameraCalib::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("calib: focal lengths must be positive");
    if (width < 1 || height < 1) throw ConfigError("calib: image size must be at least 1x1");
    // R^T R == I within 1e-6, det(R) > 0.
    double max_dev = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int k = 0; k < 3; ++k) dot += extrinsic.at(k, i) * extrinsic.at(k, j);
            max_dev = std::max(max_dev, std::abs(dot - (i == j ? 1.0 : 0.0)));
        }
    }
    if (max_dev >= 1e-6) throw ConfigError("calib: extrinsic rotation block is not orthonormal");
    const double det =
        extrinsic.at(0, 0) * (extrinsic.at(1, 1) * extrinsic.at(2, 2) - extrinsic.at(1, 2) * extrinsic.at(2, 1)) -
        extrinsic.at(0, 1) * (extrinsic.at(1, 0) * extrinsic.at(2, 2) - extrinsic.at(1, 2) * extrinsic.at(2, 0)) +
        extrinsic.at(0, 2) * (extrinsic.at(1, 0) * extrinsic.at(2, 1) - extrinsic.at(1, 1) * extrinsic.at(2, 0));
    if (det <= 0.0) throw ConfigError("calib: extrinsic rotation block has non-positive determinant");
    for (int c = 0; c < 4; ++c) {
        const double expect = (c == 3) ? 1.0 : 0.0;
        if (std::abs(extrinsic.at(3, c) - expect) > 1e-9) {
            throw ConfigError("calib: extrinsic bottom row must be (0, 0, 0, 1)");
        }
    }
}

std::vector<std::array<double, 3>> transform_to_camera(const PointCloud& points,
                                                       const CameraCalib& calib) {
    calib.validate();
    std::vector<std::array<double, 3>> out(points.size());
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& p = points.xyz[i];
        if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
            std::ostringstream msg;
            msg << "non-finite coordinate at point index " << i;
            throw DataError(msg.str());
        }
        out[i] = calib.extrinsic.apply_point(p[0], p[1], p[2]);
    }
    return out;
}

PixelProjection project(const PointCloud& points, const CameraCalib& calib) {
    const auto cam = transform_to_camera(points, calib);
    PixelProjection proj;
    const size_t n = cam.size();
    proj.valid.assign(n, 0);
    proj.u.assign(n, 0);
    proj.v.assign(n, 0);
    proj.depth.assign(n, 0.0f);
    for (size_t i = 0; i < n; ++i) {
        const double z = cam[i][2];
        if (z <= 0.0) continue;  // behind the camera, not an error
        const int32_t u = static_cast<int32_t>(std::floor(calib.fx * cam[i][0] / z + calib.cx));
        const int32_t v = static_cast<int32_t>(std::floor(calib.fy * cam[i][1] / z + calib.cy));
        proj.u[i] = u;
        proj.v[i] = v;
        proj.depth[i] = static_cast<float>(z);
        proj.valid[i] = (u >= 0 && u < calib.width && v >= 0 && v < calib.height) ? 1 : 0;
    }
    return proj;
}

CameraCalib load_calib(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("calib " + path + ": " + e.what());
    }
    CameraCalib calib;
    try {
        calib.fx = j.at("fx").get<double>();
        calib.fy = j.at("fy").get<double>();
        calib.cx = j.at("cx").get<double>();
        calib.cy = j.at("cy").get<double>();
        calib.width = j.at("width").get<int>();
        calib.height = j.at("height").get<int>();
        const auto ext = j.at("extrinsic").get<std::vector<double>>();
        if (ext.size() != 16) throw ConfigError("calib " + path + ": extrinsic must have 16 numbers");
        std::copy(ext.begin(), ext.end(), calib.extrinsic.m.begin());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("calib " + path + ": " + e.what());
    }
    calib.validate();
    return calib;
}

void save_calib(const CameraCalib& calib, const std::string& path) {
    nlohmann::json j;
    j["fx"] = calib.fx;
    j["fy"] = calib.fy;
    j["cx"] = calib.cx;
    j["cy"] = calib.cy;
    j["width"] = calib.width;
    j["height"] = calib.height;
    j["extrinsic"] = calib.extrinsic.m;
    io::write_text_file(path, j.dump(2) + "\n");
}

PointCloud load_point_cloud(const std::string& path) {
    io::Reader in(path);
    in.expect_magic("FPPC");
    const uint32_t n = in.u32();
    const uint8_t has_intensity = in.u8();
    PointCloud pc;
    pc.xyz.resize(n);
    if (has_intensity) pc.intensity.resize(n);
    for (uint32_t i = 0; i < n; ++i) {
        in.f32s(pc.xyz[i].data(), 3);
        if (has_intensity) pc.intensity[i] = in.f32();
    }
    return pc;
}

void save_point_cloud(const PointCloud& points, const std::string& path) {
    io::Writer out(path);
    out.bytes("FPPC", 4);
    out.u32(static_cast<uint32_t>(points.size()));
    out.u8(points.has_intensity() ? 1 : 0);
    for (size_t i = 0; i < points.size(); ++i) {
        out.f32s(points.xyz[i].data(), 3);
        if (points.has_intensity()) out.f32(points.intensity[i]);
    }
    out.close();
}

}  // namespace fp
