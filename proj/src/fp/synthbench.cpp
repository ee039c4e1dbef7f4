#include "fp/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"
#include "fp/dataset.hpp"
#include "fp/geometry.hpp"

namespace fp {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinSensorClearance = 3.0;  // keep boxes off the sensor, meters
constexpr double kBoxGap = 0.3;              // meters between placed boxes
constexpr double kRenderStep = 0.012;        // surface sampling step for the mask, meters

double bev_half_diagonal(const Box3D& box) {
    return 0.5 * std::hypot(box.size[0], box.size[1]);
}

}  // namespace

// Desk-scale proxies for the ten nuScenes obstacle kinds. The size spread is
// compressed so small classes still collect enough surface points for
// per-class metrics to be meaningful at benchmark scale.
std::vector<ClassSpec> default_classes() {
    return {
        {"car", 4.2, 1.8, 1.6},
        {"truck", 5.2, 2.2, 2.2},
        {"bus", 5.8, 2.5, 2.5},
        {"trailer", 5.5, 2.3, 2.3},
        {"construction", 4.5, 2.2, 2.2},
        {"pedestrian", 1.0, 1.0, 1.8},
        {"motorcycle", 2.2, 1.0, 1.5},
        {"bicycle", 2.0, 0.8, 1.4},
        {"traffic_cone", 0.9, 0.9, 1.2},
        {"barrier", 2.4, 0.9, 1.2},
    };
}

void SceneSpec::validate() const {
    if (classes.empty()) throw ConfigError("scene: class set must not be empty");
    if (classes.size() > 254) throw ConfigError("scene: too many classes for 8-bit labels");
    if (min_boxes < 0 || max_boxes < min_boxes) throw ConfigError("scene: bad box count range");
    if (!(ground_density > 0.0) || !(box_surface_density > 0.0)) {
        throw ConfigError("scene: point densities must be positive");
    }
    if (!(extent > 1.0)) throw ConfigError("scene: extent must exceed 1 meter");
    if (bleed_radius < 0) throw ConfigError("scene: bleed radius must be >= 0");
    if (!(confusion_prob >= 0.0 && confusion_prob <= 1.0)) {
        throw ConfigError("scene: confusion probability must lie in [0, 1]");
    }
    for (const auto& c : classes) {
        if (!(c.length > 0.0 && c.width > 0.0 && c.height > 0.0)) {
            throw ConfigError("scene: class sizes must be strictly positive");
        }
    }
}

CameraCalib camera_from_spec(const SceneSpec& spec) {
    CameraCalib calib;
    calib.fx = spec.cam_fx;
    calib.fy = spec.cam_fy;
    calib.cx = spec.cam_cx;
    calib.cy = spec.cam_cy;
    calib.width = spec.cam_width;
    calib.height = spec.cam_height;
    // Base frame: x_cam = -y, y_cam = -z, z_cam = +x, then an optional pitch
    // about the camera x-axis tilting the view downward. The translation
    // moves the origin to the sensor position.
    const double base[3][3] = {{0, -1, 0}, {0, 0, -1}, {1, 0, 0}};
    const double cp = std::cos(spec.cam_pitch), sp = std::sin(spec.cam_pitch);
    const double pitch[3][3] = {{1, 0, 0}, {0, cp, -sp}, {0, sp, cp}};
    double rot[3][3];
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) {
            rot[r][c] = 0.0;
            for (int k = 0; k < 3; ++k) rot[r][c] += pitch[r][k] * base[k][c];
        }
    }
    Mat4 ext = Mat4::identity();
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) ext.at(r, c) = rot[r][c];
        double t = 0.0;
        for (int c = 0; c < 3; ++c) t -= rot[r][c] * spec.sensor_origin[size_t(c)];
        ext.at(r, 3) = t;
    }
    calib.extrinsic = ext;
    calib.validate();
    return calib;
}

namespace {

std::vector<Box3D> place_boxes(const SceneSpec& spec, Rng& rng) {
    const int want = spec.min_boxes +
                     static_cast<int>(rng.uniform_int(uint64_t(spec.max_boxes - spec.min_boxes + 1)));
    std::vector<Box3D> boxes;
    for (int b = 0; b < want; ++b) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const uint32_t cls = 1 + static_cast<uint32_t>(rng.uniform_int(spec.classes.size()));
            const ClassSpec& base = spec.classes[cls - 1];
            Box3D box;
            box.class_id = static_cast<int>(cls);
            box.size = {base.length * (1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0)),
                        base.width * (1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0)),
                        base.height * (1.0 + spec.size_jitter * rng.uniform(-1.0, 1.0))};
            box.yaw = rng.uniform(0.0, 2.0 * kPi);
            const double margin = bev_half_diagonal(box);
            if (2.0 * margin >= 2.0 * spec.extent) continue;
            box.center = {rng.uniform(-spec.extent + margin, spec.extent - margin),
                          rng.uniform(-spec.extent + margin, spec.extent - margin),
                          box.size[2] * 0.5};
            if (std::hypot(box.center[0] - spec.sensor_origin[0],
                           box.center[1] - spec.sensor_origin[1]) < kMinSensorClearance + margin) {
                continue;
            }
            bool overlap = false;
            for (const auto& other : boxes) {
                const double d = std::hypot(box.center[0] - other.center[0],
                                            box.center[1] - other.center[1]);
                if (d < margin + bev_half_diagonal(other) + kBoxGap) {
                    overlap = true;
                    break;
                }
            }
            if (!overlap) {
                boxes.push_back(box);
                placed = true;
            }
        }
        if (!placed) {
            std::ostringstream msg;
            msg << "scene seed " << spec.seed << ": cannot place box " << b
                << " without overlap after 1000 tries";
            throw GenerationError(msg.str());
        }
    }
    return boxes;
}

void sample_ground(const SceneSpec& spec, const std::vector<Box3D>& boxes, Rng& rng,
                   PointCloud& cloud) {
    const double area = 4.0 * spec.extent * spec.extent;
    const auto want = static_cast<size_t>(std::llround(spec.ground_density * area));
    for (size_t i = 0; i < want; ++i) {
        const double x = rng.uniform(-spec.extent, spec.extent);
        const double y = rng.uniform(-spec.extent, spec.extent);
        const double z = rng.normal() * spec.ground_sigma_z;
        bool inside = false;
        for (const auto& box : boxes) {
            if (point_in_box(x, y, z, box)) {
                inside = true;
                break;
            }
        }
        if (inside) continue;  // the ground is not observed beneath an object
        cloud.xyz.push_back({float(x), float(y), float(z)});
    }
}

// Five sampled faces per box: top plus the four sides.
struct Face {
    // point = origin + a * edge_a + b * edge_b, a and b in [0, 1]
    std::array<double, 3> origin, edge_a, edge_b;
    double area;
};

std::vector<Face> box_faces(const Box3D& box) {
    const double l = box.size[0], w = box.size[1], h = box.size[2];
    const double c = std::cos(box.yaw), s = std::sin(box.yaw);
    auto to_world = [&](double bx, double by, double bz) -> std::array<double, 3> {
        return {box.center[0] + c * bx - s * by, box.center[1] + s * bx + c * by,
                box.center[2] + bz};
    };
    auto face = [&](std::array<double, 3> o, std::array<double, 3> pa, std::array<double, 3> pb,
                    double area) {
        Face f;
        f.origin = to_world(o[0], o[1], o[2]);
        const auto wa = to_world(pa[0], pa[1], pa[2]);
        const auto wb = to_world(pb[0], pb[1], pb[2]);
        for (int k = 0; k < 3; ++k) {
            f.edge_a[size_t(k)] = wa[size_t(k)] - f.origin[size_t(k)];
            f.edge_b[size_t(k)] = wb[size_t(k)] - f.origin[size_t(k)];
        }
        f.area = area;
        return f;
    };
    const double hl = l * 0.5, hw = w * 0.5, hh = h * 0.5;
    std::vector<Face> faces;
    faces.push_back(face({-hl, -hw, hh}, {hl, -hw, hh}, {-hl, hw, hh}, l * w));    // top
    faces.push_back(face({hl, -hw, -hh}, {hl, hw, -hh}, {hl, -hw, hh}, w * h));   // +x side
    faces.push_back(face({-hl, -hw, -hh}, {-hl, hw, -hh}, {-hl, -hw, hh}, w * h));  // -x side
    faces.push_back(face({-hl, hw, -hh}, {hl, hw, -hh}, {-hl, hw, hh}, l * h));   // +y side
    faces.push_back(face({-hl, -hw, -hh}, {hl, -hw, -hh}, {-hl, -hw, hh}, l * h));  // -y side
    return faces;
}

void sample_box_surfaces(const SceneSpec& spec, const std::vector<Box3D>& boxes, Rng& rng,
                         PointCloud& cloud) {
    for (const auto& box : boxes) {
        // Sample a box inset by a centimeter per face so the float-rounded
        // coordinates stay strictly inside the containment test.
        Box3D inset = box;
        for (auto& s : inset.size) s = std::max(0.02, s - 0.02);
        const auto faces = box_faces(inset);
        double total = 0.0;
        for (const auto& f : faces) total += f.area;
        const auto want = static_cast<size_t>(std::llround(spec.box_surface_density * total));
        for (size_t i = 0; i < want; ++i) {
            double pick = rng.uniform() * total;
            size_t fi = 0;
            while (fi + 1 < faces.size() && pick > faces[fi].area) {
                pick -= faces[fi].area;
                ++fi;
            }
            const Face& f = faces[fi];
            const double a = rng.uniform();
            const double b = rng.uniform();
            cloud.xyz.push_back({float(f.origin[0] + a * f.edge_a[0] + b * f.edge_b[0]),
                                 float(f.origin[1] + a * f.edge_a[1] + b * f.edge_b[1]),
                                 float(f.origin[2] + a * f.edge_a[2] + b * f.edge_b[2])});
        }
    }
}

// Nearest-depth rasterization of densely sampled box surfaces.
SemanticMask render_clean_mask(const SceneSpec& spec, const std::vector<Box3D>& boxes,
                               const CameraCalib& calib) {
    SemanticMask mask;
    mask.width = calib.width;
    mask.height = calib.height;
    mask.classes = static_cast<int>(spec.class_count());
    mask.data.assign(size_t(mask.width) * size_t(mask.height), 0);
    std::vector<float> depth(mask.data.size(), std::numeric_limits<float>::infinity());

    const auto& ext = calib.extrinsic;
    for (const auto& box : boxes) {
        for (const auto& face : box_faces(box)) {
            const double len_a = std::hypot(face.edge_a[0], face.edge_a[1], face.edge_a[2]);
            const double len_b = std::hypot(face.edge_b[0], face.edge_b[1], face.edge_b[2]);
            const int na = std::max(2, int(std::ceil(len_a / kRenderStep)) + 1);
            const int nb = std::max(2, int(std::ceil(len_b / kRenderStep)) + 1);
            for (int ia = 0; ia < na; ++ia) {
                const double a = double(ia) / double(na - 1);
                for (int ib = 0; ib < nb; ++ib) {
                    const double b = double(ib) / double(nb - 1);
                    const double wx = face.origin[0] + a * face.edge_a[0] + b * face.edge_b[0];
                    const double wy = face.origin[1] + a * face.edge_a[1] + b * face.edge_b[1];
                    const double wz = face.origin[2] + a * face.edge_a[2] + b * face.edge_b[2];
                    const auto cam = ext.apply_point(wx, wy, wz);
                    if (cam[2] <= 0.0) continue;
                    const int u = int(std::floor(calib.fx * cam[0] / cam[2] + calib.cx));
                    const int v = int(std::floor(calib.fy * cam[1] / cam[2] + calib.cy));
                    if (u < 0 || u >= mask.width || v < 0 || v >= mask.height) continue;
                    const size_t px = size_t(v) * size_t(mask.width) + size_t(u);
                    if (float(cam[2]) < depth[px]) {
                        depth[px] = float(cam[2]);
                        mask.data[px] = static_cast<uint8_t>(box.class_id);
                    }
                }
            }
        }
    }
    return mask;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
    spec.validate();
    const Rng base(spec.seed);

    Scene scene;
    scene.calib = camera_from_spec(spec);

    Rng box_rng = base.fork(1);
    scene.boxes = place_boxes(spec, box_rng);

    Rng ground_rng = base.fork(2);
    sample_ground(spec, scene.boxes, ground_rng, scene.points);
    Rng surface_rng = base.fork(3);
    sample_box_surfaces(spec, scene.boxes, surface_rng, scene.points);

    const auto painted = paint_3d(scene.points, scene.boxes, spec.class_count());
    scene.true_labels.resize(scene.points.size());
    for (uint32_t i = 0; i < painted.n; ++i) {
        scene.true_labels[i] = static_cast<uint8_t>(painted.argmax(i));
    }

    scene.mask_clean = render_clean_mask(spec, scene.boxes, scene.calib);
    scene.mask_corrupt = bleed_mask(scene.mask_clean, spec.bleed_radius);
    return scene;
}

SemanticMask bleed_mask(const SemanticMask& mask, int r) {
    if (r < 0) throw ConfigError("bleed_mask: radius must be >= 0");
    if (r == 0) return mask;
    const int w = mask.width, h = mask.height;
    SemanticMask out = mask;
    out.data.assign(mask.data.size(), 0);

    // Separable Chebyshev dilation per class; writing classes in descending
    // order leaves the lowest class on contested pixels.
    std::vector<uint8_t> row_hit(size_t(w) * size_t(h));
    std::vector<int> prefix(size_t(w) + 1);
    for (int cls = mask.classes - 1; cls >= 1; --cls) {
        // Horizontal pass.
        bool any = false;
        for (int v = 0; v < h; ++v) {
            prefix[0] = 0;
            for (int u = 0; u < w; ++u) {
                prefix[size_t(u) + 1] =
                    prefix[size_t(u)] + (mask.at(v, u) == cls ? 1 : 0);
            }
            if (prefix[size_t(w)] == 0) {
                std::fill_n(row_hit.begin() + size_t(v) * size_t(w), w, uint8_t(0));
                continue;
            }
            any = true;
            for (int u = 0; u < w; ++u) {
                const int lo = std::max(0, u - r);
                const int hi = std::min(w - 1, u + r);
                row_hit[size_t(v) * size_t(w) + size_t(u)] =
                    (prefix[size_t(hi) + 1] - prefix[size_t(lo)]) > 0 ? 1 : 0;
            }
        }
        if (!any) continue;
        // Vertical pass over the horizontal result.
        for (int u = 0; u < w; ++u) {
            int run = 0;
            for (int v = 0; v < std::min(r, h); ++v) run += row_hit[size_t(v) * size_t(w) + size_t(u)];
            for (int v = 0; v < h; ++v) {
                if (v + r < h) run += row_hit[size_t(v + r) * size_t(w) + size_t(u)];
                if (v - r - 1 >= 0) run -= row_hit[size_t(v - r - 1) * size_t(w) + size_t(u)];
                if (run > 0) out.at(v, u) = static_cast<uint8_t>(cls);
            }
        }
    }
    return out;
}

std::vector<SceneSpec> make_scene_specs(const DatasetSpec& spec) {
    if (spec.num_scenes < 1) throw ConfigError("dataset: num_scenes must be >= 1");
    std::vector<SceneSpec> specs(size_t(spec.num_scenes), spec.scene);
    for (size_t i = 0; i < specs.size(); ++i) specs[i].seed = spec.scene.seed + i;
    return specs;
}

void build_dataset(const std::vector<SceneSpec>& specs, double train_frac,
                   const std::string& out_dir) {
    if (specs.empty()) throw ConfigError("dataset: no scenes requested");
    if (!(train_frac >= 0.0 && train_frac <= 1.0)) {
        throw ConfigError("dataset: train fraction must lie in [0, 1]");
    }
    const uint32_t m = specs.front().class_count();
    for (const auto& s : specs) {
        if (s.class_count() != m) throw ConfigError("dataset: scenes disagree on class count");
    }
    const auto n_train = static_cast<size_t>(std::llround(train_frac * double(specs.size())));

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "scenes", ec);
    if (ec) throw DataError("cannot create dataset directory " + out_dir + ": " + ec.message());

    nlohmann::json manifest;
    manifest["format"] = "fusionpaint-dataset";
    manifest["m"] = m;
    manifest["seed"] = specs.front().seed;
    manifest["scenes"] = nlohmann::json::array();
    for (size_t i = 0; i < specs.size(); ++i) {
        const Scene scene = generate_scene(specs[i]);
        std::ostringstream name;
        name << "scenes/";
        name.fill('0');
        name.width(4);
        name << i;
        const std::string rel = name.str();
        const std::string dir = (fs::path(out_dir) / rel).string();
        write_scene_dir(scene, specs[i], dir);
        manifest["scenes"].push_back({{"dir", rel},
                                      {"seed", specs[i].seed},
                                      {"split", i < n_train ? "train" : "val"},
                                      {"points", scene.points.size()},
                                      {"boxes", scene.boxes.size()}});
    }
    io::write_text_file((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace fp
