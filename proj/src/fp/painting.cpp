#include "fp/painting.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"

namespace fp {

uint32_t SemanticScores::argmax(uint32_t i) const {
    const float* r = row(i);
    uint32_t best = 0;
    for (uint32_t c = 1; c < m; ++c) {
        if (r[c] > r[best]) best = c;
    }
    return best;
}

SemanticScores SemanticScores::zeros(uint32_t n, uint32_t m) {
    SemanticScores s;
    s.n = n;
    s.m = m;
    s.scores.assign(size_t(n) * m, 0.0f);
    return s;
}

void SemanticScores::set_one_hot(uint32_t i, uint32_t cls) {
    float* r = row(i);
    std::fill(r, r + m, 0.0f);
    r[cls] = 1.0f;
}

SemanticScores paint_2d(const PointCloud& points, const SemanticMask& mask,
                        const CameraCalib& calib) {
    if (mask.width != calib.width || mask.height != calib.height) {
        throw ConfigError("paint_2d: mask dimensions do not match calibration image size");
    }
    const auto proj = project(points, calib);
    auto out = SemanticScores::zeros(static_cast<uint32_t>(points.size()),
                                     static_cast<uint32_t>(mask.classes));
    for (uint32_t i = 0; i < out.n; ++i) {
        const uint32_t cls = proj.valid[i] ? mask.at(proj.v[i], proj.u[i]) : 0u;
        out.set_one_hot(i, cls);
    }
    return out;
}

bool point_in_box(double x, double y, double z, const Box3D& box) {
    const double dx = x - box.center[0];
    const double dy = y - box.center[1];
    const double dz = z - box.center[2];
    const double c = std::cos(box.yaw);
    const double s = std::sin(box.yaw);
    // Rotate into the box frame (by -yaw).
    const double bx = c * dx + s * dy;
    const double by = -s * dx + c * dy;
    return std::abs(bx) <= box.size[0] * 0.5 && std::abs(by) <= box.size[1] * 0.5 &&
           std::abs(dz) <= box.size[2] * 0.5;
}

SemanticScores paint_3d(const PointCloud& points, const std::vector<Box3D>& boxes, uint32_t m) {
    for (size_t b = 0; b < boxes.size(); ++b) {
        if (boxes[b].class_id <= 0 || static_cast<uint32_t>(boxes[b].class_id) >= m) {
            std::ostringstream msg;
            msg << "paint_3d: box " << b << " class_id " << boxes[b].class_id
                << " outside [1, " << m << ")";
            throw ConfigError(msg.str());
        }
    }
    auto out = SemanticScores::zeros(static_cast<uint32_t>(points.size()), m);
    for (uint32_t i = 0; i < out.n; ++i) {
        const auto& p = points.xyz[i];
        int best = -1;
        double best_dist = 0.0;
        for (size_t b = 0; b < boxes.size(); ++b) {
            if (!point_in_box(p[0], p[1], p[2], boxes[b])) continue;
            const double dx = p[0] - boxes[b].center[0];
            const double dy = p[1] - boxes[b].center[1];
            const double dz = p[2] - boxes[b].center[2];
            const double dist = dx * dx + dy * dy + dz * dz;
            if (best < 0 || dist < best_dist) {  // strict: ties keep the lowest index
                best = static_cast<int>(b);
                best_dist = dist;
            }
        }
        out.set_one_hot(i, best < 0 ? 0u : static_cast<uint32_t>(boxes[size_t(best)].class_id));
    }
    return out;
}

SemanticScores corrupt_scores(const SemanticScores& scores, const CorruptionSpec& model,
                              uint64_t seed) {
    if (!(model.flip_prob >= 0.0 && model.flip_prob <= 1.0)) {
        throw ConfigError("corrupt_scores: flip probability must lie in [0, 1]");
    }
    SemanticScores out = scores;
    if (scores.m < 3) return out;  // fewer than two foreground classes: nothing to flip to
    Rng rng(seed);
    for (uint32_t i = 0; i < out.n; ++i) {
        const uint32_t cls = out.argmax(i);
        if (cls == 0) continue;
        if (rng.uniform() >= model.flip_prob) continue;
        // Uniform over foreground classes other than the current one.
        uint32_t pick = 1 + static_cast<uint32_t>(rng.uniform_int(scores.m - 2));
        if (pick >= cls) ++pick;
        out.set_one_hot(i, pick);
    }
    return out;
}

SemanticMask load_mask(const std::string& path, int classes) {
    const std::string text = io::read_text_file(path);
    size_t pos = 0;
    auto next_token = [&]() -> std::string {
        while (pos < text.size()) {
            if (std::isspace(static_cast<unsigned char>(text[pos]))) {
                ++pos;
            } else if (text[pos] == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
        const size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
        return text.substr(start, pos - start);
    };
    if (next_token() != "P5") throw DataError("not a binary PGM (P5): " + path);
    SemanticMask mask;
    try {
        mask.width = std::stoi(next_token());
        mask.height = std::stoi(next_token());
        const int maxval = std::stoi(next_token());
        if (maxval != 255) throw DataError("PGM maxval must be 255: " + path);
    } catch (const std::logic_error&) {
        throw DataError("malformed PGM header: " + path);
    }
    ++pos;  // single whitespace after maxval
    const size_t expected = size_t(mask.width) * size_t(mask.height);
    if (text.size() - pos < expected) throw DataError("truncated PGM payload: " + path);
    mask.classes = classes;
    mask.data.assign(text.begin() + static_cast<ptrdiff_t>(pos),
                     text.begin() + static_cast<ptrdiff_t>(pos + expected));
    for (size_t i = 0; i < mask.data.size(); ++i) {
        if (mask.data[i] >= classes) {
            std::ostringstream msg;
            msg << "mask " << path << ": pixel " << i << " has class " << int(mask.data[i])
                << " >= " << classes;
            throw DataError(msg.str());
        }
    }
    return mask;
}

void save_mask(const SemanticMask& mask, const std::string& path) {
    std::ostringstream header;
    header << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    io::Writer out(path);
    const std::string h = header.str();
    out.bytes(h.data(), h.size());
    out.bytes(mask.data.data(), mask.data.size());
    out.close();
}

SemanticScores load_scores(const std::string& path) {
    io::Reader in(path);
    in.expect_magic("FPSC");
    SemanticScores s;
    s.n = in.u32();
    s.m = in.u32();
    in.u32();  // reserved
    s.scores.resize(size_t(s.n) * s.m);
    in.f32s(s.scores.data(), s.scores.size());
    return s;
}

void save_scores(const SemanticScores& scores, const std::string& path) {
    io::Writer out(path);
    out.bytes("FPSC", 4);
    out.u32(scores.n);
    out.u32(scores.m);
    out.u32(0);
    out.f32s(scores.scores.data(), scores.scores.size());
    out.close();
}

std::vector<Box3D> load_boxes(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("boxes " + path + ": " + e.what());
    }
    std::vector<Box3D> boxes;
    try {
        for (const auto& item : j) {
            Box3D box;
            const auto c = item.at("center").get<std::vector<double>>();
            const auto s = item.at("size").get<std::vector<double>>();
            if (c.size() != 3 || s.size() != 3) throw DataError("boxes " + path + ": bad center/size arity");
            std::copy(c.begin(), c.end(), box.center.begin());
            std::copy(s.begin(), s.end(), box.size.begin());
            box.yaw = item.at("yaw").get<double>();
            box.class_id = item.at("class_id").get<int>();
            if (box.size[0] <= 0 || box.size[1] <= 0 || box.size[2] <= 0) {
                throw DataError("boxes " + path + ": sizes must be strictly positive");
            }
            if (box.class_id == 0) throw DataError("boxes " + path + ": class_id 0 is background");
            boxes.push_back(box);
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("boxes " + path + ": " + e.what());
    }
    return boxes;
}

void save_boxes(const std::vector<Box3D>& boxes, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& box : boxes) {
        j.push_back({{"center", box.center},
                     {"size", box.size},
                     {"yaw", box.yaw},
                     {"class_id", box.class_id}});
    }
    io::write_text_file(path, j.dump(2) + "\n");
}

}  // namespace fp
