#include "fp/voxelgrid.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"

namespace fp {

void VoxelConfig::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (!(size[size_t(a)] > 0.0)) throw ConfigError("voxel: sizes must be positive");
        if (!(range_max[size_t(a)] > range_min[size_t(a)])) {
            throw ConfigError("voxel: range max must exceed range min on every axis");
        }
    }
    if (max_points < 1) throw ConfigError("voxel: max_points must be at least 1");
}

std::optional<std::array<int32_t, 3>> voxel_index(double x, double y, double z,
                                                  const VoxelConfig& cfg) {
    const double c[3] = {x, y, z};
    std::array<int32_t, 3> idx{};
    for (int a = 0; a < 3; ++a) {
        if (c[a] < cfg.range_min[size_t(a)] || c[a] >= cfg.range_max[size_t(a)]) return std::nullopt;
        idx[size_t(a)] = static_cast<int32_t>(
            std::floor((c[a] - cfg.range_min[size_t(a)]) / cfg.size[size_t(a)]));
    }
    return idx;
}

namespace {

struct CoordHash {
    size_t operator()(const std::array<int32_t, 3>& c) const {
        uint64_t h = 0xcbf29ce484222325ull;
        for (int32_t v : c) {
            h ^= static_cast<uint32_t>(v);
            h *= 0x100000001b3ull;
        }
        return static_cast<size_t>(h);
    }
};

uint64_t voxel_stream_key(const std::array<int32_t, 3>& c) {
    return (uint64_t(uint32_t(c[0])) << 42) ^ (uint64_t(uint32_t(c[1])) << 21) ^
           uint64_t(uint32_t(c[2]));
}

}  // namespace

VoxelBatch voxelize(const PointCloud& points, const SemanticScores& p2d,
                    const SemanticScores& p3d, const VoxelConfig& cfg) {
    cfg.validate();
    if (p2d.m != p3d.m) throw ConfigError("voxelize: 2D and 3D score sets disagree on class count");
    if (p2d.n != points.size() || p3d.n != points.size()) {
        throw ConfigError("voxelize: score row count does not match point count");
    }
    const uint32_t m = p2d.m;
    const uint32_t M = cfg.max_points;

    std::unordered_map<std::array<int32_t, 3>, std::vector<uint32_t>, CoordHash> cells;
    for (uint32_t i = 0; i < points.size(); ++i) {
        const auto& p = points.xyz[i];
        if (auto idx = voxel_index(p[0], p[1], p[2], cfg)) {
            cells[*idx].push_back(i);
        }
    }

    std::vector<std::array<int32_t, 3>> order;
    order.reserve(cells.size());
    for (const auto& kv : cells) order.push_back(kv.first);
    std::sort(order.begin(), order.end());

    VoxelBatch batch;
    batch.e = static_cast<uint32_t>(order.size());
    batch.max_points = M;
    batch.channels = 3 + 2 * m;
    batch.coords = order;
    batch.counts.resize(batch.e);
    batch.features.assign(size_t(batch.e) * M * batch.channels, 0.0f);
    batch.pad_mask.assign(size_t(batch.e) * M, 0);
    batch.point_index.assign(size_t(batch.e) * M, 0);

    const Rng base(cfg.seed);
    std::vector<uint32_t> slots;
    for (uint32_t v = 0; v < batch.e; ++v) {
        auto& members = cells[order[v]];
        std::sort(members.begin(), members.end());
        // Per-voxel stream so the result does not depend on grouping order.
        Rng rng = base.fork(voxel_stream_key(order[v]));

        slots.clear();
        if (members.size() > M) {
            // Uniform sample of M without replacement (partial Fisher-Yates),
            // reported in ascending point order.
            std::vector<uint32_t> pool = members;
            for (uint32_t k = 0; k < M; ++k) {
                const uint32_t j = k + static_cast<uint32_t>(rng.uniform_int(pool.size() - k));
                std::swap(pool[k], pool[j]);
            }
            slots.assign(pool.begin(), pool.begin() + M);
            std::sort(slots.begin(), slots.end());
            batch.counts[v] = M;
        } else {
            slots = members;
            batch.counts[v] = static_cast<uint32_t>(members.size());
            while (slots.size() < M) {
                slots.push_back(members[rng.uniform_int(members.size())]);
            }
        }

        for (uint32_t s = 0; s < M; ++s) {
            const uint32_t pt = slots[s];
            float* f = batch.slot(v, s);
            f[0] = points.xyz[pt][0];
            f[1] = points.xyz[pt][1];
            f[2] = points.xyz[pt][2];
            std::copy(p2d.row(pt), p2d.row(pt) + m, f + 3);
            std::copy(p3d.row(pt), p3d.row(pt) + m, f + 3 + m);
            batch.point_index[size_t(v) * M + s] = pt;
            batch.pad_mask[size_t(v) * M + s] = (s >= batch.counts[v]) ? 1 : 0;
        }
    }
    return batch;
}

void save_voxels(const VoxelBatch& batch, const std::string& path) {
    io::Writer out(path);
    out.bytes("FPVX", 4);
    out.u32(batch.e);
    out.u32(batch.max_points);
    out.u32(batch.channels);
    for (const auto& c : batch.coords) {
        out.i32(c[0]);
        out.i32(c[1]);
        out.i32(c[2]);
    }
    for (uint32_t c : batch.counts) out.u32(c);
    out.f32s(batch.features.data(), batch.features.size());
    out.close();
}

VoxelBatch load_voxels(const std::string& path) {
    io::Reader in(path);
    in.expect_magic("FPVX");
    VoxelBatch batch;
    batch.e = in.u32();
    batch.max_points = in.u32();
    batch.channels = in.u32();
    batch.coords.resize(batch.e);
    for (auto& c : batch.coords) {
        c[0] = in.i32();
        c[1] = in.i32();
        c[2] = in.i32();
    }
    batch.counts.resize(batch.e);
    for (auto& c : batch.counts) c = in.u32();
    batch.features.resize(size_t(batch.e) * batch.max_points * batch.channels);
    in.f32s(batch.features.data(), batch.features.size());
    // pad_mask follows the first-count-slots-are-members layout.
    batch.pad_mask.assign(size_t(batch.e) * batch.max_points, 0);
    for (uint32_t v = 0; v < batch.e; ++v) {
        for (uint32_t s = batch.counts[v]; s < batch.max_points; ++s) {
            batch.pad_mask[size_t(v) * batch.max_points + s] = 1;
        }
    }
    return batch;
}

VoxelConfig voxel_config_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("voxel config: ") + e.what());
    }
    VoxelConfig cfg;
    try {
        if (j.contains("size")) {
            const auto v = j["size"].get<std::vector<double>>();
            if (v.size() != 3) throw ConfigError("voxel config: size needs 3 numbers");
            std::copy(v.begin(), v.end(), cfg.size.begin());
        }
        if (j.contains("min")) {
            const auto v = j["min"].get<std::vector<double>>();
            if (v.size() != 3) throw ConfigError("voxel config: min needs 3 numbers");
            std::copy(v.begin(), v.end(), cfg.range_min.begin());
        }
        if (j.contains("max")) {
            const auto v = j["max"].get<std::vector<double>>();
            if (v.size() != 3) throw ConfigError("voxel config: max needs 3 numbers");
            std::copy(v.begin(), v.end(), cfg.range_max.begin());
        }
        if (j.contains("max_points")) cfg.max_points = j["max_points"].get<uint32_t>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("voxel config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace fp
