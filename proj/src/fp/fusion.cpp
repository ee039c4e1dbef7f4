#include "fp/fusion.hpp"

#include <cmath>
#include <unordered_map>

#include "fp/binio.hpp"

namespace fp {

namespace {

constexpr float kBnMomentum = 0.9f;
constexpr float kBnEps = 1e-5f;

struct TensorSpec {
    std::string name;
    uint32_t rows, cols;
    bool trainable;
    bool decay;
};

std::vector<TensorSpec> tensor_specs(const FusionDims& d) {
    const uint32_t pc = d.point_channels();
    std::vector<TensorSpec> specs;
    auto dense = [&](const std::string& prefix, uint32_t out, uint32_t in) {
        specs.push_back({prefix + ".weight", out, in, true, true});
        specs.push_back({prefix + ".bias", 1, out, true, false});
    };
    auto norm = [&](const std::string& prefix, uint32_t width) {
        specs.push_back({prefix + ".bn.gamma", 1, width, true, false});
        specs.push_back({prefix + ".bn.beta", 1, width, true, false});
        specs.push_back({prefix + ".bn.running_mean", 1, width, false, false});
        specs.push_back({prefix + ".bn.running_var", 1, width, false, false});
    };
    dense("mlp_l", d.c1, pc);
    norm("mlp_l", d.c1);
    dense("mlp_g", d.c2, d.c1);
    norm("mlp_g", d.c2);
    dense("att.fc1", d.att_hidden, d.c1 + d.c2);
    dense("att.fc2", 1, d.att_hidden);
    dense("head.fc1", d.head_hidden, pc);
    norm("head.fc1", d.head_hidden);
    dense("head.fc2", d.m, d.head_hidden);
    return specs;
}

template <typename S>
int dense_bn_relu(nn::Graph<S>& g, int x, int w, int b, int gamma, int beta,
                  nn::Mat<S>& running_mean, nn::Mat<S>& running_var, bool training) {
    const int lin = g.linear(x, w, b);
    const int bn = training
                       ? g.batchnorm_train(lin, gamma, beta, running_mean, running_var,
                                           S(kBnMomentum), S(kBnEps))
                       : g.batchnorm_eval(lin, gamma, beta, running_mean, running_var, S(kBnEps));
    return g.relu(bn);
}

// Slices a voxel batch into xyz / 2D-score / 3D-score leaf matrices.
template <typename S>
void slice_batch(const VoxelBatch& batch, nn::Mat<S>& xyz, nn::Mat<S>& p2d, nn::Mat<S>& p3d) {
    const uint32_t m = (batch.channels - 3) / 2;
    const Eigen::Index rows = Eigen::Index(batch.e) * batch.max_points;
    xyz.resize(rows, 3);
    p2d.resize(rows, m);
    p3d.resize(rows, m);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const float* f = batch.features.data() + size_t(r) * batch.channels;
        for (int c = 0; c < 3; ++c) xyz(r, c) = static_cast<S>(f[c]);
        for (uint32_t c = 0; c < m; ++c) {
            p2d(r, c) = static_cast<S>(f[3 + c]);
            p3d(r, c) = static_cast<S>(f[3 + m + c]);
        }
    }
}

}  // namespace

Modality modality_from_string(const std::string& s) {
    if (s == "2d-only") return Modality::TwoDOnly;
    if (s == "3d-only") return Modality::ThreeDOnly;
    if (s == "fused-fixed-half") return Modality::FusedFixedHalf;
    if (s == "fused-attention") return Modality::FusedAttention;
    throw ConfigError("unknown modality '" + s +
                      "' (expected 2d-only, 3d-only, fused-fixed-half or fused-attention)");
}

std::string modality_to_string(Modality m) {
    switch (m) {
        case Modality::TwoDOnly: return "2d-only";
        case Modality::ThreeDOnly: return "3d-only";
        case Modality::FusedFixedHalf: return "fused-fixed-half";
        case Modality::FusedAttention: return "fused-attention";
    }
    throw InternalError("modality_to_string: bad enum");
}

FusionParams FusionParams::init(const FusionDims& dims, uint64_t seed) {
    FusionParams params;
    params.dims = dims;
    Rng rng(seed);
    for (const auto& spec : tensor_specs(dims)) {
        nn::Tensor t;
        t.name = spec.name;
        t.trainable = spec.trainable;
        t.decay = spec.decay;
        t.value.resize(spec.rows, spec.cols);
        if (spec.name == "att.fc2.weight") {
            // The gate's output layer starts at zero: sigma opens at exactly
            // 0.5 and only moves once the loss carries a real preference.
            // A live random init lets the optimizer saturate the sigmoid on
            // noise gradients before the classifier has learned anything.
            t.value.setZero();
        } else if (spec.decay) {
            // Kaiming-uniform over the fan-in.
            const double bound = std::sqrt(6.0 / double(spec.cols));
            for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
                for (Eigen::Index c = 0; c < t.value.cols(); ++c) {
                    t.value(r, c) = static_cast<float>(rng.uniform(-bound, bound));
                }
            }
        } else if (spec.name.find(".bn.gamma") != std::string::npos ||
                   spec.name.find(".bn.running_var") != std::string::npos) {
            t.value.setOnes();
        } else {
            t.value.setZero();
        }
        params.model.tensors.push_back(std::move(t));
    }
    return params;
}

void FusionParams::save(const std::string& path) const { model.save(path); }

FusionParams FusionParams::load(const std::string& path) {
    FusionParams params;
    params.model = nn::Model::load(path);
    const auto& wl = params.model.at("mlp_l.weight").value;
    const uint32_t pc = static_cast<uint32_t>(wl.cols());
    if (pc < 5 || (pc - 3) % 2 != 0) {
        throw ShapeError("checkpoint " + path + ": mlp_l fan-in is not 3 + 2m");
    }
    params.dims.m = (pc - 3) / 2;
    params.dims.c1 = static_cast<uint32_t>(wl.rows());
    params.dims.c2 = static_cast<uint32_t>(params.model.at("mlp_g.weight").value.rows());
    params.dims.att_hidden = static_cast<uint32_t>(params.model.at("att.fc1.weight").value.rows());
    params.dims.head_hidden = static_cast<uint32_t>(params.model.at("head.fc1.weight").value.rows());
    // Cross-check every tensor against the derived dimensions.
    for (const auto& spec : tensor_specs(params.dims)) {
        const int i = params.model.find(spec.name);
        if (i < 0) throw ShapeError("checkpoint " + path + ": missing tensor " + spec.name);
        auto& t = params.model.tensors[size_t(i)];
        if (t.value.rows() != Eigen::Index(spec.rows) || t.value.cols() != Eigen::Index(spec.cols)) {
            throw ShapeError("checkpoint " + path + ": tensor " + spec.name + " has wrong shape");
        }
        t.trainable = spec.trainable;
        t.decay = spec.decay;
    }
    return params;
}

template <typename S>
FusionNetT<S>::FusionNetT(const FusionParams& params) : dims_(params.dims) {
    for (const auto& spec : tensor_specs(dims_)) {
        const auto& t = params.model.at(spec.name);
        names_.push_back(spec.name);
        values_.push_back(t.value.template cast<S>());
        trainable_.push_back(spec.trainable ? 1 : 0);
        decay_.push_back(spec.decay ? 1 : 0);
    }
}

template <typename S>
int FusionNetT<S>::idx(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<int>(i);
    }
    throw InternalError("fusion net: missing tensor " + name);
}

template <typename S>
nn::Mat<S>& FusionNetT<S>::tensor(const std::string& name) {
    return values_[size_t(idx(name))];
}

template <typename S>
typename FusionNetT<S>::Forward FusionNetT<S>::run(const VoxelBatch& batch, Modality modality,
                                                   bool training,
                                                   const std::vector<int32_t>* targets,
                                                   const std::vector<uint8_t>* loss_mask) {
    if (batch.e == 0) throw InternalError("fusion: empty voxel batch");
    if (batch.channels != dims_.point_channels()) {
        throw ConfigError("fusion: batch feature width does not match the configured class count");
    }
    const Eigen::Index M = batch.max_points;

    Forward fwd;
    auto& g = fwd.graph;
    fwd.param_nodes.assign(values_.size(), -1);
    auto P = [&](const std::string& name) {
        const int i = idx(name);
        if (fwd.param_nodes[size_t(i)] < 0) {
            fwd.param_nodes[size_t(i)] =
                trainable_[size_t(i)] ? g.param(values_[size_t(i)]) : g.input(values_[size_t(i)]);
        }
        return fwd.param_nodes[size_t(i)];
    };

    nn::Mat<S> xyz, p2d, p3d;
    slice_batch(batch, xyz, p2d, p3d);
    if (modality == Modality::TwoDOnly) p3d.setZero();
    if (modality == Modality::ThreeDOnly) p2d.setZero();
    const int xyz_raw = g.input(xyz);
    const int xyz_n = g.input((xyz * S(kCoordScale)).eval());
    const int p2d_n = g.input(std::move(p2d));
    const int p3d_n = g.input(std::move(p3d));

    int sigma_n;
    if (modality == Modality::FusedAttention) {
        const int feat = g.concat_cols(xyz_n, p2d_n, p3d_n);
        const int h = dense_bn_relu(g, feat, P("mlp_l.weight"), P("mlp_l.bias"),
                                    P("mlp_l.bn.gamma"), P("mlp_l.bn.beta"),
                                    tensor("mlp_l.bn.running_mean"),
                                    tensor("mlp_l.bn.running_var"), training);
        fwd.local = g.segment_max(h, M);
        const int g0 = dense_bn_relu(g, fwd.local, P("mlp_g.weight"), P("mlp_g.bias"),
                                     P("mlp_g.bn.gamma"), P("mlp_g.bn.beta"),
                                     tensor("mlp_g.bn.running_mean"),
                                     tensor("mlp_g.bn.running_var"), training);
        fwd.global = g.segment_max(g0, g.value(g0).rows());
        const int vgl = g.concat_cols(fwd.local, g.broadcast_rows(fwd.global, batch.e));
        const int a1 = g.relu(g.linear(vgl, P("att.fc1.weight"), P("att.fc1.bias")));
        const int a2 = g.linear(a1, P("att.fc2.weight"), P("att.fc2.bias"));
        sigma_n = g.sigmoid(a2);
        fwd.sigma = sigma_n;
    } else {
        switch (modality) {
            case Modality::TwoDOnly: fwd.pinned_sigma = S(1); break;
            case Modality::ThreeDOnly: fwd.pinned_sigma = S(0); break;
            default: fwd.pinned_sigma = S(0.5); break;
        }
        sigma_n = g.input(nn::Mat<S>::Constant(batch.e, 1, fwd.pinned_sigma));
    }

    fwd.scaled2d = g.segment_scale(p2d_n, sigma_n, M, false);
    fwd.scaled3d = g.segment_scale(p3d_n, sigma_n, M, true);
    // The reported fused voxels keep raw coordinates; the head consumes the
    // scaled ones.
    fwd.fused = g.concat_cols(xyz_raw, fwd.scaled2d, fwd.scaled3d);
    const int head_in = g.concat_cols(xyz_n, fwd.scaled2d, fwd.scaled3d);

    const int hh = dense_bn_relu(g, head_in, P("head.fc1.weight"), P("head.fc1.bias"),
                                 P("head.fc1.bn.gamma"), P("head.fc1.bn.beta"),
                                 tensor("head.fc1.bn.running_mean"),
                                 tensor("head.fc1.bn.running_var"), training);
    fwd.logits = g.linear(hh, P("head.fc2.weight"), P("head.fc2.bias"));

    if (targets != nullptr) {
        if (loss_mask == nullptr) throw InternalError("fusion: targets given without a mask");
        fwd.loss = g.softmax_xent(fwd.logits, *targets, *loss_mask);
    }
    return fwd;
}

template <typename S>
Eigen::VectorX<S> FusionNetT<S>::sigma_of(const Forward& fwd, uint32_t e) const {
    if (fwd.sigma >= 0) return fwd.graph.value(fwd.sigma).col(0);
    return Eigen::VectorX<S>::Constant(e, fwd.pinned_sigma);
}

template <typename S>
void FusionNetT<S>::write_back(FusionParams& params) const {
    for (size_t i = 0; i < names_.size(); ++i) {
        params.model.at(names_[i]).value = values_[i].template cast<float>();
    }
}

template class FusionNetT<float>;
template class FusionNetT<double>;

FusionStages fusion_forward(const FusionParams& params, const VoxelBatch& batch,
                            Modality modality, bool training) {
    FusionNet net(params);
    auto fwd = net.run(batch, modality, training);
    FusionStages stages;
    if (fwd.local >= 0) stages.local = fwd.graph.value(fwd.local);
    if (fwd.global >= 0) stages.global = fwd.graph.value(fwd.global);
    stages.attention = net.sigma_of(fwd, batch.e);
    stages.fused.attention = stages.attention;
    stages.fused.scaled_2d = fwd.graph.value(fwd.scaled2d);
    stages.fused.scaled_3d = fwd.graph.value(fwd.scaled3d);
    stages.fused.fused = fwd.graph.value(fwd.fused);
    stages.logits = fwd.graph.value(fwd.logits);
    return stages;
}

nn::MatF local_feature(const VoxelBatch& batch, const FusionParams& params) {
    if (batch.channels != params.dims.point_channels()) {
        throw ConfigError("local_feature: batch feature width does not match mlp_l fan-in");
    }
    FusionNet net(params);
    nn::Graph<float> g;
    nn::MatF xyz, p2d, p3d;
    slice_batch(batch, xyz, p2d, p3d);
    const int feat = g.concat_cols(g.input((xyz * kCoordScale).eval()), g.input(std::move(p2d)),
                                   g.input(std::move(p3d)));
    const int h = dense_bn_relu(g, feat, g.input(net.tensor("mlp_l.weight")),
                                g.input(net.tensor("mlp_l.bias")),
                                g.input(net.tensor("mlp_l.bn.gamma")),
                                g.input(net.tensor("mlp_l.bn.beta")),
                                net.tensor("mlp_l.bn.running_mean"),
                                net.tensor("mlp_l.bn.running_var"), false);
    return g.value(g.segment_max(h, batch.max_points));
}

nn::MatF global_feature(const nn::MatF& local, const FusionParams& params) {
    if (local.rows() < 1) throw InternalError("global_feature: empty voxel set");
    if (local.cols() != Eigen::Index(params.dims.c1)) {
        throw ConfigError("global_feature: local width does not match mlp_g fan-in");
    }
    FusionNet net(params);
    nn::Graph<float> g;
    const int g0 = dense_bn_relu(g, g.input(local), g.input(net.tensor("mlp_g.weight")),
                                 g.input(net.tensor("mlp_g.bias")),
                                 g.input(net.tensor("mlp_g.bn.gamma")),
                                 g.input(net.tensor("mlp_g.bn.beta")),
                                 net.tensor("mlp_g.bn.running_mean"),
                                 net.tensor("mlp_g.bn.running_var"), false);
    return g.value(g.segment_max(g0, local.rows()));
}

Eigen::VectorXf attention_scores(const nn::MatF& local, const nn::MatF& global,
                                 const FusionParams& params) {
    FusionNet net(params);
    nn::Graph<float> g;
    const int vgl = g.concat_cols(g.input(local), g.broadcast_rows(g.input(global), local.rows()));
    const int a1 = g.relu(g.linear(vgl, g.input(net.tensor("att.fc1.weight")),
                                   g.input(net.tensor("att.fc1.bias"))));
    const int a2 = g.linear(a1, g.input(net.tensor("att.fc2.weight")),
                            g.input(net.tensor("att.fc2.bias")));
    return g.value(g.sigmoid(a2)).col(0);
}

FusedBatch gate_labels(const VoxelBatch& batch, const Eigen::VectorXf& scores) {
    if (scores.size() != Eigen::Index(batch.e)) {
        throw ShapeError("gate_labels: score count does not match voxel count");
    }
    const uint32_t m = (batch.channels - 3) / 2;
    const Eigen::Index rows = Eigen::Index(batch.e) * batch.max_points;
    FusedBatch out;
    out.attention = scores;
    out.scaled_2d.resize(rows, m);
    out.scaled_3d.resize(rows, m);
    out.fused.resize(rows, batch.channels);
    for (uint32_t v = 0; v < batch.e; ++v) {
        const float sigma = scores[v];
        for (uint32_t s = 0; s < batch.max_points; ++s) {
            const float* f = batch.slot(v, s);
            const Eigen::Index r = Eigen::Index(v) * batch.max_points + s;
            for (int c = 0; c < 3; ++c) out.fused(r, c) = f[c];  // exact passthrough
            for (uint32_t c = 0; c < m; ++c) {
                out.scaled_2d(r, c) = sigma * f[3 + c];
                out.scaled_3d(r, c) = (1.0f - sigma) * f[3 + m + c];
                out.fused(r, 3 + c) = out.scaled_2d(r, c);
                out.fused(r, 3 + m + c) = out.scaled_3d(r, c);
            }
        }
    }
    return out;
}

nn::MatF classify_points(const FusedBatch& fused, const FusionParams& params, bool training) {
    if (fused.fused.cols() != Eigen::Index(params.dims.point_channels())) {
        throw ConfigError("classify_points: fused width does not match head fan-in");
    }
    FusionNet net(params);
    nn::Graph<float> g;
    nn::MatF head_in = fused.fused;
    head_in.leftCols(3) *= kCoordScale;
    const int hh = dense_bn_relu(g, g.input(std::move(head_in)), g.input(net.tensor("head.fc1.weight")),
                                 g.input(net.tensor("head.fc1.bias")),
                                 g.input(net.tensor("head.fc1.bn.gamma")),
                                 g.input(net.tensor("head.fc1.bn.beta")),
                                 net.tensor("head.fc1.bn.running_mean"),
                                 net.tensor("head.fc1.bn.running_var"), training);
    return g.value(g.linear(hh, g.input(net.tensor("head.fc2.weight")),
                            g.input(net.tensor("head.fc2.bias"))));
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

}  // namespace

uint32_t export_painted_cloud(const PointCloud& points, const SemanticScores& p2d,
                              const SemanticScores& p3d, const VoxelBatch& batch,
                              const Eigen::VectorXf& sigma, const VoxelConfig& cfg,
                              const std::string& path) {
    if (sigma.size() != Eigen::Index(batch.e)) {
        throw ShapeError("export: sigma count does not match voxel count");
    }
    const uint32_t m = p2d.m;
    std::unordered_map<std::array<int32_t, 3>, uint32_t, CoordHash> voxel_of;
    for (uint32_t v = 0; v < batch.e; ++v) voxel_of[batch.coords[v]] = v;

    uint32_t in_range = 0;
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& p = points.xyz[i];
        if (voxel_index(p[0], p[1], p[2], cfg)) ++in_range;
    }

    io::Writer out(path);
    out.bytes("FPPT", 4);
    out.u32(in_range);
    out.u32(m);
    for (size_t i = 0; i < points.size(); ++i) {
        const auto& p = points.xyz[i];
        const auto idx = voxel_index(p[0], p[1], p[2], cfg);
        if (!idx) continue;
        const auto it = voxel_of.find(*idx);
        if (it == voxel_of.end()) {
            throw InternalError("export: in-range point has no voxel in the batch");
        }
        const float s = sigma[it->second];
        out.f32s(p.data(), 3);
        for (uint32_t c = 0; c < m; ++c) out.f32(s * p2d.row(uint32_t(i))[c]);
        for (uint32_t c = 0; c < m; ++c) out.f32((1.0f - s) * p3d.row(uint32_t(i))[c]);
    }
    out.close();
    return in_range;
}

}  // namespace fp
