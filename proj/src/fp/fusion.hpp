#pragma once

#include <string>
#include <vector>

#include "fp/nn/model.hpp"
#include "fp/voxelgrid.hpp"

namespace fp {

struct FusionDims {
    uint32_t m = 11;    // class count including background
    uint32_t c1 = 64;   // local feature width
    uint32_t c2 = 128;  // global feature width
    uint32_t att_hidden = 64;
    uint32_t head_hidden = 64;

    uint32_t point_channels() const { return 3 + 2 * m; }
};

// Fixed scaling applied to the coordinate channels before any MLP consumes
// them, bringing meter-scale inputs onto the same footing as the one-hot
// label channels. Feature buffers, files and the fused passthrough keep raw
// coordinates; this is part of the network definition only.
constexpr float kCoordScale = 0.05f;

// Weights of mlp_l, mlp_g, mlp_att and the per-point classifier head, plus
// batch-norm running statistics. The only trainable state in the pipeline.
struct FusionParams {
    FusionDims dims;
    nn::Model model;

    static FusionParams init(const FusionDims& dims, uint64_t seed);
    void save(const std::string& path) const;
    static FusionParams load(const std::string& path);
};

enum class Modality { TwoDOnly, ThreeDOnly, FusedFixedHalf, FusedAttention };

Modality modality_from_string(const std::string& s);
std::string modality_to_string(Modality m);

// Per-voxel gate applied to the label channels: 2D scores scaled by sigma,
// 3D scores by (1 - sigma), coordinates passed through untouched.
struct FusedBatch {
    Eigen::VectorXf attention;  // e
    nn::MatF scaled_2d;         // (e*M) x m
    nn::MatF scaled_3d;         // (e*M) x m
    nn::MatF fused;             // (e*M) x (3 + 2m)
};

// Typed instantiation of the network for one scalar type. float is the
// training/eval path; double backs the finite-difference gradient checks.
template <typename S>
class FusionNetT {
public:
    explicit FusionNetT(const FusionParams& params);

    struct Forward {
        nn::Graph<S> graph;
        std::vector<int> param_nodes;  // parallel to model tensors, -1 where unused
        int local = -1;
        int global = -1;
        int sigma = -1;   // -1 when the modality pins sigma
        int scaled2d = -1;
        int scaled3d = -1;
        int fused = -1;
        int logits = -1;
        int loss = -1;
        S pinned_sigma = S(-1);  // >= 0 when the modality pins the gate
    };

    // Builds the forward graph over one voxel batch. targets/loss_mask are
    // optional; when given, a masked cross-entropy loss node is appended.
    Forward run(const VoxelBatch& batch, Modality modality, bool training,
                const std::vector<int32_t>* targets = nullptr,
                const std::vector<uint8_t>* loss_mask = nullptr);

    // Per-voxel attention values of a finished forward (pinned or learned).
    Eigen::VectorX<S> sigma_of(const Forward& fwd, uint32_t e) const;

    // Copies values (including running stats updated by training forwards)
    // back into a float model.
    void write_back(FusionParams& params) const;

    nn::Mat<S>& tensor(const std::string& name);
    const std::vector<nn::Mat<S>>& tensors() const { return values_; }
    std::vector<nn::Mat<S>>& mutable_tensors() { return values_; }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<uint8_t>& trainable() const { return trainable_; }
    const std::vector<uint8_t>& decay() const { return decay_; }
    const FusionDims& dims() const { return dims_; }

private:
    FusionDims dims_;
    std::vector<std::string> names_;
    std::vector<nn::Mat<S>> values_;
    std::vector<uint8_t> trainable_;
    std::vector<uint8_t> decay_;
    int idx(const std::string& name) const;
};

using FusionNet = FusionNetT<float>;

// Named stages of one forward pass, evaluated with running statistics unless
// training is set.
struct FusionStages {
    nn::MatF local;       // e x C1
    nn::MatF global;      // 1 x C2
    Eigen::VectorXf attention;
    FusedBatch fused;
    nn::MatF logits;      // (e*M) x m
};

FusionStages fusion_forward(const FusionParams& params, const VoxelBatch& batch,
                            Modality modality, bool training = false);

// Individual stage entry points.
nn::MatF local_feature(const VoxelBatch& batch, const FusionParams& params);
nn::MatF global_feature(const nn::MatF& local, const FusionParams& params);
Eigen::VectorXf attention_scores(const nn::MatF& local, const nn::MatF& global,
                                 const FusionParams& params);
FusedBatch gate_labels(const VoxelBatch& batch, const Eigen::VectorXf& scores);
nn::MatF classify_points(const FusedBatch& fused, const FusionParams& params,
                         bool training = false);

// Painted point file: header (magic "FPPT", u32 n, u32 m), then one
// (3 + 2m)-float record per in-range point: xyz, sigma-scaled 2D scores,
// (1-sigma)-scaled 3D scores. Points dropped by slot sampling still receive
// their voxel's sigma. Returns the record count.
uint32_t export_painted_cloud(const PointCloud& points, const SemanticScores& p2d,
                              const SemanticScores& p3d, const VoxelBatch& batch,
                              const Eigen::VectorXf& sigma, const VoxelConfig& cfg,
                              const std::string& path);

}  // namespace fp
