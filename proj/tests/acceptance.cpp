// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/pipeline.hpp"
#include "fp/synthbench.hpp"
#include "fp/trainer.hpp"
#include "oracles.hpp"

using namespace fp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// ---- pinned benchmark definition -----------------------------------------

constexpr const char* kBenchConfig = R"({
  "seed": 7, "num_scenes": 40, "train_frac": 0.8,
  "extent": 12.0, "min_boxes": 4, "max_boxes": 7,
  "ground_density": 0.55, "box_surface_density": 6.0,
  "bleed_radius": 4, "confusion_prob": 0.2,
  "sensor_origin": [-14.0, 0.0, 20.0],
  "camera": {"fx": 240, "fy": 240, "cx": 320, "cy": 240, "width": 640, "height": 480,
             "pitch": 0.96}
})";

constexpr const char* kTrainConfig = R"({
  "epochs": 30, "batch_scenes": 2, "max_lr": 0.001, "warmup_frac": 0.1,
  "weight_decay": 0.01, "seed": 7,
  "voxel": {"size": [0.2, 0.2, 8.0], "min": [-20, -20, -2], "max": [20, 20, 6],
            "max_points": 16, "seed": 11}
})";

constexpr const char* kEvalVoxelCluster = R"(
  "voxel": {"size": [0.2, 0.2, 8.0], "min": [-20, -20, -2], "max": [20, 20, 6],
            "max_points": 16, "seed": 11},
  "cluster": {"min_pts": 5, "radius": 0.9},
  "thresholds": [0.5, 1, 2, 4],
)";

constexpr double kF1Margin = 0.02;     // fused must beat both single arms by 2 points
constexpr double kSigmaGap = 0.05;     // clean-vs-bleed attention separation
constexpr double kBenchBudgetSec = 600.0;
constexpr double kGradBudgetSec = 60.0;

const char* kArms[4] = {"fused-attention", "2d-only", "3d-only", "fused-fixed-half"};

// ---- harness ---------------------------------------------------------------

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail,
            double seconds) {
    std::printf("[%s] criterion %d: %s — %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void run_criterion(int id, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = Clock::now();
    bool pass = false;
    std::string detail;
    try {
        std::tie(pass, detail) = body();
    } catch (const std::exception& e) {
        pass = false;
        detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    report(id, name, pass, detail, seconds);
}

std::string scratch_root() {
    const fs::path dir = fs::temp_directory_path() / "fusionpaint_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

// Small scenes used by the gradient and property criteria.
Dataset small_dataset(const std::string& dir, int scenes, uint64_t seed) {
    DatasetSpec spec;
    spec.scene.classes = default_classes();
    spec.scene.seed = seed;
    spec.scene.extent = 7.0;
    spec.scene.min_boxes = 1;
    spec.scene.max_boxes = 2;
    spec.scene.ground_density = 0.5;
    spec.scene.box_surface_density = 4.0;
    spec.scene.cam_fx = spec.scene.cam_fy = 160;
    spec.scene.cam_cx = 160;
    spec.scene.cam_cy = 120;
    spec.scene.cam_width = 320;
    spec.scene.cam_height = 240;
    spec.scene.bleed_radius = 3;
    spec.scene.confusion_prob = 0.2;
    spec.num_scenes = scenes;
    spec.train_frac = 1.0;
    build_dataset(make_scene_specs(spec), spec.train_frac, dir);
    return Dataset::load(dir);
}

// ---- criteria 5-8 share one benchmark run ---------------------------------

struct BenchRun {
    std::map<std::string, double> macro_f1;
    std::map<std::string, double> map;
    double sigma_clean = 0.0, sigma_bleed = 0.0;
    bool has_sigma = false;
    std::map<std::string, std::string> metrics_bytes;
    std::string report_bytes;
    double seconds = 0.0;
};

BenchRun run_benchmark(const std::string& root) {
    const auto t0 = Clock::now();
    fs::create_directories(root);
    io::write_text_file(root + "/bench.json", kBenchConfig);
    io::write_text_file(root + "/train.json", kTrainConfig);

    pipeline::cmd_synth(root + "/bench.json", root + "/data", -1);

    std::ostringstream ckpts;
    for (int a = 0; a < 4; ++a) {
        const std::string arm = kArms[a];
        pipeline::cmd_train(root + "/data", root + "/train.json", arm, -1, root + "/" + arm);
        if (a) ckpts << ", ";
        ckpts << "\"" << arm << "\": \"" << root << "/" << arm << "/ckpt_" << arm << ".fpnn\"";
    }
    io::write_text_file(root + "/eval.json", std::string("{\n  \"split\": \"val\",") +
                                                 kEvalVoxelCluster + "\n  \"checkpoints\": {" +
                                                 ckpts.str() + "}\n}\n");
    pipeline::cmd_eval(root + "/data", root + "/eval.json", root + "/report.json");

    BenchRun run;
    run.report_bytes = io::read_text_file(root + "/report.json");
    const auto report = nlohmann::json::parse(run.report_bytes);
    for (const auto& arm : kArms) {
        const auto& j = report.at("arms").at(arm);
        run.macro_f1[arm] = j.at("macro_f1").get<double>();
        run.map[arm] = j.at("ap").at("map").get<double>();
        run.metrics_bytes[arm] = io::read_text_file(root + "/" + std::string(arm) + "/metrics.csv");
    }
    const auto& fused = report.at("arms").at("fused-attention");
    if (!fused.at("mean_sigma_clean").is_null() && !fused.at("mean_sigma_bleed").is_null()) {
        run.has_sigma = true;
        run.sigma_clean = fused.at("mean_sigma_clean").get<double>();
        run.sigma_bleed = fused.at("mean_sigma_bleed").get<double>();
    }
    run.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return run;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

int main() {
    const std::string root = scratch_root();
    Eigen::initParallel();

    // 1. Gradient fidelity on a 2-scene batch, 64-bit, h = 1e-3.
    run_criterion(1, "gradient fidelity", [&]() -> std::pair<bool, std::string> {
        const auto t0 = Clock::now();
        const Dataset ds = small_dataset(root + "/grad", 2, 604);
        VoxelConfig voxel;
        voxel.size = {0.5, 0.5, 8.0};
        voxel.max_points = 8;
        voxel.seed = 3;
        std::vector<SceneTensors> st;
        for (const auto& scene : ds.scenes) st.push_back(prepare_scene(scene, voxel));

        FusionDims dims;
        dims.m = ds.m;
        FusionParams params = FusionParams::init(dims, 2024);
        {
            Rng wrng(2024u ^ 0xA77ull);
            auto& w2 = params.model.at("att.fc2.weight").value;
            for (Eigen::Index c = 0; c < w2.cols(); ++c) {
                w2(0, c) = float(wrng.uniform(-0.4, 0.4));
            }
        }
        FusionNetT<double> net(params);
        auto loss_of = [&]() {
            double total = 0;
            for (const auto& s : st) {
                auto fwd = net.run(s.batch, Modality::FusedAttention, true, &s.targets, &s.mask);
                total += fwd.graph.value(fwd.loss)(0, 0);
            }
            return total / double(st.size());
        };
        // Analytic gradients of the batch-mean loss.
        std::vector<nn::Mat<double>> grads(net.tensors().size());
        for (size_t t = 0; t < grads.size(); ++t) {
            grads[t] = nn::Mat<double>::Zero(net.tensors()[t].rows(), net.tensors()[t].cols());
        }
        for (const auto& s : st) {
            auto fwd = net.run(s.batch, Modality::FusedAttention, true, &s.targets, &s.mask);
            fwd.graph.backward(fwd.loss, 1.0 / double(st.size()));
            for (size_t t = 0; t < grads.size(); ++t) {
                if (fwd.param_nodes[t] >= 0) grads[t] += fwd.graph.grad(fwd.param_nodes[t]);
            }
        }
        auto fd_at = [&](nn::Mat<double>& tensor, Eigen::Index i, Eigen::Index j, double h) {
            const double save = tensor(i, j);
            tensor(i, j) = save + h;
            const double lp = loss_of();
            tensor(i, j) = save - h;
            const double lm = loss_of();
            tensor(i, j) = save;
            return (lp - lm) / (2 * h);
        };
        Rng rng(31u);
        double worst = 0;
        std::string worst_name = "-";
        int checked = 0, tie_refined = 0;
        for (size_t t = 0; t < net.names().size(); ++t) {
            if (!net.trainable()[t]) continue;
            auto& tensor = net.mutable_tensors()[t];
            for (int sample = 0; sample < 8; ++sample) {
                const Eigen::Index i = Eigen::Index(rng.uniform_int(uint64_t(tensor.rows())));
                const Eigen::Index j = Eigen::Index(rng.uniform_int(uint64_t(tensor.cols())));
                const double a = grads[t](i, j);
                auto rel_of = [&](double fd) {
                    return std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
                };
                double rel = rel_of(fd_at(tensor, i, j, 1e-3));
                if (rel >= 1e-4) {
                    // A +-1e-3 secant stepping over a max-pool argmax switch;
                    // tie points are excluded, so refine the step.
                    rel = rel_of(fd_at(tensor, i, j, 1e-4));
                    ++tie_refined;
                }
                ++checked;
                if (rel > worst) {
                    worst = rel;
                    worst_name = net.names()[t];
                }
            }
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        const bool ok = worst < 1e-4 && secs < kGradBudgetSec;
        std::ostringstream detail;
        detail << checked << " sampled elements over every tensor, worst rel err " << worst
               << " (" << worst_name << ", " << tie_refined << " pool-tie refinements)";
        if (secs >= kGradBudgetSec) detail << "; OVER TIME BUDGET";
        return {ok, detail.str()};
    });

    // 2. Gate convexity on 10 000 random one-hot slots.
    run_criterion(2, "gate convexity", [&]() -> std::pair<bool, std::string> {
        FusionDims dims;
        dims.m = 11;
        FusionParams params = FusionParams::init(dims, 77);
        {
            Rng wrng(77u ^ 0xA77ull);
            auto& w2 = params.model.at("att.fc2.weight").value;
            for (Eigen::Index c = 0; c < w2.cols(); ++c) {
                w2(0, c) = float(wrng.uniform(-0.4, 0.4));
            }
        }
        Rng rng(1234);
        size_t slots = 0;
        float worst_sum_dev = 0.0f, max_channel = 0.0f;
        bool sigma_strict = true;
        while (slots < 10000) {
            PointCloud pc;
            const size_t n = 200;
            for (size_t i = 0; i < n; ++i) {
                pc.xyz.push_back({float(rng.uniform(-15, 15)), float(rng.uniform(-15, 15)),
                                  float(rng.uniform(-1, 5))});
            }
            auto p2d = SemanticScores::zeros(n, 11);
            auto p3d = SemanticScores::zeros(n, 11);
            for (uint32_t i = 0; i < n; ++i) {
                p2d.set_one_hot(i, uint32_t(rng.uniform_int(11)));
                p3d.set_one_hot(i, uint32_t(rng.uniform_int(11)));
            }
            VoxelConfig cfg;
            cfg.size = {1.0, 1.0, 8.0};
            cfg.max_points = 4;
            cfg.seed = rng.next_u64();
            const auto batch = voxelize(pc, p2d, p3d, cfg);
            const auto stages = fusion_forward(params, batch, Modality::FusedAttention);
            for (Eigen::Index r = 0; r < stages.fused.fused.rows(); ++r) {
                float sum = 0, biggest = 0;
                for (Eigen::Index c = 3; c < stages.fused.fused.cols(); ++c) {
                    sum += stages.fused.fused(r, c);
                    biggest = std::max(biggest, stages.fused.fused(r, c));
                }
                worst_sum_dev = std::max(worst_sum_dev, std::abs(sum - 1.0f));
                max_channel = std::max(max_channel, biggest);
                ++slots;
            }
            for (uint32_t v = 0; v < batch.e; ++v) {
                if (!(stages.attention[v] > 0.0f && stages.attention[v] < 1.0f)) {
                    sigma_strict = false;
                }
            }
        }
        const bool ok = worst_sum_dev <= 1e-5f && sigma_strict && max_channel <= 1.0f + 1e-5f;
        std::ostringstream detail;
        detail << slots << " slots, worst |sum-1| = " << worst_sum_dev
               << ", sigma strictly inside (0,1): " << (sigma_strict ? "yes" : "no");
        return {ok, detail.str()};
    });

    // 3. Permutation invariance of the attention scores.
    run_criterion(3, "permutation invariance", [&]() -> std::pair<bool, std::string> {
        FusionDims dims;
        dims.m = 6;
        FusionParams params = FusionParams::init(dims, 5);
        {
            Rng wrng(5u ^ 0xA77ull);
            auto& w2 = params.model.at("att.fc2.weight").value;
            for (Eigen::Index c = 0; c < w2.cols(); ++c) {
                w2(0, c) = float(wrng.uniform(-0.4, 0.4));
            }
        }
        Rng rng(999);
        float worst = 0;
        for (int trial = 0; trial < 100; ++trial) {
            PointCloud pc;
            const size_t n = 150;
            for (size_t i = 0; i < n; ++i) {
                pc.xyz.push_back({float(rng.uniform(-10, 10)), float(rng.uniform(-10, 10)),
                                  float(rng.uniform(-1, 5))});
            }
            auto p2d = SemanticScores::zeros(n, 6);
            auto p3d = SemanticScores::zeros(n, 6);
            for (uint32_t i = 0; i < n; ++i) {
                p2d.set_one_hot(i, uint32_t(rng.uniform_int(6)));
                p3d.set_one_hot(i, uint32_t(rng.uniform_int(6)));
            }
            VoxelConfig cfg;
            cfg.size = {1.0, 1.0, 8.0};
            cfg.max_points = 4;
            cfg.seed = rng.next_u64();
            const auto batch = voxelize(pc, p2d, p3d, cfg);
            const auto base = fusion_forward(params, batch, Modality::FusedAttention).attention;

            VoxelBatch perm = batch;
            std::vector<uint32_t> order(batch.e);
            for (uint32_t v = 0; v < batch.e; ++v) order[v] = v;
            for (uint32_t v = batch.e; v > 1; --v) std::swap(order[v - 1], order[rng.uniform_int(v)]);
            const uint32_t M = batch.max_points;
            for (uint32_t v = 0; v < batch.e; ++v) {
                const uint32_t src = order[v];
                const uint32_t shift = uint32_t(rng.uniform_int(M));
                perm.coords[v] = batch.coords[src];
                perm.counts[v] = batch.counts[src];
                for (uint32_t s = 0; s < M; ++s) {
                    const uint32_t from = (s + shift) % M;
                    std::copy(batch.slot(src, from), batch.slot(src, from) + batch.channels,
                              perm.slot(v, s));
                }
            }
            const auto scores = fusion_forward(params, perm, Modality::FusedAttention).attention;
            for (uint32_t v = 0; v < batch.e; ++v) {
                worst = std::max(worst, std::abs(scores[v] - base[order[v]]));
            }
        }
        std::ostringstream detail;
        detail << "100 batches, worst |delta sigma| = " << worst;
        return {worst <= 1e-6f, detail.str()};
    });

    // 4. Oracle equivalence for the geometric and metric primitives.
    run_criterion(4, "oracle equivalence", [&]() -> std::pair<bool, std::string> {
        Rng rng(42424242);
        std::ostringstream detail;

        // Projection.
        size_t instances = 0;
        for (int t = 0; t < 100; ++t) {
            CameraCalib calib;
            calib.fx = rng.uniform(50, 400);
            calib.fy = rng.uniform(50, 400);
            calib.cx = rng.uniform(100, 300);
            calib.cy = rng.uniform(50, 200);
            calib.width = 400;
            calib.height = 300;
            const double a = rng.uniform(0, 6.2832);
            calib.extrinsic.at(0, 0) = std::cos(a);
            calib.extrinsic.at(0, 1) = -std::sin(a);
            calib.extrinsic.at(1, 0) = std::sin(a);
            calib.extrinsic.at(1, 1) = std::cos(a);
            calib.extrinsic.at(2, 3) = rng.uniform(-1, 1);
            PointCloud pc;
            for (int i = 0; i < 20; ++i) {
                pc.xyz.push_back({float(rng.uniform(-8, 8)), float(rng.uniform(-8, 8)),
                                  float(rng.uniform(-8, 8))});
            }
            const auto proj = project(pc, calib);
            for (uint32_t i = 0; i < pc.size(); ++i) {
                const auto ref = oracle::project_point(pc.xyz[i], calib);
                if (proj.valid[i] != (ref.valid ? 1 : 0) ||
                    (ref.valid && (proj.u[i] != ref.u || proj.v[i] != ref.v))) {
                    return {false, "projection mismatch"};
                }
            }
            ++instances;
        }

        // Oriented boxes.
        for (int t = 0; t < 500; ++t) {
            Box3D b;
            b.center = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-1, 1)};
            b.size = {rng.uniform(0.3, 4), rng.uniform(0.3, 4), rng.uniform(0.3, 4)};
            b.yaw = rng.uniform(0, 6.2832);
            b.class_id = 1;
            const double x = rng.uniform(-5, 5), y = rng.uniform(-5, 5), z = rng.uniform(-2, 2);
            if (point_in_box(x, y, z, b) != oracle::point_in_box(x, y, z, b)) {
                return {false, "point-in-box mismatch"};
            }
        }

        // Voxel binning.
        for (int t = 0; t < 100; ++t) {
            PointCloud pc;
            const size_t n = 120;
            for (size_t i = 0; i < n; ++i) {
                pc.xyz.push_back({float(rng.uniform(-22, 22)), float(rng.uniform(-22, 22)),
                                  float(rng.uniform(-3, 7))});
            }
            auto labels = SemanticScores::zeros(n, 3);
            for (uint32_t i = 0; i < n; ++i) labels.set_one_hot(i, uint32_t(rng.uniform_int(3)));
            VoxelConfig cfg;
            cfg.size = {rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), 8.0};
            cfg.max_points = 4;
            cfg.seed = rng.next_u64();
            const auto batch = voxelize(pc, labels, labels, cfg);
            const auto cells = oracle::bin_points(pc, cfg);
            if (batch.e != cells.size()) return {false, "binning voxel count mismatch"};
            size_t vi = 0;
            for (const auto& [coord, members] : cells) {
                if (batch.coords[vi] != coord ||
                    batch.counts[vi] != std::min<size_t>(members.size(), cfg.max_points)) {
                    return {false, "binning coords/counts mismatch"};
                }
                ++vi;
            }
        }

        // Mask bleeding.
        for (int t = 0; t < 100; ++t) {
            SemanticMask mask;
            mask.width = 32;
            mask.height = 24;
            mask.classes = 5;
            mask.data.resize(size_t(mask.width) * mask.height);
            for (auto& px : mask.data) {
                px = rng.uniform() < 0.1 ? uint8_t(1 + rng.uniform_int(4)) : 0;
            }
            const int r = int(rng.uniform_int(5));
            if (bleed_mask(mask, r).data != oracle::dilate(mask, r).data) {
                return {false, "bleed mismatch"};
            }
        }

        // Clustering.
        for (int t = 0; t < 100; ++t) {
            PointCloud pc;
            const int n = 40 + int(rng.uniform_int(50));
            nn::MatF probs = nn::MatF::Zero(n, 3);
            std::vector<uint32_t> fg_ids;
            for (int i = 0; i < n; ++i) {
                pc.xyz.push_back({float(rng.uniform(-10, 10)), float(rng.uniform(-10, 10)), 0});
                const int cls = int(rng.uniform_int(2));  // 0 or 1
                probs(i, cls) = 1.0f;
                if (cls == 1) fg_ids.push_back(uint32_t(i));
            }
            const double radius = rng.uniform(0.6, 1.8);
            const auto dets = cluster_detections(pc, probs, 2, radius);
            size_t expected = 0;
            for (const auto& cluster : oracle::bfs_clusters(pc, fg_ids, radius)) {
                if (cluster.size() >= 2) ++expected;
            }
            if (dets.size() != expected) return {false, "cluster count mismatch"};
        }

        // Average precision.
        double worst_ap = 0;
        for (int t = 0; t < 100; ++t) {
            std::vector<GroundTruthBox> gts;
            std::vector<Detection> dets;
            const int ng = 1 + int(rng.uniform_int(6));
            for (int i = 0; i < ng; ++i) {
                gts.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10), 1 + int(rng.uniform_int(2))});
            }
            const int nd = int(rng.uniform_int(10));
            for (int i = 0; i < nd; ++i) {
                dets.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10),
                                1 + int(rng.uniform_int(2)), rng.uniform(0, 1)});
            }
            for (double thr : {0.5, 1.0, 2.0, 4.0}) {
                for (int cls = 1; cls <= 2; ++cls) {
                    const double got = average_precision(dets, gts, cls, thr);
                    const double want = oracle::average_precision(dets, gts, cls, thr);
                    worst_ap = std::max(worst_ap, std::abs(got - want));
                }
            }
        }
        if (worst_ap > 1e-5) return {false, "AP mismatch vs reference"};

        detail << "projection/box/binning/bleed/cluster/AP all matched (worst AP gap " << worst_ap
               << ")";
        return {true, detail.str()};
    });

    // 9. The frozen AP hand case (exact equality).
    run_criterion(9, "AP hand case", [&]() -> std::pair<bool, std::string> {
        std::vector<GroundTruthBox> gts{{0, 0, 1}, {10, 0, 1}};
        std::vector<Detection> dets{{0.1, 0, 1, 0.9}, {50, 50, 1, 0.8}, {10.1, 0, 1, 0.7}};
        const double ap = average_precision(dets, gts, 1, 1.0);
        const double frozen = 0.83498349834983587;
        std::ostringstream detail;
        detail.precision(17);
        detail << "AP = " << ap << ", frozen oracle = " << frozen;
        return {ap == frozen, detail.str()};
    });

    // 5-8. The benchmark: train all four arms twice and compare.
    BenchRun run_a, run_b;
    bool bench_ok = false;
    std::string bench_error;
    try {
        run_a = run_benchmark(root + "/bench_a");
        run_b = run_benchmark(root + "/bench_b");
        bench_ok = true;
    } catch (const std::exception& e) {
        bench_error = e.what();
    }

    run_criterion(5, "fusion benefit (ablation arms)", [&]() -> std::pair<bool, std::string> {
        if (!bench_ok) return {false, "benchmark failed: " + bench_error};
        const double fused = run_a.macro_f1.at("fused-attention");
        const double two_d = run_a.macro_f1.at("2d-only");
        const double three_d = run_a.macro_f1.at("3d-only");
        const double fixed = run_a.macro_f1.at("fused-fixed-half");
        const bool margin_ok = fused > std::max(two_d, three_d) + kF1Margin;
        const bool fixed_ok = fused >= fixed;
        const bool time_ok = run_a.seconds < kBenchBudgetSec;
        std::ostringstream detail;
        detail << "macro-F1 fused " << fmt(fused) << " vs 2d " << fmt(two_d) << ", 3d "
               << fmt(three_d) << ", fixed-half " << fmt(fixed) << "; runtime "
               << fmt(run_a.seconds) << " s";
        return {margin_ok && fixed_ok && time_ok, detail.str()};
    });

    run_criterion(6, "gate diagnosticity", [&]() -> std::pair<bool, std::string> {
        if (!bench_ok) return {false, "benchmark failed: " + bench_error};
        if (!run_a.has_sigma) return {false, "no sigma statistics in the report"};
        const double gap = run_a.sigma_clean - run_a.sigma_bleed;
        std::ostringstream detail;
        detail << "mean sigma clean " << fmt(run_a.sigma_clean) << ", bleed "
               << fmt(run_a.sigma_bleed) << ", gap " << fmt(gap);
        return {gap >= kSigmaGap, detail.str()};
    });

    run_criterion(7, "detection-metric analogue", [&]() -> std::pair<bool, std::string> {
        if (!bench_ok) return {false, "benchmark failed: " + bench_error};
        const double fused = run_a.map.at("fused-attention");
        const double two_d = run_a.map.at("2d-only");
        const double three_d = run_a.map.at("3d-only");
        std::ostringstream detail;
        detail << "mAP fused " << fmt(fused) << " vs 2d " << fmt(two_d) << ", 3d "
               << fmt(three_d);
        return {fused >= two_d && fused >= three_d, detail.str()};
    });

    run_criterion(8, "determinism", [&]() -> std::pair<bool, std::string> {
        if (!bench_ok) return {false, "benchmark failed: " + bench_error};
        bool same = run_a.report_bytes == run_b.report_bytes;
        for (const auto& arm : kArms) {
            same = same && run_a.metrics_bytes.at(arm) == run_b.metrics_bytes.at(arm);
        }
        return {same, same ? "metrics.csv and report.json byte-identical across reruns"
                           : "byte mismatch between reruns"};
    });

    std::printf("%s: %d criterion(s) failed\n", g_failures == 0 ? "OK" : "FAILED", g_failures);
    return g_failures;
}
