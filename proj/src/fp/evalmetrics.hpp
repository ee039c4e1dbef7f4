#pragma once

#include <map>
#include <string>
#include <vector>

#include "fp/geometry.hpp"
#include "fp/nn/model.hpp"

namespace fp {

struct Detection {
    double x = 0.0, y = 0.0;  // BEV center, meters
    int class_id = 0;
    double score = 0.0;  // in [0, 1]
};

struct GroundTruthBox {
    double x = 0.0, y = 0.0;
    int class_id = 0;
};

struct APConfig {
    std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};  // meters, ascending
    int recall_points = 101;

    void validate() const;
};

// Single-linkage clustering per foreground argmax class with BEV distance <=
// radius; clusters with at least min_pts points emit one detection at the
// mean BEV center, scored by the mean class probability.
std::vector<Detection> cluster_detections(const PointCloud& points, const nn::MatF& class_probs,
                                          uint32_t min_pts, double radius);

// Greedy matching in descending score order against the nearest unmatched
// ground truth of the same class within the distance threshold, then
// 101-point interpolated precision-recall integration. Returns 0 when the
// class has no ground truth.
double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts, int class_id, double threshold);

struct MeanApResult {
    bool has_gt = false;  // false: no ground truth at all, mAP undefined
    double map = 0.0;
    std::map<int, double> per_class;        // AP averaged over thresholds
    std::map<double, double> per_threshold; // AP averaged over classes
};

MeanApResult mean_ap(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                     const APConfig& cfg);

// Interchange: JSON lines, one object per detection {center:[x,y], class_id,
// score}; ground truths carry no score.
void save_detections_jsonl(const std::vector<Detection>& dets, const std::string& path);
std::vector<Detection> load_detections_jsonl(const std::string& path);
void save_ground_truth_jsonl(const std::vector<GroundTruthBox>& gts, const std::string& path);
std::vector<GroundTruthBox> load_ground_truth_jsonl(const std::string& path);

}  // namespace fp
