#include "fp/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "fp/binio.hpp"
#include "fp/common.hpp"

namespace fp {

void APConfig::validate() const {
    if (thresholds.empty()) throw ConfigError("ap: need at least one distance threshold");
    for (size_t i = 0; i < thresholds.size(); ++i) {
        if (!(thresholds[i] > 0.0)) throw ConfigError("ap: thresholds must be positive");
        if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
            throw ConfigError("ap: thresholds must be sorted ascending");
        }
    }
    if (recall_points < 2) throw ConfigError("ap: recall sampling needs at least 2 points");
}

namespace {

struct UnionFind {
    std::vector<uint32_t> parent;
    explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0u); }
    uint32_t find(uint32_t a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    }
    void unite(uint32_t a, uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

struct CellHash {
    size_t operator()(const std::pair<int64_t, int64_t>& c) const {
        return size_t(uint64_t(c.first) * 0x9E3779B97F4A7C15ull ^ uint64_t(c.second));
    }
};

}  // namespace

std::vector<Detection> cluster_detections(const PointCloud& points, const nn::MatF& class_probs,
                                          uint32_t min_pts, double radius) {
    if (!(radius > 0.0)) throw ConfigError("cluster: radius must be positive");
    if (class_probs.rows() != Eigen::Index(points.size())) {
        throw ShapeError("cluster: probability row count does not match point count");
    }
    const int m = int(class_probs.cols());
    const double r2 = radius * radius;

    std::vector<Detection> detections;
    std::vector<uint32_t> ids;
    for (int cls = 1; cls < m; ++cls) {
        ids.clear();
        for (uint32_t i = 0; i < points.size(); ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < m; ++c) {
                if (class_probs(i, c) > class_probs(i, best)) best = c;
            }
            if (best == cls) ids.push_back(i);
        }
        if (ids.size() < min_pts) continue;

        // Bucket the BEV plane at the linking radius so only neighbor cells
        // need pairwise checks.
        std::unordered_map<std::pair<int64_t, int64_t>, std::vector<uint32_t>, CellHash> buckets;
        auto cell_of = [&](uint32_t id) {
            return std::make_pair(int64_t(std::floor(points.xyz[id][0] / radius)),
                                  int64_t(std::floor(points.xyz[id][1] / radius)));
        };
        for (uint32_t k = 0; k < ids.size(); ++k) buckets[cell_of(ids[k])].push_back(k);

        UnionFind uf(ids.size());
        for (uint32_t k = 0; k < ids.size(); ++k) {
            const auto cell = cell_of(ids[k]);
            const auto& pk = points.xyz[ids[k]];
            for (int64_t dx = -1; dx <= 1; ++dx) {
                for (int64_t dy = -1; dy <= 1; ++dy) {
                    const auto it = buckets.find({cell.first + dx, cell.second + dy});
                    if (it == buckets.end()) continue;
                    for (uint32_t j : it->second) {
                        if (j <= k) continue;
                        const auto& pj = points.xyz[ids[j]];
                        const double ddx = double(pk[0]) - double(pj[0]);
                        const double ddy = double(pk[1]) - double(pj[1]);
                        if (ddx * ddx + ddy * ddy <= r2) uf.unite(k, j);
                    }
                }
            }
        }

        std::map<uint32_t, std::vector<uint32_t>> clusters;  // root -> member ids
        for (uint32_t k = 0; k < ids.size(); ++k) clusters[uf.find(k)].push_back(ids[k]);
        for (const auto& [root, members] : clusters) {
            if (members.size() < min_pts) continue;
            Detection det;
            det.class_id = cls;
            double score = 0.0;
            for (uint32_t id : members) {
                det.x += points.xyz[id][0];
                det.y += points.xyz[id][1];
                score += double(class_probs(id, cls));
            }
            det.x /= double(members.size());
            det.y /= double(members.size());
            det.score = score / double(members.size());
            detections.push_back(det);
        }
    }
    return detections;
}

double average_precision(const std::vector<Detection>& dets,
                         const std::vector<GroundTruthBox>& gts, int class_id, double threshold) {
    if (!(threshold > 0.0)) throw ConfigError("ap: threshold must be positive");
    std::vector<const GroundTruthBox*> gt;
    for (const auto& g : gts) {
        if (g.class_id == class_id) gt.push_back(&g);
    }
    if (gt.empty()) return 0.0;

    std::vector<uint32_t> order;
    for (uint32_t i = 0; i < dets.size(); ++i) {
        if (dets[i].class_id == class_id) order.push_back(i);
    }
    // Descending score; equal scores keep detection-index order.
    std::stable_sort(order.begin(), order.end(),
                     [&](uint32_t a, uint32_t b) { return dets[a].score > dets[b].score; });

    std::vector<uint8_t> matched(gt.size(), 0);
    std::vector<double> precision, recall;
    uint64_t tp = 0, fp = 0;
    for (uint32_t id : order) {
        const auto& d = dets[id];
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (size_t g = 0; g < gt.size(); ++g) {
            if (matched[g]) continue;
            const double dx = d.x - gt[g]->x;
            const double dy = d.y - gt[g]->y;
            const double d2 = dx * dx + dy * dy;
            if (d2 < best_d2) {
                best = int(g);
                best_d2 = d2;
            }
        }
        if (best >= 0 && best_d2 <= threshold * threshold) {
            matched[size_t(best)] = 1;
            ++tp;
        } else {
            ++fp;
        }
        precision.push_back(double(tp) / double(tp + fp));
        recall.push_back(double(tp) / double(gt.size()));
    }

    // 101-point interpolation: the max precision at recall >= each sample.
    double ap = 0.0;
    for (int k = 0; k <= 100; ++k) {
        const double r = double(k) / 100.0;
        double best = 0.0;
        for (size_t i = 0; i < precision.size(); ++i) {
            if (recall[i] >= r && precision[i] > best) best = precision[i];
        }
        ap += best;
    }
    return ap / 101.0;
}

MeanApResult mean_ap(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts,
                     const APConfig& cfg) {
    cfg.validate();
    MeanApResult result;
    std::set<int> classes;
    for (const auto& g : gts) classes.insert(g.class_id);
    if (classes.empty()) return result;  // explicit no-ground-truth outcome
    result.has_gt = true;

    double total = 0.0;
    for (double thr : cfg.thresholds) result.per_threshold[thr] = 0.0;
    for (int cls : classes) {
        double class_sum = 0.0;
        for (double thr : cfg.thresholds) {
            const double ap = average_precision(dets, gts, cls, thr);
            class_sum += ap;
            result.per_threshold[thr] += ap;
            total += ap;
        }
        result.per_class[cls] = class_sum / double(cfg.thresholds.size());
    }
    for (auto& [thr, sum] : result.per_threshold) sum /= double(classes.size());
    result.map = total / double(classes.size() * cfg.thresholds.size());
    return result;
}

void save_detections_jsonl(const std::vector<Detection>& dets, const std::string& path) {
    std::ostringstream out;
    for (const auto& d : dets) {
        nlohmann::json j{{"center", {d.x, d.y}}, {"class_id", d.class_id}, {"score", d.score}};
        out << j.dump() << "\n";
    }
    io::write_text_file(path, out.str());
}

std::vector<Detection> load_detections_jsonl(const std::string& path) {
    std::istringstream in(io::read_text_file(path));
    std::vector<Detection> dets;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            Detection d;
            d.x = j.at("center").at(0).get<double>();
            d.y = j.at("center").at(1).get<double>();
            d.class_id = j.at("class_id").get<int>();
            d.score = j.at("score").get<double>();
            dets.push_back(d);
        } catch (const nlohmann::json::exception& e) {
            std::ostringstream msg;
            msg << "detections " << path << " line " << lineno << ": " << e.what();
            throw DataError(msg.str());
        }
    }
    return dets;
}

void save_ground_truth_jsonl(const std::vector<GroundTruthBox>& gts, const std::string& path) {
    std::ostringstream out;
    for (const auto& g : gts) {
        nlohmann::json j{{"center", {g.x, g.y}}, {"class_id", g.class_id}};
        out << j.dump() << "\n";
    }
    io::write_text_file(path, out.str());
}

std::vector<GroundTruthBox> load_ground_truth_jsonl(const std::string& path) {
    std::istringstream in(io::read_text_file(path));
    std::vector<GroundTruthBox> gts;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            GroundTruthBox g;
            g.x = j.at("center").at(0).get<double>();
            g.y = j.at("center").at(1).get<double>();
            g.class_id = j.at("class_id").get<int>();
            gts.push_back(g);
        } catch (const nlohmann::json::exception& e) {
            std::ostringstream msg;
            msg << "ground truth " << path << " line " << lineno << ": " << e.what();
            throw DataError(msg.str());
        }
    }
    return gts;
}

}  // namespace fp
