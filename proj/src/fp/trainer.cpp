#include "fp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace fp {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Confusion-matrix accumulator over non-pad slots.
struct Tally {
    uint32_t m = 0;
    std::vector<uint64_t> confusion;  // m x m, [true][pred]
    double loss_sum = 0.0;
    uint64_t loss_batches = 0;
    double sigma_clean_sum = 0.0, sigma_bleed_sum = 0.0;
    uint64_t clean_voxels = 0, bleed_voxels = 0;

    explicit Tally(uint32_t classes) : m(classes), confusion(size_t(classes) * classes, 0) {}

    void add_slots(const nn::MatF& logits, const SceneTensors& st) {
        for (Eigen::Index r = 0; r < logits.rows(); ++r) {
            if (!st.mask[size_t(r)]) continue;
            Eigen::Index pred = 0;
            for (Eigen::Index c = 1; c < logits.cols(); ++c) {
                if (logits(r, c) > logits(r, pred)) pred = c;
            }
            confusion[size_t(st.targets[size_t(r)]) * m + size_t(pred)] += 1;
        }
    }

    void add_sigma(const Eigen::VectorXf& sigma, const std::vector<uint8_t>& voxel_bleed) {
        for (Eigen::Index v = 0; v < sigma.size(); ++v) {
            if (voxel_bleed[size_t(v)]) {
                sigma_bleed_sum += sigma[v];
                ++bleed_voxels;
            } else {
                sigma_clean_sum += sigma[v];
                ++clean_voxels;
            }
        }
    }

    void fill(EvalResult& out) const {
        out.per_class.assign(m, ClassPRF{});
        uint64_t correct = 0, total = 0;
        for (uint32_t t = 0; t < m; ++t) {
            for (uint32_t p = 0; p < m; ++p) {
                const uint64_t c = confusion[size_t(t) * m + p];
                total += c;
                if (t == p) correct += c;
                out.per_class[t].support += c;
                out.per_class[p].predicted += c;
            }
        }
        double f1_sum = 0.0;
        uint32_t f1_count = 0;
        for (uint32_t c = 0; c < m; ++c) {
            auto& prf = out.per_class[c];
            prf.present = prf.support > 0 || prf.predicted > 0;
            const uint64_t tp = confusion[size_t(c) * m + c];
            prf.precision = prf.predicted > 0 ? double(tp) / double(prf.predicted) : 0.0;
            prf.recall = prf.support > 0 ? double(tp) / double(prf.support) : 0.0;
            prf.f1 = (prf.precision + prf.recall) > 0.0
                         ? 2.0 * prf.precision * prf.recall / (prf.precision + prf.recall)
                         : 0.0;
            if (prf.present) {
                f1_sum += prf.f1;
                ++f1_count;
            }
        }
        out.accuracy = total > 0 ? double(correct) / double(total) : 0.0;
        out.macro_f1 = f1_count > 0 ? f1_sum / double(f1_count) : 0.0;
        out.loss = loss_batches > 0 ? loss_sum / double(loss_batches) : 0.0;
        out.mean_sigma_clean = clean_voxels > 0 ? sigma_clean_sum / double(clean_voxels) : 0.0;
        out.mean_sigma_bleed = bleed_voxels > 0 ? sigma_bleed_sum / double(bleed_voxels) : 0.0;
        out.clean_voxels = clean_voxels;
        out.bleed_voxels = bleed_voxels;
    }
};

EpochRow row_from(const EvalResult& r, int epoch, const std::string& split) {
    EpochRow row;
    row.epoch = epoch;
    row.split = split;
    row.loss = r.loss;
    row.accuracy = r.accuracy;
    row.macro_f1 = r.macro_f1;
    row.mean_sigma_clean = r.mean_sigma_clean;
    row.mean_sigma_bleed = r.mean_sigma_bleed;
    row.clean_voxels = r.clean_voxels;
    row.bleed_voxels = r.bleed_voxels;
    return row;
}

EvalResult evaluate_prepared(FusionNet& net, const std::vector<const SceneTensors*>& scenes,
                             Modality modality, uint32_t m) {
    Tally tally(m);
    for (const SceneTensors* st : scenes) {
        auto fwd = net.run(st->batch, modality, /*training=*/false, &st->targets, &st->mask);
        tally.loss_sum += double(fwd.graph.value(fwd.loss)(0, 0));
        tally.loss_batches += 1;
        tally.add_slots(fwd.graph.value(fwd.logits), *st);
        tally.add_sigma(net.sigma_of(fwd, st->batch.e), st->voxel_bleed);
    }
    EvalResult out;
    tally.fill(out);
    return out;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_scenes < 1) throw ConfigError("train: batch size must be >= 1");
    if (!(max_lr >= 0.0)) throw ConfigError("train: max_lr must be >= 0");
    if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0)) {
        throw ConfigError("train: warmup fraction must lie in [0, 1]");
    }
    if (!(gate_freeze_frac >= 0.0 && gate_freeze_frac <= 1.0)) {
        throw ConfigError("train: gate freeze fraction must lie in [0, 1]");
    }
    voxel.validate();
}

SceneTensors prepare_scene(const LoadedScene& scene, const VoxelConfig& cfg) {
    SceneTensors st;
    st.batch = voxelize(scene.points, scene.p2d, scene.p3d, cfg);
    const uint32_t M = st.batch.max_points;
    const size_t slots = size_t(st.batch.e) * M;
    st.targets.resize(slots);
    st.mask.resize(slots);
    st.voxel_bleed.assign(st.batch.e, 0);
    for (uint32_t v = 0; v < st.batch.e; ++v) {
        for (uint32_t s = 0; s < M; ++s) {
            const size_t slot = size_t(v) * M + s;
            const uint32_t pt = st.batch.point_index[slot];
            st.targets[slot] = static_cast<int32_t>(scene.labels[pt]);
            st.mask[slot] = st.batch.pad_mask[slot] ? 0 : 1;
            if (!st.batch.pad_mask[slot] && scene.labels[pt] == 0 && scene.p2d.argmax(pt) != 0) {
                st.voxel_bleed[v] = 1;
            }
        }
    }
    return st;
}

double lr_at(const TrainConfig& cfg, int64_t step, int64_t total_steps) {
    const int64_t warmup = std::max<int64_t>(0, llround(cfg.warmup_frac * double(total_steps)));
    if (step < warmup) return cfg.max_lr * double(step + 1) / double(warmup);
    const int64_t span = std::max<int64_t>(1, total_steps - warmup);
    const double progress = double(step + 1 - warmup) / double(span);
    return 0.5 * cfg.max_lr * (1.0 + std::cos(kPi * progress));
}

TrainResult train(const TrainConfig& cfg, const Dataset& dataset) {
    cfg.validate();
    if (dataset.train_indices.empty()) throw ConfigError("train: dataset has no training scenes");

    std::vector<SceneTensors> tensors(dataset.scenes.size());
    for (size_t i = 0; i < dataset.scenes.size(); ++i) {
        tensors[i] = prepare_scene(dataset.scenes[i], cfg.voxel);
    }

    FusionDims dims;
    dims.m = dataset.m;
    FusionParams params = FusionParams::init(dims, cfg.seed);
    FusionNet net(params);
    nn::AdamWConfig opt_cfg;
    opt_cfg.weight_decay = cfg.weight_decay;
    nn::AdamW adam(net.tensors(), net.trainable(), net.decay(), opt_cfg);

    const size_t n_train = dataset.train_indices.size();
    const int64_t steps_per_epoch =
        int64_t((n_train + size_t(cfg.batch_scenes) - 1) / size_t(cfg.batch_scenes));
    const int64_t total_steps = steps_per_epoch * cfg.epochs;

    std::vector<nn::MatF> grads(net.tensors().size());
    std::vector<size_t> order(dataset.train_indices);
    Rng rng(cfg.seed);

    const int64_t gate_unfreeze_step =
        llround(cfg.gate_freeze_frac * double(total_steps));
    std::vector<uint8_t> is_gate(net.tensors().size(), 0);
    for (size_t t = 0; t < net.names().size(); ++t) {
        if (net.names()[t].rfind("att.", 0) == 0) is_gate[t] = 1;
    }

    TrainResult result;
    result.params = params;
    int64_t step = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Fisher-Yates with the session RNG; std::shuffle is not
        // implementation-stable.
        Rng erng = rng.fork(uint64_t(epoch));
        for (size_t i = order.size(); i > 1; --i) {
            const size_t j = size_t(erng.uniform_int(i));
            std::swap(order[i - 1], order[j]);
        }

        Tally epoch_tally(dataset.m);
        for (size_t begin = 0; begin < order.size(); begin += size_t(cfg.batch_scenes)) {
            const size_t end = std::min(order.size(), begin + size_t(cfg.batch_scenes));
            const float inv_batch = 1.0f / float(end - begin);
            for (auto& g : grads) g.resize(0, 0);
            double batch_loss = 0.0;
            for (size_t k = begin; k < end; ++k) {
                const SceneTensors& st = tensors[order[k]];
                auto fwd = net.run(st.batch, cfg.modality, /*training=*/true, &st.targets, &st.mask);
                const double loss = double(fwd.graph.value(fwd.loss)(0, 0));
                if (!std::isfinite(loss)) {
                    std::ostringstream msg;
                    msg << "train: non-finite loss at epoch " << epoch << ", step " << step
                        << ", scene " << dataset.scenes[order[k]].dir;
                    throw InternalError(msg.str());
                }
                batch_loss += loss * double(inv_batch);
                fwd.graph.backward(fwd.loss, inv_batch);
                for (size_t t = 0; t < grads.size(); ++t) {
                    const int node = fwd.param_nodes[t];
                    if (node < 0) continue;
                    if (grads[t].size() == 0) {
                        grads[t] = fwd.graph.grad(node);
                    } else {
                        grads[t] += fwd.graph.grad(node);
                    }
                }
                epoch_tally.add_slots(fwd.graph.value(fwd.logits), st);
                epoch_tally.add_sigma(net.sigma_of(fwd, st.batch.e), st.voxel_bleed);
            }
            epoch_tally.loss_sum += batch_loss;
            epoch_tally.loss_batches += 1;
            for (size_t t = 0; t < grads.size(); ++t) {
                if (grads[t].size() == 0) {
                    grads[t] = nn::MatF::Zero(net.tensors()[t].rows(), net.tensors()[t].cols());
                } else if (is_gate[t] && step < gate_unfreeze_step) {
                    grads[t].setZero();
                }
            }
            adam.step(net.mutable_tensors(), grads, lr_at(cfg, step, total_steps));
            ++step;
        }

        EvalResult train_metrics;
        epoch_tally.fill(train_metrics);
        result.log.push_back(row_from(train_metrics, epoch, "train"));

        if (!dataset.val_indices.empty()) {
            std::vector<const SceneTensors*> val_scenes;
            for (size_t i : dataset.val_indices) val_scenes.push_back(&tensors[i]);
            const EvalResult val = evaluate_prepared(net, val_scenes, cfg.modality, dataset.m);
            result.log.push_back(row_from(val, epoch, "val"));
            if (val.macro_f1 > result.best_val_macro_f1) {
                result.best_val_macro_f1 = val.macro_f1;
                result.best_epoch = epoch;
                net.write_back(result.params);
            }
        }
    }
    if (dataset.val_indices.empty()) {
        net.write_back(result.params);
        result.best_epoch = cfg.epochs;
    }
    return result;
}

EvalResult evaluate(const FusionParams& params, const Dataset& dataset,
                    const std::vector<size_t>& scene_indices, Modality modality,
                    const VoxelConfig& voxel_cfg) {
    if (params.dims.m != dataset.m) {
        throw ShapeError("evaluate: checkpoint class count does not match the dataset");
    }
    std::vector<SceneTensors> tensors;
    tensors.reserve(scene_indices.size());
    std::vector<const SceneTensors*> ptrs;
    for (size_t i : scene_indices) {
        if (i >= dataset.scenes.size()) throw ConfigError("evaluate: scene index out of range");
        tensors.push_back(prepare_scene(dataset.scenes[i], voxel_cfg));
    }
    for (const auto& t : tensors) ptrs.push_back(&t);
    FusionNet net(params);
    return evaluate_prepared(net, ptrs, modality, dataset.m);
}

std::string metrics_csv(const std::vector<EpochRow>& rows) {
    std::string out = "epoch,split,loss,accuracy,macro_f1,mean_sigma_clean,mean_sigma_bleed\n";
    char buf[256];
    for (const auto& r : rows) {
        auto sigma_field = [](double value, uint64_t count) -> std::string {
            if (count == 0) return "nan";
            char tmp[64];
            std::snprintf(tmp, sizeof(tmp), "%.6f", value);
            return tmp;
        };
        std::snprintf(buf, sizeof(buf), "%d,%s,%.6f,%.6f,%.6f,%s,%s\n", r.epoch, r.split.c_str(),
                      r.loss, r.accuracy, r.macro_f1,
                      sigma_field(r.mean_sigma_clean, r.clean_voxels).c_str(),
                      sigma_field(r.mean_sigma_bleed, r.bleed_voxels).c_str());
        out += buf;
    }
    return out;
}

}  // namespace fp
