#pragma once

#include <string>
#include <vector>

#include "fp/nn/graph.hpp"

namespace fp::nn {

using MatF = Mat<float>;

struct Tensor {
    std::string name;
    MatF value;
    bool trainable = true;
    bool decay = false;  // weight decay applies to weight matrices only
};

// Flat bag of named tensors; the fusion module defines the wiring.
struct Model {
    std::vector<Tensor> tensors;

    int find(const std::string& name) const;
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    size_t parameter_count() const;

    // Checkpoint: header (magic "FPNN", u32 tensor count), then per tensor
    // u32 name length, name, u32 rank, u32 dims, little-endian f32 data.
    void save(const std::string& path) const;
    static Model load(const std::string& path);
};

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled-weight-decay Adam with bias correction, over a parallel list of
// tensors. The learning-rate schedule is the caller's job.
class AdamW {
public:
    AdamW(const std::vector<MatF>& params, std::vector<uint8_t> trainable,
          std::vector<uint8_t> decay, AdamWConfig cfg);

    void step(std::vector<MatF>& params, const std::vector<MatF>& grads, double lr);

    int64_t steps() const { return step_; }

private:
    AdamWConfig cfg_;
    std::vector<uint8_t> trainable_, decay_;
    std::vector<MatF> m_, v_;
    int64_t step_ = 0;
};

}  // namespace fp::nn
