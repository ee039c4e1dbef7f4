#include "fp/nn/model.hpp"

#include <cmath>

#include "fp/binio.hpp"

namespace fp::nn {

int Model::find(const std::string& name) const {
    for (size_t i = 0; i < tensors.size(); ++i) {
        if (tensors[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

Tensor& Model::at(const std::string& name) {
    const int i = find(name);
    if (i < 0) throw InternalError("model: missing tensor " + name);
    return tensors[size_t(i)];
}

const Tensor& Model::at(const std::string& name) const {
    const int i = find(name);
    if (i < 0) throw InternalError("model: missing tensor " + name);
    return tensors[size_t(i)];
}

size_t Model::parameter_count() const {
    size_t n = 0;
    for (const auto& t : tensors) {
        if (t.trainable) n += size_t(t.value.size());
    }
    return n;
}

void Model::save(const std::string& path) const {
    io::Writer out(path);
    out.bytes("FPNN", 4);
    out.u32(static_cast<uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        out.u32(static_cast<uint32_t>(t.name.size()));
        out.bytes(t.name.data(), t.name.size());
        if (t.value.rows() == 1) {
            out.u32(1);
            out.u32(static_cast<uint32_t>(t.value.cols()));
        } else {
            out.u32(2);
            out.u32(static_cast<uint32_t>(t.value.rows()));
            out.u32(static_cast<uint32_t>(t.value.cols()));
        }
        out.f32s(t.value.data(), size_t(t.value.size()));
    }
    out.close();
}

Model Model::load(const std::string& path) {
    io::Reader in(path);
    in.expect_magic("FPNN");
    const uint32_t count = in.u32();
    Model model;
    model.tensors.resize(count);
    for (auto& t : model.tensors) {
        const uint32_t name_len = in.u32();
        t.name.resize(name_len);
        in.bytes(t.name.data(), name_len);
        const uint32_t rank = in.u32();
        uint32_t rows = 1, cols = 1;
        if (rank == 1) {
            cols = in.u32();
        } else if (rank == 2) {
            rows = in.u32();
            cols = in.u32();
        } else {
            throw DataError("checkpoint " + path + ": unsupported tensor rank for " + t.name);
        }
        t.value.resize(rows, cols);
        in.f32s(t.value.data(), size_t(t.value.size()));
    }
    return model;
}

AdamW::AdamW(const std::vector<MatF>& params, std::vector<uint8_t> trainable,
             std::vector<uint8_t> decay, AdamWConfig cfg)
    : cfg_(cfg), trainable_(std::move(trainable)), decay_(std::move(decay)) {
    if (trainable_.size() != params.size() || decay_.size() != params.size()) {
        throw ShapeError("adamw: flag lists must match the parameter list");
    }
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
        m_.push_back(MatF::Zero(p.rows(), p.cols()));
        v_.push_back(MatF::Zero(p.rows(), p.cols()));
    }
}

void AdamW::step(std::vector<MatF>& params, const std::vector<MatF>& grads, double lr) {
    if (grads.size() != params.size() || params.size() != m_.size()) {
        throw ShapeError("adamw: parameter/gradient list size mismatch");
    }
    ++step_;
    const float bc1 = static_cast<float>(1.0 - std::pow(cfg_.beta1, double(step_)));
    const float bc2 = static_cast<float>(1.0 - std::pow(cfg_.beta2, double(step_)));
    const float b1 = static_cast<float>(cfg_.beta1);
    const float b2 = static_cast<float>(cfg_.beta2);
    const float eps = static_cast<float>(cfg_.eps);
    const float flr = static_cast<float>(lr);
    for (size_t i = 0; i < params.size(); ++i) {
        if (!trainable_[i]) continue;
        const auto& g = grads[i];
        if (g.rows() != params[i].rows() || g.cols() != params[i].cols()) {
            throw ShapeError("adamw: gradient shape mismatch");
        }
        m_[i] = b1 * m_[i] + (1.0f - b1) * g;
        v_[i] = (b2 * v_[i].array() + (1.0f - b2) * g.array().square()).matrix();
        const float wd = decay_[i] ? static_cast<float>(cfg_.weight_decay) : 0.0f;
        params[i].array() -= flr * ((m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps) +
                                    wd * params[i].array());
    }
}

}  // namespace fp::nn
