#include "organct/optim.hpp"

#include <cmath>

#include "organct/util.hpp"

namespace organct {

using nn::Mat;

TrainConfig TrainConfig::mae_defaults() {
    TrainConfig c;
    c.stage = "mae";
    c.base_lr = 1.5e-4;
    c.weight_decay = 0.05;
    c.epochs = 20;
    return c;
}

TrainConfig TrainConfig::contrastive_defaults() {
    TrainConfig c;
    c.stage = "contrastive";
    c.base_lr = 1.0e-4;
    c.weight_decay = 1.0e-4;
    c.epochs = 24;
    return c;
}

double lr_at_step(const TrainConfig& cfg, int step, int total_steps) {
    if (total_steps <= 0) throw DataError("lr schedule: total_steps must be positive");
    if (step >= total_steps) return 0.0;
    const double warmup = cfg.warmup_frac * total_steps;
    if (warmup > 0 && step < warmup) return cfg.base_lr * (step + 1) / warmup;
    const double progress = (step - warmup) / (total_steps - warmup);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(M_PI * progress));
}

AdamW::AdamW(const TrainConfig& cfg, const nn::ParamStore& params)
    : beta1_(cfg.beta1), beta2_(cfg.beta2), eps_(cfg.adam_eps), wd_(cfg.weight_decay) {
    for (auto& [name, m] : params.tensors()) {
        m_.emplace(name, Mat::Zero(m.rows(), m.cols()));
        v_.emplace(name, Mat::Zero(m.rows(), m.cols()));
    }
}

void AdamW::step(nn::ParamStore& params, const nn::GradMap& grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (auto& [name, p] : params.tensors()) {
        auto git = grads.find(name);
        if (git == grads.end()) continue;  // tensor not touched by this stage
        // decoupled decay; biases, norm affines and the contrastive scalars
        // are exempt
        const bool decay = p.rows() > 1 && name.rfind("clip.", 0) != 0;
        if (decay) p *= (1.0 - lr * wd_);
        const Mat& g = git->second;
        Mat& m = m_.at(name);
        Mat& v = v_.at(name);
        m = beta1_ * m + (1.0 - beta1_) * g;
        v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
        const Mat mhat = m / bc1;
        const Mat vhat = v / bc2;
        p -= lr * (mhat.array() / (vhat.array().sqrt() + eps_)).matrix();
    }
}

double clip_global_norm(nn::GradMap& grads, double max_norm) {
    const double norm = nn::global_grad_norm(grads);
    if (norm > max_norm && norm > 0) {
        const double s = max_norm / norm;
        for (auto& [name, g] : grads) g *= s;
    }
    return norm;
}

}  // namespace organct
