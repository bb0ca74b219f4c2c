#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "organct/nn/params.hpp"

namespace organct {

struct TrainConfig {
    std::string stage;  // "mae" | "contrastive"
    double base_lr = 1.5e-4;
    double weight_decay = 0.05;
    double beta1 = 0.9, beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 64;
    int epochs = 20;
    int grad_accum = 2;
    double clip_norm = 1.0;
    double mask_ratio = 0.75;   // mae only
    double warmup_frac = 0.05;  // linear warmup, then cosine decay to zero
    bool sigmoid_loss = false;  // contrastive only
    std::uint64_t seed = 7;

    static TrainConfig mae_defaults();
    static TrainConfig contrastive_defaults();
};

// base_lr scaled by linear warmup over the first warmup_frac of total steps,
// then cosine decay reaching exactly zero at `total_steps`.
double lr_at_step(const TrainConfig& cfg, int step, int total_steps);

// AdamW with decoupled weight decay. Moment tensors are keyed by parameter
// name; layout is stable because ParamStore iterates in sorted-name order.
class AdamW {
public:
    AdamW(const TrainConfig& cfg, const nn::ParamStore& params);

    // Applies one update with the given learning rate. `grads` holds the
    // already-averaged (and clipped) gradients for this step.
    void step(nn::ParamStore& params, const nn::GradMap& grads, double lr);

    int steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_, wd_;
    int t_ = 0;
    std::map<std::string, nn::Mat> m_, v_;
};

// Scales every gradient in place so the global norm is at most `max_norm`;
// returns the pre-clip norm.
double clip_global_norm(nn::GradMap& grads, double max_norm);

}  // namespace organct
