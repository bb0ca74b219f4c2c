#pragma once

#include "organct/model.hpp"

namespace organct {

// Inputs to the encoder cost accounting. `tokens` excludes the class token;
// the class token is added internally.
struct EncoderCostConfig {
    int tokens;
    int token_len;
    int width;
    int depth;
    int heads;
    double mlp_ratio;
    int embed_dim;

    static EncoderCostConfig from_model(const ModelConfig& cfg);
};

// Multiply-accumulate counts per forward pass of one sample. Elementwise work
// (norms, activations, softmax, residuals) is excluded; matrix products only.
struct FlopsBreakdown {
    double patch_embed = 0;
    double attention_proj = 0;  // q, k, v and output projections
    double attention_mix = 0;   // score and value products, quadratic in tokens
    double mlp = 0;
    double pooling = 0;
    double projection = 0;  // embedding head
    double total() const {
        return patch_embed + attention_proj + attention_mix + mlp + pooling + projection;
    }
};

FlopsBreakdown vit_flops(const EncoderCostConfig& cfg);

// Training memory model: parameters plus optimizer state are batch-independent;
// activations scale linearly with batch size.
struct MemoryEstimate {
    double param_bytes = 0;
    double optimizer_bytes = 0;              // gradients + two moment tensors
    double activation_bytes_per_sample = 0;  // retained forward tensors
    double total_bytes(int batch) const {
        return param_bytes + optimizer_bytes + batch * activation_bytes_per_sample;
    }
};

MemoryEstimate memory_estimate(const EncoderCostConfig& cfg);

}  // namespace organct
