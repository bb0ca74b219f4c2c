#include "organct/cost.hpp"

#include "organct/util.hpp"

namespace organct {

EncoderCostConfig EncoderCostConfig::from_model(const ModelConfig& cfg) {
    return {cfg.token_count(), cfg.token_len(), cfg.width, cfg.depth,
            cfg.heads,         cfg.mlp_ratio,   cfg.embed_dim};
}

FlopsBreakdown vit_flops(const EncoderCostConfig& cfg) {
    if (cfg.tokens <= 0 || cfg.width <= 0 || cfg.depth <= 0)
        throw DataError("vit_flops: non-positive dimensions");
    const double T = cfg.tokens + 1;  // class token rides along
    const double w = cfg.width;
    const double mlp_dim = cfg.mlp_ratio * w;
    FlopsBreakdown f;
    f.patch_embed = double(cfg.tokens) * cfg.token_len * w;
    f.attention_proj = cfg.depth * 4.0 * T * w * w;
    f.attention_mix = cfg.depth * 2.0 * T * T * w;  // QK^T plus attn*V
    f.mlp = cfg.depth * 2.0 * T * w * mlp_dim;
    // attention pooling: key/value projections plus the single-query mixes
    f.pooling = 2.0 * T * w * w + 2.0 * T * w;
    f.projection = w * cfg.embed_dim;
    return f;
}

MemoryEstimate memory_estimate(const EncoderCostConfig& cfg) {
    const double T = cfg.tokens + 1;
    const double w = cfg.width;
    const double mlp_dim = cfg.mlp_ratio * w;
    // parameter scalars of the encoder stack (matches the tensor layout)
    const double per_layer = 4 * w * w + 4 * w + 4 * w + 2 * w * mlp_dim + mlp_dim + w;
    const double params = double(cfg.tokens > 0 ? cfg.token_len : 0) * w + w  // patch
                          + 3 * w /*approx factorized positions*/ + w          // cls
                          + cfg.depth * per_layer + 2 * w                      // final norm
                          + w + 2 * w * w + w * cfg.embed_dim;                 // pool+proj
    MemoryEstimate m;
    m.param_bytes = 8.0 * params;
    m.optimizer_bytes = 3.0 * m.param_bytes;  // grads + two Adam moments
    // retained per-layer activations: normed input, q/k/v, head outputs and
    // projections (~11 T*w), mlp hidden twice, and the T^2 attention maps
    const double acts =
        cfg.depth * (11.0 * T * w + 2.0 * T * mlp_dim + 2.0 * T * T) + 2.0 * T * w;
    m.activation_bytes_per_sample = 8.0 * acts;
    return m;
}

}  // namespace organct
