#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "organct/crops.hpp"
#include "organct/nn/params.hpp"
#include "organct/nn/tape.hpp"

namespace organct {

struct ModelConfig {
    std::string preset;  // "desk" | "paper"
    // image tower; the model input is the channelized crop average-pooled by
    // the pool factors
    int input_x = 192, input_y = 192, input_z = 32;
    int patch_x = 16, patch_y = 16, patch_z = 4;
    int pool_x = 1, pool_y = 1, pool_z = 1;
    int channels = kCropChannels;
    int depth = 12, width = 768, heads = 12;
    double mlp_ratio = 4.0;
    // text tower
    int text_vocab = 8192, text_width = 768, text_depth = 4, text_heads = 12;
    int max_text_len = 512;
    // shared embedding space
    int embed_dim = 768;
    // MAE decoder
    int dec_depth = 2, dec_width = 384;

    int grid_x() const { return input_x / patch_x; }
    int grid_y() const { return input_y / patch_y; }
    int grid_z() const { return input_z / patch_z; }
    int token_count() const { return grid_x() * grid_y() * grid_z(); }
    int token_len() const { return patch_x * patch_y * patch_z * channels; }

    static ModelConfig paper_preset();
    static ModelConfig desk_preset();
    static ModelConfig by_name(const std::string& name);
};

// Flattened 3D patches: tokens ordered x-fastest over the patch grid, values
// within a token ordered like the crop (x fastest, channel innermost).
struct PatchGrid {
    nn::Mat tokens;  // token_count x token_len
    int grid_x = 0, grid_y = 0, grid_z = 0;
    int patch_x = 0, patch_y = 0, patch_z = 0;
    int channels = 0;
};

// Generic patchify over a channel-innermost value grid; dims must divide.
PatchGrid patchify(const std::vector<double>& values, int nx, int ny, int nz, int channels,
                   int px, int py, int pz);
std::vector<double> unpatchify(const PatchGrid& grid);

// Average-pools the 192x192x32x3 crop by the config pool factors, then
// patchifies at the config patch dims.
PatchGrid crop_to_patches(const ChannelizedCrop& crop, const ModelConfig& cfg);

struct MaskSet {
    std::vector<int> masked;   // sorted, unique
    std::vector<int> visible;  // sorted complement
    int total = 0;
    double realized_ratio() const {
        return total ? double(masked.size()) / double(total) : 0.0;
    }
};

// Uniform subset without replacement of size round(ratio * total).
MaskSet sample_mask(int total, double ratio, std::uint64_t seed);

// Parameter construction -----------------------------------------------------

struct TensorShape {
    std::string name;
    int rows, cols;
};
// Every learnable tensor of every tower, in a fixed order.
std::vector<TensorShape> model_tensor_shapes(const ModelConfig& cfg);
nn::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed);
// Scalar count over tensors whose name starts with `prefix` ("" = all).
std::size_t param_count(const ModelConfig& cfg, const std::string& prefix = "");

// Forward passes -------------------------------------------------------------

struct ImageForward {
    nn::Tape::Id token_states;  // (1 + kept tokens) x width, cls first
    nn::Tape::Id pooled;        // 1 x width
};

// Pre-norm ViT over [cls] + (visible) tokens with factorized positional
// embeddings, then single-query attention pooling over all output tokens.
ImageForward encode_image(nn::Tape& tape, const nn::ParamStore& params,
                          const ModelConfig& cfg, const PatchGrid& grid,
                          const std::optional<MaskSet>& mask = std::nullopt);

// Whitespace/punctuation tokens -> 64-bit hash -> table ids; empty text maps
// to the single special id 0; truncated at cfg.max_text_len.
std::vector<int> tokenize_text(const std::string& text, const ModelConfig& cfg);
nn::Tape::Id encode_text(nn::Tape& tape, const nn::ParamStore& params,
                         const ModelConfig& cfg, const std::string& text);

// raw (1 x width) -> projection -> unit-norm (1 x embed_dim)
nn::Tape::Id project_normalize(nn::Tape& tape, const nn::ParamStore& params,
                               const std::string& proj_name, nn::Tape::Id raw);

// MAE decoder: reconstructs all token slots from masked-encoder states; output
// is token_count x token_len.
nn::Tape::Id decode_mae(nn::Tape& tape, const nn::ParamStore& params,
                        const ModelConfig& cfg, nn::Tape::Id token_states,
                        const MaskSet& mask);

// Convenience non-tape embedding helpers used by evaluation.
nn::Mat image_embedding(const nn::ParamStore& params, const ModelConfig& cfg,
                        const PatchGrid& grid);
nn::Mat text_embedding(const nn::ParamStore& params, const ModelConfig& cfg,
                       const std::string& text);

}  // namespace organct
