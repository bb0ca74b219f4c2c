#pragma once

#include "organct/nn/tape.hpp"

namespace organct {

// Symmetric contrastive loss over N image/text embedding rows (already
// unit-norm): mean of the image->text and text->image cross-entropies with
// matching pairs on the diagonal. `logit_scale` is the 1x1 log-temperature
// parameter node; the exponentiated scale is clamped at 100.
nn::Tape::Id infonce_loss(nn::Tape& tape, nn::Tape::Id image_emb, nn::Tape::Id text_emb,
                          nn::Tape::Id logit_scale);

// Pairwise sigmoid loss: mean over all N^2 pairs of softplus(-z * (s*sim + b)),
// z = +1 on the diagonal and -1 off it. `bias` is the learnable 1x1 offset.
nn::Tape::Id sigmoid_pair_loss(nn::Tape& tape, nn::Tape::Id image_emb,
                               nn::Tape::Id text_emb, nn::Tape::Id logit_scale,
                               nn::Tape::Id bias);

// Reconstruction loss: mean squared error over the masked token rows only.
// `pred` and `target` are token_count x token_len; `masked` must be non-empty.
nn::Tape::Id mae_loss(nn::Tape& tape, nn::Tape::Id pred, const nn::Mat& target,
                      const std::vector<int>& masked);

}  // namespace organct
