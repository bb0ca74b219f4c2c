#pragma once

#include <filesystem>
#include <ostream>
#include <vector>

#include "organct/model.hpp"
#include "organct/optim.hpp"
#include "organct/pairs.hpp"

namespace organct {

// One training example: a pooled/patchified organ crop and its sentence.
struct TrainSample {
    std::string key;  // case/series/organ — identifies the underlying crop
    PatchGrid grid;
    std::string text;
};

// Loads manifest pairs of the given split and extracts one train-mode crop per
// pair (deterministic under seed). Crops are extracted once up front; the same
// key always yields the same grid, so repeated keys share extraction work.
std::vector<TrainSample> load_train_samples(const std::vector<VolumeTextPair>& pairs,
                                            const std::filesystem::path& corpus_root,
                                            const ModelConfig& model_cfg,
                                            const std::string& split,
                                            std::uint64_t seed);

struct EpochStats {
    int epoch;
    double mean_loss;
};

struct TrainResult {
    std::vector<EpochStats> epochs;
    int steps = 0;
};

// Masked-reconstruction pretraining of the image tower (samples are deduped by
// crop key first). Metrics, when given a stream, are one JSON object per
// optimizer step.
TrainResult train_mae(nn::ParamStore& params, const ModelConfig& model_cfg,
                      const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                      std::ostream* metrics = nullptr);

// Contrastive volume-text training. Batches with duplicate texts would make
// the matching targets ambiguous, so duplicates within a batch are dropped
// when `drop_duplicate_texts` is set.
TrainResult train_contrastive(nn::ParamStore& params, const ModelConfig& model_cfg,
                              const TrainConfig& cfg,
                              const std::vector<TrainSample>& samples,
                              std::ostream* metrics = nullptr,
                              bool drop_duplicate_texts = true);

}  // namespace organct
