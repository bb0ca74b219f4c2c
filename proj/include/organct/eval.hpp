#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "organct/model.hpp"
#include "organct/pairs.hpp"

namespace organct {

// One organ-level zero-shot decision: is the candidate positive sentence a
// better match for this organ crop than the templated negative sentence?
struct OrganTask {
    std::string case_id, series_id, organ;
    std::string pos_text, neg_text;
    bool label = false;  // ground truth: finding present
};

// Builds a class-balanced (1:1, seeded subsample of the larger class) task set
// from manifest pairs of one split. Positive pairs keep their own sentence and
// get the first template as the negative candidate; negative pairs keep their
// own sentence and draw a random positive sentence of the same organ (falling
// back to any positive sentence) as the positive candidate.
std::vector<OrganTask> build_organwise_tasks(const std::vector<VolumeTextPair>& pairs,
                                             const std::string& split,
                                             const std::vector<std::string>& templates,
                                             std::uint64_t seed);

struct BinaryCounts {
    int tp = 0, fp = 0, fn = 0, tn = 0;
    double precision() const { return tp + fp ? double(tp) / (tp + fp) : 0.0; }
    double recall() const { return tp + fn ? double(tp) / (tp + fn) : 0.0; }
    double f1() const;
    double accuracy() const {
        const int n = tp + fp + fn + tn;
        return n ? double(tp + tn) / n : 0.0;
    }
};

double cosine(const nn::Mat& a, const nn::Mat& b);

// Embeds inference-mode organ crops (all stride-Z windows) and texts once,
// then serves them from a cache.
class CropEmbedder {
public:
    CropEmbedder(const nn::ParamStore& params, const ModelConfig& cfg,
                 std::filesystem::path corpus_root)
        : params_(params), cfg_(cfg), corpus_root_(std::move(corpus_root)) {}

    // One unit-norm embedding row per z-window.
    const std::vector<nn::Mat>& window_embeddings(const std::string& case_id,
                                                  const std::string& series_id,
                                                  const std::string& organ);
    const nn::Mat& text_embedding_cached(const std::string& text);

private:
    const nn::ParamStore& params_;
    const ModelConfig& cfg_;
    std::filesystem::path corpus_root_;
    std::map<std::string, std::vector<nn::Mat>> crop_cache_;
    std::map<std::string, nn::Mat> text_cache_;
};

// Similarity of an organ (all its windows) to a text: mean cosine over
// windows, or max when `max_aggregate`.
double score_similarity(CropEmbedder& embedder, const std::string& case_id,
                        const std::string& series_id, const std::string& organ,
                        const std::string& text, bool max_aggregate = false);

struct OrganEvalResult {
    BinaryCounts counts;
    int n_tasks = 0;
};

// Predicted positive iff sim(pos_text) > sim(neg_text); ties count as negative.
OrganEvalResult evaluate_organwise(CropEmbedder& embedder,
                                   const std::vector<OrganTask>& tasks,
                                   bool max_aggregate = false);

// One finding-level detection query with a known label. `neg_text`, when
// present, is a no-abnormality reference sentence for the same organ.
struct FindingTask {
    std::string case_id, series_id, organ;
    std::string text;
    std::string neg_text;
    bool label = false;
};

// Mann-Whitney AUROC with midranks for tied scores.
double auroc(const std::vector<double>& scores, const std::vector<bool>& labels);

struct FindingEvalResult {
    double auroc = 0.0;
    int n_pos = 0, n_neg = 0;
    std::vector<double> scores;
};

// Confidence for each task is the window-mean cosine between the organ crop
// and the query text, minus the same for `neg_text` when given (the contrast
// cancels per-organ similarity offsets); AUROC over all tasks.
FindingEvalResult evaluate_findings(CropEmbedder& embedder,
                                    const std::vector<FindingTask>& tasks);

}  // namespace organct
