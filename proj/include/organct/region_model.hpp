#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "organct/vocab.hpp"

namespace organct {

// One-vs-rest gradient-boosted depth-2 trees over region_features vectors.
// Stands in for the original gradient-boosting region classifier; the feature
// definition (per-organ volume fractions) is the same.
class RegionModel {
public:
    struct Node {
        int feature = -1;       // -1: leaf
        double threshold = 0.0;
        double value = 0.0;     // leaf output
        int left = -1, right = -1;
    };
    struct Tree {
        std::vector<Node> nodes;  // node 0 is the root
        double predict(const std::vector<double>& x) const;
    };

    bool trained() const { return !per_region_.empty(); }
    // Per-region probability, in OrganVocabulary::region_names() order.
    std::vector<double> probabilities(const std::vector<double>& features) const;
    // Regions with probability > 0.5 (multi-label).
    std::set<std::string> classify(const std::vector<double>& features) const;

    // Fits on a synthetic corpus of labeled masks generated from the
    // region->organs table; deterministic under seed.
    static RegionModel train_synthetic(const OrganVocabulary& vocab, std::uint64_t seed,
                                       int samples = 600, int rounds = 40,
                                       double learning_rate = 0.3);

private:
    // Trees see the organ-fraction vector plus one aggregate per region (sum
    // of that region's organ fractions); the aggregates make membership
    // learnable from any organ subset.
    std::vector<double> augment(const std::vector<double>& features) const;

    std::vector<std::vector<Tree>> per_region_;   // [region][round]
    std::vector<std::vector<int>> region_feature_idx_;  // [region] -> organ columns
};

}  // namespace organct
