#include "organct/region_model.hpp"

#include <algorithm>
#include <cmath>

#include "organct/util.hpp"

namespace organct {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    double sse = std::numeric_limits<double>::infinity();
};

// Best single split of `rows` minimizing residual SSE.
SplitResult best_split(const std::vector<std::vector<double>>& X,
                       const std::vector<double>& r, const std::vector<int>& rows,
                       int n_features) {
    SplitResult best;
    if (rows.size() < 4) return best;
    for (int f = 0; f < n_features; ++f) {
        // candidate thresholds from the midpoints of sorted distinct values
        std::vector<double> vals;
        vals.reserve(rows.size());
        for (int i : rows) vals.push_back(X[i][f]);
        std::sort(vals.begin(), vals.end());
        vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
        if (vals.size() < 2) continue;
        for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
            const double thr = 0.5 * (vals[k] + vals[k + 1]);
            double sl = 0, sr = 0;
            int nl = 0, nr = 0;
            for (int i : rows)
                if (X[i][f] <= thr) {
                    sl += r[i];
                    ++nl;
                } else {
                    sr += r[i];
                    ++nr;
                }
            if (nl == 0 || nr == 0) continue;
            double sse = 0;
            const double ml = sl / nl, mr = sr / nr;
            for (int i : rows) {
                const double m = X[i][f] <= thr ? ml : mr;
                const double d = r[i] - m;
                sse += d * d;
            }
            if (sse < best.sse) best = {f, thr, sse};
        }
    }
    return best;
}

double mean_of(const std::vector<double>& r, const std::vector<int>& rows) {
    double s = 0;
    for (int i : rows) s += r[i];
    return rows.empty() ? 0.0 : s / rows.size();
}

}  // namespace

double RegionModel::Tree::predict(const std::vector<double>& x) const {
    int n = 0;
    while (nodes[n].feature >= 0)
        n = x[nodes[n].feature] <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
    return nodes[n].value;
}

std::vector<double> RegionModel::augment(const std::vector<double>& features) const {
    std::vector<double> x = features;
    for (auto& idx : region_feature_idx_) {
        double s = 0;
        for (int i : idx) s += features[std::size_t(i)];
        x.push_back(s);
    }
    return x;
}

std::vector<double> RegionModel::probabilities(const std::vector<double>& features) const {
    if (!trained()) throw DataError("region model not trained");
    const std::vector<double> x = augment(features);
    std::vector<double> probs;
    for (auto& trees : per_region_) {
        double f = 0;
        for (auto& t : trees) f += t.predict(x);
        probs.push_back(sigmoid(f));
    }
    return probs;
}

std::set<std::string> RegionModel::classify(const std::vector<double>& features) const {
    auto probs = probabilities(features);
    std::set<std::string> out;
    const auto& names = OrganVocabulary::region_names();
    for (std::size_t i = 0; i < names.size(); ++i)
        if (probs[i] > 0.5) out.insert(names[i]);
    return out;
}

RegionModel RegionModel::train_synthetic(const OrganVocabulary& vocab, std::uint64_t seed,
                                         int samples, int rounds, double learning_rate) {
    const auto& names = OrganVocabulary::region_names();
    std::uint64_t state = seed ^ 0x7265676d6f646cULL;

    RegionModel model;
    for (auto& rn : names) {
        std::vector<int> idx;
        for (auto& organ : vocab.region_organs().at(rn))
            idx.push_back(int(vocab.index_of(organ)));
        model.region_feature_idx_.push_back(std::move(idx));
    }
    const int n_features = int(vocab.size() + names.size());

    // Synthesize labeled feature vectors: each sample covers 1-3 regions with
    // random per-organ volume shares, plus a little cross-region spill.
    std::vector<std::vector<double>> X;
    std::vector<std::vector<int>> Y;  // per-region 0/1
    for (int s = 0; s < samples; ++s) {
        const int n_regions = 1 + int(splitmix64(state) % 3);
        std::set<std::size_t> chosen;
        while (int(chosen.size()) < n_regions)
            chosen.insert(splitmix64(state) % names.size());
        std::vector<double> x(vocab.size(), 0.0);
        std::vector<int> y(names.size(), 0);
        for (auto ri : chosen) {
            y[ri] = 1;
            const auto& organs = vocab.region_organs().at(names[ri]);
            // segmentations range from near-complete to a handful of organs,
            // so the per-sample coverage rate is itself random
            const double coverage = 0.1 + 0.85 * uniform01(state);
            bool any = false;
            for (auto& organ : organs)
                if (uniform01(state) < coverage) {
                    x[vocab.index_of(organ)] += 0.2 + uniform01(state);
                    any = true;
                }
            if (!any)
                x[vocab.index_of(organs[splitmix64(state) % organs.size()])] +=
                    0.2 + uniform01(state);
        }
        // spill: a couple of stray organs from other regions at low volume
        for (int k = 0; k < 2; ++k) {
            const auto& rn = names[splitmix64(state) % names.size()];
            const auto& organs = vocab.region_organs().at(rn);
            x[vocab.index_of(organs[splitmix64(state) % organs.size()])] +=
                0.05 * uniform01(state);
        }
        double total = 0;
        for (double v : x) total += v;
        if (total <= 0) {
            --s;
            continue;
        }
        for (double& v : x) v /= total;
        X.push_back(model.augment(x));
        Y.push_back(std::move(y));
    }

    for (std::size_t ri = 0; ri < names.size(); ++ri) {
        std::vector<double> F(X.size(), 0.0);
        std::vector<Tree> trees;
        for (int round = 0; round < rounds; ++round) {
            std::vector<double> resid(X.size());
            for (std::size_t i = 0; i < X.size(); ++i)
                resid[i] = double(Y[i][ri]) - sigmoid(F[i]);

            Tree tree;
            std::vector<int> all(X.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = int(i);
            auto root = best_split(X, resid, all, n_features);
            if (root.feature < 0) {
                tree.nodes.push_back({-1, 0, mean_of(resid, all), -1, -1});
            } else {
                std::vector<int> l, r;
                for (int i : all)
                    (X[i][root.feature] <= root.threshold ? l : r).push_back(i);
                tree.nodes.push_back({root.feature, root.threshold, 0, 1, 2});
                // depth 2: try to split each child once more
                for (auto* rows : {&l, &r}) {
                    auto sub = best_split(X, resid, *rows, n_features);
                    if (sub.feature < 0) {
                        tree.nodes.push_back({-1, 0, mean_of(resid, *rows), -1, -1});
                    } else {
                        const int base = int(tree.nodes.size());
                        tree.nodes.push_back(
                            {sub.feature, sub.threshold, 0, base + 1, base + 2});
                        std::vector<int> sl, sr;
                        for (int i : *rows)
                            (X[i][sub.feature] <= sub.threshold ? sl : sr).push_back(i);
                        tree.nodes.push_back({-1, 0, mean_of(resid, sl), -1, -1});
                        tree.nodes.push_back({-1, 0, mean_of(resid, sr), -1, -1});
                    }
                }
                // fix child indices: left child subtree starts at 1, right child
                // subtree starts after it
                // (nodes were appended left-subtree-first; adjust root pointers)
                tree.nodes[0].left = 1;
                tree.nodes[0].right = tree.nodes[1].feature >= 0 ? 4 : 2;
            }
            for (auto& n : tree.nodes)
                if (n.feature < 0) n.value *= 4.0 * learning_rate;  // Newton-ish step scale
            for (std::size_t i = 0; i < X.size(); ++i) F[i] += tree.predict(X[i]);
            trees.push_back(std::move(tree));
        }
        model.per_region_.push_back(std::move(trees));
    }
    return model;
}

}  // namespace organct
