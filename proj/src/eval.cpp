#include "organct/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "organct/crops.hpp"
#include "organct/util.hpp"
#include "organct/vvol.hpp"

namespace organct {

using nn::Mat;

std::vector<OrganTask> build_organwise_tasks(const std::vector<VolumeTextPair>& pairs,
                                             const std::string& split,
                                             const std::vector<std::string>& templates,
                                             std::uint64_t seed) {
    if (templates.empty()) throw DataError("organwise tasks: no negative templates");
    // pool of positive sentences per organ, for negative tasks
    std::map<std::string, std::vector<std::string>> pos_by_organ;
    std::vector<std::string> pos_any;
    for (auto& p : pairs)
        if (p.polarity == Polarity::Positive) {
            pos_by_organ[p.organ].push_back(p.text);
            pos_any.push_back(p.text);
        }
    if (pos_any.empty()) throw DataError("organwise tasks: no positive sentences");

    auto instantiate = [&](const std::string& organ) {
        std::string text = templates.front();
        const auto at = text.find("{organ_name}");
        if (at == std::string::npos)
            throw DataError("negative template lacks {organ_name}: " + text);
        text.replace(at, 12, OrganVocabulary::display_name(organ));
        return text;
    };

    std::vector<OrganTask> pos_tasks, neg_tasks;
    std::uint64_t state = seed ^ 0x7461736bULL;
    for (auto& p : pairs) {
        if (p.split != split) continue;
        OrganTask t;
        t.case_id = p.case_id;
        t.series_id = p.series_id;
        t.organ = p.organ;
        if (p.polarity == Polarity::Positive) {
            t.label = true;
            t.pos_text = p.text;
            t.neg_text = instantiate(p.organ);
            pos_tasks.push_back(std::move(t));
        } else {
            t.label = false;
            t.neg_text = p.text;
            auto it = pos_by_organ.find(p.organ);
            const auto& pool = it != pos_by_organ.end() ? it->second : pos_any;
            t.pos_text = pool[splitmix64(state) % pool.size()];
            neg_tasks.push_back(std::move(t));
        }
    }

    // enforce a 1:1 class balance by subsampling the larger side
    auto subsample = [&state](std::vector<OrganTask>& v, std::size_t k) {
        for (std::size_t i = 0; i < k; ++i)
            std::swap(v[i], v[i + splitmix64(state) % (v.size() - i)]);
        v.resize(k);
    };
    const std::size_t k = std::min(pos_tasks.size(), neg_tasks.size());
    if (k == 0) throw DataError("organwise tasks: need both classes in split " + split);
    if (pos_tasks.size() > k) subsample(pos_tasks, k);
    if (neg_tasks.size() > k) subsample(neg_tasks, k);

    std::vector<OrganTask> tasks;
    tasks.reserve(2 * k);
    for (auto& t : pos_tasks) tasks.push_back(std::move(t));
    for (auto& t : neg_tasks) tasks.push_back(std::move(t));
    return tasks;
}

double BinaryCounts::f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

double cosine(const Mat& a, const Mat& b) {
    const double na = a.norm(), nb = b.norm();
    if (na == 0 || nb == 0) return 0.0;
    return (a.cwiseProduct(b)).sum() / (na * nb);
}

const std::vector<Mat>& CropEmbedder::window_embeddings(const std::string& case_id,
                                                        const std::string& series_id,
                                                        const std::string& organ) {
    const std::string key = case_id + "/" + series_id + "/" + organ;
    auto it = crop_cache_.find(key);
    if (it != crop_cache_.end()) return it->second;
    const auto sdir = corpus_root_ / case_id / "series" / series_id;
    const Volume vol = load_volume(sdir / "volume.vvol");
    const SegMask mask = load_mask(sdir / "mask.vvol");
    const auto crops = extract_organ_crops(vol, mask, organ, CropMode::Infer);
    if (crops.empty()) throw DataError("organ " + organ + " absent from " + key);
    std::vector<Mat> embs;
    for (auto& crop : crops)
        embs.push_back(image_embedding(params_, cfg_,
                                       crop_to_patches(apply_windowing(crop), cfg_)));
    return crop_cache_.emplace(key, std::move(embs)).first->second;
}

const Mat& CropEmbedder::text_embedding_cached(const std::string& text) {
    auto it = text_cache_.find(text);
    if (it != text_cache_.end()) return it->second;
    return text_cache_.emplace(text, text_embedding(params_, cfg_, text)).first->second;
}

double score_similarity(CropEmbedder& embedder, const std::string& case_id,
                        const std::string& series_id, const std::string& organ,
                        const std::string& text, bool max_aggregate) {
    const auto& windows = embedder.window_embeddings(case_id, series_id, organ);
    const Mat& t = embedder.text_embedding_cached(text);
    double acc = max_aggregate ? -2.0 : 0.0;
    for (auto& w : windows) {
        const double s = cosine(w, t);
        if (max_aggregate)
            acc = std::max(acc, s);
        else
            acc += s / double(windows.size());
    }
    return acc;
}

OrganEvalResult evaluate_organwise(CropEmbedder& embedder,
                                   const std::vector<OrganTask>& tasks,
                                   bool max_aggregate) {
    OrganEvalResult r;
    for (auto& t : tasks) {
        const double sp = score_similarity(embedder, t.case_id, t.series_id, t.organ,
                                           t.pos_text, max_aggregate);
        const double sn = score_similarity(embedder, t.case_id, t.series_id, t.organ,
                                           t.neg_text, max_aggregate);
        const bool predicted = sp > sn;  // tie resolves to negative
        if (predicted && t.label) ++r.counts.tp;
        else if (predicted && !t.label) ++r.counts.fp;
        else if (!predicted && t.label) ++r.counts.fn;
        else ++r.counts.tn;
        ++r.n_tasks;
    }
    return r;
}

double auroc(const std::vector<double>& scores, const std::vector<bool>& labels) {
    if (scores.size() != labels.size()) throw DataError("auroc: size mismatch");
    std::size_t n_pos = 0, n_neg = 0;
    for (bool l : labels) (l ? n_pos : n_neg) += 1;
    if (!n_pos || !n_neg) throw DataError("auroc needs both classes");
    // midranks over the sorted scores
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(scores.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double mid = 0.5 * double(i + j) + 1.0;  // ranks are 1-based
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = mid;
        i = j + 1;
    }
    double rank_sum_pos = 0;
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k]) rank_sum_pos += rank[k];
    const double u = rank_sum_pos - double(n_pos) * (double(n_pos) + 1) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

FindingEvalResult evaluate_findings(CropEmbedder& embedder,
                                    const std::vector<FindingTask>& tasks) {
    FindingEvalResult r;
    std::vector<bool> labels;
    for (auto& t : tasks) {
        double s = score_similarity(embedder, t.case_id, t.series_id, t.organ, t.text);
        if (!t.neg_text.empty())
            s -= score_similarity(embedder, t.case_id, t.series_id, t.organ, t.neg_text);
        r.scores.push_back(s);
        labels.push_back(t.label);
        (t.label ? r.n_pos : r.n_neg) += 1;
    }
    r.auroc = auroc(r.scores, labels);
    return r;
}

}  // namespace organct
