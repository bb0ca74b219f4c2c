#include "organct/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "organct/crops.hpp"
#include "organct/losses.hpp"
#include "organct/util.hpp"
#include "organct/vvol.hpp"

namespace organct {

using json = nlohmann::json;
using nn::Mat;
using nn::Tape;

std::vector<TrainSample> load_train_samples(const std::vector<VolumeTextPair>& pairs,
                                            const std::filesystem::path& corpus_root,
                                            const ModelConfig& model_cfg,
                                            const std::string& split,
                                            std::uint64_t seed) {
    std::map<std::string, PatchGrid> grid_cache;
    std::vector<TrainSample> out;
    for (auto& p : pairs) {
        if (p.split != split) continue;
        const std::string key = p.case_id + "/" + p.series_id + "/" + p.organ;
        auto it = grid_cache.find(key);
        if (it == grid_cache.end()) {
            const auto sdir = corpus_root / p.case_id / "series" / p.series_id;
            const Volume vol = load_volume(sdir / "volume.vvol");
            const SegMask mask = load_mask(sdir / "mask.vvol");
            auto crops = extract_organ_crops(vol, mask, p.organ, CropMode::Train,
                                             seed ^ fnv1a64(p.case_id));
            if (crops.empty())
                throw DataError("organ " + p.organ + " absent from " + key);
            it = grid_cache
                     .emplace(key, crop_to_patches(apply_windowing(crops.front()),
                                                   model_cfg))
                     .first;
        }
        out.push_back({key, it->second, p.text});
    }
    return out;
}

namespace {

std::vector<int> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = int(i);
    std::uint64_t state = seed ^ (0x6f72646572ULL + std::uint64_t(epoch) * 0x9e37ULL);
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[splitmix64(state) % i]);
    return order;
}

void emit_metrics(std::ostream* metrics, int step, int epoch, double lr, double loss,
                  double grad_norm) {
    if (!metrics) return;
    json j;
    j["step"] = step;
    j["epoch"] = epoch;
    j["lr"] = lr;
    j["loss"] = loss;
    j["grad_norm"] = grad_norm;
    *metrics << j.dump() << "\n";
}

void check_finite(double loss, const std::string& stage, int step) {
    if (!std::isfinite(loss))
        throw NumericError(stage + " loss is not finite at step " + std::to_string(step));
}

}  // namespace

TrainResult train_mae(nn::ParamStore& params, const ModelConfig& model_cfg,
                      const TrainConfig& cfg, const std::vector<TrainSample>& samples,
                      std::ostream* metrics) {
    // one reconstruction target per unique crop
    std::vector<const TrainSample*> crops;
    std::set<std::string> seen;
    for (auto& s : samples)
        if (seen.insert(s.key).second) crops.push_back(&s);
    if (crops.empty()) throw DataError("mae training: no samples");

    // each optimizer step accumulates grad_accum micro-batches
    const std::size_t eff_batch = std::size_t(cfg.batch_size) * std::max(1, cfg.grad_accum);
    const int steps_per_epoch = int((crops.size() + eff_batch - 1) / eff_batch);
    const int total_steps = steps_per_epoch * cfg.epochs;
    AdamW opt(cfg, params);
    TrainResult result;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(crops.size(), cfg.seed, epoch);
        double epoch_loss = 0;
        int epoch_samples = 0;
        std::size_t cursor = 0;
        for (int s = 0; s < steps_per_epoch; ++s, ++step) {
            const std::size_t take = std::min(eff_batch, crops.size() - cursor);
            nn::GradMap grads;
            double step_loss = 0;
            for (std::size_t i = 0; i < take; ++i) {
                const TrainSample& sample = *crops[order[cursor + i]];
                const MaskSet mask = sample_mask(
                    model_cfg.token_count(), cfg.mask_ratio,
                    cfg.seed ^ fnv1a64(sample.key) ^ (std::uint64_t(step) << 20));
                Tape t;
                auto fwd = encode_image(t, params, model_cfg, sample.grid, mask);
                Tape::Id pred = decode_mae(t, params, model_cfg, fwd.token_states, mask);
                Tape::Id loss = mae_loss(t, pred, sample.grid.tokens, mask.masked);
                step_loss += t.value(loss)(0, 0);
                t.backward(loss, Mat::Constant(1, 1, 1.0 / double(take)));
                t.accumulate_param_grads(grads);
            }
            cursor += take;
            step_loss /= double(take);
            check_finite(step_loss, "mae", step);
            const double grad_norm = clip_global_norm(grads, cfg.clip_norm);
            const double lr = lr_at_step(cfg, step, total_steps);
            opt.step(params, grads, lr);
            emit_metrics(metrics, step, epoch, lr, step_loss, grad_norm);
            epoch_loss += step_loss * double(take);
            epoch_samples += int(take);
        }
        result.epochs.push_back({epoch, epoch_loss / epoch_samples});
    }
    result.steps = step;
    return result;
}

TrainResult train_contrastive(nn::ParamStore& params, const ModelConfig& model_cfg,
                              const TrainConfig& cfg,
                              const std::vector<TrainSample>& samples,
                              std::ostream* metrics, bool drop_duplicate_texts) {
    if (samples.size() < 2) throw DataError("contrastive training: need at least 2 samples");
    // contrasting couples samples within a micro-batch, so accumulation means
    // averaging the per-micro-batch losses rather than widening the batch
    const std::size_t eff_batch = std::size_t(cfg.batch_size) * std::max(1, cfg.grad_accum);
    const int steps_per_epoch = int((samples.size() + eff_batch - 1) / eff_batch);
    const int total_steps = steps_per_epoch * cfg.epochs;
    AdamW opt(cfg, params);
    TrainResult result;

    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(samples.size(), cfg.seed, epoch);
        double epoch_loss = 0;
        int epoch_batches = 0;
        std::size_t cursor = 0;
        for (int s = 0; s < steps_per_epoch; ++s, ++step) {
            nn::GradMap grads;
            double step_loss = 0;
            int micro_batches = 0;
            for (int a = 0; a < std::max(1, cfg.grad_accum) && cursor < samples.size();
                 ++a) {
                const std::size_t take = std::min(std::size_t(samples.size()) - cursor,
                                                  std::size_t(cfg.batch_size));
                std::vector<const TrainSample*> batch;
                std::set<std::string> texts;
                for (std::size_t i = 0; i < take; ++i) {
                    const TrainSample& sample = samples[order[cursor + i]];
                    if (drop_duplicate_texts && !texts.insert(sample.text).second)
                        continue;
                    batch.push_back(&sample);
                }
                cursor += take;
                if (batch.size() < 2) continue;  // nothing to contrast against
                const int n = int(batch.size());

                // phase 1: per-sample tower tapes; keep them alive for backward
                std::vector<Tape> img_tapes(n), txt_tapes(n);
                std::vector<Tape::Id> img_nodes(n), txt_nodes(n);
                Mat img_emb(n, model_cfg.embed_dim), txt_emb(n, model_cfg.embed_dim);
                for (int i = 0; i < n; ++i) {
                    auto fwd =
                        encode_image(img_tapes[i], params, model_cfg, batch[i]->grid);
                    img_nodes[i] =
                        project_normalize(img_tapes[i], params, "img.proj", fwd.pooled);
                    img_emb.row(i) = img_tapes[i].value(img_nodes[i]);
                    Tape::Id raw =
                        encode_text(txt_tapes[i], params, model_cfg, batch[i]->text);
                    txt_nodes[i] =
                        project_normalize(txt_tapes[i], params, "txt.proj", raw);
                    txt_emb.row(i) = txt_tapes[i].value(txt_nodes[i]);
                }

                // phase 2: small loss tape over the stacked embeddings
                Tape lt;
                Tape::Id img_leaf = lt.leaf(img_emb);
                Tape::Id txt_leaf = lt.leaf(txt_emb);
                Tape::Id scale =
                    lt.param("clip.logit_scale", params.at("clip.logit_scale"));
                Tape::Id loss;
                if (cfg.sigmoid_loss) {
                    Tape::Id bias = lt.param("clip.bias", params.at("clip.bias"));
                    loss = sigmoid_pair_loss(lt, img_leaf, txt_leaf, scale, bias);
                } else {
                    loss = infonce_loss(lt, img_leaf, txt_leaf, scale);
                }
                const double loss_v = lt.value(loss)(0, 0);
                check_finite(loss_v, "contrastive", step);
                lt.backward(loss, Mat::Constant(1, 1, 1.0));
                lt.accumulate_param_grads(grads);
                // push dL/d(embedding) back through each tower tape
                for (int i = 0; i < n; ++i) {
                    img_tapes[i].backward(img_nodes[i], lt.grad(img_leaf).row(i));
                    img_tapes[i].accumulate_param_grads(grads);
                    txt_tapes[i].backward(txt_nodes[i], lt.grad(txt_leaf).row(i));
                    txt_tapes[i].accumulate_param_grads(grads);
                }
                step_loss += loss_v;
                ++micro_batches;
            }
            if (!micro_batches) continue;
            for (auto& [name, g] : grads) g /= double(micro_batches);
            step_loss /= double(micro_batches);

            const double grad_norm = clip_global_norm(grads, cfg.clip_norm);
            const double lr = lr_at_step(cfg, step, total_steps);
            opt.step(params, grads, lr);
            emit_metrics(metrics, step, epoch, lr, step_loss, grad_norm);
            epoch_loss += step_loss;
            ++epoch_batches;
        }
        if (epoch_batches)
            result.epochs.push_back({epoch, epoch_loss / epoch_batches});
    }
    result.steps = step;
    return result;
}

}  // namespace organct
