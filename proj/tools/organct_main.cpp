#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "organct/cost.hpp"
#include "organct/eval.hpp"
#include "organct/llm.hpp"
#include "organct/model.hpp"
#include "organct/pairs.hpp"
#include "organct/synthetic.hpp"
#include "organct/trainer.hpp"
#include "organct/util.hpp"
#include "organct/vvol.hpp"

using json = nlohmann::json;
using namespace organct;

namespace {

// Every command drops a run.json next to its outputs: the effective
// configuration plus content hashes of the inputs it read.
void write_run_metadata(const std::filesystem::path& out_dir, const std::string& command,
                        const json& config,
                        const std::vector<std::filesystem::path>& inputs) {
    json j;
    j["command"] = command;
    j["config"] = config;
    json hashes = json::object();
    for (auto& p : inputs)
        if (std::filesystem::exists(p) && std::filesystem::is_regular_file(p)) {
            char buf[20];
            std::snprintf(buf, sizeof buf, "%016llx",
                          static_cast<unsigned long long>(hash_file(p)));
            hashes[p.string()] = buf;
        }
    j["input_hashes"] = hashes;
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "run.json", j.dump(2));
}

ModelConfig config_from_checkpoint_meta(const std::string& meta_json) {
    json meta = json::parse(meta_json);
    return ModelConfig::by_name(meta.value("preset", "desk"));
}

std::vector<TrainSample> samples_for_split(const std::filesystem::path& manifest,
                                           const std::filesystem::path& corpus,
                                           const ModelConfig& mc, const std::string& split,
                                           std::uint64_t seed) {
    const auto pairs = read_manifest(manifest);
    return load_train_samples(pairs, corpus, mc, split, seed);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"organ-separated volume-text pipeline"};
    app.require_subcommand(1);

    // ---- gen-synthetic
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic CT corpus");
    SyntheticConfig syn;
    std::string gen_out;
    gen->add_option("--out", gen_out, "corpus output directory")->required();
    gen->add_option("--cases", syn.cases, "number of cases");
    gen->add_option("--seed", syn.seed, "rng seed");
    gen->add_flag("--gzip", syn.gzip, "gzip-compress volumes");

    // ---- build-pairs
    auto* bp = app.add_subcommand("build-pairs", "build the volume-text pair manifest");
    std::string bp_corpus, bp_out, bp_assets, bp_llm = "mock";
    BuildPairsConfig bpc;
    bp->add_option("--corpus", bp_corpus, "corpus root")->required();
    bp->add_option("--out", bp_out, "output directory")->required();
    bp->add_option("--assets", bp_assets, "assets directory override");
    bp->add_option("--seed", bpc.seed, "rng seed");
    bp->add_option("--augment-ratio", bpc.augment_ratio, "negative augmentation ratio");
    bool bp_no_augment = false;
    bp->add_flag("--no-augment", bp_no_augment, "disable negative augmentation");
    bp->add_option("--llm", bp_llm, "llm backend: mock | http");
    bp->add_option("--train-fraction", bpc.train_fraction, "train patient fraction");
    bp->add_option("--valid-fraction", bpc.valid_fraction, "valid patient fraction");

    // ---- pretrain-mae
    auto* mae = app.add_subcommand("pretrain-mae", "masked-reconstruction pretraining");
    std::string mae_corpus, mae_manifest, mae_out, mae_preset = "desk";
    TrainConfig mae_cfg = TrainConfig::mae_defaults();
    mae->add_option("--corpus", mae_corpus, "corpus root")->required();
    mae->add_option("--manifest", mae_manifest, "pair manifest")->required();
    mae->add_option("--out", mae_out, "output directory")->required();
    mae->add_option("--preset", mae_preset, "model preset: desk | paper");
    mae->add_option("--epochs", mae_cfg.epochs, "training epochs");
    mae->add_option("--batch", mae_cfg.batch_size, "micro-batch size");
    mae->add_option("--grad-accum", mae_cfg.grad_accum, "micro-batches per step");
    mae->add_option("--lr", mae_cfg.base_lr, "peak learning rate");
    mae->add_option("--weight-decay", mae_cfg.weight_decay, "weight decay");
    mae->add_option("--mask-ratio", mae_cfg.mask_ratio, "token mask ratio");
    mae->add_option("--seed", mae_cfg.seed, "rng seed");

    // ---- train-clip
    auto* clip = app.add_subcommand("train-clip", "contrastive volume-text training");
    std::string clip_corpus, clip_manifest, clip_out, clip_init, clip_preset = "desk";
    TrainConfig clip_cfg = TrainConfig::contrastive_defaults();
    clip->add_option("--corpus", clip_corpus, "corpus root")->required();
    clip->add_option("--manifest", clip_manifest, "pair manifest")->required();
    clip->add_option("--out", clip_out, "output directory")->required();
    clip->add_option("--init", clip_init, "checkpoint to initialize from");
    clip->add_option("--preset", clip_preset, "model preset: desk | paper");
    clip->add_option("--epochs", clip_cfg.epochs, "training epochs");
    clip->add_option("--batch", clip_cfg.batch_size, "micro-batch size");
    clip->add_option("--grad-accum", clip_cfg.grad_accum, "micro-batches per step");
    clip->add_option("--lr", clip_cfg.base_lr, "peak learning rate");
    clip->add_option("--weight-decay", clip_cfg.weight_decay, "weight decay");
    clip->add_option("--seed", clip_cfg.seed, "rng seed");
    clip->add_flag("--sigmoid", clip_cfg.sigmoid_loss, "pairwise sigmoid loss");

    // ---- eval-organ
    auto* evo = app.add_subcommand("eval-organ", "zero-shot organ-level F1");
    std::string evo_corpus, evo_manifest, evo_ckpt, evo_split = "test", evo_assets,
                evo_out;
    std::uint64_t evo_seed = 17;
    bool evo_max = false;
    evo->add_option("--corpus", evo_corpus, "corpus root")->required();
    evo->add_option("--manifest", evo_manifest, "pair manifest")->required();
    evo->add_option("--ckpt", evo_ckpt, "model checkpoint")->required();
    evo->add_option("--split", evo_split, "manifest split");
    evo->add_option("--assets", evo_assets, "assets directory override");
    evo->add_option("--seed", evo_seed, "task sampling seed");
    evo->add_option("--out", evo_out, "output directory (prints when omitted)");
    evo->add_flag("--max-agg", evo_max, "max window aggregation instead of mean");

    // ---- eval-finding
    auto* evf = app.add_subcommand("eval-finding", "zero-shot finding AUROC");
    std::string evf_corpus, evf_manifest, evf_ckpt, evf_split = "test", evf_out;
    std::uint64_t evf_seed = 17;
    evf->add_option("--corpus", evf_corpus, "corpus root")->required();
    evf->add_option("--manifest", evf_manifest, "pair manifest")->required();
    evf->add_option("--ckpt", evf_ckpt, "model checkpoint")->required();
    evf->add_option("--split", evf_split, "manifest split");
    evf->add_option("--seed", evf_seed, "distractor sampling seed");
    evf->add_option("--out", evf_out, "output directory (prints when omitted)");

    // ---- flops
    auto* fl = app.add_subcommand("flops", "encoder compute and memory model");
    std::string fl_preset = "paper";
    int fl_batch = 32;
    fl->add_option("--preset", fl_preset, "model preset: desk | paper");
    fl->add_option("--batch", fl_batch, "batch size for the memory estimate");

    // ---- inspect
    auto* ins = app.add_subcommand("inspect", "print volume container metadata");
    std::string ins_file;
    ins->add_option("file", ins_file, "path to a .vvol file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) {
            syn.out_root = gen_out;
            gen_synthetic(syn);
            json cfg{{"cases", syn.cases}, {"seed", syn.seed}, {"gzip", syn.gzip},
                     {"dim_xy", syn.dim_xy}, {"dim_z", syn.dim_z}};
            write_run_metadata(syn.out_root, "gen-synthetic", cfg, {});
            std::cout << "wrote " << syn.cases << " cases to " << gen_out << "\n";
        } else if (bp->parsed()) {
            bpc.corpus_root = bp_corpus;
            bpc.assets = assets_dir(bp_assets);
            bpc.augment = !bp_no_augment;
            std::unique_ptr<LlmClient> client;
            if (bp_llm == "mock")
                client = std::make_unique<MockLlmClient>(bpc.assets);
            else if (bp_llm == "http")
                client = std::make_unique<HttpLlmClient>();
            else
                throw DataError("unknown llm backend: " + bp_llm);
            auto result = build_pairs(bpc, *client);
            std::filesystem::create_directories(bp_out);
            write_manifest(std::filesystem::path(bp_out) / "manifest.jsonl", result.pairs);
            write_text_file(std::filesystem::path(bp_out) / "stats.json",
                            result.stats.to_json());
            json cfg{{"corpus", bp_corpus},
                     {"seed", bpc.seed},
                     {"augment", bpc.augment},
                     {"augment_ratio", bpc.augment_ratio},
                     {"llm", bp_llm},
                     {"train_fraction", bpc.train_fraction},
                     {"valid_fraction", bpc.valid_fraction}};
            write_run_metadata(bp_out, "build-pairs", cfg,
                               {bpc.assets / "organ_vocabulary.txt",
                                bpc.assets / "negation_patterns.txt",
                                bpc.assets / "filter_patterns.txt",
                                bpc.assets / "negative_templates.txt",
                                bpc.assets / "mock_llm_ranges.tsv",
                                bpc.corpus_root / "patients.json"});
            std::cout << result.stats.to_json() << "\n";
        } else if (mae->parsed()) {
            const ModelConfig mc = ModelConfig::by_name(mae_preset);
            auto samples = samples_for_split(mae_manifest, mae_corpus, mc, "train",
                                             mae_cfg.seed);
            auto params = init_params(mc, mae_cfg.seed);
            std::filesystem::create_directories(mae_out);
            std::ofstream metrics(std::filesystem::path(mae_out) / "metrics.jsonl");
            auto result = train_mae(params, mc, mae_cfg, samples, &metrics);
            json meta{{"preset", mc.preset}, {"stage", "mae"},
                      {"epochs", mae_cfg.epochs}, {"seed", mae_cfg.seed}};
            nn::save_checkpoint(std::filesystem::path(mae_out) / "mae.ckpt", params,
                                meta.dump());
            json cfg{{"corpus", mae_corpus}, {"manifest", mae_manifest},
                     {"preset", mae_preset}, {"epochs", mae_cfg.epochs},
                     {"batch", mae_cfg.batch_size}, {"grad_accum", mae_cfg.grad_accum},
                     {"lr", mae_cfg.base_lr}, {"weight_decay", mae_cfg.weight_decay},
                     {"mask_ratio", mae_cfg.mask_ratio}, {"seed", mae_cfg.seed}};
            write_run_metadata(mae_out, "pretrain-mae", cfg, {mae_manifest});
            std::cout << "first-epoch loss " << result.epochs.front().mean_loss
                      << ", last-epoch loss " << result.epochs.back().mean_loss << "\n";
        } else if (clip->parsed()) {
            const ModelConfig mc = ModelConfig::by_name(clip_preset);
            auto samples = samples_for_split(clip_manifest, clip_corpus, mc, "train",
                                             clip_cfg.seed);
            auto params = init_params(mc, clip_cfg.seed);
            if (!clip_init.empty()) {
                nn::ParamStore loaded;
                nn::load_checkpoint(clip_init, loaded);
                for (auto& [name, m] : loaded.tensors()) params.at(name) = m;
            }
            std::filesystem::create_directories(clip_out);
            std::ofstream metrics(std::filesystem::path(clip_out) / "metrics.jsonl");
            auto result = train_contrastive(params, mc, clip_cfg, samples, &metrics);
            json meta{{"preset", mc.preset}, {"stage", "contrastive"},
                      {"epochs", clip_cfg.epochs}, {"seed", clip_cfg.seed}};
            nn::save_checkpoint(std::filesystem::path(clip_out) / "clip.ckpt", params,
                                meta.dump());
            json cfg{{"corpus", clip_corpus}, {"manifest", clip_manifest},
                     {"preset", clip_preset}, {"init", clip_init},
                     {"epochs", clip_cfg.epochs}, {"batch", clip_cfg.batch_size},
                     {"grad_accum", clip_cfg.grad_accum}, {"lr", clip_cfg.base_lr},
                     {"weight_decay", clip_cfg.weight_decay},
                     {"sigmoid", clip_cfg.sigmoid_loss}, {"seed", clip_cfg.seed}};
            write_run_metadata(clip_out, "train-clip", cfg, {clip_manifest});
            std::cout << "first-epoch loss " << result.epochs.front().mean_loss
                      << ", last-epoch loss " << result.epochs.back().mean_loss << "\n";
        } else if (evo->parsed()) {
            nn::ParamStore params;
            const std::string meta = nn::load_checkpoint(evo_ckpt, params);
            const ModelConfig mc = config_from_checkpoint_meta(meta);
            const auto pairs = read_manifest(evo_manifest);
            const auto templates =
                read_data_lines(assets_dir(evo_assets) / "negative_templates.txt");
            const auto tasks = build_organwise_tasks(pairs, evo_split, templates, evo_seed);
            CropEmbedder embedder(params, mc, evo_corpus);
            const auto r = evaluate_organwise(embedder, tasks, evo_max);
            json out{{"split", evo_split},
                     {"tasks", r.n_tasks},
                     {"tp", r.counts.tp},
                     {"fp", r.counts.fp},
                     {"fn", r.counts.fn},
                     {"tn", r.counts.tn},
                     {"precision", r.counts.precision()},
                     {"recall", r.counts.recall()},
                     {"f1", r.counts.f1()},
                     {"accuracy", r.counts.accuracy()}};
            if (!evo_out.empty()) {
                std::filesystem::create_directories(evo_out);
                write_text_file(std::filesystem::path(evo_out) / "organ_eval.json",
                                out.dump(2));
                json cfg{{"manifest", evo_manifest}, {"ckpt", evo_ckpt},
                         {"split", evo_split}, {"seed", evo_seed}, {"max_agg", evo_max}};
                write_run_metadata(evo_out, "eval-organ", cfg, {evo_manifest, evo_ckpt});
            }
            std::cout << out.dump(2) << "\n";
        } else if (evf->parsed()) {
            nn::ParamStore params;
            const std::string meta = nn::load_checkpoint(evf_ckpt, params);
            const ModelConfig mc = config_from_checkpoint_meta(meta);
            const auto pairs = read_manifest(evf_manifest);
            json truth = json::parse(
                read_text_file(std::filesystem::path(evf_corpus) / "truth.json"));
            // one series per (case, organ) present in the split manifest
            std::map<std::pair<std::string, std::string>, std::string> series_of;
            for (auto& p : pairs)
                if (p.split == evf_split) series_of.emplace(std::pair{p.case_id, p.organ},
                                                            p.series_id);
            std::uint64_t state = evf_seed ^ 0x66696e64ULL;
            std::vector<FindingTask> tasks;
            const auto& lesions = synthetic_lesions();
            const auto templates =
                read_data_lines(assets_dir() / "negative_templates.txt");
            for (auto& [key, series_id] : series_of) {
                const auto& [case_id, organ] = key;
                if (!truth.contains(case_id)) continue;
                const json& organs = truth.at(case_id);
                if (!organs.contains(organ)) continue;
                const std::string lesion = organs.at(organ).get<std::string>();
                FindingTask t;
                t.case_id = case_id;
                t.series_id = series_id;
                t.organ = organ;
                t.label = lesion != "none";
                // healthy organs get a random lesion query as the distractor
                const std::string queried =
                    t.label ? lesion : lesions[splitmix64(state) % lesions.size()];
                std::string phrase = queried;
                phrase[0] = char(std::toupper(static_cast<unsigned char>(phrase[0])));
                t.text = phrase + " is present in the " +
                         OrganVocabulary::display_name(organ) + ".";
                std::string neg = templates.front();
                neg.replace(neg.find("{organ_name}"), 12,
                            OrganVocabulary::display_name(organ));
                t.neg_text = neg;
                tasks.push_back(std::move(t));
            }
            CropEmbedder embedder(params, mc, evf_corpus);
            const auto r = evaluate_findings(embedder, tasks);
            json out{{"split", evf_split},
                     {"tasks", int(tasks.size())},
                     {"positives", r.n_pos},
                     {"negatives", r.n_neg},
                     {"auroc", r.auroc}};
            if (!evf_out.empty()) {
                std::filesystem::create_directories(evf_out);
                write_text_file(std::filesystem::path(evf_out) / "finding_eval.json",
                                out.dump(2));
                json cfg{{"manifest", evf_manifest}, {"ckpt", evf_ckpt},
                         {"split", evf_split}, {"seed", evf_seed}};
                write_run_metadata(evf_out, "eval-finding", cfg, {evf_manifest, evf_ckpt});
            }
            std::cout << out.dump(2) << "\n";
        } else if (fl->parsed()) {
            const ModelConfig mc = ModelConfig::by_name(fl_preset);
            const auto cc = EncoderCostConfig::from_model(mc);
            const auto f = vit_flops(cc);
            const auto m = memory_estimate(cc);
            json out{{"preset", fl_preset},
                     {"tokens", cc.tokens},
                     {"image_tower_params", param_count(mc, "img.")},
                     {"total_params", param_count(mc)},
                     {"flops",
                      {{"patch_embed", f.patch_embed},
                       {"attention_proj", f.attention_proj},
                       {"attention_mix", f.attention_mix},
                       {"mlp", f.mlp},
                       {"pooling", f.pooling},
                       {"projection", f.projection},
                       {"total", f.total()},
                       {"total_gflops", f.total() / 1e9}}},
                     {"memory",
                      {{"param_bytes", m.param_bytes},
                       {"optimizer_bytes", m.optimizer_bytes},
                       {"activation_bytes_per_sample", m.activation_bytes_per_sample},
                       {"batch", fl_batch},
                       {"total_gib", m.total_bytes(fl_batch) / (1024.0 * 1024 * 1024)}}}};
            std::cout << out.dump(2) << "\n";
        } else if (ins->parsed()) {
            json out;
            try {
                const Volume v = load_volume(ins_file);
                out["kind"] = "volume";
                out["dims"] = {v.dims.nx, v.dims.ny, v.dims.nz};
                out["spacing"] = {v.spacing.sx, v.spacing.sy, v.spacing.sz};
            } catch (const DataError&) {
                const SegMask m = load_mask(ins_file);
                out["kind"] = "mask";
                out["dims"] = {m.dims.nx, m.dims.ny, m.dims.nz};
                out["spacing"] = {m.spacing.sx, m.spacing.sy, m.spacing.sz};
                json labels = json::object();
                for (auto& [id, name] : m.label_table) labels[std::to_string(id)] = name;
                out["labels"] = labels;
                out["present_organs"] = m.present_organs();
            }
            std::cout << out.dump(2) << "\n";
        }
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
