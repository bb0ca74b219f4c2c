#include "organct/model.hpp"

#include <cmath>

#include "organct/util.hpp"

namespace organct {

using nn::Mat;
using nn::Tape;

ModelConfig ModelConfig::paper_preset() {
    ModelConfig c;
    c.preset = "paper";
    // full-resolution input, ViT-B width; depth chosen to land on the
    // published parameter scale
    c.input_x = 192; c.input_y = 192; c.input_z = 32;
    c.patch_x = 16; c.patch_y = 16; c.patch_z = 4;
    c.pool_x = 1; c.pool_y = 1; c.pool_z = 1;
    c.depth = 18; c.width = 768; c.heads = 12; c.mlp_ratio = 4.0;
    c.text_vocab = 32768; c.text_width = 768; c.text_depth = 4; c.text_heads = 12;
    c.max_text_len = 512;
    c.embed_dim = 768;
    c.dec_depth = 2; c.dec_width = 384;
    return c;
}

ModelConfig ModelConfig::desk_preset() {
    ModelConfig c;
    c.preset = "desk";
    // CPU-trainable: crops pooled 8x8x4 down to 24x24x8, 64 tokens
    c.input_x = 24; c.input_y = 24; c.input_z = 8;
    c.patch_x = 6; c.patch_y = 6; c.patch_z = 2;
    c.pool_x = 8; c.pool_y = 8; c.pool_z = 4;
    c.depth = 4; c.width = 192; c.heads = 4; c.mlp_ratio = 4.0;
    c.text_vocab = 2048; c.text_width = 192; c.text_depth = 2; c.text_heads = 4;
    c.max_text_len = 512;
    c.embed_dim = 64;
    c.dec_depth = 2; c.dec_width = 96;
    return c;
}

ModelConfig ModelConfig::by_name(const std::string& name) {
    if (name == "paper") return paper_preset();
    if (name == "desk") return desk_preset();
    throw DataError("unknown preset: " + name);
}

PatchGrid patchify(const std::vector<double>& values, int nx, int ny, int nz, int channels,
                   int px, int py, int pz) {
    if (nx % px || ny % py || nz % pz)
        throw DataError("patchify: dims not divisible by patch dims");
    if (values.size() != std::size_t(nx) * ny * nz * channels)
        throw DataError("patchify: value count mismatch");
    PatchGrid g;
    g.grid_x = nx / px; g.grid_y = ny / py; g.grid_z = nz / pz;
    g.patch_x = px; g.patch_y = py; g.patch_z = pz;
    g.channels = channels;
    const int token_len = px * py * pz * channels;
    g.tokens.resize(g.grid_x * g.grid_y * g.grid_z, token_len);
    int t = 0;
    for (int gz = 0; gz < g.grid_z; ++gz)
        for (int gy = 0; gy < g.grid_y; ++gy)
            for (int gx = 0; gx < g.grid_x; ++gx, ++t) {
                int k = 0;
                for (int dz = 0; dz < pz; ++dz)
                    for (int dy = 0; dy < py; ++dy)
                        for (int dx = 0; dx < px; ++dx)
                            for (int c = 0; c < channels; ++c, ++k) {
                                const std::size_t z = std::size_t(gz) * pz + dz;
                                const std::size_t y = std::size_t(gy) * py + dy;
                                const std::size_t x = std::size_t(gx) * px + dx;
                                g.tokens(t, k) =
                                    values[((z * ny + y) * nx + x) * channels + c];
                            }
            }
    return g;
}

std::vector<double> unpatchify(const PatchGrid& g) {
    const int nx = g.grid_x * g.patch_x, ny = g.grid_y * g.patch_y,
              nz = g.grid_z * g.patch_z;
    std::vector<double> values(std::size_t(nx) * ny * nz * g.channels);
    int t = 0;
    for (int gz = 0; gz < g.grid_z; ++gz)
        for (int gy = 0; gy < g.grid_y; ++gy)
            for (int gx = 0; gx < g.grid_x; ++gx, ++t) {
                int k = 0;
                for (int dz = 0; dz < g.patch_z; ++dz)
                    for (int dy = 0; dy < g.patch_y; ++dy)
                        for (int dx = 0; dx < g.patch_x; ++dx)
                            for (int c = 0; c < g.channels; ++c, ++k) {
                                const std::size_t z = std::size_t(gz) * g.patch_z + dz;
                                const std::size_t y = std::size_t(gy) * g.patch_y + dy;
                                const std::size_t x = std::size_t(gx) * g.patch_x + dx;
                                values[((z * ny + y) * nx + x) * g.channels + c] =
                                    g.tokens(t, k);
                            }
            }
    return values;
}

PatchGrid crop_to_patches(const ChannelizedCrop& crop, const ModelConfig& cfg) {
    const int nx = kCropXY / cfg.pool_x, ny = kCropXY / cfg.pool_y,
              nz = kCropZ / cfg.pool_z;
    std::vector<double> pooled(std::size_t(nx) * ny * nz * cfg.channels, 0.0);
    const double inv = 1.0 / (cfg.pool_x * cfg.pool_y * cfg.pool_z);
    for (int z = 0; z < kCropZ; ++z)
        for (int y = 0; y < kCropXY; ++y)
            for (int x = 0; x < kCropXY; ++x)
                for (int c = 0; c < cfg.channels; ++c) {
                    const std::size_t src =
                        (std::size_t(z) * kCropXY * kCropXY + std::size_t(y) * kCropXY + x) *
                            cfg.channels + c;
                    const std::size_t dst =
                        ((std::size_t(z / cfg.pool_z) * ny + y / cfg.pool_y) * nx +
                         x / cfg.pool_x) * cfg.channels + c;
                    pooled[dst] += crop.values[src] * inv;
                }
    return patchify(pooled, nx, ny, nz, cfg.channels, cfg.patch_x, cfg.patch_y,
                    cfg.patch_z);
}

MaskSet sample_mask(int total, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("mask ratio must be in (0, 1)");
    const int k = int(std::lround(ratio * total));
    std::vector<int> pool(total);
    for (int i = 0; i < total; ++i) pool[i] = i;
    std::uint64_t state = seed ^ 0x6d61736bULL;
    for (int i = 0; i < k; ++i) {
        const int j = i + int(splitmix64(state) % std::uint64_t(total - i));
        std::swap(pool[i], pool[j]);
    }
    MaskSet m;
    m.total = total;
    m.masked.assign(pool.begin(), pool.begin() + k);
    std::sort(m.masked.begin(), m.masked.end());
    std::vector<bool> is_masked(total, false);
    for (int i : m.masked) is_masked[i] = true;
    for (int i = 0; i < total; ++i)
        if (!is_masked[i]) m.visible.push_back(i);
    return m;
}

// ---------------------------------------------------------------------------

namespace {

void add_transformer_shapes(std::vector<TensorShape>& s, const std::string& prefix,
                            int depth, int width, double mlp_ratio) {
    const int mlp = int(width * mlp_ratio);
    for (int i = 0; i < depth; ++i) {
        const std::string p = prefix + "L" + std::to_string(i) + ".";
        s.push_back({p + "ln1_g", 1, width});
        s.push_back({p + "ln1_b", 1, width});
        for (const char* w : {"wq", "wk", "wv", "wo"}) s.push_back({p + w, width, width});
        for (const char* b : {"bq", "bk", "bv", "bo"}) s.push_back({p + b, 1, width});
        s.push_back({p + "ln2_g", 1, width});
        s.push_back({p + "ln2_b", 1, width});
        s.push_back({p + "w1", width, mlp});
        s.push_back({p + "b1", 1, mlp});
        s.push_back({p + "w2", mlp, width});
        s.push_back({p + "b2", 1, width});
    }
    s.push_back({prefix + "lnf_g", 1, width});
    s.push_back({prefix + "lnf_b", 1, width});
}

}  // namespace

std::vector<TensorShape> model_tensor_shapes(const ModelConfig& cfg) {
    std::vector<TensorShape> s;
    // image tower
    s.push_back({"img.patch_w", cfg.token_len(), cfg.width});
    s.push_back({"img.patch_b", 1, cfg.width});
    s.push_back({"img.pos_x", cfg.grid_x(), cfg.width});
    s.push_back({"img.pos_y", cfg.grid_y(), cfg.width});
    s.push_back({"img.pos_z", cfg.grid_z(), cfg.width});
    s.push_back({"img.cls", 1, cfg.width});
    add_transformer_shapes(s, "img.", cfg.depth, cfg.width, cfg.mlp_ratio);
    s.push_back({"img.pool_q", 1, cfg.width});
    s.push_back({"img.pool_wk", cfg.width, cfg.width});
    s.push_back({"img.pool_wv", cfg.width, cfg.width});
    s.push_back({"img.proj", cfg.width, cfg.embed_dim});
    // text tower
    s.push_back({"txt.embed", cfg.text_vocab, cfg.text_width});
    s.push_back({"txt.pos", cfg.max_text_len, cfg.text_width});
    add_transformer_shapes(s, "txt.", cfg.text_depth, cfg.text_width, cfg.mlp_ratio);
    s.push_back({"txt.proj", cfg.text_width, cfg.embed_dim});
    // contrastive head
    s.push_back({"clip.logit_scale", 1, 1});
    s.push_back({"clip.bias", 1, 1});
    // MAE decoder
    s.push_back({"dec.in_w", cfg.width, cfg.dec_width});
    s.push_back({"dec.in_b", 1, cfg.dec_width});
    s.push_back({"dec.mask_token", 1, cfg.dec_width});
    s.push_back({"dec.pos_x", cfg.grid_x(), cfg.dec_width});
    s.push_back({"dec.pos_y", cfg.grid_y(), cfg.dec_width});
    s.push_back({"dec.pos_z", cfg.grid_z(), cfg.dec_width});
    add_transformer_shapes(s, "dec.", cfg.dec_depth, cfg.dec_width, cfg.mlp_ratio);
    s.push_back({"dec.head_w", cfg.dec_width, cfg.token_len()});
    s.push_back({"dec.head_b", 1, cfg.token_len()});
    return s;
}

nn::ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
    nn::ParamStore store;
    store.seed(seed);
    for (auto& sh : model_tensor_shapes(cfg)) {
        const bool is_gain = sh.name.find("ln1_g") != std::string::npos ||
                             sh.name.find("ln2_g") != std::string::npos ||
                             sh.name.find("lnf_g") != std::string::npos;
        const bool is_bias = sh.name.find("_b") != std::string::npos ||
                             sh.name.find(".b") == sh.name.size() - 3;
        if (sh.name == "clip.logit_scale") {
            Mat m(1, 1);
            m(0, 0) = std::log(1.0 / 0.07);
            store.add(sh.name, m);
        } else if (sh.name == "clip.bias") {
            store.add(sh.name, Mat::Zero(1, 1));
        } else if (is_gain) {
            store.add(sh.name, Mat::Ones(sh.rows, sh.cols));
        } else if (is_bias) {
            store.add(sh.name, Mat::Zero(sh.rows, sh.cols));
        } else {
            store.add(sh.name, store.gaussian(sh.rows, sh.cols, 0.02));
        }
    }
    return store;
}

std::size_t param_count(const ModelConfig& cfg, const std::string& prefix) {
    std::size_t n = 0;
    for (auto& sh : model_tensor_shapes(cfg))
        if (sh.name.rfind(prefix, 0) == 0) n += std::size_t(sh.rows) * sh.cols;
    return n;
}

// ---------------------------------------------------------------------------

namespace {

Tape::Id transformer_stack(Tape& t, const nn::ParamStore& params,
                           const std::string& prefix, int depth, int width, int heads,
                           Tape::Id x) {
    const int dh = width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(double(dh));
    for (int i = 0; i < depth; ++i) {
        const std::string p = prefix + "L" + std::to_string(i) + ".";
        auto P = [&](const std::string& n) { return t.param(p + n, params.at(p + n)); };
        // attention
        Tape::Id h = t.layer_norm(x, P("ln1_g"), P("ln1_b"));
        Tape::Id q = t.add_row(t.matmul(h, P("wq")), P("bq"));
        Tape::Id k = t.add_row(t.matmul(h, P("wk")), P("bk"));
        Tape::Id v = t.add_row(t.matmul(h, P("wv")), P("bv"));
        std::vector<Tape::Id> head_outs;
        for (int hd = 0; hd < heads; ++hd) {
            Tape::Id qh = t.slice_cols(q, hd * dh, dh);
            Tape::Id kh = t.slice_cols(k, hd * dh, dh);
            Tape::Id vh = t.slice_cols(v, hd * dh, dh);
            Tape::Id att = t.row_softmax(t.scale(t.matmul_nt(qh, kh), inv_sqrt));
            head_outs.push_back(t.matmul(att, vh));
        }
        Tape::Id attn = t.add_row(t.matmul(t.concat_cols(head_outs), P("wo")), P("bo"));
        x = t.add(x, attn);
        // mlp
        Tape::Id m = t.layer_norm(x, P("ln2_g"), P("ln2_b"));
        m = t.gelu(t.add_row(t.matmul(m, P("w1")), P("b1")));
        m = t.add_row(t.matmul(m, P("w2")), P("b2"));
        x = t.add(x, m);
    }
    return t.layer_norm(x, t.param(prefix + "lnf_g", params.at(prefix + "lnf_g")),
                        t.param(prefix + "lnf_b", params.at(prefix + "lnf_b")));
}

// Sum of per-axis embeddings for tokens in x-fastest grid order, restricted to
// `keep` (empty = all tokens).
Tape::Id positional_sum(Tape& t, const nn::ParamStore& params, const std::string& prefix,
                        int gx, int gy, int gz, const std::vector<int>& keep) {
    std::vector<int> xs, ys, zs;
    auto emit = [&](int token) {
        xs.push_back(token % gx);
        ys.push_back((token / gx) % gy);
        zs.push_back(token / (gx * gy));
    };
    if (keep.empty())
        for (int i = 0; i < gx * gy * gz; ++i) emit(i);
    else
        for (int i : keep) emit(i);
    Tape::Id px = t.gather_rows(t.param(prefix + "pos_x", params.at(prefix + "pos_x")), xs);
    Tape::Id py = t.gather_rows(t.param(prefix + "pos_y", params.at(prefix + "pos_y")), ys);
    Tape::Id pz = t.gather_rows(t.param(prefix + "pos_z", params.at(prefix + "pos_z")), zs);
    return t.add(t.add(px, py), pz);
}

}  // namespace

ImageForward encode_image(Tape& t, const nn::ParamStore& params, const ModelConfig& cfg,
                          const PatchGrid& grid, const std::optional<MaskSet>& mask) {
    if (grid.tokens.cols() != cfg.token_len())
        throw DataError("encode_image: token length mismatch");
    Tape::Id tokens = t.leaf(grid.tokens);
    Tape::Id emb = t.add_row(t.matmul(tokens, t.param("img.patch_w", params.at("img.patch_w"))),
                             t.param("img.patch_b", params.at("img.patch_b")));
    const std::vector<int> keep = mask ? mask->visible : std::vector<int>{};
    Tape::Id pos = positional_sum(t, params, "img.", grid.grid_x, grid.grid_y, grid.grid_z,
                                  keep);
    Tape::Id x = mask ? t.add(t.gather_rows(emb, mask->visible), pos) : t.add(emb, pos);
    Tape::Id cls = t.param("img.cls", params.at("img.cls"));
    x = t.concat_rows({cls, x});
    Tape::Id states = transformer_stack(t, params, "img.", cfg.depth, cfg.width, cfg.heads,
                                        x);
    // attention pooling: one learned query over all output tokens incl. cls
    Tape::Id q = t.param("img.pool_q", params.at("img.pool_q"));
    Tape::Id keys = t.matmul(states, t.param("img.pool_wk", params.at("img.pool_wk")));
    Tape::Id vals = t.matmul(states, t.param("img.pool_wv", params.at("img.pool_wv")));
    Tape::Id att = t.row_softmax(t.scale(t.matmul_nt(q, keys), 1.0 / std::sqrt(cfg.width)));
    Tape::Id pooled = t.matmul(att, vals);
    return {states, pooled};
}

std::vector<int> tokenize_text(const std::string& text, const ModelConfig& cfg) {
    std::vector<int> ids;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) return;
        // id 0 is reserved for the empty-text special token
        ids.push_back(1 + int(fnv1a64(cur) % std::uint64_t(cfg.text_vocab - 1)));
        cur.clear();
    };
    for (char c : to_lower(text)) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur.push_back(c);
        else
            flush();
    }
    flush();
    if (ids.empty()) ids.push_back(0);
    if (int(ids.size()) > cfg.max_text_len) ids.resize(cfg.max_text_len);
    return ids;
}

Tape::Id encode_text(Tape& t, const nn::ParamStore& params, const ModelConfig& cfg,
                     const std::string& text) {
    const std::vector<int> ids = tokenize_text(text, cfg);
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = int(i);
    Tape::Id emb = t.gather_rows(t.param("txt.embed", params.at("txt.embed")), ids);
    Tape::Id pos = t.gather_rows(t.param("txt.pos", params.at("txt.pos")), positions);
    Tape::Id states = transformer_stack(t, params, "txt.", cfg.text_depth, cfg.text_width,
                                        cfg.text_heads, t.add(emb, pos));
    return t.mean_rows(states);
}

Tape::Id project_normalize(Tape& t, const nn::ParamStore& params,
                           const std::string& proj_name, Tape::Id raw) {
    Tape::Id p = t.matmul(raw, t.param(proj_name, params.at(proj_name)));
    return t.l2_normalize_rows(p);
}

Tape::Id decode_mae(Tape& t, const nn::ParamStore& params, const ModelConfig& cfg,
                    Tape::Id token_states, const MaskSet& mask) {
    // map encoder states to decoder width, drop cls
    Tape::Id d = t.add_row(t.matmul(token_states, t.param("dec.in_w", params.at("dec.in_w"))),
                           t.param("dec.in_b", params.at("dec.in_b")));
    std::vector<int> vis_rows(mask.visible.size());
    for (std::size_t i = 0; i < vis_rows.size(); ++i) vis_rows[i] = int(i) + 1;
    Tape::Id vis = t.gather_rows(d, vis_rows);
    Tape::Id msk = t.repeat_row(t.param("dec.mask_token", params.at("dec.mask_token")),
                                int(mask.masked.size()));
    // rebuild the full token order: row p of the output comes from either the
    // visible block or the mask block
    std::vector<int> perm(mask.total);
    for (std::size_t i = 0; i < mask.visible.size(); ++i) perm[mask.visible[i]] = int(i);
    for (std::size_t i = 0; i < mask.masked.size(); ++i)
        perm[mask.masked[i]] = int(mask.visible.size() + i);
    Tape::Id full = t.gather_rows(t.concat_rows({vis, msk}), perm);
    Tape::Id pos = positional_sum(t, params, "dec.", cfg.grid_x(), cfg.grid_y(),
                                  cfg.grid_z(), {});
    Tape::Id x = t.add(full, pos);
    Tape::Id states = transformer_stack(t, params, "dec.", cfg.dec_depth, cfg.dec_width,
                                        cfg.heads, x);
    return t.add_row(t.matmul(states, t.param("dec.head_w", params.at("dec.head_w"))),
                     t.param("dec.head_b", params.at("dec.head_b")));
}

Mat image_embedding(const nn::ParamStore& params, const ModelConfig& cfg,
                    const PatchGrid& grid) {
    Tape t;
    auto fwd = encode_image(t, params, cfg, grid);
    return t.value(project_normalize(t, params, "img.proj", fwd.pooled));
}

Mat text_embedding(const nn::ParamStore& params, const ModelConfig& cfg,
                   const std::string& text) {
    Tape t;
    return t.value(project_normalize(t, params, "txt.proj", encode_text(t, params, cfg, text)));
}

}  // namespace organct
