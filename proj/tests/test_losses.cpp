#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "organct/gradcheck.hpp"
#include "organct/losses.hpp"
#include "organct/model.hpp"
#include "organct/util.hpp"

using namespace organct;
using nn::Mat;
using nn::Tape;

namespace {

Mat random_mat(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Mat m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = dist(rng);
    return m;
}

Mat unit_rows(int rows, int cols, std::uint64_t seed) {
    Mat m = random_mat(rows, cols, seed);
    for (int r = 0; r < rows; ++r) m.row(r) /= m.row(r).norm();
    return m;
}

PatchGrid random_grid(const ModelConfig& cfg, std::uint64_t seed) {
    PatchGrid g;
    g.tokens = 0.5 * (random_mat(cfg.token_count(), cfg.token_len(), seed) +
                      Mat::Ones(cfg.token_count(), cfg.token_len()));
    g.grid_x = cfg.grid_x();
    g.grid_y = cfg.grid_y();
    g.grid_z = cfg.grid_z();
    g.patch_x = cfg.patch_x;
    g.patch_y = cfg.patch_y;
    g.patch_z = cfg.patch_z;
    g.channels = cfg.channels;
    return g;
}

}  // namespace

TEST_CASE("contrastive loss on identical embeddings equals ln N") {
    for (int n : {2, 5, 16}) {
        Mat row = unit_rows(1, 8, 7);
        Mat emb(n, 8);
        for (int i = 0; i < n; ++i) emb.row(i) = row;
        Tape t;
        auto img = t.leaf(emb);
        auto txt = t.leaf(emb);
        // identical rows make the softmax uniform at any temperature
        auto ls = t.leaf(Mat::Constant(1, 1, std::log(1.0 / 0.07)));
        auto loss = infonce_loss(t, img, txt, ls);
        CHECK(std::abs(t.value(loss)(0, 0) - std::log(double(n))) < 1e-12);
    }
}

TEST_CASE("contrastive loss on two orthogonal embeddings at unit scale") {
    Mat emb = Mat::Zero(2, 4);
    emb(0, 0) = 1.0;
    emb(1, 2) = 1.0;
    Tape t;
    auto img = t.leaf(emb);
    auto txt = t.leaf(emb);
    auto ls = t.leaf(Mat::Zero(1, 1));  // exp(0) = 1
    auto loss = infonce_loss(t, img, txt, ls);
    // per-row cross entropy: log(e^1 + e^0) - 1 = log(1 + e^-1)
    CHECK(std::abs(t.value(loss)(0, 0) - std::log(1.0 + std::exp(-1.0))) < 1e-12);
}

TEST_CASE("contrastive loss rejects bad inputs") {
    Tape t;
    auto ls = t.leaf(Mat::Zero(1, 1));
    auto one = t.leaf(unit_rows(1, 4, 1));
    CHECK_THROWS_AS(infonce_loss(t, one, one, ls), NumericError);
    auto bad = t.leaf(2.0 * unit_rows(3, 4, 2));  // rows not unit-norm
    auto ok = t.leaf(unit_rows(3, 4, 3));
    CHECK_THROWS_AS(infonce_loss(t, bad, ok, ls), NumericError);
    auto mismatch = t.leaf(unit_rows(4, 4, 4));
    CHECK_THROWS_AS(infonce_loss(t, mismatch, ok, ls), NumericError);
}

TEST_CASE("pairwise sigmoid loss matches the direct formula") {
    const int n = 5, d = 6;
    const Mat a = unit_rows(n, d, 11);
    const Mat b = unit_rows(n, d, 12);
    const double log_s = 0.8, bias = -1.3;
    Tape t;
    auto loss = sigmoid_pair_loss(t, t.leaf(a), t.leaf(b),
                                  t.leaf(Mat::Constant(1, 1, log_s)),
                                  t.leaf(Mat::Constant(1, 1, bias)));
    const double s = std::exp(log_s);
    double expect = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double z = (i == j) ? 1.0 : -1.0;
            const double logit = s * a.row(i).dot(b.row(j)) + bias;
            expect += std::log1p(std::exp(-z * logit));
        }
    expect /= double(n) * n;
    CHECK(std::abs(t.value(loss)(0, 0) - expect) < 1e-12);
}

TEST_CASE("reconstruction loss matches the residual oracle") {
    const int rows = 9, cols = 7;
    const Mat pred = random_mat(rows, cols, 21);
    const Mat target = random_mat(rows, cols, 22);
    const std::vector<int> masked = {0, 2, 3, 6, 8};
    Tape t;
    auto loss = mae_loss(t, t.leaf(pred), target, masked);
    double expect = 0.0;
    for (int r : masked) expect += (pred.row(r) - target.row(r)).squaredNorm();
    expect /= double(masked.size()) * cols;
    CHECK(std::abs(t.value(loss)(0, 0) - expect) < 1e-12);
    CHECK_THROWS_AS(mae_loss(t, t.leaf(pred), target, {}), NumericError);
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checks through the full small-scale model.

TEST_CASE("reconstruction loss gradients through encoder and decoder") {
    const auto cfg = ModelConfig::desk_preset();
    auto params = init_params(cfg, 31);
    const auto grid = random_grid(cfg, 32);
    const auto mask = sample_mask(cfg.token_count(), 0.75, 33);

    auto scalar = [&](const nn::ParamStore& p) {
        Tape t;
        auto enc = encode_image(t, p, cfg, grid, mask);
        auto loss = mae_loss(t, decode_mae(t, p, cfg, enc.token_states, mask),
                             grid.tokens, mask.masked);
        return t.value(loss)(0, 0);
    };
    auto grads = [&](const nn::ParamStore& p) {
        Tape t;
        auto enc = encode_image(t, p, cfg, grid, mask);
        auto loss = mae_loss(t, decode_mae(t, p, cfg, enc.token_states, mask),
                             grid.tokens, mask.masked);
        t.backward(loss, Mat::Ones(1, 1));
        nn::GradMap g;
        t.accumulate_param_grads(g);
        return g;
    };
    const auto res = check_gradients(params, scalar, grads, 2, 1e-5, 41);
    INFO("worst: ", res.worst_param);
    CHECK(res.checked > 0);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("contrastive loss gradients through both towers") {
    const auto cfg = ModelConfig::desk_preset();
    auto params = init_params(cfg, 51);
    const std::vector<PatchGrid> grids = {random_grid(cfg, 52), random_grid(cfg, 53)};
    const std::vector<std::string> texts = {"A mass is present in the liver.",
                                            "No abnormality is observed in the spleen."};

    auto build = [&](Tape& t, const nn::ParamStore& p) {
        std::vector<Tape::Id> img_rows, txt_rows;
        for (std::size_t i = 0; i < grids.size(); ++i) {
            img_rows.push_back(project_normalize(
                t, p, "img.proj", encode_image(t, p, cfg, grids[i]).pooled));
            txt_rows.push_back(
                project_normalize(t, p, "txt.proj", encode_text(t, p, cfg, texts[i])));
        }
        auto ls = t.param("clip.logit_scale", p.at("clip.logit_scale"));
        return infonce_loss(t, t.concat_rows(img_rows), t.concat_rows(txt_rows), ls);
    };
    auto scalar = [&](const nn::ParamStore& p) {
        Tape t;
        return t.value(build(t, p))(0, 0);
    };
    auto grads = [&](const nn::ParamStore& p) {
        Tape t;
        t.backward(build(t, p), Mat::Ones(1, 1));
        nn::GradMap g;
        t.accumulate_param_grads(g);
        return g;
    };
    const auto res = check_gradients(params, scalar, grads, 2, 1e-5, 61);
    INFO("worst: ", res.worst_param);
    CHECK(res.max_rel_error < 1e-5);
}

TEST_CASE("pairwise sigmoid loss gradients through both towers") {
    const auto cfg = ModelConfig::desk_preset();
    auto params = init_params(cfg, 71);
    const std::vector<PatchGrid> grids = {random_grid(cfg, 72), random_grid(cfg, 73)};
    const std::vector<std::string> texts = {"A cyst is present in the pancreas.",
                                            "No abnormality is observed in the heart."};

    auto build = [&](Tape& t, const nn::ParamStore& p) {
        std::vector<Tape::Id> img_rows, txt_rows;
        for (std::size_t i = 0; i < grids.size(); ++i) {
            img_rows.push_back(project_normalize(
                t, p, "img.proj", encode_image(t, p, cfg, grids[i]).pooled));
            txt_rows.push_back(
                project_normalize(t, p, "txt.proj", encode_text(t, p, cfg, texts[i])));
        }
        auto ls = t.param("clip.logit_scale", p.at("clip.logit_scale"));
        auto bias = t.param("clip.bias", p.at("clip.bias"));
        return sigmoid_pair_loss(t, t.concat_rows(img_rows), t.concat_rows(txt_rows), ls,
                                 bias);
    };
    auto scalar = [&](const nn::ParamStore& p) {
        Tape t;
        return t.value(build(t, p))(0, 0);
    };
    auto grads = [&](const nn::ParamStore& p) {
        Tape t;
        t.backward(build(t, p), Mat::Ones(1, 1));
        nn::GradMap g;
        t.accumulate_param_grads(g);
        return g;
    };
    const auto res = check_gradients(params, scalar, grads, 2, 1e-5, 81);
    INFO("worst: ", res.worst_param);
    CHECK(res.max_rel_error < 1e-5);
}
