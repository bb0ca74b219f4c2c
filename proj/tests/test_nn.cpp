#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>

#include "organct/nn/params.hpp"
#include "organct/nn/tape.hpp"
#include "organct/optim.hpp"
#include "organct/util.hpp"

using namespace organct;
using nn::Mat;
using nn::Tape;

namespace {

Mat random_mat(int r, int c, std::uint64_t seed) {
    Mat m(r, c);
    std::uint64_t state = seed;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = 2.0 * uniform01(state) - 1.0;
    return m;
}

// Finite-difference check of one tape op: builds scalar = sum(op(X) .* W) and
// compares dscalar/dX against central differences entry by entry.
void check_op(const char* name, const Mat& x0,
              const std::function<Tape::Id(Tape&, Tape::Id)>& op, double tol = 1e-7) {
    CAPTURE(name);
    auto scalar_of = [&](const Mat& x) {
        Tape t;
        Tape::Id y = op(t, t.leaf(x));
        // weighted sum so every output entry contributes a distinct gradient
        Mat weights = random_mat(int(t.value(y).rows()), int(t.value(y).cols()), 7);
        Tape::Id s = t.mean_all(t.mul(y, t.leaf(weights)));
        return t.value(s)(0, 0);
    };
    Tape t;
    Tape::Id x = t.leaf(x0);
    Tape::Id y = op(t, x);
    Mat weights = random_mat(int(t.value(y).rows()), int(t.value(y).cols()), 7);
    Tape::Id s = t.mean_all(t.mul(y, t.leaf(weights)));
    t.backward(s, Mat::Constant(1, 1, 1.0));
    const Mat& analytic = t.grad(x);

    const double eps = 1e-6;
    for (int i = 0; i < x0.rows(); ++i)
        for (int j = 0; j < x0.cols(); ++j) {
            Mat xp = x0, xm = x0;
            xp(i, j) += eps;
            xm(i, j) -= eps;
            const double numeric = (scalar_of(xp) - scalar_of(xm)) / (2 * eps);
            CHECK(analytic(i, j) == doctest::Approx(numeric).epsilon(tol).scale(1.0));
        }
}

}  // namespace

TEST_CASE("every tape op matches central finite differences") {
    const Mat a = random_mat(3, 4, 1);
    const Mat b = random_mat(4, 3, 2);
    const Mat sq = random_mat(3, 3, 3);

    check_op("matmul", a, [&](Tape& t, Tape::Id x) { return t.matmul(x, t.leaf(b)); });
    check_op("matmul_nt", a,
             [&](Tape& t, Tape::Id x) { return t.matmul_nt(x, t.leaf(random_mat(5, 4, 4))); });
    check_op("add", a, [&](Tape& t, Tape::Id x) { return t.add(x, t.leaf(random_mat(3, 4, 5))); });
    check_op("sub", a, [&](Tape& t, Tape::Id x) { return t.sub(x, t.leaf(random_mat(3, 4, 6))); });
    check_op("mul", a, [&](Tape& t, Tape::Id x) { return t.mul(x, t.leaf(random_mat(3, 4, 8))); });
    check_op("mul_const", a,
             [&](Tape& t, Tape::Id x) { return t.mul_const(x, random_mat(3, 4, 9)); });
    check_op("add_row", a,
             [&](Tape& t, Tape::Id x) { return t.add_row(x, t.leaf(random_mat(1, 4, 10))); });
    check_op("scale", a, [&](Tape& t, Tape::Id x) { return t.scale(x, -1.7); });
    check_op("transpose", a, [&](Tape& t, Tape::Id x) { return t.transpose(x); });
    check_op("row_softmax", a, [&](Tape& t, Tape::Id x) { return t.row_softmax(x); });
    check_op("layer_norm", a, [&](Tape& t, Tape::Id x) {
        return t.layer_norm(x, t.leaf(random_mat(1, 4, 11).array().abs().matrix() +
                                      Mat::Constant(1, 4, 0.5)),
                            t.leaf(random_mat(1, 4, 12)));
    }, 1e-5);
    check_op("gelu", a, [&](Tape& t, Tape::Id x) { return t.gelu(x); });
    check_op("softplus", a, [&](Tape& t, Tape::Id x) { return t.softplus(x); });
    check_op("slice_cols", a, [&](Tape& t, Tape::Id x) { return t.slice_cols(x, 1, 2); });
    check_op("concat_cols", a, [&](Tape& t, Tape::Id x) {
        return t.concat_cols({x, t.leaf(random_mat(3, 2, 13))});
    });
    check_op("concat_rows", a, [&](Tape& t, Tape::Id x) {
        return t.concat_rows({x, t.leaf(random_mat(2, 4, 14))});
    });
    check_op("gather_rows", a,
             [&](Tape& t, Tape::Id x) { return t.gather_rows(x, {2, 0, 0, 1}); });
    check_op("repeat_row", random_mat(1, 4, 15),
             [&](Tape& t, Tape::Id x) { return t.repeat_row(x, 5); });
    check_op("mean_rows", a, [&](Tape& t, Tape::Id x) { return t.mean_rows(x); });
    check_op("mean_all", a, [&](Tape& t, Tape::Id x) { return t.mean_all(x); });
    check_op("l2_normalize_rows", a,
             [&](Tape& t, Tape::Id x) { return t.l2_normalize_rows(x); });
    check_op("cross_entropy_diagonal", sq,
             [&](Tape& t, Tape::Id x) { return t.cross_entropy_diagonal(x); });
    check_op("exp_clamp", random_mat(1, 1, 16),
             [&](Tape& t, Tape::Id x) { return t.exp_clamp(x, 2.0); });
    check_op("scale_by_cell", a, [&](Tape& t, Tape::Id x) {
        return t.scale_by_cell(x, t.leaf(Mat::Constant(1, 1, 0.8)));
    });
}

TEST_CASE("layer norm output has zero mean and unit variance per row") {
    Tape t;
    const Mat x = random_mat(4, 8, 21);
    Tape::Id y = t.layer_norm(t.leaf(x), t.leaf(Mat::Ones(1, 8)), t.leaf(Mat::Zero(1, 8)));
    const Mat& v = t.value(y);
    for (int i = 0; i < v.rows(); ++i) {
        CHECK(v.row(i).mean() == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(v.row(i).squaredNorm() / 8.0 == doctest::Approx(1.0).epsilon(1e-4));
    }
}

TEST_CASE("row softmax rows sum to one and exp_clamp saturates") {
    Tape t;
    const Mat& y = t.value(t.row_softmax(t.leaf(random_mat(5, 6, 22))));
    for (int i = 0; i < y.rows(); ++i) CHECK(y.row(i).sum() == doctest::Approx(1.0));
    // clamped exponential never exceeds exp(cap) and has zero slope past it
    Tape t2;
    Tape::Id big = t2.leaf(Mat::Constant(1, 1, 10.0));
    Tape::Id e = t2.exp_clamp(big, std::log(100.0));
    CHECK(t2.value(e)(0, 0) == doctest::Approx(100.0));
    t2.backward(e, Mat::Constant(1, 1, 1.0));
    CHECK(t2.grad(big)(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("gradients accumulate across tapes by parameter name") {
    nn::GradMap sink;
    const Mat w = random_mat(2, 2, 30);
    for (int rep = 0; rep < 2; ++rep) {
        Tape t;
        Tape::Id p = t.param("w", w);
        Tape::Id s = t.mean_all(t.mul(p, p));
        t.backward(s, Mat::Constant(1, 1, 1.0));
        t.accumulate_param_grads(sink);
    }
    const Mat expected = 2.0 * (2.0 * w / 4.0);  // two accumulations of d mean(w^2)
    CHECK((sink.at("w") - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("learning-rate schedule: warmup, cosine decay, exact zero at the end") {
    TrainConfig cfg = TrainConfig::mae_defaults();
    cfg.base_lr = 1.0;
    cfg.warmup_frac = 0.1;
    const int total = 1000;
    // linear ramp over the first 10%
    CHECK(lr_at_step(cfg, 0, total) == doctest::Approx(1.0 / 100.0));
    CHECK(lr_at_step(cfg, 49, total) == doctest::Approx(0.5));
    CHECK(lr_at_step(cfg, 99, total) == doctest::Approx(1.0));
    // peak right after warmup, then monotone cosine to zero
    CHECK(lr_at_step(cfg, 100, total) <= 1.0);
    double prev = 2.0;
    for (int s = 100; s < total; s += 50) {
        const double lr = lr_at_step(cfg, s, total);
        CHECK(lr < prev);
        prev = lr;
    }
    CHECK(lr_at_step(cfg, total, total) == 0.0);
    CHECK(lr_at_step(cfg, total - 1, total) < 1e-4);
}

TEST_CASE("adamw matches a hand-stepped scalar reference") {
    TrainConfig cfg = TrainConfig::mae_defaults();
    cfg.weight_decay = 0.01;
    nn::ParamStore params;
    params.add("w", Mat::Constant(2, 1, 1.0));  // 2 rows so decay applies
    AdamW opt(cfg, params);

    double m = 0, v = 0, ref = 1.0;
    const double g = 0.3, lr = 1e-2;
    for (int t = 1; t <= 5; ++t) {
        nn::GradMap grads;
        grads["w"] = Mat::Constant(2, 1, g);
        opt.step(params, grads, lr);
        ref *= (1.0 - lr * cfg.weight_decay);
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mhat = m / (1 - std::pow(cfg.beta1, t));
        const double vhat = v / (1 - std::pow(cfg.beta2, t));
        ref -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        CHECK(params.at("w")(0, 0) == doctest::Approx(ref).epsilon(1e-12));
    }
}

TEST_CASE("gradient clipping preserves direction and caps the global norm") {
    nn::GradMap grads;
    grads["a"] = Mat::Constant(2, 2, 3.0);
    grads["b"] = Mat::Constant(1, 2, 4.0);
    const double before = nn::global_grad_norm(grads);
    const double reported = clip_global_norm(grads, 1.0);
    CHECK(reported == doctest::Approx(before));
    CHECK(nn::global_grad_norm(grads) == doctest::Approx(1.0));
    CHECK(grads["a"](0, 0) / grads["b"](0, 0) == doctest::Approx(3.0 / 4.0));
    // below the threshold nothing changes
    nn::GradMap small;
    small["a"] = Mat::Constant(1, 1, 0.5);
    clip_global_norm(small, 1.0);
    CHECK(small["a"](0, 0) == doctest::Approx(0.5));
}

TEST_CASE("checkpoints round-trip bit exactly") {
    const auto path = std::filesystem::temp_directory_path() / "organct_ckpt_test.bin";
    nn::ParamStore params;
    params.seed(5);
    params.add("beta", params.gaussian(3, 4, 0.02));
    params.add("alpha", params.gaussian(2, 2, 1.0));
    nn::save_checkpoint(path, params, R"({"stage":"test"})");

    nn::ParamStore loaded;
    const std::string meta = nn::load_checkpoint(path, loaded);
    CHECK(meta.find("test") != std::string::npos);
    REQUIRE(loaded.tensors().size() == 2);
    for (auto& [name, m] : params.tensors())
        CHECK((loaded.at(name) - m).cwiseAbs().maxCoeff() == 0.0);

    // identical stores serialize to identical bytes
    const auto path2 = std::filesystem::temp_directory_path() / "organct_ckpt_test2.bin";
    nn::save_checkpoint(path2, loaded, R"({"stage":"test"})");
    CHECK(read_text_file(path) == read_text_file(path2));
}

TEST_CASE("gaussian init is deterministic under seed") {
    nn::ParamStore a, b;
    a.seed(123);
    b.seed(123);
    CHECK((a.gaussian(4, 4, 0.5) - b.gaussian(4, 4, 0.5)).cwiseAbs().maxCoeff() == 0.0);
    nn::ParamStore c;
    c.seed(124);
    CHECK((a.gaussian(4, 4, 0.5) - c.gaussian(4, 4, 0.5)).cwiseAbs().maxCoeff() > 0.0);
}
