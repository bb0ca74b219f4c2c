#include "organct/losses.hpp"

#include <cmath>

#include "organct/util.hpp"

namespace organct {

using nn::Mat;
using nn::Tape;

namespace {

void check_embeddings(Tape& t, Tape::Id image_emb, Tape::Id text_emb) {
    const Mat& a = t.value(image_emb);
    const Mat& b = t.value(text_emb);
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw NumericError("contrastive loss: embedding shape mismatch");
    if (a.rows() < 2)
        throw NumericError("contrastive loss needs at least 2 pairs");
    for (const Mat* m : {&a, &b})
        for (Eigen::Index r = 0; r < m->rows(); ++r)
            if (std::abs(m->row(r).norm() - 1.0) > 1e-4)
                throw NumericError("contrastive loss: embeddings are not unit-norm");
}

}  // namespace

Tape::Id infonce_loss(Tape& t, Tape::Id image_emb, Tape::Id text_emb,
                      Tape::Id logit_scale) {
    check_embeddings(t, image_emb, text_emb);
    Tape::Id scale = t.exp_clamp(logit_scale, std::log(100.0));
    Tape::Id logits = t.scale_by_cell(t.matmul_nt(image_emb, text_emb), scale);
    Tape::Id i2t = t.cross_entropy_diagonal(logits);
    Tape::Id t2i = t.cross_entropy_diagonal(t.transpose(logits));
    return t.scale(t.add(i2t, t2i), 0.5);
}

Tape::Id sigmoid_pair_loss(Tape& t, Tape::Id image_emb, Tape::Id text_emb,
                           Tape::Id logit_scale, Tape::Id bias) {
    check_embeddings(t, image_emb, text_emb);
    const int n = int(t.value(image_emb).rows());
    Tape::Id scale = t.exp_clamp(logit_scale, std::log(100.0));
    Tape::Id logits = t.scale_by_cell(t.matmul_nt(image_emb, text_emb), scale);
    // broadcast the scalar bias over the full logit matrix
    Tape::Id bmat = t.matmul(t.repeat_row(bias, n), t.leaf(Mat::Ones(1, n)));
    Tape::Id shifted = t.add(logits, bmat);
    // sign matrix: +1 diagonal, -1 elsewhere
    Mat sign = Mat::Constant(n, n, -1.0);
    sign.diagonal().setOnes();
    Tape::Id margins = t.mul_const(shifted, -sign);
    return t.mean_all(t.softplus(margins));
}

Tape::Id mae_loss(Tape& t, Tape::Id pred, const Mat& target,
                  const std::vector<int>& masked) {
    if (masked.empty()) throw NumericError("reconstruction loss: empty mask");
    const Mat& p = t.value(pred);
    if (p.rows() != target.rows() || p.cols() != target.cols())
        throw NumericError("reconstruction loss: prediction/target shape mismatch");
    Mat target_masked(Eigen::Index(masked.size()), target.cols());
    for (std::size_t i = 0; i < masked.size(); ++i)
        target_masked.row(Eigen::Index(i)) = target.row(masked[i]);
    Tape::Id pm = t.gather_rows(pred, masked);
    Tape::Id diff = t.sub(pm, t.leaf(target_masked));
    return t.mean_all(t.mul(diff, diff));
}

}  // namespace organct
