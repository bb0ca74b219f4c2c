#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

namespace organct::nn {

using Mat = Eigen::MatrixXd;

// Reverse-mode autodiff tape over dense 64-bit matrices. A tape is built per
// forward pass and discarded; parameters live outside the tape and are
// referenced by name so their gradients can be accumulated across samples.
class Tape {
public:
    using Id = int;

    Id leaf(Mat value);                              // constant, but grad is retrievable
    Id param(const std::string& name, const Mat& value);

    Id matmul(Id a, Id b);        // A * B
    Id matmul_nt(Id a, Id b);     // A * B^T
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);           // elementwise
    Id mul_const(Id a, Mat c);    // elementwise by constant
    Id add_row(Id a, Id bias);    // bias is 1 x w, broadcast over rows
    Id scale(Id a, double s);
    Id transpose(Id a);
    Id row_softmax(Id a);
    Id layer_norm(Id a, Id gamma, Id beta);  // gamma/beta are 1 x w
    Id gelu(Id a);
    Id softplus(Id a);
    Id slice_cols(Id a, int c0, int len);
    Id concat_cols(const std::vector<Id>& parts);
    Id concat_rows(const std::vector<Id>& parts);
    Id gather_rows(Id a, std::vector<int> indices);
    Id repeat_row(Id a, int n);   // a is 1 x w
    Id mean_rows(Id a);           // -> 1 x w
    Id mean_all(Id a);            // -> 1 x 1
    Id l2_normalize_rows(Id a);
    // mean over rows i of [logsumexp(row_i) - a(i, i)]; a is square -> 1 x 1
    Id cross_entropy_diagonal(Id a);
    // y = exp(min(x, cap)) on a 1 x 1 node
    Id exp_clamp(Id a, double cap);
    Id scale_by_cell(Id a, Id s);  // s is 1 x 1

    const Mat& value(Id id) const { return nodes_[id].value; }
    // Zero until backward() has run.
    const Mat& grad(Id id) const;

    // Seeds d(output) and propagates to every node. For a scalar loss pass a
    // 1x1 seed of 1.
    void backward(Id output, const Mat& seed);

    // Adds every param node's gradient into `sink` (keyed by param name).
    void accumulate_param_grads(std::map<std::string, Mat>& sink) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        Leaf, Param, MatMul, MatMulNT, Add, Sub, Mul, MulConst, AddRow, Scale,
        Transpose, RowSoftmax, LayerNorm, Gelu, Softplus, SliceCols, ConcatCols,
        ConcatRows, GatherRows, RepeatRow, MeanRows, MeanAll, L2NormRows,
        CrossEntDiag, ExpClamp, ScaleByCell
    };
    struct Node {
        Op op;
        std::vector<Id> inputs;
        Mat value;
        Mat grad;          // empty until touched
        Mat aux;           // op-dependent (softmax output, layernorm stats, ...)
        Mat constant;      // MulConst
        std::vector<int> indices;
        double scalar = 0.0;
        std::string pname;
    };

    Id push(Node n);
    Mat& grad_of(Id id);

    std::vector<Node> nodes_;
    mutable Mat zero_;
};

}  // namespace organct::nn
