#include "organct/nn/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace organct::nn {

namespace {
constexpr double kLnEps = 1e-6;   // layernorm variance epsilon
constexpr double kNormFloor = 1e-12;
}  // namespace

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return Id(nodes_.size() - 1);
}

Mat& Tape::grad_of(Id id) {
    Node& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

const Mat& Tape::grad(Id id) const {
    const Node& n = nodes_[id];
    if (n.grad.size() == 0) {
        zero_ = Mat::Zero(n.value.rows(), n.value.cols());
        return zero_;
    }
    return n.grad;
}

Tape::Id Tape::leaf(Mat value) { return push({Op::Leaf, {}, std::move(value)}); }

Tape::Id Tape::param(const std::string& name, const Mat& value) {
    Node n{Op::Param, {}, value};
    n.pname = name;
    return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
    return push({Op::MatMul, {a, b}, nodes_[a].value * nodes_[b].value});
}

Tape::Id Tape::matmul_nt(Id a, Id b) {
    return push({Op::MatMulNT, {a, b}, nodes_[a].value * nodes_[b].value.transpose()});
}

Tape::Id Tape::add(Id a, Id b) {
    return push({Op::Add, {a, b}, nodes_[a].value + nodes_[b].value});
}

Tape::Id Tape::sub(Id a, Id b) {
    return push({Op::Sub, {a, b}, nodes_[a].value - nodes_[b].value});
}

Tape::Id Tape::mul(Id a, Id b) {
    return push({Op::Mul, {a, b}, nodes_[a].value.cwiseProduct(nodes_[b].value)});
}

Tape::Id Tape::mul_const(Id a, Mat c) {
    Node n{Op::MulConst, {a}, nodes_[a].value.cwiseProduct(c)};
    n.constant = std::move(c);
    return push(std::move(n));
}

Tape::Id Tape::add_row(Id a, Id bias) {
    Mat v = nodes_[a].value;
    v.rowwise() += nodes_[bias].value.row(0);
    return push({Op::AddRow, {a, bias}, std::move(v)});
}

Tape::Id Tape::scale(Id a, double s) {
    Node n{Op::Scale, {a}, nodes_[a].value * s};
    n.scalar = s;
    return push(std::move(n));
}

Tape::Id Tape::transpose(Id a) {
    return push({Op::Transpose, {a}, nodes_[a].value.transpose()});
}

Tape::Id Tape::row_softmax(Id a) {
    Mat v = nodes_[a].value;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        v.row(i) = (v.row(i).array() - m).exp();
        v.row(i) /= v.row(i).sum();
    }
    Node n{Op::RowSoftmax, {a}, v};
    n.aux = std::move(v);
    return push(std::move(n));
}

Tape::Id Tape::layer_norm(Id a, Id gamma, Id beta) {
    const Mat& x = nodes_[a].value;
    const Eigen::Index w = x.cols();
    Mat xhat(x.rows(), w), stats(x.rows(), 2);  // stats: mean, inv_std
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().sum() / double(w);
        const double inv = 1.0 / std::sqrt(var + kLnEps);
        xhat.row(i) = (x.row(i).array() - mu) * inv;
        stats(i, 0) = mu;
        stats(i, 1) = inv;
    }
    Mat y = xhat;
    y.array().rowwise() *= nodes_[gamma].value.row(0).array();
    y.rowwise() += nodes_[beta].value.row(0);
    Node n{Op::LayerNorm, {a, gamma, beta}, std::move(y)};
    // aux packs xhat with the stats columns appended
    n.aux.resize(x.rows(), w + 2);
    n.aux.leftCols(w) = xhat;
    n.aux.rightCols(2) = stats;
    return push(std::move(n));
}

Tape::Id Tape::gelu(Id a) {
    const Mat& x = nodes_[a].value;
    const Mat cdf = x.unaryExpr([](double v) {
        return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
    });
    Mat y = x.cwiseProduct(cdf);
    return push({Op::Gelu, {a}, std::move(y)});
}

Tape::Id Tape::softplus(Id a) {
    const Mat& x = nodes_[a].value;
    Mat y = x.array().max(0.0) + (1.0 + (-x.array().abs()).exp()).log();
    return push({Op::Softplus, {a}, std::move(y)});
}

Tape::Id Tape::slice_cols(Id a, int c0, int len) {
    Node n{Op::SliceCols, {a}, nodes_[a].value.middleCols(c0, len)};
    n.indices = {c0, len};
    return push(std::move(n));
}

Tape::Id Tape::concat_cols(const std::vector<Id>& parts) {
    Eigen::Index rows = nodes_[parts[0]].value.rows(), cols = 0;
    for (Id p : parts) cols += nodes_[p].value.cols();
    Mat v(rows, cols);
    Eigen::Index c = 0;
    for (Id p : parts) {
        v.middleCols(c, nodes_[p].value.cols()) = nodes_[p].value;
        c += nodes_[p].value.cols();
    }
    return push({Op::ConcatCols, parts, std::move(v)});
}

Tape::Id Tape::concat_rows(const std::vector<Id>& parts) {
    Eigen::Index cols = nodes_[parts[0]].value.cols(), rows = 0;
    for (Id p : parts) rows += nodes_[p].value.rows();
    Mat v(rows, cols);
    Eigen::Index r = 0;
    for (Id p : parts) {
        v.middleRows(r, nodes_[p].value.rows()) = nodes_[p].value;
        r += nodes_[p].value.rows();
    }
    return push({Op::ConcatRows, parts, std::move(v)});
}

Tape::Id Tape::gather_rows(Id a, std::vector<int> indices) {
    Mat v(Eigen::Index(indices.size()), nodes_[a].value.cols());
    for (std::size_t i = 0; i < indices.size(); ++i)
        v.row(Eigen::Index(i)) = nodes_[a].value.row(indices[i]);
    Node n{Op::GatherRows, {a}, std::move(v)};
    n.indices = std::move(indices);
    return push(std::move(n));
}

Tape::Id Tape::repeat_row(Id a, int n) {
    Mat v = nodes_[a].value.row(0).replicate(n, 1);
    return push({Op::RepeatRow, {a}, std::move(v)});
}

Tape::Id Tape::mean_rows(Id a) {
    Mat v = nodes_[a].value.colwise().mean();
    return push({Op::MeanRows, {a}, std::move(v)});
}

Tape::Id Tape::mean_all(Id a) {
    Mat v(1, 1);
    v(0, 0) = nodes_[a].value.mean();
    return push({Op::MeanAll, {a}, std::move(v)});
}

Tape::Id Tape::l2_normalize_rows(Id a) {
    const Mat& x = nodes_[a].value;
    Mat y = x;
    Mat norms(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double n = x.row(i).norm();
        if (n < kNormFloor)
            throw std::runtime_error("l2_normalize_rows: zero vector");
        norms(i, 0) = n;
        y.row(i) /= n;
    }
    Node nd{Op::L2NormRows, {a}, std::move(y)};
    nd.aux = std::move(norms);
    return push(std::move(nd));
}

Tape::Id Tape::cross_entropy_diagonal(Id a) {
    const Mat& z = nodes_[a].value;
    if (z.rows() != z.cols())
        throw std::runtime_error("cross_entropy_diagonal: matrix not square");
    const Eigen::Index n = z.rows();
    Mat probs(n, n);
    double loss = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m = z.row(i).maxCoeff();
        Eigen::RowVectorXd e = (z.row(i).array() - m).exp();
        const double s = e.sum();
        probs.row(i) = e / s;
        loss += std::log(s) + m - z(i, i);
    }
    Mat v(1, 1);
    v(0, 0) = loss / double(n);
    Node nd{Op::CrossEntDiag, {a}, std::move(v)};
    nd.aux = std::move(probs);
    return push(std::move(nd));
}

Tape::Id Tape::exp_clamp(Id a, double cap) {
    Mat v(1, 1);
    v(0, 0) = std::exp(std::min(nodes_[a].value(0, 0), cap));
    Node n{Op::ExpClamp, {a}, std::move(v)};
    n.scalar = cap;
    return push(std::move(n));
}

Tape::Id Tape::scale_by_cell(Id a, Id s) {
    return push({Op::ScaleByCell, {a, s}, nodes_[a].value * nodes_[s].value(0, 0)});
}

void Tape::backward(Id output, const Mat& seed) {
    grad_of(output) = seed;
    for (Id id = output; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.grad.size() == 0) continue;
        const Mat& g = n.grad;
        switch (n.op) {
            case Op::Leaf:
            case Op::Param:
                break;
            case Op::MatMul:
                grad_of(n.inputs[0]).noalias() += g * nodes_[n.inputs[1]].value.transpose();
                grad_of(n.inputs[1]).noalias() += nodes_[n.inputs[0]].value.transpose() * g;
                break;
            case Op::MatMulNT:
                grad_of(n.inputs[0]).noalias() += g * nodes_[n.inputs[1]].value;
                grad_of(n.inputs[1]).noalias() += g.transpose() * nodes_[n.inputs[0]].value;
                break;
            case Op::Add:
                grad_of(n.inputs[0]) += g;
                grad_of(n.inputs[1]) += g;
                break;
            case Op::Sub:
                grad_of(n.inputs[0]) += g;
                grad_of(n.inputs[1]) -= g;
                break;
            case Op::Mul:
                grad_of(n.inputs[0]) += g.cwiseProduct(nodes_[n.inputs[1]].value);
                grad_of(n.inputs[1]) += g.cwiseProduct(nodes_[n.inputs[0]].value);
                break;
            case Op::MulConst:
                grad_of(n.inputs[0]) += g.cwiseProduct(n.constant);
                break;
            case Op::AddRow:
                grad_of(n.inputs[0]) += g;
                grad_of(n.inputs[1]).row(0) += g.colwise().sum();
                break;
            case Op::Scale:
                grad_of(n.inputs[0]) += g * n.scalar;
                break;
            case Op::Transpose:
                grad_of(n.inputs[0]) += g.transpose();
                break;
            case Op::RowSoftmax: {
                const Mat& y = n.aux;
                Mat gy = g.cwiseProduct(y);
                Eigen::VectorXd rowsum = gy.rowwise().sum();
                Mat dx = gy - (y.array().colwise() * rowsum.array()).matrix();
                grad_of(n.inputs[0]) += dx;
                break;
            }
            case Op::LayerNorm: {
                const Eigen::Index w = n.value.cols();
                const Mat xhat = n.aux.leftCols(w);
                const Mat& gamma = nodes_[n.inputs[1]].value;
                Mat gxhat = g.array().rowwise() * gamma.row(0).array();
                Mat& dx = grad_of(n.inputs[0]);
                for (Eigen::Index i = 0; i < g.rows(); ++i) {
                    const double inv = n.aux(i, w + 1);
                    const double gsum = gxhat.row(i).sum();
                    const double gxsum = gxhat.row(i).dot(xhat.row(i));
                    dx.row(i) += inv * (gxhat.row(i).array() - gsum / double(w) -
                                        xhat.row(i).array() * gxsum / double(w))
                                     .matrix();
                }
                grad_of(n.inputs[1]).row(0) += g.cwiseProduct(xhat).colwise().sum();
                grad_of(n.inputs[2]).row(0) += g.colwise().sum();
                break;
            }
            case Op::Gelu: {
                const Mat& x = nodes_[n.inputs[0]].value;
                const Mat cdf = x.unaryExpr([](double v) {
                    return 0.5 * (1.0 + std::erf(v / std::sqrt(2.0)));
                });
                const auto pdf =
                    (-0.5 * x.array().square()).exp() / std::sqrt(2.0 * M_PI);
                grad_of(n.inputs[0]).array() +=
                    g.array() * (cdf.array() + x.array() * pdf);
                break;
            }
            case Op::Softplus: {
                const Mat& x = nodes_[n.inputs[0]].value;
                grad_of(n.inputs[0]).array() +=
                    g.array() / (1.0 + (-x.array()).exp());
                break;
            }
            case Op::SliceCols:
                grad_of(n.inputs[0]).middleCols(n.indices[0], n.indices[1]) += g;
                break;
            case Op::ConcatCols: {
                Eigen::Index c = 0;
                for (Id p : n.inputs) {
                    const Eigen::Index w = nodes_[p].value.cols();
                    grad_of(p) += g.middleCols(c, w);
                    c += w;
                }
                break;
            }
            case Op::ConcatRows: {
                Eigen::Index r = 0;
                for (Id p : n.inputs) {
                    const Eigen::Index h = nodes_[p].value.rows();
                    grad_of(p) += g.middleRows(r, h);
                    r += h;
                }
                break;
            }
            case Op::GatherRows: {
                Mat& dx = grad_of(n.inputs[0]);
                for (std::size_t i = 0; i < n.indices.size(); ++i)
                    dx.row(n.indices[i]) += g.row(Eigen::Index(i));
                break;
            }
            case Op::RepeatRow:
                grad_of(n.inputs[0]).row(0) += g.colwise().sum();
                break;
            case Op::MeanRows:
                grad_of(n.inputs[0]).rowwise() +=
                    (g.row(0) / double(nodes_[n.inputs[0]].value.rows())).eval();
                break;
            case Op::MeanAll:
                grad_of(n.inputs[0]).array() +=
                    g(0, 0) / double(nodes_[n.inputs[0]].value.size());
                break;
            case Op::L2NormRows: {
                const Mat& y = n.value;
                Mat& dx = grad_of(n.inputs[0]);
                for (Eigen::Index i = 0; i < y.rows(); ++i) {
                    const double nm = n.aux(i, 0);
                    const double dot = g.row(i).dot(y.row(i));
                    dx.row(i) += (g.row(i) - dot * y.row(i)) / nm;
                }
                break;
            }
            case Op::CrossEntDiag: {
                const Mat& probs = n.aux;
                const Eigen::Index nn = probs.rows();
                Mat dz = probs;
                for (Eigen::Index i = 0; i < nn; ++i) dz(i, i) -= 1.0;
                grad_of(n.inputs[0]) += (g(0, 0) / double(nn)) * dz;
                break;
            }
            case Op::ExpClamp:
                if (nodes_[n.inputs[0]].value(0, 0) < n.scalar)
                    grad_of(n.inputs[0])(0, 0) += g(0, 0) * n.value(0, 0);
                break;
            case Op::ScaleByCell: {
                const double s = nodes_[n.inputs[1]].value(0, 0);
                grad_of(n.inputs[0]) += g * s;
                grad_of(n.inputs[1])(0, 0) +=
                    g.cwiseProduct(nodes_[n.inputs[0]].value).sum();
                break;
            }
        }
    }
}

void Tape::accumulate_param_grads(std::map<std::string, Mat>& sink) const {
    for (const Node& n : nodes_) {
        if (n.op != Op::Param || n.grad.size() == 0) continue;
        auto it = sink.find(n.pname);
        if (it == sink.end())
            sink[n.pname] = n.grad;
        else
            it->second += n.grad;
    }
}

}  // namespace organct::nn
