#include "flowal/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "flowal/linalg.hpp"

namespace flowal {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
    return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

double softplus_stable(double x) {
    if (x > 35.0) return x;
    if (x < -35.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

}  // namespace

VarId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size()) - 1;
}

Tape::Node& Tape::node(VarId id) { return nodes_[id]; }

void Tape::check(VarId id) const {
    if (id < 0 || id >= static_cast<VarId>(nodes_.size()))
        throw std::invalid_argument("Tape: invalid node id " + std::to_string(id));
}

VarId Tape::leaf(Tensor& param) {
    if (param.shape.size() > 2)
        throw std::invalid_argument("Tape::leaf: rank > 2 unsupported " + param.shape_str());
    Node n;
    n.op = Op::kLeaf;
    n.rows = param.rows();
    n.cols = param.cols();
    n.val = param.data;
    n.param = &param;
    n.needs_grad = true;
    return push(std::move(n));
}

VarId Tape::constant(Tensor value) {
    if (value.shape.size() > 2)
        throw std::invalid_argument("Tape::constant: rank > 2 unsupported " + value.shape_str());
    Node n;
    n.op = Op::kConst;
    n.rows = value.rows();
    n.cols = value.cols();
    n.val = std::move(value.data);
    return push(std::move(n));
}

VarId Tape::constant(std::size_t rows, std::size_t cols, double fill) {
    Node n;
    n.op = Op::kConst;
    n.rows = rows;
    n.cols = cols;
    n.val.assign(rows * cols, fill);
    return push(std::move(n));
}

double Tape::scalar(VarId id) const {
    check(id);
    if (nodes_[id].val.size() != 1)
        throw std::invalid_argument("Tape::scalar: node " + std::to_string(id) +
                                    " is not scalar");
    return nodes_[id].val[0];
}

VarId Tape::matmul(VarId a, VarId b) {
    check(a);
    check(b);
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.cols != nb.rows)
        throw std::invalid_argument("matmul: inner dimensions differ, node " +
                                    std::to_string(a) + " " + shape_str(na.rows, na.cols) +
                                    " vs node " + std::to_string(b) + " " +
                                    shape_str(nb.rows, nb.cols));
    Node n;
    n.op = Op::kMatMul;
    n.a = a;
    n.b = b;
    n.rows = na.rows;
    n.cols = nb.cols;
    n.val.resize(n.rows * n.cols);
    gemm_nn(na.rows, na.cols, nb.cols, na.val.data(), nb.val.data(), n.val.data(), false);
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

VarId Tape::binary(Op op, VarId a, VarId b) {
    check(a);
    check(b);
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    const bool same = na.rows == nb.rows && na.cols == nb.cols;
    const bool row_bcast = nb.rows == 1 && nb.cols == na.cols;
    const bool col_bcast = nb.cols == 1 && nb.rows == na.rows;
    const bool scalar_bcast = nb.rows == 1 && nb.cols == 1;
    if (!(same || row_bcast || col_bcast || scalar_bcast))
        throw std::invalid_argument("binary op: incompatible shapes, node " +
                                    std::to_string(a) + " " + shape_str(na.rows, na.cols) +
                                    " vs node " + std::to_string(b) + " " +
                                    shape_str(nb.rows, nb.cols));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.rows = na.rows;
    n.cols = na.cols;
    n.val.resize(n.rows * n.cols);
    const std::size_t R = n.rows, C = n.cols;
    const auto& va = na.val;
    const auto& vb = nb.val;
    auto bval = [&](std::size_t i, std::size_t j) -> double {
        if (same) return vb[i * C + j];
        if (scalar_bcast) return vb[0];
        if (row_bcast) return vb[j];
        return vb[i];
    };
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) {
            const double x = va[i * C + j];
            const double y = bval(i, j);
            double& out = n.val[i * C + j];
            switch (op) {
                case Op::kAdd: out = x + y; break;
                case Op::kSub: out = x - y; break;
                case Op::kMul: out = x * y; break;
                case Op::kDiv: out = x / y; break;
                default: throw std::logic_error("binary: bad op");
            }
        }
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

VarId Tape::add(VarId a, VarId b) { return binary(Op::kAdd, a, b); }
VarId Tape::sub(VarId a, VarId b) { return binary(Op::kSub, a, b); }
VarId Tape::mul(VarId a, VarId b) { return binary(Op::kMul, a, b); }
VarId Tape::div(VarId a, VarId b) { return binary(Op::kDiv, a, b); }

VarId Tape::unary(Op op, VarId a, double c0, double c1) {
    check(a);
    const Node& na = nodes_[a];
    Node n;
    n.op = op;
    n.a = a;
    n.rows = na.rows;
    n.cols = na.cols;
    n.c0 = c0;
    n.c1 = c1;
    n.val.resize(na.val.size());
    for (std::size_t i = 0; i < na.val.size(); ++i) {
        const double x = na.val[i];
        double& out = n.val[i];
        switch (op) {
            case Op::kNeg: out = -x; break;
            case Op::kExp: out = std::exp(x); break;
            case Op::kLog: out = std::log(x); break;
            case Op::kSqrt: out = std::sqrt(x); break;
            case Op::kSquare: out = x * x; break;
            case Op::kRelu: out = x > 0.0 ? x : 0.0; break;
            case Op::kSoftplus: out = softplus_stable(x); break;
            case Op::kSigmoid: out = 1.0 / (1.0 + std::exp(-x)); break;
            case Op::kClamp: out = x < c0 ? c0 : (x > c1 ? c1 : x); break;
            case Op::kAffine: out = c0 * x + c1; break;
            default: throw std::logic_error("unary: bad op");
        }
    }
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::neg(VarId a) { return unary(Op::kNeg, a); }
VarId Tape::exp(VarId a) { return unary(Op::kExp, a); }
VarId Tape::log(VarId a) { return unary(Op::kLog, a); }
VarId Tape::sqrt(VarId a) { return unary(Op::kSqrt, a); }
VarId Tape::square(VarId a) { return unary(Op::kSquare, a); }
VarId Tape::relu(VarId a) { return unary(Op::kRelu, a); }
VarId Tape::softplus(VarId a) { return unary(Op::kSoftplus, a); }
VarId Tape::sigmoid(VarId a) { return unary(Op::kSigmoid, a); }
VarId Tape::clamp(VarId a, double lo, double hi) { return unary(Op::kClamp, a, lo, hi); }
VarId Tape::affine(VarId a, double scale, double shift) {
    return unary(Op::kAffine, a, scale, shift);
}

VarId Tape::sum_all(VarId a) {
    check(a);
    const Node& na = nodes_[a];
    Node n;
    n.op = Op::kSumAll;
    n.a = a;
    n.rows = 1;
    n.cols = 1;
    double acc = 0.0;
    for (double x : na.val) acc += x;
    n.val = {acc};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::mean_all(VarId a) {
    check(a);
    const Node& na = nodes_[a];
    if (na.val.empty()) throw std::invalid_argument("mean_all: empty node");
    Node n;
    n.op = Op::kMeanAll;
    n.a = a;
    n.rows = 1;
    n.cols = 1;
    double acc = 0.0;
    for (double x : na.val) acc += x;
    n.val = {acc / static_cast<double>(na.val.size())};
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::sum_rows(VarId a) {
    check(a);
    const Node& na = nodes_[a];
    Node n;
    n.op = Op::kSumRows;
    n.a = a;
    n.rows = na.rows;
    n.cols = 1;
    n.val.resize(na.rows);
    for (std::size_t i = 0; i < na.rows; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < na.cols; ++j) acc += na.val[i * na.cols + j];
        n.val[i] = acc;
    }
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::slice_cols(VarId a, std::size_t c0, std::size_t c1) {
    check(a);
    const Node& na = nodes_[a];
    if (c0 >= c1 || c1 > na.cols)
        throw std::invalid_argument("slice_cols: bad range on node " + std::to_string(a));
    Node n;
    n.op = Op::kSliceCols;
    n.a = a;
    n.rows = na.rows;
    n.cols = c1 - c0;
    n.c0 = static_cast<double>(c0);
    n.val.resize(n.rows * n.cols);
    for (std::size_t i = 0; i < n.rows; ++i)
        for (std::size_t j = 0; j < n.cols; ++j)
            n.val[i * n.cols + j] = na.val[i * na.cols + c0 + j];
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::concat_cols(VarId a, VarId b) {
    check(a);
    check(b);
    const Node& na = nodes_[a];
    const Node& nb = nodes_[b];
    if (na.rows != nb.rows)
        throw std::invalid_argument("concat_cols: row mismatch between node " +
                                    std::to_string(a) + " and node " + std::to_string(b));
    Node n;
    n.op = Op::kConcatCols;
    n.a = a;
    n.b = b;
    n.rows = na.rows;
    n.cols = na.cols + nb.cols;
    n.val.resize(n.rows * n.cols);
    for (std::size_t i = 0; i < n.rows; ++i) {
        for (std::size_t j = 0; j < na.cols; ++j)
            n.val[i * n.cols + j] = na.val[i * na.cols + j];
        for (std::size_t j = 0; j < nb.cols; ++j)
            n.val[i * n.cols + na.cols + j] = nb.val[i * nb.cols + j];
    }
    n.needs_grad = na.needs_grad || nb.needs_grad;
    return push(std::move(n));
}

VarId Tape::gather_cols(VarId a, std::vector<std::int32_t> idx) {
    check(a);
    const Node& na = nodes_[a];
    if (idx.size() != na.rows)
        throw std::invalid_argument("gather_cols: index count != rows on node " +
                                    std::to_string(a));
    Node n;
    n.op = Op::kGatherCols;
    n.a = a;
    n.rows = na.rows;
    n.cols = 1;
    n.val.resize(na.rows);
    for (std::size_t i = 0; i < na.rows; ++i) {
        const std::int32_t j = idx[i];
        if (j < 0 || static_cast<std::size_t>(j) >= na.cols)
            throw std::invalid_argument("gather_cols: index out of range on node " +
                                        std::to_string(a));
        n.val[i] = na.val[i * na.cols + j];
    }
    n.idx = std::move(idx);
    n.needs_grad = na.needs_grad;
    return push(std::move(n));
}

VarId Tape::dropout(VarId a, double rate, DropoutMode mode, RngStream& rng) {
    check(a);
    if (rate < 0.0 || rate >= 1.0)
        throw std::invalid_argument("dropout: rate must be in [0,1), got " +
                                    std::to_string(rate));
    if (mode == DropoutMode::kEval || rate == 0.0) return a;
    const Node& na = nodes_[a];
    Tensor mask(na.rows, na.cols);
    const double scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data) m = rng.uniform() < rate ? 0.0 : scale;
    return mul(a, constant(std::move(mask)));
}

std::vector<double>& Tape::grad_buf(VarId id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.val.size()) n.grad.assign(n.val.size(), 0.0);
    return n.grad;
}

// Accumulate gradient g (shape gr x gc) into `target`, reducing over any
// dimension the target broadcast along.
void Tape::add_grad_broadcast(VarId target, const std::vector<double>& g,
                              std::size_t gr, std::size_t gc) {
    Node& t = nodes_[target];
    if (!t.needs_grad) return;
    auto& tg = grad_buf(target);
    if (t.rows == gr && t.cols == gc) {
        for (std::size_t i = 0; i < g.size(); ++i) tg[i] += g[i];
    } else if (t.rows == 1 && t.cols == gc) {
        for (std::size_t i = 0; i < gr; ++i)
            for (std::size_t j = 0; j < gc; ++j) tg[j] += g[i * gc + j];
    } else if (t.cols == 1 && t.rows == gr) {
        for (std::size_t i = 0; i < gr; ++i)
            for (std::size_t j = 0; j < gc; ++j) tg[i] += g[i * gc + j];
    } else {  // [1,1]
        double acc = 0.0;
        for (double x : g) acc += x;
        tg[0] += acc;
    }
}

void Tape::backward(VarId loss) {
    check(loss);
    Node& ln = nodes_[loss];
    if (ln.val.size() != 1)
        throw std::invalid_argument("backward: loss node " + std::to_string(loss) +
                                    " is not scalar, shape " +
                                    shape_str(ln.rows, ln.cols));
    for (Node& n : nodes_) n.grad.clear();
    grad_buf(loss)[0] = 1.0;

    for (VarId id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.needs_grad || n.grad.empty()) continue;
        const auto& g = n.grad;
        switch (n.op) {
            case Op::kLeaf: {
                n.param->ensure_grad();
                for (std::size_t i = 0; i < g.size(); ++i) n.param->grad[i] += g[i];
                break;
            }
            case Op::kConst:
                break;
            case Op::kMatMul: {
                Node& a = nodes_[n.a];
                Node& b = nodes_[n.b];
                if (a.needs_grad)
                    gemm_nt(a.rows, n.cols, a.cols, g.data(), b.val.data(),
                            grad_buf(n.a).data(), true);
                if (b.needs_grad)
                    gemm_tn(b.rows, a.rows, b.cols, a.val.data(), g.data(),
                            grad_buf(n.b).data(), true);
                break;
            }
            case Op::kAdd: {
                add_grad_broadcast(n.a, g, n.rows, n.cols);
                add_grad_broadcast(n.b, g, n.rows, n.cols);
                break;
            }
            case Op::kSub: {
                add_grad_broadcast(n.a, g, n.rows, n.cols);
                if (nodes_[n.b].needs_grad) {
                    std::vector<double> neg_g(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) neg_g[i] = -g[i];
                    add_grad_broadcast(n.b, neg_g, n.rows, n.cols);
                }
                break;
            }
            case Op::kMul: case Op::kDiv: {
                Node& a = nodes_[n.a];
                Node& b = nodes_[n.b];
                const std::size_t R = n.rows, C = n.cols;
                const bool same = b.rows == R && b.cols == C;
                const bool scal = b.rows == 1 && b.cols == 1;
                const bool rowb = !same && !scal && b.rows == 1;
                auto bval = [&](std::size_t i, std::size_t j) {
                    return same ? b.val[i * C + j]
                                : (scal ? b.val[0] : (rowb ? b.val[j] : b.val[i]));
                };
                if (a.needs_grad) {
                    std::vector<double> ga(g.size());
                    for (std::size_t i = 0; i < R; ++i)
                        for (std::size_t j = 0; j < C; ++j) {
                            const double bv = bval(i, j);
                            ga[i * C + j] = n.op == Op::kMul ? g[i * C + j] * bv
                                                             : g[i * C + j] / bv;
                        }
                    add_grad_broadcast(n.a, ga, R, C);
                }
                if (b.needs_grad) {
                    std::vector<double> gb(g.size());
                    for (std::size_t i = 0; i < R; ++i)
                        for (std::size_t j = 0; j < C; ++j) {
                            const double av = a.val[i * C + j];
                            if (n.op == Op::kMul) {
                                gb[i * C + j] = g[i * C + j] * av;
                            } else {
                                const double bv = bval(i, j);
                                gb[i * C + j] = -g[i * C + j] * av / (bv * bv);
                            }
                        }
                    add_grad_broadcast(n.b, gb, R, C);
                }
                break;
            }
            case Op::kNeg: case Op::kExp: case Op::kLog: case Op::kSqrt:
            case Op::kSquare: case Op::kRelu: case Op::kSoftplus:
            case Op::kSigmoid: case Op::kClamp: case Op::kAffine: {
                Node& a = nodes_[n.a];
                if (!a.needs_grad) break;
                auto& ga = grad_buf(n.a);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    double d;
                    const double x = a.val[i];
                    const double y = n.val[i];
                    switch (n.op) {
                        case Op::kNeg: d = -1.0; break;
                        case Op::kExp: d = y; break;
                        case Op::kLog: d = 1.0 / x; break;
                        case Op::kSqrt: d = 0.5 / y; break;
                        case Op::kSquare: d = 2.0 * x; break;
                        case Op::kRelu: d = x > 0.0 ? 1.0 : 0.0; break;
                        case Op::kSoftplus: d = 1.0 / (1.0 + std::exp(-x)); break;
                        case Op::kSigmoid: d = y * (1.0 - y); break;
                        case Op::kClamp: d = (x >= n.c0 && x <= n.c1) ? 1.0 : 0.0; break;
                        case Op::kAffine: d = n.c0; break;
                        default: d = 0.0; break;
                    }
                    ga[i] += g[i] * d;
                }
                break;
            }
            case Op::kSumAll: {
                if (!nodes_[n.a].needs_grad) break;
                auto& ga = grad_buf(n.a);
                for (double& x : ga) x += g[0];
                break;
            }
            case Op::kMeanAll: {
                if (!nodes_[n.a].needs_grad) break;
                auto& ga = grad_buf(n.a);
                const double s = g[0] / static_cast<double>(ga.size());
                for (double& x : ga) x += s;
                break;
            }
            case Op::kSumRows: {
                Node& a = nodes_[n.a];
                if (!a.needs_grad) break;
                auto& ga = grad_buf(n.a);
                for (std::size_t i = 0; i < a.rows; ++i)
                    for (std::size_t j = 0; j < a.cols; ++j) ga[i * a.cols + j] += g[i];
                break;
            }
            case Op::kSliceCols: {
                Node& a = nodes_[n.a];
                if (!a.needs_grad) break;
                auto& ga = grad_buf(n.a);
                const std::size_t c0 = static_cast<std::size_t>(n.c0);
                for (std::size_t i = 0; i < n.rows; ++i)
                    for (std::size_t j = 0; j < n.cols; ++j)
                        ga[i * a.cols + c0 + j] += g[i * n.cols + j];
                break;
            }
            case Op::kConcatCols: {
                Node& a = nodes_[n.a];
                Node& b = nodes_[n.b];
                if (a.needs_grad) {
                    auto& ga = grad_buf(n.a);
                    for (std::size_t i = 0; i < n.rows; ++i)
                        for (std::size_t j = 0; j < a.cols; ++j)
                            ga[i * a.cols + j] += g[i * n.cols + j];
                }
                if (b.needs_grad) {
                    auto& gb = grad_buf(n.b);
                    for (std::size_t i = 0; i < n.rows; ++i)
                        for (std::size_t j = 0; j < b.cols; ++j)
                            gb[i * b.cols + j] += g[i * n.cols + a.cols + j];
                }
                break;
            }
            case Op::kGatherCols: {
                Node& a = nodes_[n.a];
                if (!a.needs_grad) break;
                auto& ga = grad_buf(n.a);
                for (std::size_t i = 0; i < n.rows; ++i)
                    ga[i * a.cols + static_cast<std::size_t>(n.idx[i])] += g[i];
                break;
            }
        }
    }
}

}  // namespace flowal
