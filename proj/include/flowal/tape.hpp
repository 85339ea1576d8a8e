#pragma once

#include <cstdint>
#include <vector>

#include "flowal/rng.hpp"
#include "flowal/tensor.hpp"

namespace flowal {

using VarId = int;

enum class DropoutMode { kTrain, kEval, kMcEval };

// Reverse-mode tape over rank-2 tensors. Ops evaluate eagerly so callers can
// inspect intermediate values (e.g. spline bin search) while the graph is
// being built; backward() replays the records in reverse topological order,
// which is the recording order.
class Tape {
  public:
    // Trainable leaf. The tensor must outlive the tape; backward() accumulates
    // into param.grad.
    VarId leaf(Tensor& param);

    VarId constant(Tensor value);
    VarId constant(std::size_t rows, std::size_t cols, double fill);

    VarId matmul(VarId a, VarId b);

    // Binary elementwise ops. The right operand may broadcast: [1,c] over
    // rows, [r,1] over columns, or [1,1] over everything.
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId div(VarId a, VarId b);

    VarId neg(VarId a);
    VarId exp(VarId a);
    VarId log(VarId a);
    VarId sqrt(VarId a);
    VarId square(VarId a);
    VarId relu(VarId a);
    VarId softplus(VarId a);
    VarId sigmoid(VarId a);
    VarId clamp(VarId a, double lo, double hi);
    VarId affine(VarId a, double scale, double shift);

    VarId sum_all(VarId a);
    VarId mean_all(VarId a);
    VarId sum_rows(VarId a);  // [r,c] -> [r,1]

    VarId slice_cols(VarId a, std::size_t c0, std::size_t c1);
    VarId concat_cols(VarId a, VarId b);
    // out[i,0] = a[i, idx[i]]
    VarId gather_cols(VarId a, std::vector<std::int32_t> idx);

    // Inverted dropout. train / mc-eval: fresh Bernoulli mask scaled by
    // 1/(1-rate); eval: identity (bit-exact). rate must be in [0,1).
    VarId dropout(VarId a, double rate, DropoutMode mode, RngStream& rng);

    // Backpropagate from a scalar loss into every reachable leaf's grad.
    void backward(VarId loss);

    const std::vector<double>& val(VarId id) const { return nodes_[id].val; }
    std::size_t rows(VarId id) const { return nodes_[id].rows; }
    std::size_t cols(VarId id) const { return nodes_[id].cols; }
    double scalar(VarId id) const;
    std::size_t size() const { return nodes_.size(); }

    void clear() { nodes_.clear(); }

  private:
    enum class Op : std::uint8_t {
        kLeaf, kConst, kMatMul, kAdd, kSub, kMul, kDiv, kNeg, kExp, kLog,
        kSqrt, kSquare, kRelu, kSoftplus, kSigmoid, kClamp, kAffine,
        kSumAll, kMeanAll, kSumRows, kSliceCols, kConcatCols, kGatherCols,
    };

    struct Node {
        Op op;
        VarId a = -1, b = -1;
        std::size_t rows = 0, cols = 0;
        std::vector<double> val;
        std::vector<double> grad;
        Tensor* param = nullptr;
        double c0 = 0.0, c1 = 0.0;
        std::vector<std::int32_t> idx;
        bool needs_grad = false;
    };

    VarId push(Node n);
    Node& node(VarId id);
    void check(VarId id) const;
    VarId binary(Op op, VarId a, VarId b);
    VarId unary(Op op, VarId a, double c0 = 0.0, double c1 = 0.0);
    std::vector<double>& grad_buf(VarId id);
    void add_grad_broadcast(VarId target, const std::vector<double>& g,
                            std::size_t gr, std::size_t gc);

    std::vector<Node> nodes_;
};

}  // namespace flowal
