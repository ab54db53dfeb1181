#pragma once

// Single-level reverse-mode differentiation over rank-2 tensors.
//
// A Tape records every operation in creation order, so node inputs always
// precede the node itself and backward() is one reverse sweep. Second-order
// quantities (gradients of input-gradients) are obtained by building the
// input-gradient computation out of ordinary tape ops, never by nesting tapes.

#include <cstdint>
#include <span>
#include <vector>

#include "trs/tensor.hpp"

namespace trs {

class Tape;

// Handle to a tape node. Cheap to copy; only valid while its tape lives.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

enum class Op : std::uint8_t {
  leaf,
  matmul,
  matmul_nt,
  transpose,
  add,
  sub,
  mul,
  add_row,
  mul_row,
  scale,
  tanh,
  one_minus_square,
  slice_cols,
  concat_cols,
  scale_cols,
  sum_squares,
  weighted_sum_squares,
};

class Tape {
 public:
  // With `check_finite` every op result is scanned and a NumericError naming
  // the node is thrown on NaN/Inf. Evaluation rollouts that handle divergence
  // per sample switch it off.
  explicit Tape(bool check_finite = true) : check_finite_(check_finite) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf that receives a gradient in backward().
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return node(v).value; }
  // Empty tensor if no gradient reached the node.
  const Tensor& grad(Var v) const { return node(v).grad; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool check_finite() const noexcept { return check_finite_; }

  // Reverse sweep from a 1x1 node. Gradients of earlier sweeps are cleared.
  void backward(Var output);

  // Used by the op free functions below.
  Var push(Op op, Tensor value, std::uint32_t a, std::uint32_t b = kNone,
           double scalar = 0.0, std::vector<double> consts = {},
           std::size_t i0 = 0, std::size_t i1 = 0);
  static constexpr std::uint32_t kNone = 0xffffffffu;

 private:
  struct Node {
    Op op = Op::leaf;
    std::uint32_t a = kNone;
    std::uint32_t b = kNone;
    bool requires_grad = false;
    double scalar = 0.0;
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    std::vector<double> consts;
    Tensor value;
    Tensor grad;
  };

  const Node& node(Var v) const;
  void backprop_node(std::uint32_t id);
  Tensor& grad_slot(std::uint32_t id);

  bool check_finite_;
  std::vector<Node> nodes_;
};

namespace ad {

Var matmul(Var a, Var b);     // a[n x k] * b[k x m]
Var matmul_nt(Var a, Var b);  // a[n x k] * b[m x k]^T
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);      // elementwise, equal shapes
Var add_row(Var a, Var row);  // a[n x m] + row[1 x m] broadcast
Var mul_row(Var a, Var row);  // a[n x m] * row[1 x m] broadcast
Var scale(Var a, double c);
Var tanh(Var a);
Var one_minus_square(Var a);  // 1 - a^2
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_cols(Var a, Var b);
Var scale_cols(Var a, std::span<const double> factors);
Var sum_squares(Var a);  // 1x1
// sum_r w[r] * sum_c a[r,c]^2 ; weights are constants.
Var weighted_sum_squares(Var a, std::span<const double> row_weights);

}  // namespace ad

inline Var operator+(Var a, Var b) { return ad::add(a, b); }
inline Var operator-(Var a, Var b) { return ad::sub(a, b); }
inline Var operator*(Var a, Var b) { return ad::mul(a, b); }
inline Var operator*(double c, Var a) { return ad::scale(a, c); }
inline Var operator-(Var a) { return ad::scale(a, -1.0); }

}  // namespace trs
