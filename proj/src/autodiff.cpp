#include "trs/autodiff.hpp"

#include <cmath>
#include <string>

#include "trs/simd/kernels.hpp"

namespace trs {

namespace {

const char* op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::matmul: return "matmul";
    case Op::matmul_nt: return "matmul_nt";
    case Op::transpose: return "transpose";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::add_row: return "add_row";
    case Op::mul_row: return "mul_row";
    case Op::scale: return "scale";
    case Op::tanh: return "tanh";
    case Op::one_minus_square: return "one_minus_square";
    case Op::slice_cols: return "slice_cols";
    case Op::concat_cols: return "concat_cols";
    case Op::scale_cols: return "scale_cols";
    case Op::sum_squares: return "sum_squares";
    case Op::weighted_sum_squares: return "weighted_sum_squares";
  }
  return "?";
}

void add_into(Tensor& dst, const Tensor& src, double alpha = 1.0) {
  simd::active_kernels().axpy(dst.size(), alpha, src.data(), dst.data());
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw std::invalid_argument("Var is not bound to a tape");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw std::invalid_argument("Vars belong to different tapes");
  return tape_of(a);
}

void require_same_shape(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a.value().shape_string() + " vs " +
                                b.value().shape_string());
  }
}

void require_row(Var a, Var row, const char* op) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw std::invalid_argument(std::string(op) + ": expected [1x" +
                                std::to_string(a.cols()) + "] row, got " +
                                row.value().shape_string());
  }
}

}  // namespace

const Tensor& Var::value() const { return tape_of(*this).value(*this); }
const Tensor& Var::grad() const { return tape_of(*this).grad(*this); }

const Tape::Node& Tape::node(Var v) const {
  if (v.tape != this || v.id >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this tape");
  }
  return nodes_[v.id];
}

Var Tape::constant(Tensor value) {
  return push(Op::leaf, std::move(value), kNone);
}

Var Tape::variable(Tensor value) {
  Var v = push(Op::leaf, std::move(value), kNone);
  nodes_.back().requires_grad = true;
  return v;
}

Var Tape::push(Op op, Tensor value, std::uint32_t a, std::uint32_t b,
               double scalar, std::vector<double> consts, std::size_t i0,
               std::size_t i1) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") +
                           op_name(op) + " at tape node " + std::to_string(id),
                       id);
  }
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.scalar = scalar;
  n.consts = std::move(consts);
  n.i0 = i0;
  n.i1 = i1;
  n.value = std::move(value);
  n.requires_grad = (a != kNone && nodes_[a].requires_grad) ||
                    (b != kNone && nodes_[b].requires_grad);
  nodes_.push_back(std::move(n));
  return Var{this, id};
}

Tensor& Tape::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::backward(Var output) {
  if (nodes_.empty()) throw std::invalid_argument("backward on an empty tape");
  const Node& out = node(output);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw std::invalid_argument("backward requires a scalar output, got " +
                                out.value.shape_string());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  if (!out.requires_grad) return;
  grad_slot(output.id)(0, 0) = 1.0;
  for (std::uint32_t id = output.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.op == Op::leaf || n.grad.size() == 0) continue;
    backprop_node(id);
  }
}

void Tape::backprop_node(std::uint32_t id) {
  // nodes_ is never resized during backward, so references stay valid.
  const Node& n = nodes_[id];
  const Tensor& g = n.grad;
  const bool ga = n.a != kNone && nodes_[n.a].requires_grad;
  const bool gb = n.b != kNone && nodes_[n.b].requires_grad;
  const auto& k = simd::active_kernels();

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::matmul: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& bv = nodes_[n.b].value;
      if (ga) add_into(grad_slot(n.a), tensor_ops::matmul_nt(g, bv));
      if (gb) add_into(grad_slot(n.b), tensor_ops::matmul_tn(av, g));
      break;
    }
    case Op::matmul_nt: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& bv = nodes_[n.b].value;
      if (ga) add_into(grad_slot(n.a), tensor_ops::matmul(g, bv));
      if (gb) add_into(grad_slot(n.b), tensor_ops::matmul_tn(g, av));
      break;
    }
    case Op::transpose:
      if (ga) add_into(grad_slot(n.a), g.transposed());
      break;
    case Op::add:
      if (ga) add_into(grad_slot(n.a), g);
      if (gb) add_into(grad_slot(n.b), g);
      break;
    case Op::sub:
      if (ga) add_into(grad_slot(n.a), g);
      if (gb) add_into(grad_slot(n.b), g, -1.0);
      break;
    case Op::mul: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& bv = nodes_[n.b].value;
      if (ga) {
        Tensor& da = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] += g.data()[i] * bv.data()[i];
      }
      if (gb) {
        Tensor& db = grad_slot(n.b);
        for (std::size_t i = 0; i < g.size(); ++i) db.data()[i] += g.data()[i] * av.data()[i];
      }
      break;
    }
    case Op::add_row: {
      if (ga) add_into(grad_slot(n.a), g);
      if (gb) {
        Tensor& db = grad_slot(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          k.axpy(g.cols(), 1.0, g.data() + r * g.cols(), db.data());
        }
      }
      break;
    }
    case Op::mul_row: {
      const Tensor& av = nodes_[n.a].value;
      const Tensor& row = nodes_[n.b].value;
      const std::size_t m = g.cols();
      if (ga) {
        Tensor& da = grad_slot(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < m; ++c) da(r, c) += g(r, c) * row(0, c);
        }
      }
      if (gb) {
        Tensor& db = grad_slot(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < m; ++c) db(0, c) += g(r, c) * av(r, c);
        }
      }
      break;
    }
    case Op::scale:
      if (ga) add_into(grad_slot(n.a), g, n.scalar);
      break;
    case Op::tanh:
      if (ga) k.tanh_backward(g.size(), n.value.data(), g.data(), grad_slot(n.a).data());
      break;
    case Op::one_minus_square: {
      if (ga) {
        const Tensor& av = nodes_[n.a].value;
        Tensor& da = grad_slot(n.a);
        for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] -= 2.0 * av.data()[i] * g.data()[i];
      }
      break;
    }
    case Op::slice_cols: {
      if (ga) {
        Tensor& da = grad_slot(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) da(r, n.i0 + c) += g(r, c);
        }
      }
      break;
    }
    case Op::concat_cols: {
      const std::size_t left = n.i0;
      if (ga) {
        Tensor& da = grad_slot(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < left; ++c) da(r, c) += g(r, c);
        }
      }
      if (gb) {
        Tensor& db = grad_slot(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = left; c < g.cols(); ++c) db(r, c - left) += g(r, c);
        }
      }
      break;
    }
    case Op::scale_cols: {
      if (ga) {
        Tensor& da = grad_slot(n.a);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < g.cols(); ++c) da(r, c) += g(r, c) * n.consts[c];
        }
      }
      break;
    }
    case Op::sum_squares: {
      if (ga) add_into(grad_slot(n.a), nodes_[n.a].value, 2.0 * g.item());
      break;
    }
    case Op::weighted_sum_squares: {
      if (ga) {
        const Tensor& av = nodes_[n.a].value;
        Tensor& da = grad_slot(n.a);
        for (std::size_t r = 0; r < av.rows(); ++r) {
          k.axpy(av.cols(), 2.0 * n.consts[r] * g.item(), av.data() + r * av.cols(),
                 da.data() + r * av.cols());
        }
      }
      break;
    }
  }
}

namespace ad {

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.push(Op::matmul, tensor_ops::matmul(a.value(), b.value()), a.id, b.id);
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  return t.push(Op::matmul_nt, tensor_ops::matmul_nt(a.value(), b.value()), a.id,
                b.id);
}

Var transpose(Var a) {
  return tape_of(a).push(Op::transpose, a.value().transposed(), a.id);
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  add_into(out, b.value());
  return t.push(Op::add, std::move(out), a.id, b.id);
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  add_into(out, b.value(), -1.0);
  return t.push(Op::sub, std::move(out), a.id, b.id);
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= bv.data()[i];
  return t.push(Op::mul, std::move(out), a.id, b.id);
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  require_row(a, row, "add_row");
  Tensor out = a.value();
  const Tensor& rv = row.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    simd::active_kernels().axpy(out.cols(), 1.0, rv.data(), out.data() + r * out.cols());
  }
  return t.push(Op::add_row, std::move(out), a.id, row.id);
}

Var mul_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  require_row(a, row, "mul_row");
  Tensor out = a.value();
  const Tensor& rv = row.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= rv(0, c);
  }
  return t.push(Op::mul_row, std::move(out), a.id, row.id);
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= c;
  return tape_of(a).push(Op::scale, std::move(out), a.id, Tape::kNone, c);
}

Var tanh(Var a) {
  Tensor out = a.value();
  tensor_ops::tanh_inplace(out);
  return tape_of(a).push(Op::tanh, std::move(out), a.id);
}

Var one_minus_square(Var a) {
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 - v * v;
  return tape_of(a).push(Op::one_minus_square, std::move(out), a.id);
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.cols() || count == 0) {
    throw std::invalid_argument("slice_cols: columns [" + std::to_string(begin) +
                                ", " + std::to_string(begin + count) +
                                ") out of range for " + av.shape_string());
  }
  Tensor out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) out(r, c) = av(r, begin + c);
  }
  return tape_of(a).push(Op::slice_cols, std::move(out), a.id, Tape::kNone, 0.0,
                         {}, begin, count);
}

Var concat_cols(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw std::invalid_argument("concat_cols: row mismatch " + av.shape_string() +
                                " vs " + bv.shape_string());
  }
  Tensor out(av.rows(), av.cols() + bv.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c);
    for (std::size_t c = 0; c < bv.cols(); ++c) out(r, av.cols() + c) = bv(r, c);
  }
  return t.push(Op::concat_cols, std::move(out), a.id, b.id, 0.0, {}, av.cols());
}

Var scale_cols(Var a, std::span<const double> factors) {
  const Tensor& av = a.value();
  if (factors.size() != av.cols()) {
    throw std::invalid_argument("scale_cols: " + std::to_string(factors.size()) +
                                " factors for " + av.shape_string());
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= factors[c];
  }
  return tape_of(a).push(Op::scale_cols, std::move(out), a.id, Tape::kNone, 0.0,
                         std::vector<double>(factors.begin(), factors.end()));
}

Var sum_squares(Var a) {
  const Tensor& av = a.value();
  const double s = simd::active_kernels().dot(av.size(), av.data(), av.data());
  return tape_of(a).push(Op::sum_squares, Tensor::scalar(s), a.id);
}

Var weighted_sum_squares(Var a, std::span<const double> row_weights) {
  const Tensor& av = a.value();
  if (row_weights.size() != av.rows()) {
    throw std::invalid_argument("weighted_sum_squares: " +
                                std::to_string(row_weights.size()) +
                                " weights for " + av.shape_string());
  }
  const auto& k = simd::active_kernels();
  double s = 0.0;
  for (std::size_t r = 0; r < av.rows(); ++r) {
    const double* row = av.data() + r * av.cols();
    s += row_weights[r] * k.dot(av.cols(), row, row);
  }
  return tape_of(a).push(Op::weighted_sum_squares, Tensor::scalar(s), a.id,
                         Tape::kNone, 0.0,
                         std::vector<double>(row_weights.begin(), row_weights.end()));
}

}  // namespace ad
}  // namespace trs
