#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trs/autodiff.hpp"
#include "trs/mlp.hpp"
#include "trs/random.hpp"

using namespace trs;

namespace {

Tensor random_tensor(Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

TEST_CASE("tensor shape and data length must agree") {
  CHECK_THROWS_AS(Tensor(2, 3, std::vector<double>(5)), std::invalid_argument);
  const Tensor t(2, 3, std::vector<double>{1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t(1, 0) == 4);
  CHECK(t.transposed()(0, 1) == 4);
  CHECK(t.all_finite());
  CHECK_FALSE(Tensor(1, 2, std::vector<double>{1.0, NAN}).all_finite());
}

TEST_CASE("tensor_ops products match loops") {
  Rng rng(3);
  const Tensor a = random_tensor(rng, 4, 6), b = random_tensor(rng, 6, 5), c = random_tensor(rng, 4, 5);
  const Tensor ab = tensor_ops::matmul(a, b);
  const Tensor abt = tensor_ops::matmul_nt(a, b.transposed());
  const Tensor atc = tensor_ops::matmul_tn(a, c);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 6; ++k) s += a(i, k) * b(k, j);
      CHECK(ab(i, j) == doctest::Approx(s).epsilon(1e-14));
      CHECK(abt(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 4; ++k) s += a(k, i) * c(k, j);
      CHECK(atc(i, j) == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("square of a scalar has gradient 2w") {
  Tape tape;
  const Var w = tape.variable(Tensor::scalar(3.0));
  const Var y = ad::sum_squares(w);
  tape.backward(y);
  CHECK(y.value().item() == 9.0);
  CHECK(w.grad().item() == 6.0);
}

TEST_CASE("constant function has zero gradient") {
  Tape tape;
  const Var w = tape.variable(Tensor::scalar(3.0));
  const Var c = tape.constant(Tensor::scalar(5.0));
  const Var y = ad::scale(w, 0.0) + c;
  tape.backward(y);
  CHECK(w.grad().item() == 0.0);
}

TEST_CASE("a node used twice accumulates both paths") {
  Tape tape;
  const Var x = tape.variable(Tensor::scalar(2.0));
  const Var y = x * x + x;
  tape.backward(y);
  CHECK(x.grad().item() == 5.0);
  // A second sweep clears earlier gradients.
  tape.backward(y);
  CHECK(x.grad().item() == 5.0);
}

TEST_CASE("every op's gradient matches central differences") {
  Rng rng(4);
  const Tensor a0 = random_tensor(rng, 3, 4), b0 = random_tensor(rng, 4, 2), r0 = random_tensor(rng, 1, 4);
  const std::vector<double> cols = {0.5, -2.0, 1.5, 3.0}, rows = {0.2, 1.0, 2.5};
  auto loss = [&](const Tensor& a, const Tensor& b, const Tensor& r, Tape& tape, Var* va, Var* vb, Var* vr) {
    const Var A = tape.variable(a), B = tape.variable(b), R = tape.variable(r);
    if (va) *va = A;
    if (vb) *vb = B;
    if (vr) *vr = R;
    Var h = ad::tanh(ad::add_row(A, R));
    h = ad::mul_row(h, R) + ad::scale_cols(A, cols);
    h = h * ad::one_minus_square(ad::scale(A, 0.3));
    Var m = ad::matmul(h, B);
    m = m - ad::transpose(ad::matmul_nt(ad::transpose(B), h));
    const Var cc = ad::concat_cols(ad::slice_cols(h, 1, 2), m);
    return ad::sum_squares(cc) + ad::weighted_sum_squares(cc, rows);
  };
  Tape tape;
  Var va, vb, vr;
  tape.backward(loss(a0, b0, r0, tape, &va, &vb, &vr));
  const double h = 1e-5;
  auto check = [&](const Tensor& base, const Tensor& grad, int which) {
    for (std::size_t i = 0; i < base.size(); ++i) {
      auto eval = [&](double d) {
        Tensor a = a0, b = b0, r = r0;
        Tensor& t = which == 0 ? a : which == 1 ? b : r;
        t.values()[i] += d;
        Tape tp;
        return loss(a, b, r, tp, nullptr, nullptr, nullptr).value().item();
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      CHECK(std::abs(grad.values()[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  };
  check(a0, va.grad(), 0);
  check(b0, vb.grad(), 1);
  check(r0, vr.grad(), 2);
}

TEST_CASE("tape rejects non-finite results with NumericError") {
  Tape tape;
  const Var x = tape.variable(Tensor(1, 2, std::vector<double>{1e200, 1.0}));
  CHECK_THROWS_AS(ad::sum_squares(ad::scale(x, 1e200)), NumericError);
  Tape lenient(false);
  const Var y = lenient.variable(Tensor(1, 1, 1e200));
  CHECK_NOTHROW(ad::scale(y, 1e200));
}

TEST_CASE("tape nodes are in topological order") {
  Tape tape;
  const Var a = tape.variable(Tensor::scalar(1.0));
  const Var b = ad::scale(a, 2.0);
  const Var c = b + a;
  CHECK(a.id < b.id);
  CHECK(b.id < c.id);
  CHECK(tape.size() == 3);
}

TEST_CASE("random MLP parameter gradients agree with finite differences") {
  for (std::uint64_t trial = 0; trial < 12; ++trial) {
    Rng rng(stream_seed(5, 0, trial));
    MlpSpec spec;
    spec.input_dim = 1 + rng.next() % 4;
    spec.output_dim = 1 + rng.next() % 3;
    const std::size_t layers = 1 + rng.next() % 2;
    for (std::size_t l = 0; l < layers; ++l) spec.hidden_dims.push_back(1 + rng.next() % 16);
    const ModelParams p0 = init_params(spec, rng.next());
    const Tensor x = random_tensor(rng, 5, spec.input_dim);
    const Tensor target = random_tensor(rng, 5, spec.output_dim);

    auto loss_value = [&](const ModelParams& p) {
      Tape tape;
      const BoundParams b = bind_constants(tape, p);
      return ad::sum_squares(mlp_forward(spec, b, tape.constant(x)) - tape.constant(target))
          .value()
          .item();
    };
    Tape tape;
    const BoundParams b = bind_variables(tape, p0);
    tape.backward(ad::sum_squares(mlp_forward(spec, b, tape.constant(x)) - tape.constant(target)));
    const auto grads = collect_grads(tape, b, p0);

    const double h = 1e-5;
    double diff = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < p0.tensors.size(); ++t) {
      for (std::size_t i = 0; i < p0.tensors[t].size(); ++i) {
        ModelParams pp = p0, pm = p0;
        pp.tensors[t].values()[i] += h;
        pm.tensors[t].values()[i] -= h;
        const double fd = (loss_value(pp) - loss_value(pm)) / (2 * h);
        diff = std::max(diff, std::abs(grads[t].values()[i] - fd));
        scale = std::max(scale, std::abs(fd));
      }
    }
    CHECK(diff / std::max(scale, 1e-12) < 1e-4);
  }
}

TEST_CASE("parameter gradients of the input-gradient graph agree with finite differences") {
  for (std::uint64_t trial = 0; trial < 8; ++trial) {
    Rng rng(stream_seed(6, 0, trial));
    MlpSpec spec;
    spec.input_dim = 1 + rng.next() % 3;
    spec.output_dim = 1;
    spec.hidden_dims = {2 + rng.next() % 12};
    if (trial % 2) spec.hidden_dims.push_back(2 + rng.next() % 12);
    const ModelParams p0 = init_params(spec, rng.next());
    const Tensor x = random_tensor(rng, 4, spec.input_dim);
    const Tensor w = random_tensor(rng, 4, spec.input_dim);

    // Scalar functional of the input gradient: sum(w * dN/dx).
    auto value = [&](const ModelParams& p) {
      double s = 0.0;
      for (std::size_t r = 0; r < x.rows(); ++r) {
        std::vector<double> in(x.row_span(r).begin(), x.row_span(r).end());
        const auto g = oracle::mlp_input_grad(spec, p, in);
        for (std::size_t c = 0; c < g.size(); ++c) s += w(r, c) * g[c];
      }
      return s;
    };
    Tape tape;
    const BoundParams b = bind_variables(tape, p0);
    const Var g = mlp_input_gradient(spec, b, tape.constant(x));
    // |g + w|^2 - |g|^2 = 2 w.g + const
    const Var obj = ad::sum_squares(g + tape.constant(w)) - ad::sum_squares(g);
    tape.backward(obj);
    const auto grads = collect_grads(tape, b, p0);

    const double h = 1e-5;
    double diff = 0.0, scale = 0.0;
    for (std::size_t t = 0; t < p0.tensors.size(); ++t) {
      for (std::size_t i = 0; i < p0.tensors[t].size(); ++i) {
        ModelParams pp = p0, pm = p0;
        pp.tensors[t].values()[i] += h;
        pm.tensors[t].values()[i] -= h;
        const double fd = 2.0 * (value(pp) - value(pm)) / (2 * h);
        diff = std::max(diff, std::abs(grads[t].values()[i] - fd));
        scale = std::max(scale, std::abs(fd));
      }
    }
    CHECK(diff / std::max(scale, 1e-12) < 1e-3);
  }
}
