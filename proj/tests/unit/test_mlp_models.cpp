#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "trs/adam.hpp"
#include "trs/integrators.hpp"
#include "trs/metrics.hpp"
#include "trs/models.hpp"

using namespace trs;

namespace {

std::vector<double> row(const Tensor& t, std::size_t r) {
  return {t.row_span(r).begin(), t.row_span(r).end()};
}

// Fits a scalar net so that its input gradient matches `target` (1-D input)
// on a grid, training through the input-gradient graph.
ModelParams fit_input_gradient(const MlpSpec& spec, std::uint64_t seed,
                               const std::function<double(double)>& target, double lo, double hi,
                               std::size_t steps) {
  ModelParams p = init_params(spec, seed);
  AdamState st = AdamState::for_params(p, 1e-2);
  const auto xs = linspace(lo, hi, 41);
  Tensor x(xs.size(), 1), y(xs.size(), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x(i, 0) = xs[i];
    y(i, 0) = target(xs[i]);
  }
  for (std::size_t s = 0; s < steps; ++s) {
    Tape tape;
    const BoundParams b = bind_variables(tape, p);
    tape.backward(ad::sum_squares(mlp_input_gradient(spec, b, tape.constant(x)) - tape.constant(y)));
    adam_step(p, collect_grads(tape, b, p), st);
  }
  return p;
}

}  // namespace

TEST_CASE("mlp spec validation") {
  CHECK_THROWS_AS((MlpSpec{0, {4}, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{2, {0}, 1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((MlpSpec{2, {4}, 0}.validate()), std::invalid_argument);
  CHECK((MlpSpec{2, {3}, 1}.parameter_count()) == 2 * 3 + 3 + 3 + 1);
}

TEST_CASE("zero parameters give zero output") {
  const MlpSpec spec{3, {5, 4}, 2};
  Tensor x(2, 3, 0.7);
  const Tensor y = mlp_forward(spec, zero_params(spec), x);
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("identity weights with tanh hidden map zero to zero") {
  const MlpSpec spec{3, {3}, 3};
  ModelParams p = zero_params(spec);
  for (std::size_t i = 0; i < 3; ++i) {
    p.tensors[0](i, i) = 1.0;
    p.tensors[2](i, i) = 1.0;
  }
  const Tensor y = mlp_forward(spec, p, Tensor(1, 3, 0.0));
  for (double v : y.values()) CHECK(v == 0.0);
  const Tensor y1 = mlp_forward(spec, p, Tensor(1, 3, 0.5));
  CHECK(y1(0, 1) == doctest::Approx(std::tanh(0.5)).epsilon(1e-15));
}

TEST_CASE("mlp forward matches the loop oracle") {
  Rng rng(7);
  const MlpSpec spec{4, {9, 6}, 3};
  const ModelParams p = init_params(spec, 11);
  Tensor x(6, 4);
  for (double& v : x.values()) v = rng.normal();
  const Tensor y = mlp_forward(spec, p, x);
  for (std::size_t r = 0; r < 6; ++r) {
    const auto ref = oracle::mlp(spec, p, row(x, r));
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(y(r, c) - ref[c]) < 1e-12);
  }
  Tape tape;
  const Var yt = mlp_forward(spec, bind_constants(tape, p), tape.constant(x));
  CHECK(yt.value() == y);
}

TEST_CASE("glorot init bounds, zero biases, determinism") {
  const MlpSpec spec{3, {50, 20}, 2};
  const ModelParams p = init_params(spec, 5);
  CHECK(p == init_params(spec, 5));
  CHECK_FALSE(p == init_params(spec, 6));
  check_params(spec, p);
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const Tensor& w = p.tensors[2 * l];
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double v : w.values()) CHECK(std::abs(v) <= bound);
    for (double v : p.tensors[2 * l + 1].values()) CHECK(v == 0.0);
  }
  ModelParams bad = p;
  bad.tensors.pop_back();
  CHECK_THROWS_AS(check_params(spec, bad), std::invalid_argument);
}

TEST_CASE("input gradient matches finite differences and zero nets") {
  const MlpSpec spec{3, {7, 5}, 1};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ModelParams p = init_params(spec, s);
    Rng rng(s + 100);
    std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
    Tape tape;
    const Var g = mlp_input_gradient(spec, bind_constants(tape, p), tape.constant(Tensor::row(x)));
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      auto xp = x, xm = x;
      xp[i] += 1e-5;
      xm[i] -= 1e-5;
      const double fd = (oracle::mlp(spec, p, xp)[0] - oracle::mlp(spec, p, xm)[0]) / 2e-5;
      diff = std::max(diff, std::abs(g.value()(0, i) - fd));
      scale = std::max(scale, std::abs(fd));
    }
    CHECK(diff / scale < 1e-4);
  }
  Tape tape;
  const Var g = mlp_input_gradient(spec, bind_constants(tape, zero_params(spec)),
                                   tape.constant(Tensor(2, 3, 0.4)));
  for (double v : g.value().values()) CHECK(v == 0.0);
}

TEST_CASE("net fitted to q^2 has input gradient near 4 at q = 2") {
  const MlpSpec spec{1, {16}, 1};
  ModelParams p = init_params(spec, 3);
  AdamState st = AdamState::for_params(p, 1e-2);
  const auto qs = linspace(-3.0, 3.0, 61);
  Tensor x(qs.size(), 1), y(qs.size(), 1);
  for (std::size_t i = 0; i < qs.size(); ++i) {
    x(i, 0) = qs[i];
    y(i, 0) = qs[i] * qs[i];
  }
  for (int s = 0; s < 10000; ++s) {
    Tape tape;
    const BoundParams b = bind_variables(tape, p);
    tape.backward(ad::sum_squares(mlp_forward(spec, b, tape.constant(x)) - tape.constant(y)));
    adam_step(p, collect_grads(tape, b, p), st);
  }
  Tape tape;
  const double g =
      mlp_input_gradient(spec, bind_constants(tape, p), tape.constant(Tensor::scalar(2.0)))
          .value()
          .item();
  const double fd = (oracle::mlp(spec, p, {2.0 + 1e-5})[0] - oracle::mlp(spec, p, {2.0 - 1e-5})[0]) / 2e-5;
  CHECK(std::abs(g - fd) <= 1e-4 * std::abs(fd));
  CHECK(g == doctest::Approx(4.0).epsilon(0.05));
}

TEST_CASE("adam: zero gradients keep parameters, moments decay") {
  const MlpSpec spec{2, {3}, 1};
  ModelParams p = init_params(spec, 1);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p, 0.1);
  st.first_moment[0].fill(1.0);
  std::vector<Tensor> zeros;
  for (const Tensor& t : p.tensors) zeros.emplace_back(t.rows(), t.cols(), 0.0);
  st.second_moment[0].fill(1.0);
  adam_step(p, zeros, st);
  CHECK(st.step == 1);
  CHECK(st.first_moment[0](0, 0) == doctest::Approx(0.9));
  CHECK(st.second_moment[0](0, 0) == doctest::Approx(0.999));
  for (std::size_t i = 1; i < p.tensors.size(); ++i) CHECK(p.tensors[i] == before.tensors[i]);
}

TEST_CASE("adam: first step moves each coordinate by about the learning rate") {
  const MlpSpec spec{2, {3}, 1};
  ModelParams p = init_params(spec, 1);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p, 1e-3);
  std::vector<Tensor> g;
  Rng rng(2);
  for (const Tensor& t : p.tensors) {
    Tensor gt(t.rows(), t.cols());
    for (double& v : gt.values()) v = rng.normal();
    g.push_back(gt);
  }
  adam_step(p, g, st);
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    for (std::size_t j = 0; j < p.tensors[i].size(); ++j) {
      const double d = before.tensors[i].values()[j] - p.tensors[i].values()[j];
      const double gv = g[i].values()[j];
      CHECK(d == doctest::Approx(1e-3 * gv / (std::abs(gv) + 1e-8)).epsilon(1e-9));
    }
  }
}

TEST_CASE("adam: two steps match a hand-rolled sequence, and are deterministic") {
  const MlpSpec spec{2, {4}, 2};
  ModelParams p = init_params(spec, 9), q = p;
  AdamState st = AdamState::for_params(p, 2e-4), st2 = st;
  Rng rng(3);
  std::vector<std::vector<Tensor>> gs(2);
  for (auto& g : gs)
    for (const Tensor& t : p.tensors) {
      Tensor gt(t.rows(), t.cols());
      for (double& v : gt.values()) v = rng.normal();
      g.push_back(gt);
    }
  for (const auto& g : gs) adam_step(p, g, st);
  for (const auto& g : gs) adam_step(q, g, st2);
  CHECK(p == q);

  const ModelParams p0 = init_params(spec, 9);
  for (std::size_t i = 0; i < p0.tensors.size(); ++i) {
    for (std::size_t j = 0; j < p0.tensors[i].size(); ++j) {
      double x = p0.tensors[i].values()[j], m = 0, v = 0;
      for (int t = 1; t <= 2; ++t) {
        const double g = gs[static_cast<std::size_t>(t - 1)][i].values()[j];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
        x -= 2e-4 * mh / (std::sqrt(vh) + 1e-8);
      }
      CHECK(std::abs(p.tensors[i].values()[j] - x) < 1e-12);
    }
  }
}

TEST_CASE("adam: rejects bad gradients without touching state") {
  const MlpSpec spec{2, {3}, 1};
  ModelParams p = init_params(spec, 1);
  const ModelParams before = p;
  AdamState st = AdamState::for_params(p, 1e-3);
  std::vector<Tensor> g;
  for (const Tensor& t : p.tensors) g.emplace_back(t.rows(), t.cols(), 1.0);
  g.back()(0, 0) = NAN;
  CHECK_THROWS_AS(adam_step(p, g, st), NumericError);
  CHECK(p == before);
  CHECK(st.step == 0);
  g.pop_back();
  CHECK_THROWS_AS(adam_step(p, g, st), std::invalid_argument);
}

TEST_CASE("model construction and flat parameter order") {
  const Model o = make_model({ModelKind::oden, 3, {8}, true}, 4);
  const auto& om = std::get<OdenModel>(o);
  CHECK(om.spec.input_dim == 4);
  CHECK(om.spec.output_dim == 3);
  CHECK(spec_of(o) == ModelSpec{ModelKind::oden, 3, {8}, true});

  const Model h = make_model({ModelKind::hoden, 4, {6, 5}, false}, 4);
  const auto& hm = std::get<HodenModel>(h);
  CHECK(hm.half_dim() == 2);
  CHECK(hm.kinetic_spec.hidden_dims == std::vector<std::size_t>{6, 5});
  CHECK(hm.potential_spec.hidden_dims == std::vector<std::size_t>{6, 5});
  CHECK(hm.kinetic_spec.output_dim == 1);
  CHECK_FALSE(hm.kinetic == hm.potential);
  const ModelParams flat = flat_params(h);
  CHECK(flat.tensors.size() == hm.kinetic.tensors.size() + hm.potential.tensors.size());
  CHECK(flat.tensors.front() == hm.kinetic.tensors.front());
  CHECK(flat.tensors.back() == hm.potential.tensors.back());
  Model h2 = make_model({ModelKind::hoden, 4, {6, 5}, false}, 99);
  set_flat_params(h2, flat);
  CHECK(std::get<HodenModel>(h2) == hm);
  CHECK_THROWS_AS(make_model({ModelKind::hoden, 3, {6}, false}, 1), std::invalid_argument);
}

TEST_CASE("zero-weight models give zero fields") {
  for (ModelKind k : {ModelKind::oden, ModelKind::hoden}) {
    Model m = make_model({k, 2, {5}, false}, 1);
    ModelParams p = flat_params(m);
    for (Tensor& t : p.tensors) t.fill(0.0);
    set_flat_params(m, p);
    const Tensor y = model_field(m).rhs(Tensor(3, 2, 0.8), Tensor(3, 1, 0.1));
    for (double v : y.values()) CHECK(v == 0.0);
    if (k == ModelKind::hoden) {
      CHECK(hoden_energy(std::get<HodenModel>(m), State{{0.3, -0.4}, 0.0}) == 0.0);
    }
  }
}

TEST_CASE("oden field equals a direct forward pass on (x, t)") {
  const Model m = make_model({ModelKind::oden, 2, {10}, true}, 8);
  const auto& om = std::get<OdenModel>(m);
  Tensor x(2, 2, std::vector<double>{0.1, -0.5, 0.9, 0.3});
  Tensor t(2, 1, std::vector<double>{0.0, 2.0});
  const Tensor f = model_field(m).rhs(x, t);
  Tensor xt(2, 3, std::vector<double>{0.1, -0.5, 0.0, 0.9, 0.3, 2.0});
  const Tensor ref = mlp_forward(om.spec, om.params, xt);
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(f.values()[i] - ref.values()[i]) <= 1e-15);
  const Tensor f2 = model_field(m).rhs(x, Tensor(2, 1, 5.0));
  CHECK_FALSE(f2 == f);
  CHECK_FALSE(model_field(m).autonomous);
}

TEST_CASE("hoden field is separable and the gradient of its energy") {
  for (bool ta : {false, true}) {
    const Model m = make_model({ModelKind::hoden, 2, {12, 7}, ta}, 21);
    const auto& hm = std::get<HodenModel>(m);
    const VectorField f = model_field(m);
    CHECK(f.separable());  // structurally separable even when time-augmented
    CHECK(f.autonomous == !ta);
    const double q = 0.37, p = -0.81, t = 1.3;
    const Tensor base = f.rhs(Tensor(1, 2, std::vector<double>{q, p}), Tensor(1, 1, t));
    const Tensor dq = f.rhs(Tensor(1, 2, std::vector<double>{q + 0.5, p}), Tensor(1, 1, t));
    const Tensor dp = f.rhs(Tensor(1, 2, std::vector<double>{q, p + 0.5}), Tensor(1, 1, t));
    CHECK(dq(0, 0) == base(0, 0));  // dq/dt does not depend on q
    CHECK(dp(0, 1) == base(0, 1));  // dp/dt does not depend on p

    const double h = 1e-6;
    auto H = [&](double qq, double pp) { return hoden_energy(hm, State{{qq, pp}, t}); };
    const double dHdq = (H(q + h, p) - H(q - h, p)) / (2 * h);
    const double dHdp = (H(q, p + h) - H(q, p - h)) / (2 * h);
    CHECK(std::abs(base(0, 0) - dHdp) <= 1e-6 * std::max(1e-3, std::abs(dHdp)));
    CHECK(std::abs(base(0, 1) + dHdq) <= 1e-6 * std::max(1e-3, std::abs(dHdq)));

    // Energy is K(p) + V(q) evaluated separately; calibration zeroes H(0, 0).
    const double k = oracle::mlp(hm.kinetic_spec, hm.kinetic, oracle::with_time({p}, ta, t))[0];
    const double v = oracle::mlp(hm.potential_spec, hm.potential, oracle::with_time({q}, ta, t))[0];
    CHECK(std::abs(H(q, p) - (k + v)) < 1e-15);
    CHECK(hoden_energy(hm, State{{0.0, 0.0}, t}, true) == 0.0);
    CHECK(std::abs(hoden_energy(hm, State{{q, p}, t}, true) - (H(q, p) - H(0.0, 0.0))) < 1e-15);
  }
}

TEST_CASE("hoden fitted to K = p^2/2, V = q^2/2 gives the harmonic field") {
  Model m = make_model({ModelKind::hoden, 2, {16}, false}, 5);
  auto& hm = std::get<HodenModel>(m);
  hm.kinetic = fit_input_gradient(hm.kinetic_spec, 1, [](double p) { return p; }, -1.2, 1.2, 3000);
  hm.potential = fit_input_gradient(hm.potential_spec, 2, [](double q) { return q; }, -1.2, 1.2, 3000);
  const VectorField f = model_field(m);
  double worst = 0.0;
  for (double q : linspace(-1.0, 1.0, 11)) {
    for (double p : linspace(-1.0, 1.0, 11)) {
      const Tensor y = f.rhs(Tensor(1, 2, std::vector<double>{q, p}), Tensor(1, 1, 0.0));
      worst = std::max({worst, std::abs(y(0, 0) - p), std::abs(y(0, 1) + q)});
    }
  }
  CHECK(worst < 1e-2);
}

TEST_CASE("leapfrog keeps a learned hamiltonian bounded") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Model m = make_model({ModelKind::hoden, 2, {8}, false}, s);
    const auto& hm = std::get<HodenModel>(m);
    const auto r = rollout(model_field(m), State{{0.5, 0.3}, 0.0}, 200, {SolverMethod::leapfrog, 0.1});
    const double h0 = hoden_energy(hm, r.trajectory.states[0]);
    // Bounded oscillation: the second half of the orbit strays no further
    // than the first.
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
      const double d = std::abs(hoden_energy(hm, r.trajectory.states[i]) - h0);
      double& slot = i <= 100 ? first : second;
      slot = std::max(slot, d);
    }
    CHECK(second <= 1.5 * first + 1e-12);
    CHECK(std::max(first, second) < 1e-2 * std::max(1.0, std::abs(h0)));
  }
}

TEST_CASE("tape fields match numeric fields") {
  for (ModelKind k : {ModelKind::oden, ModelKind::hoden}) {
    for (bool ta : {false, true}) {
      const Model m = make_model({k, 4, {9}, ta}, 17);
      Tensor x(3, 4);
      Rng rng(1);
      for (double& v : x.values()) v = rng.normal();
      const Tensor t(3, 1, 0.7);
      Tape tape;
      const BoundModel bm = bind_model(m, tape, false);
      const Tensor a = bm.field.rhs(tape.constant(x), t).value();
      const Tensor b = model_field(m).rhs(x, t);
      for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-14);
      for (std::size_t r = 0; r < 3; ++r) {
        const auto ref = oracle::model_fn(m)(row(x, r), 0.7);
        for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(b(r, c) - ref[c]) < 1e-12);
      }
    }
  }
}
