#include <cmath>
#include <random>

#include "doctest.h"
#include "mcnet/core/adam.hpp"
#include "mcnet/core/checkpoint.hpp"
#include "mcnet/core/gradcheck.hpp"
#include "mcnet/core/tape.hpp"

using namespace mcnet;
using Eigen::MatrixXd;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// sum(f(params) .* R) with a fixed random R so every output coordinate gets a
// distinct adjoint.
LossBuilder<double> weighted(ParameterStore& store, std::function<Var(Tape&, ParameterStore&)> f, std::uint64_t seed) {
  return [&store, f, seed](Tape& t) {
    Var out = f(t, store);
    std::mt19937_64 rng(seed);
    return sum(hadamard(out, t.constant(random_matrix(out.rows(), out.cols(), rng))));
  };
}

}  // namespace

TEST_CASE("backward: sum of a parameter gives an all-ones gradient") {
  ParameterStore store;
  std::mt19937_64 rng(1);
  store.add("w", random_matrix(3, 4, rng));
  Tape tape;
  auto loss = sum(tape.param(store, "w"));
  tape.backward(loss);
  CHECK((store.grad("w").array() == 1.0).all());
}

TEST_CASE("backward: loss constant in a parameter leaves its gradient exactly zero") {
  ParameterStore store;
  std::mt19937_64 rng(2);
  store.add("a", random_matrix(2, 2, rng));
  store.add("b", random_matrix(2, 2, rng));
  Tape tape;
  tape.param(store, "b");
  auto loss = sum(tanh(tape.param(store, "a")));
  tape.backward(loss);
  CHECK((store.grad("b").array() == 0.0).all());
  CHECK(store.grad("a").cwiseAbs().sum() > 0);
}

TEST_CASE("backward: non-scalar loss is a contract violation") {
  Tape tape;
  auto v = tape.variable(MatrixXd::Ones(2, 2));
  CHECK_THROWS_AS(tape.backward(v), ContractViolation);
}

TEST_CASE("parameter store: unknown names are lookup errors, never created") {
  ParameterStore store;
  store.add_zeros("x", 1, 1);
  CHECK_THROWS_AS(store.at("y"), LookupError);
  Tape tape;
  CHECK_THROWS_AS(tape.param(store, "y"), LookupError);
  CHECK(store.size() == 1);
  CHECK_THROWS_AS(store.add_zeros("x", 1, 1), ContractViolation);
  CHECK(store.at("x").grad.rows() == 1);
}

TEST_CASE("backward: 0.5||Wx - y||^2 matches central differences") {
  ParameterStore store;
  std::mt19937_64 rng(3);
  store.add("W", random_matrix(3, 3, rng));
  const MatrixXd x = random_matrix(3, 1, rng), y = random_matrix(3, 1, rng);
  LossBuilder<double> f = [&](Tape& t) {
    Var r = matmul(t.param(store, "W"), t.constant(x)) - t.constant(y);
    return 0.5 * sum(hadamard(r, r));
  };
  // Closed form: (Wx - y) x^T
  store.zero_grad();
  {
    Tape t;
    t.backward(f(t));
  }
  const MatrixXd expected = (store.value("W") * x - y) * x.transpose();
  CHECK((store.grad("W") - expected).cwiseAbs().maxCoeff() < 1e-12);

  GradCheckOptions opt;
  opt.samples = 0;
  opt.eps = 0;
  auto res = finite_difference_check(store, f, opt);
  CHECK(res.checked == 9);
  CHECK(res.max_rel_error < 1e-6);
}

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(4);
  ParameterStore store;
  store.add("a", random_matrix(4, 3, rng));
  store.add("b", random_matrix(4, 3, rng));
  store.add("m", random_matrix(3, 5, rng));
  store.add("row", random_matrix(1, 3, rng));
  store.add("col", random_matrix(4, 1, rng));
  store.add("s", random_matrix(1, 1, rng));
  store.add("pos", (random_matrix(4, 3, rng).array().abs() + 0.2).matrix());
  store.add("prob", (random_matrix(4, 3, rng).array().abs() * 0.1 + 0.3).matrix());

  using F = std::function<Var(Tape&, ParameterStore&)>;
  const std::vector<std::pair<const char*, F>> ops = {
      {"add", [](Tape& t, ParameterStore& s) { return t.param(s, "a") + t.param(s, "b"); }},
      {"sub", [](Tape& t, ParameterStore& s) { return t.param(s, "a") - t.param(s, "b"); }},
      {"scale", [](Tape& t, ParameterStore& s) { return 1.7 * t.param(s, "a"); }},
      {"hadamard", [](Tape& t, ParameterStore& s) { return hadamard(t.param(s, "a"), t.param(s, "b")); }},
      {"one_minus", [](Tape& t, ParameterStore& s) { return one_minus(t.param(s, "a")); }},
      {"matmul", [](Tape& t, ParameterStore& s) { return matmul(t.param(s, "a"), t.param(s, "m")); }},
      {"affine", [](Tape& t, ParameterStore& s) { return add_row(t.param(s, "a"), t.param(s, "row")); }},
      {"tanh", [](Tape& t, ParameterStore& s) { return tanh(t.param(s, "a")); }},
      {"sigmoid", [](Tape& t, ParameterStore& s) { return sigmoid(t.param(s, "a")); }},
      {"softmax", [](Tape& t, ParameterStore& s) { return softmax_rows(t.param(s, "a")); }},
      {"abs", [](Tape& t, ParameterStore& s) { return abs(t.param(s, "a")); }},
      {"log", [](Tape& t, ParameterStore& s) { return log_clamped(t.param(s, "pos"), 1e-7, 1e9); }},
      {"pow", [](Tape& t, ParameterStore& s) { return pow(t.param(s, "pos"), 2.0); }},
      {"concat", [](Tape& t, ParameterStore& s) { return concat_cols({t.param(s, "a"), t.param(s, "b"), t.param(s, "col")}); }},
      {"slice", [](Tape& t, ParameterStore& s) { return slice_cols(t.param(s, "a"), 1, 2); }},
      {"rowdot", [](Tape& t, ParameterStore& s) { return rowwise_dot(t.param(s, "a"), t.param(s, "b")); }},
      {"scale_rows", [](Tape& t, ParameterStore& s) { return scale_rows(t.param(s, "a"), t.param(s, "col")); }},
      {"scalar_mul", [](Tape& t, ParameterStore& s) { return scalar_mul(t.param(s, "s"), t.param(s, "a")); }},
      {"sum", [](Tape& t, ParameterStore& s) { return sum(t.param(s, "a")); }},
      {"mean", [](Tape& t, ParameterStore& s) { return mean(t.param(s, "b")); }},
      {"select", [](Tape& t, ParameterStore& s) {
         Mask m(4);
         m << true, false, true, false;
         return select_rows(m, t.param(s, "a"), t.param(s, "b"));
       }},
      {"masked_abs", [](Tape& t, ParameterStore& s) {
         Mask m(4);
         m << true, true, false, true;
         const MatrixXd obs = MatrixXd::Constant(4, 3, 0.25);
         return masked_abs_sum(obs, m, t.param(s, "a"));
       }},
  };
  for (const auto& [name, op] : ops) {
    std::string op_name = name;
    CAPTURE(op_name);
    GradCheckOptions opt;
    opt.samples = 0;
    auto res = finite_difference_check(store, weighted(store, op, 99), opt);
    CHECK(res.max_rel_error < 1e-5);
  }
}

TEST_CASE("softmax rows are nonnegative and sum to one") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    MatrixXd x = random_matrix(7, 1 + trial % 6, rng, 10.0);
    MatrixXd y = softmax_rows_value<double>(x);
    CHECK((y.array() >= 0).all());
    CHECK((y.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("select_rows never reads unselected rows") {
  Tape tape;
  MatrixXd obs = MatrixXd::Constant(3, 2, std::nan(""));
  obs.row(1) << 4.0, 5.0;
  Mask m(3);
  m << false, true, false;
  auto est = tape.variable(MatrixXd::Ones(3, 2));
  auto u = select_rows(m, tape.constant(obs), est);
  CHECK(u.value().allFinite());
  CHECK(u.value()(1, 0) == 4.0);
  CHECK(u.value()(0, 1) == 1.0);
  auto l = masked_abs_sum(obs, m, est);
  CHECK(l.scalar() == doctest::Approx(3.0 + 4.0));
}

TEST_CASE("adam: defaults, zero case, and a hand-evaluated step") {
  AdamConfig cfg;
  CHECK(cfg.lr == 5e-3);
  CHECK(cfg.weight_decay == 5e-4);
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.eps == 1e-8);

  ParameterStore store;
  std::mt19937_64 rng(6);
  store.add("w", random_matrix(2, 3, rng));
  const MatrixXd before = store.value("w");
  AdamConfig zero = cfg;
  zero.weight_decay = 0;
  adam_step(store, zero, 1);
  CHECK((store.value("w").array() == before.array()).all());

  // One step with g = 1 from p = 2: m = 0.1, v = 0.001, m_hat = v_hat = 1.
  ParameterStore one;
  one.add("p", MatrixXd::Constant(1, 1, 2.0));
  one.at("p").grad(0, 0) = 1.0;
  adam_step(one, zero, 1);
  const double m = 0.1 * 1.0, v = 0.001 * 1.0;
  const double expected = 2.0 - 5e-3 * (m / 0.1) / (std::sqrt(v / 0.001) + 1e-8);
  CHECK(one.value("p")(0, 0) == doctest::Approx(expected).epsilon(1e-15));

  // Second step, same gradient, checks persistent moments.
  adam_step(one, zero, 2);
  const double m2 = 0.9 * m + 0.1, v2 = 0.999 * v + 0.001;
  const double expected2 = expected - 5e-3 * (m2 / (1 - 0.81)) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  CHECK(one.value("p")(0, 0) == doctest::Approx(expected2).epsilon(1e-15));
}

TEST_CASE("adam: weight decay is added to the gradient") {
  ParameterStore s;
  s.add("p", MatrixXd::Constant(1, 1, 3.0));
  AdamConfig cfg;
  cfg.weight_decay = 0.5;
  adam_step(s, cfg, 1);
  // g = 0 + 0.5 * 3 > 0, so p moves down by ~lr
  CHECK(s.value("p")(0, 0) == doctest::Approx(3.0 - 5e-3).epsilon(1e-9));
}

TEST_CASE("adam: invalid configuration") {
  ParameterStore s;
  s.add_zeros("p", 1, 1);
  AdamConfig bad;
  bad.lr = 0;
  CHECK_THROWS_AS(adam_step(s, bad, 1), ConfigError);
  bad = AdamConfig{};
  bad.eps = -1;
  CHECK_THROWS_AS(adam_step(s, bad, 1), ConfigError);
  CHECK_THROWS_AS(adam_step(s, AdamConfig{}, 0), ConfigError);
}

TEST_CASE("gradcheck: quadratic, constant, and non-finite losses") {
  ParameterStore store;
  std::mt19937_64 rng(7);
  store.add("x", random_matrix(4, 4, rng));
  LossBuilder<double> quad = [&](Tape& t) {
    Var x = t.param(store, "x");
    return sum(hadamard(x, x));
  };
  GradCheckOptions opt;
  opt.samples = 0;
  CHECK(finite_difference_check(store, quad, opt).max_rel_error < 1e-7);

  LossBuilder<double> constant = [&](Tape& t) {
    t.param(store, "x");
    return t.constant(MatrixXd::Constant(1, 1, 3.0));
  };
  CHECK(finite_difference_check(store, constant, opt).max_rel_error == 0.0);

  LossBuilder<double> bad = [&](Tape& t) { return log_clamped(t.param(store, "x"), -1.0, 1e300) + t.constant(MatrixXd::Constant(4, 4, std::nan(""))); };
  LossBuilder<double> nonfinite = [&](Tape& t) { return sum(bad(t)); };
  CHECK_THROWS_AS(finite_difference_check(store, nonfinite, opt), NumericalError);

  opt.step = 1e-2;
  CHECK_THROWS_AS(finite_difference_check(store, quad, opt), ConfigError);
}

TEST_CASE("checkpoint: round trip and byte determinism") {
  ParameterStore store;
  std::mt19937_64 rng(8);
  store.add("b.w", random_matrix(3, 2, rng));
  store.add("a.v", random_matrix(1, 5, rng));
  Checkpoint c;
  c.metadata = "hidden=8\n";
  store_to_checkpoint(store, c);
  c.arrays["norm/mri.mean"] = random_matrix(1, 4, rng);
  const auto bytes = encode_checkpoint(c);
  CHECK(bytes.substr(0, 8) == "MCNETCKP");
  auto back = decode_checkpoint(bytes);
  CHECK(back.metadata == c.metadata);
  CHECK(encode_checkpoint(back) == bytes);
  ParameterStore other;
  other.add_zeros("b.w", 3, 2);
  other.add_zeros("a.v", 1, 5);
  checkpoint_to_store(back, other);
  CHECK(other == store);

  ParameterStore wrong;
  wrong.add_zeros("b.w", 2, 2);
  CHECK_THROWS_AS(checkpoint_to_store(back, wrong), SchemaError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
}

TEST_CASE("identical seeds give bit-identical parameter trajectories") {
  auto run = [] {
    ParameterStore s;
    std::mt19937_64 rng(11);
    s.add_xavier("w", 5, 4, rng);
    MatrixXd x = random_matrix(6, 5, rng);
    for (long step = 1; step <= 20; ++step) {
      s.zero_grad();
      Tape t;
      t.backward(sum(tanh(matmul(t.constant(x), t.param(s, "w")))));
      adam_step(s, AdamConfig{}, step);
    }
    return s;
  };
  CHECK(run() == run());
}
