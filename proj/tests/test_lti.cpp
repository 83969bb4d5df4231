#include <doctest.h>

#include <cmath>
#include <vector>

#include "snn/estimator.hpp"
#include "snn/lti.hpp"
#include "snn/rng.hpp"
#include "snn/spectral.hpp"

using namespace snn;

namespace {

// Scalar recursion oracle for one factor.
std::vector<double> lrf_sequence(const Vector& beta, const Vector& init_newest_first, int steps) {
  const Index G = beta.size();
  std::vector<double> rho;  // rho[0] = oldest
  for (Index g = G - 1; g >= 0; --g) rho.push_back(init_newest_first(g));
  for (int s = 0; s < steps; ++s) {
    double next = 0.0;
    for (Index g = 1; g <= G; ++g) next += beta(g - 1) * rho[rho.size() - g];
    rho.push_back(next);
  }
  return rho;
}

LtiFactorSystem random_system(Rng& rng, Index N, Index I, Index R, Index G) {
  LrfSpec spec;
  spec.beta = Matrix(R, G);
  spec.rho_init = Matrix(R, G);
  for (Index r = 0; r < R; ++r)
    for (Index g = 0; g < G; ++g) {
      spec.beta(r, g) = rng.uniform(-0.9, 0.9) / static_cast<double>(G);
      spec.rho_init(r, g) = rng.normal();
    }
  Matrix theta(N, R), omega(I, R);
  for (Index n = 0; n < N; ++n)
    for (Index r = 0; r < R; ++r) theta(n, r) = rng.normal();
  for (Index i = 0; i < I; ++i)
    for (Index r = 0; r < R; ++r) omega(i, r) = rng.normal();
  return build_system(spec, theta, omega);
}

}  // namespace

TEST_CASE("companion_block layout") {
  Vector b1(1);
  b1 << 0.9;
  const Matrix m1 = companion_block(b1);
  CHECK(m1.rows() == 1);
  CHECK(m1(0, 0) == 0.9);

  Vector b2(2);
  b2 << 1.0, -0.5;
  const Matrix m2 = companion_block(b2);
  CHECK(m2(0, 0) == 1.0);
  CHECK(m2(0, 1) == -0.5);
  CHECK(m2(1, 0) == 1.0);
  CHECK(m2(1, 1) == 0.0);

  CHECK_THROWS_AS(companion_block(Vector()), std::invalid_argument);
}

TEST_CASE("companion block drives the AR(2) recursion") {
  Vector beta(2);
  beta << 1.0, -0.5;
  const Matrix block = companion_block(beta);
  Vector state(2);
  state << 0.7, 0.3;  // (rho(1), rho(0)) newest first
  const auto oracle = lrf_sequence(beta, state, 50);
  Vector x = state;
  for (int s = 0; s < 50; ++s) {
    x = block * x;
    CHECK(x(0) == doctest::Approx(oracle[static_cast<std::size_t>(s) + 2]).epsilon(1e-10));
  }
}

TEST_CASE("build_system shapes and collapses") {
  Rng rng(1);
  // R = 1: single companion block
  {
    const auto sys = random_system(rng, 2, 2, 1, 3);
    CHECK(sys.A.rows() == 3);
    CHECK(sys.B.rows() == 4);
  }
  // R = 2, G = 1: diagonal A
  {
    LrfSpec spec;
    spec.beta = Matrix(2, 1);
    spec.beta << 0.5, -0.25;
    spec.rho_init = Matrix::Constant(2, 1, 1.0);
    const auto sys = build_system(spec, Matrix::Ones(1, 2), Matrix::Ones(1, 2));
    CHECK(sys.A(0, 0) == 0.5);
    CHECK(sys.A(1, 1) == -0.25);
    CHECK(sys.A(0, 1) == 0.0);
    CHECK(sys.A(1, 0) == 0.0);
  }
}

TEST_CASE("B X matches the direct factorization at every step") {
  Rng rng(2);
  const auto sys_const = random_system(rng, 3, 2, 2, 2);
  LtiFactorSystem sys = sys_const;
  // track each factor with the scalar oracle
  std::vector<std::vector<double>> rho(2);
  for (Index r = 0; r < 2; ++r) {
    Vector beta = sys.A.block(r * 2, r * 2, 1, 2).transpose();
    Vector init = sys.X.segment(r * 2, 2);
    rho[static_cast<std::size_t>(r)] = lrf_sequence(beta, init, 20);
  }
  for (int t = 1; t <= 20; ++t) {
    step(sys);
    const Vector y = sys.B * sys.X;
    for (Index n = 0; n < 3; ++n)
      for (Index i = 0; i < 2; ++i) {
        double direct = 0.0;
        for (Index r = 0; r < 2; ++r)
          direct += sys.theta(n, r) * sys.omega(i, r) *
                    rho[static_cast<std::size_t>(r)][static_cast<std::size_t>(t) + 1];
        CHECK(y(n * 2 + i) == doctest::Approx(direct).epsilon(1e-10));
      }
  }
}

TEST_CASE("step keeps zero state at zero and respects a unit root") {
  LrfSpec spec;
  spec.beta = Matrix::Constant(1, 1, 1.0);
  spec.rho_init = Matrix::Constant(1, 1, 4.5);
  auto sys = build_system(spec, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  for (int s = 0; s < 5; ++s) {
    step(sys);
    CHECK(sys.X(0) == doctest::Approx(4.5));
  }
  sys.X.setZero();
  step(sys);
  CHECK(sys.X.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("selection matrix") {
  const Matrix c1 = selection_matrix({1}, 2);
  CHECK(c1.rows() == 1);
  CHECK(c1.cols() == 2);
  CHECK(c1(0, 0) == 0.0);
  CHECK(c1(0, 1) == 1.0);

  const Matrix c2 = selection_matrix({0, 1}, 2);
  CHECK(c2(0, 0) == 1.0);
  CHECK(c2(1, 3) == 1.0);
  CHECK(c2.sum() == 2.0);

  CHECK_THROWS_AS(selection_matrix({2}, 2), std::out_of_range);
}

TEST_CASE("observed innovations equal C(t) B A X(t-1)") {
  Rng rng(3);
  const auto sys = random_system(rng, 4, 3, 2, 2);
  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi(6, 4);
  for (Index t = 0; t < 6; ++t)
    for (Index n = 0; n < 4; ++n)
      schedule.assignments(t, n) = static_cast<int>(rng.uniform_index(3));
  Rng sim_rng(4);
  const auto sim = simulate(sys, schedule, 6, 0.0, sim_rng);

  Vector X = sys.X;
  for (Index t = 0; t < 6; ++t) {
    std::vector<int> row(4);
    for (Index n = 0; n < 4; ++n) row[static_cast<std::size_t>(n)] = schedule.assignments(t, n);
    const Matrix C = selection_matrix(row, 3);
    const Vector obs = C * (sys.B * (sys.A * X));
    for (Index n = 0; n < 4; ++n) {
      const Index i = schedule.assignments(t, n);
      CHECK(obs(n) ==
            doctest::Approx(sim.delta[static_cast<std::size_t>(i)](n, t)).epsilon(1e-10));
    }
    X = sys.A * X;
  }
}

TEST_CASE("simulate: constant unit innovation accumulates M_n(t) = t") {
  LrfSpec spec;
  spec.beta = Matrix::Constant(1, 1, 1.0);
  spec.rho_init = Matrix::Constant(1, 1, 1.0);
  const auto sys = build_system(spec, Matrix::Ones(3, 1), Matrix::Ones(2, 1));
  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi::Zero(10, 3);
  Rng rng(5);
  const auto sim = simulate(sys, schedule, 10, 0.0, rng);
  for (Index n = 0; n < 3; ++n)
    for (Index t = 0; t < 10; ++t)
      CHECK(sim.m_path(n, t) == doctest::Approx(static_cast<double>(t + 1)).epsilon(1e-12));
}

TEST_CASE("simulate: exactly one observation per unit-time pair") {
  Rng rng(6);
  const auto sys = random_system(rng, 3, 3, 2, 1);
  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi(5, 3);
  for (Index t = 0; t < 5; ++t)
    for (Index n = 0; n < 3; ++n) schedule.assignments(t, n) = static_cast<int>(rng.uniform_index(3));
  Rng sim_rng(7);
  const auto sim = simulate(sys, schedule, 5, 0.1, sim_rng);
  for (Index n = 0; n < 3; ++n)
    for (Index t = 0; t < 5; ++t) {
      Index observed = 0;
      for (Index i = 0; i < 3; ++i)
        if (sim.observed.mask()(n, t * 3 + i)) ++observed;
      CHECK(observed == 1);
    }
  // schedule index out of range is rejected
  schedule.assignments(0, 0) = 3;
  Rng bad_rng(8);
  CHECK_THROWS_AS(simulate(sys, schedule, 5, 0.0, bad_rng), std::out_of_range);
}

TEST_CASE("augmented step matches the simulated trajectory") {
  Rng rng(9);
  const auto sys = random_system(rng, 3, 2, 2, 2);
  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi(20, 3);
  for (Index t = 0; t < 20; ++t)
    for (Index n = 0; n < 3; ++n) schedule.assignments(t, n) = static_cast<int>(rng.uniform_index(2));
  Rng sim_rng(10);
  const auto sim = simulate(sys, schedule, 20, 0.0, sim_rng);

  Vector M = sys.M;
  Vector X = sys.X;
  for (Index t = 0; t < 20; ++t) {
    std::vector<int> row(3);
    for (Index n = 0; n < 3; ++n) row[static_cast<std::size_t>(n)] = schedule.assignments(t, n);
    const Matrix C = selection_matrix(row, 2);
    std::tie(M, X) = augmented_step(sys, M, X, C);
    for (Index n = 0; n < 3; ++n) CHECK(M(n) == doctest::Approx(sim.m_path(n, t)).epsilon(1e-10));
  }

  // zero selection leaves M unchanged
  const Matrix zero = Matrix::Zero(3, 3 * 2);
  const auto [m_same, x_next] = augmented_step(sys, sys.M, sys.X, zero);
  CHECK((m_same - sys.M).cwiseAbs().maxCoeff() == 0.0);
  CHECK((x_next - sys.A * sys.X).cwiseAbs().maxCoeff() == 0.0);

  // scalar expansion: M' - M = theta * omega * beta * rho
  LrfSpec scalar;
  scalar.beta = Matrix::Constant(1, 1, 0.8);
  scalar.rho_init = Matrix::Constant(1, 1, 2.0);
  const auto tiny = build_system(scalar, Matrix::Constant(1, 1, 1.5), Matrix::Constant(1, 1, -2.0));
  const Matrix C1 = selection_matrix({0}, 1);
  const auto [m1, x1] = augmented_step(tiny, tiny.M, tiny.X, C1);
  CHECK(m1(0) == doctest::Approx(1.5 * -2.0 * 0.8 * 2.0).epsilon(1e-12));
}

TEST_CASE("innovation slices are low rank and the spectral radius flag works") {
  Rng rng(11);
  const auto sys = random_system(rng, 5, 2, 2, 2);
  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi::Zero(20, 5);
  Rng sim_rng(12);
  const auto sim = simulate(sys, schedule, 20, 0.0, sim_rng);
  for (const auto& slice : sim.delta) {
    const auto fact = svd(slice);
    CHECK(fact.positive_count() <= 2);
    if (fact.singular_values.size() > 2)
      CHECK(fact.singular_values(2) <= 1e-8 * fact.singular_values(0));
  }

  LrfSpec hot;
  hot.beta = Matrix::Constant(1, 1, 1.2);
  hot.rho_init = Matrix::Constant(1, 1, 1.0);
  const auto unstable = build_system(hot, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  CHECK(unstable.unstable());
  CHECK(unstable.max_companion_spectral_radius == doctest::Approx(1.2));
}

TEST_CASE("snn recovers held-out counterfactual innovations after a control period") {
  Rng rng(13);
  constexpr Index N = 6, I = 2, T = 12, T0 = 6;
  LrfSpec spec;
  spec.beta = Matrix(2, 1);
  spec.beta << 0.9, 0.7;
  spec.rho_init = Matrix::Constant(2, 1, 1.0);
  Matrix theta(N, 2), omega(I, 2);
  for (Index n = 0; n < N; ++n)
    for (Index r = 0; r < 2; ++r) theta(n, r) = rng.normal();
  for (Index i = 0; i < I; ++i)
    for (Index r = 0; r < 2; ++r) omega(i, r) = rng.normal();
  const auto sys = build_system(spec, theta, omega);

  InterventionSchedule schedule;
  schedule.assignments = Eigen::MatrixXi::Zero(T, N);
  for (Index t = T0; t < T; ++t)
    for (Index n = 0; n < N; ++n) schedule.assignments(t, n) = static_cast<int>(n % I);
  Rng sim_rng(14);
  const auto sim = simulate(sys, schedule, T, 0.0, sim_rng);

  SnnConfig cfg;
  cfg.rank_policy = RankPolicy::energy(1.0);
  cfg.k_folds = 1;
  cfg.min_anchor_rows = 1;
  const auto completion = snn_complete(sim.observed, kAllMissing, cfg, 99);
  double max_err = 0.0;
  Index checked = 0;
  for (const auto& cell : completion.cells) {
    if (cell.status != CellStatus::Imputed) continue;
    const Index t = cell.j / I;
    const Index i = cell.j % I;
    max_err = std::max(max_err, std::abs(completion.completed(cell.i, cell.j) -
                                         sim.delta[static_cast<std::size_t>(i)](cell.i, t)));
    ++checked;
  }
  CHECK(checked > 0);
  CHECK(max_err < 1e-6);
}
