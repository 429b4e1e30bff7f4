#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qdcascade/cascade_model.hpp"
#include "qdcascade/correlation.hpp"
#include "qdcascade/correlation_dump.hpp"

using namespace qdc;

namespace {

Operator ket_bra(int d, int i, int j) {
  Operator m = Operator::Zero(d, d);
  m(i, j) = 1.0;
  return m;
}

struct Toy {
  Operator h;
  std::vector<CollapseOp> collapse;
  std::vector<oracle::Channel> channels;
  Operator rho0;
};

// Three levels with a cascade 2 -> 1 -> 0, a coherent coupling and dephasing.
Toy toy() {
  Toy t;
  t.h = Operator::Zero(3, 3);
  t.h(1, 1) = 30.0;
  t.h(2, 2) = -45.0;
  t.h(0, 1) = t.h(1, 0) = 12.0;
  t.h(1, 2) = cplx(5.0, 7.0);
  t.h(2, 1) = cplx(5.0, -7.0);
  const std::pair<Operator, double> ops[] = {
      {ket_bra(3, 0, 1), 20.0}, {ket_bra(3, 1, 2), 35.0}, {ket_bra(3, 1, 1), 4.0}};
  for (const auto& [op, rate] : ops) {
    t.collapse.push_back({op, rate, ""});
    t.channels.push_back({op, rate});
  }
  Eigen::Vector3cd psi(0.2, cplx(0.1, 0.3), 0.9);
  t.rho0 = psi * psi.adjoint() / psi.squaredNorm();
  return t;
}

SystemConfig free_qd(double t_end = 600.0) {
  SystemConfig c;
  c.cavity.enabled = false;
  c.cavity.hbar_g = 0.0;
  c.grid = {t_end, 200.0, 0.1, 0.5};
  return c;
}

struct Solved {
  CascadeModel model;
  Trajectory tr;
  TwoTimeGrid grid;
  explicit Solved(const SystemConfig& c)
      : model(validate(c)), tr(propagate(model.liouvillian, model.rho0, model.grid)), grid(model.grid) {}
  CorrelationEngine engine(EngineOptions eo = {}) const { return CorrelationEngine(model.liouvillian, tr, grid, eo); }
};

}  // namespace

// grids

TEST(TimeGrid, DefaultLayout) {
  const TimeGrid g(GridParams{});
  EXPECT_EQ(g.size(), 2001u + 2600u);
  EXPECT_DOUBLE_EQ(g.t_end(), 1500.0);
  double sum = 0.0;
  for (double w : g.weights()) sum += w;
  EXPECT_NEAR(sum, 1500.0, 1e-9);
}

TEST(TwoTimeGridProperty, RowsCoverTriangleExactly) {
  const TwoTimeGrid g(GridParams{300.0, 50.0, 0.1, 0.5});
  const double T = g.t_grid().t_end();
  for (std::size_t i = 0; i < g.rows(); ++i) {
    const double t = g.t_grid().time(i);
    double sum = 0.0;
    for (std::size_t j = 0; j < g.row_size(i); ++j) {
      EXPECT_LE(g.tau(i, j), T - t + 1e-12);
      if (j > 0) EXPECT_GT(g.tau(i, j), g.tau(i, j - 1));
      sum += g.tau_weight(i, j);
    }
    EXPECT_NEAR(sum, T - t, 1e-9);
    EXPECT_NEAR(g.tau(i, g.row_size(i) - 1), T - t, 1e-12);
  }
}

TEST(TwoTimeGrid, FineResolutionNearZeroDelay) {
  const TwoTimeGrid g(GridParams{});
  const std::size_t i = g.rows() / 2;
  EXPECT_NEAR(g.tau(i, 1) - g.tau(i, 0), 0.1, 1e-12);
}

// quadrature

TEST(DoubleIntegral, TriangleArea) {
  const TwoTimeGrid g(GridParams{});
  EXPECT_NEAR(double_integral(g, [](double, double) { return 1.0; }), 0.5 * 1500.0 * 1500.0, 1e-6);
}

// ∫∫ e^{-t/a} e^{-τ/b} over the triangle, done by hand.
TEST(DoubleIntegral, SeparableExponential) {
  const double a = 50.0, b = 20.0, T = 1500.0;
  const double exact = b * (a * (1.0 - std::exp(-T / a)) -
                            a * b / (b - a) * (std::exp(-T / b) - std::exp(-T / a)));
  const TwoTimeGrid g(GridParams{});
  const double v = double_integral(g, [&](double t, double tau) { return std::exp(-t / a - tau / b); });
  EXPECT_NEAR(v / exact, 1.0, 1e-4);
}

TEST(DoubleIntegral, FineWindowFieldIgnoresCoarseRefinement) {
  auto bump = [](double t, double tau) {
    return t < 100.0 && tau < 100.0 ? std::pow(1.0 - t / 100.0, 2) * std::pow(1.0 - tau / 100.0, 2) : 0.0;
  };
  const double a = double_integral(TwoTimeGrid(GridParams{1500.0, 200.0, 0.1, 0.5}), bump);
  const double b = double_integral(TwoTimeGrid(GridParams{1500.0, 200.0, 0.1, 0.1}), bump);
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(DoubleIntegral, MapVersionMatchesFunctionVersion) {
  const TwoTimeGrid g(GridParams{100.0, 20.0, 0.1, 0.5});
  CorrelationMap m{g, std::vector<cplx>(g.total_points())};
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.row_size(i); ++j) m(i, j) = std::exp(-g.t_grid().time(i) / 30.0 - g.tau(i, j) / 7.0);
  const double f = double_integral(g, [](double t, double tau) { return std::exp(-t / 30.0 - tau / 7.0); });
  EXPECT_NEAR(double_integral(m).real(), f, 1e-12 * f);
}

// QRT engine against brute-force exponentials

TEST(Correlation, ToyMatchesMatrixExponentials) {
  const Toy t = toy();
  const Liouvillian L(t.h, t.collapse);
  const TimeGrid tg(GridParams{40.0, 10.0, 0.1, 0.5});
  const Trajectory tr = propagate(L, DensityMatrix(t.rho0), tg);
  const TwoTimeGrid grid(tg);
  const CorrelationEngine e(L, tr, grid);
  const Operator a = ket_bra(3, 0, 1), b = ket_bra(3, 1, 2);
  const Operator I = Operator::Identity(3, 3);
  const CorrelationMap G1 = g1(e, a);
  const CorrelationMap G2 = g2(e, b, a);
  const auto S = oracle::superoperator(t.h, t.channels);
  std::mt19937_64 rng(51);
  for (int k = 0; k < 20; ++k) {
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, grid.rows() - 1)(rng);
    const std::size_t j = std::uniform_int_distribution<std::size_t>(0, grid.row_size(i) - 1)(rng);
    const double tt = tg.time(i), tau = grid.tau(i, j);
    const cplx o1 = oracle::two_time(S, t.rho0, a, I, a.adjoint(), tt, tau);
    const cplx o2 = oracle::two_time(S, t.rho0, b, b.adjoint(), a.adjoint() * a, tt, tau);
    EXPECT_LT(std::abs(G1(i, j) - o1), 1e-8) << tt << " " << tau;
    EXPECT_LT(std::abs(G2(i, j) - o2), 1e-8) << tt << " " << tau;
  }
}

TEST(Correlation, RowIntegralsMatchEvaluatedMap) {
  const Toy t = toy();
  const Liouvillian L(t.h, t.collapse);
  const TimeGrid tg(GridParams{40.0, 10.0, 0.1, 0.5});
  const Trajectory tr = propagate(L, DensityMatrix(t.rho0), tg);
  const TwoTimeGrid grid(tg);
  const CorrelationEngine e(L, tr, grid);
  const Correlator c = first_order(ket_bra(3, 0, 1) + ket_bra(3, 1, 2));
  const CorrelationMap m = e.evaluate(c);
  const Eigen::MatrixXcd r = e.row_integrals({c});
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    cplx sum = 0.0;
    for (std::size_t j = 0; j < grid.row_size(i); ++j) sum += grid.tau_weight(i, j) * m(i, j);
    EXPECT_LT(std::abs(sum - r(Eigen::Index(i), 0)), 1e-11);
  }
}

TEST(Correlation, DrivenRowZeroMatchesDirectPropagation) {
  const Toy t = toy();
  PulseParams p;
  p.laser_energy = 10.0;
  p.center_t0 = 8.0;
  p.width_tau = 2.0;
  p.area = 1.3;
  DriveTerm d;
  d.coupling = ket_bra(3, 0, 1);
  d.amplitude = [p](double time) { return 0.5 * kHbar * pulse_envelope(p, 0.0, time); };
  const Liouvillian L(t.h, t.collapse, {d}, 0.0, p.center_t0 + 8.0 * p.width_tau);
  const TimeGrid tg(GridParams{60.0, 30.0, 0.1, 0.5});
  const Trajectory tr = propagate(L, DensityMatrix(t.rho0), tg);
  const TwoTimeGrid grid(tg);
  const CorrelationEngine e(L, tr, grid);
  EXPECT_GT(e.pulse_rows(), 0u);
  const Operator a = ket_bra(3, 0, 1);
  const CorrelationMap G1 = g1(e, a);
  IntegratorOptions opt;
  opt.check_positivity = false;
  const Trajectory sigma = propagate(L, DensityMatrix(Operator(a * t.rho0)), tg, opt);
  for (std::size_t j = 0; j < grid.row_size(0); ++j)
    EXPECT_LT(std::abs(G1(0, j) - (a.adjoint() * sigma.rho(j)).trace()), 1e-12);
}

// <x(t+τ)> with A = R = 1 is just the trajectory, also through the drive.
TEST(CorrelationProperty, DelayedExpectationReproducesTrajectory) {
  SystemConfig c;
  c.pulse.enabled = true;
  c.pulse.area = 3.0;
  c.pulse.width_tau = 1.0;
  c.pulse.center_t0 = 5.0;
  c.initial_state = InitialState::Ground;
  c.grid = {120.0, 60.0, 0.1, 0.5};
  const Solved s(c);
  const CorrelationEngine e = s.engine();
  EXPECT_GT(e.pulse_rows(), 0u);
  const Operator x = projector(s.model.space, Level::XX, Level::XX) + number_operator(s.model.space, Mode::H);
  const CorrelationMap m = e.evaluate(delayed_expectation(x));
  const CorrelationMap one = e.evaluate(delayed_expectation(identity(s.model.space)));
  const TimeGrid& tg = s.grid.t_grid();
  for (std::size_t i = 0; i < s.grid.rows(); i += 13)
    for (std::size_t j = 0; j < s.grid.row_size(i); j += 5) {
      const long k = tg.find(tg.lattice(i) + s.grid.tau_lattice(i, j));
      if (k < 0) continue;
      EXPECT_LT(std::abs(m(i, j) - (x * s.tr.rho(std::size_t(k))).trace()), 1e-9);
      EXPECT_LT(std::abs(one(i, j) - 1.0), 1e-9);
    }
}

TEST(Correlation, FrozenPulseSkipsDrivenRows) {
  SystemConfig c;
  c.pulse.enabled = true;
  c.initial_state = InitialState::Ground;
  c.grid = {120.0, 60.0, 0.1, 0.5};
  const Solved s(c);
  EngineOptions eo;
  eo.freeze_pulse_in_tau = true;
  EXPECT_EQ(s.engine(eo).pulse_rows(), 0u);
}

TEST(Correlation, ZeroDelayEqualsPopulation) {
  const Solved s(free_qd());
  const Operator a = emission_channel(s.model.space, ChannelKind::XX, Mode::H);
  const CorrelationMap G1 = g1(s.engine(), a);
  for (std::size_t i = 0; i < s.grid.rows(); ++i) {
    const cplx n = (a.adjoint() * a * s.tr.rho(i)).trace();
    EXPECT_LT(std::abs(G1(i, 0) - n), 1e-10);
    EXPECT_GE(G1(i, 0).real(), -1e-10);
  }
}

TEST(CorrelationProperty, ConjugateConstruction) {
  const Solved s(free_qd(300.0));
  const Operator a = emission_channel(s.model.space, ChannelKind::X, Mode::H);
  const CorrelationEngine e = s.engine();
  const CorrelationMap G1 = g1(e, a);
  const Correlator flipped{identity(s.model.space), a.adjoint(), a, "G1*"};
  const CorrelationMap G1c = e.evaluate(flipped);
  for (std::size_t k = 0; k < G1.values.size(); ++k) EXPECT_LT(std::abs(G1.values[k] - std::conj(G1c.values[k])), 1e-10);
}

// Free two-level emitter: |G1(t,τ)| = e^{-γ(t + τ/2)}.
TEST(Correlation, TwoLevelFirstOrderClosedForm) {
  SystemConfig c = free_qd();
  c.initial_state = InitialState::ExcitonH;
  const Solved s(c);
  const Operator a = emission_channel(s.model.space, ChannelKind::X, Mode::H);
  const CorrelationMap G1 = g1(s.engine(), a);
  const double gamma = rate_of(2.5);
  for (std::size_t i = 0; i < s.grid.rows(); i += 17)
    for (std::size_t j = 0; j < s.grid.row_size(i); j += 11) {
      const double expected = std::exp(-gamma * (s.grid.t_grid().time(i) + 0.5 * s.grid.tau(i, j)));
      EXPECT_NEAR(std::abs(G1(i, j)), expected, 1e-6);
    }
  const CorrelationMap G2 = g2(s.engine(), a, a);
  EXPECT_LT(std::abs(double_integral(G2)), 1e-12);
}

TEST(Correlation, VacuumGivesNothing) {
  SystemConfig c = free_qd(200.0);
  c.initial_state = InitialState::Ground;
  const Solved s(c);
  const CorrelationMap G1 = g1(s.engine(), emission_channel(s.model.space, ChannelKind::X, Mode::H));
  for (const cplx& v : G1.values) EXPECT_EQ(v, cplx(0.0));
}

// After an XX photon at t = 0 the exciton decays: G2(0,τ) = e^{-γτ}.
TEST(Correlation, CascadeConditionalDecay) {
  const Solved s(free_qd());
  const Operator axx = emission_channel(s.model.space, ChannelKind::XX, Mode::H);
  const Operator ax = emission_channel(s.model.space, ChannelKind::X, Mode::H);
  const CorrelationMap G2 = g2(s.engine(), axx, ax);
  const double gamma = rate_of(2.5);
  for (std::size_t j = 0; j < s.grid.row_size(0); ++j) {
    EXPECT_NEAR(G2(0, j).real(), std::exp(-gamma * s.grid.tau(0, j)), 1e-9);
    EXPECT_GE(G2(0, j).real(), -1e-8);
  }
}

TEST(Correlation, SinglePhotonAntibunching) {
  SystemConfig c;
  c.cavity.hbar_g = 0.0;
  c.grid = {50.0, 20.0, 0.1, 0.5};
  const CascadeModel m{validate(c)};
  const Trajectory tr = propagate(m.liouvillian, DensityMatrix::basis(m.space, Level::G, 1, 0), m.grid);
  const TwoTimeGrid grid(m.grid);
  const CorrelationEngine e(m.liouvillian, tr, grid);
  const Operator b = annihilator(m.space, Mode::H);
  const CorrelationMap G2 = g2(e, b, b);
  for (std::size_t i = 0; i < grid.rows(); ++i) EXPECT_LT(std::abs(G2(i, 0)), 1e-14);
}

TEST(Correlation, GridMismatchRejected) {
  const Solved s(free_qd(200.0));
  const TwoTimeGrid other(GridParams{200.0, 100.0, 0.1, 0.5});
  EXPECT_THROW(CorrelationEngine(s.model.liouvillian, s.tr, other), GridMismatch);
}

TEST(Correlation, Deterministic) {
  SystemConfig c;
  c.grid = {200.0, 100.0, 0.1, 0.5};
  const Solved s(c);
  const Operator a = emission_channel(s.model.space, ChannelKind::XX, Mode::V);
  EXPECT_EQ(g1(s.engine(), a).values, g1(s.engine(), a).values);
}

// binary dump

TEST(CorrelationDump, RoundTrip) {
  const TwoTimeGrid g(GridParams{30.0, 10.0, 0.1, 0.5});
  CorrelationMap m{g, std::vector<cplx>(g.total_points())};
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n;
  for (auto& v : m.values) v = cplx(n(rng), n(rng));
  const auto path = std::filesystem::temp_directory_path() / "qdc_dump_roundtrip.qdcm";
  write_correlation_map(path.string(), m);
  const CorrelationMap back = read_correlation_map(path.string());
  EXPECT_EQ(back.grid, m.grid);
  EXPECT_EQ(back.values, m.values);
  EXPECT_EQ(std::filesystem::file_size(path), 8 + 4 + 4 + 8 + 8 + 16 * g.rows() + 16 * g.total_points());
  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(read_correlation_map(path.string()), IoError);
  std::filesystem::remove(path);
}
