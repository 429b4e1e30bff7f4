#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "qdcascade/config.hpp"
#include "qdcascade/config_io.hpp"
#include "qdcascade/density_matrix.hpp"
#include "qdcascade/hilbert_space.hpp"
#include "qdcascade/purcell.hpp"
#include "qdcascade/units.hpp"

using namespace qdc;

namespace {

SystemConfig random_config(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SystemConfig c;
  c.electronic.E_X = 7e5 + 2e5 * u(rng);
  c.electronic.E_FSP = 10.0 * u(rng);
  c.electronic.E_Bind = -2000.0 + 8000.0 * u(rng);
  c.electronic.hbar_gamma_rad = 0.5 + 10.0 * u(rng);
  c.cavity.hbar_g = 500.0 * u(rng);
  c.cavity.hbar_kappa = 100.0 + 5000.0 * u(rng);
  return c;
}

std::string hash_after(const std::function<void(SystemConfig&)>& edit) {
  SystemConfig c;
  edit(c);
  return config_hash(c);
}

}  // namespace

// units

TEST(Units, RadiativeLifetime) {
  EXPECT_NEAR(lifetime_of(2.5), 263.28, 0.01);
  EXPECT_NEAR(1.0 / rate_of(2.5), 263.28, 0.01);
  EXPECT_EQ(rate_of(0.0), 0.0);
  EXPECT_NEAR(rate_of(3000.0), 3000.0 / 658.212, 1e-6);
  EXPECT_NEAR(energy_of(rate_of(123.4)), 123.4, 1e-12);
}

// config

TEST(Config, DerivedEnergies) {
  SystemConfig c;
  c.electronic.E_X = 0.8e6;
  c.electronic.E_Bind = 5000.0;
  const ValidatedConfig vc = validate(c);
  EXPECT_DOUBLE_EQ(vc.E_XX, 1.595e6);
  EXPECT_DOUBLE_EQ(vc.E_cavity, 795000.0);
  EXPECT_DOUBLE_EQ(vc.frame_reference, vc.E_cavity);
  EXPECT_DOUBLE_EQ(vc.laser_energy, 0.5 * vc.E_XX);
}

TEST(Config, QualityFactor) {
  SystemConfig c;
  c.cavity.E_cavity = 0.8e6;
  c.cavity.hbar_kappa = 3000.0;
  EXPECT_NEAR(validate(c).Q, 266.667, 1e-3);
  c.cavity.E_cavity.reset();
  EXPECT_NEAR(validate(c).Q, 265.0, 1e-9);
}

TEST(Config, NegativeKappaRejected) {
  SystemConfig c;
  c.cavity.hbar_kappa = -1.0;
  try {
    validate(c);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has_path("cavity.hbar_kappa"));
  }
}

TEST(Config, CollectsEveryViolation) {
  SystemConfig c;
  c.cavity.n_max = 0;
  c.electronic.hbar_gamma_rad = 0.0;
  c.grid.dt_coarse = 0.33;
  try {
    validate(c);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has_path("cavity.n_max"));
    EXPECT_TRUE(e.has_path("electronic.hbar_gamma_rad"));
    EXPECT_TRUE(e.has_path("grid.dt_coarse"));
    EXPECT_TRUE(e.has_path("grid.t_end"));
    EXPECT_EQ(e.fields().size(), 4u);
  }
}

TEST(Config, GridMustSitOnLattice) {
  SystemConfig c;
  c.grid.t_end = 1500.25;
  EXPECT_THROW(validate(c), ValidationError);
  c.grid = GridParams{};
  c.grid.fine_window = 2000.0;
  EXPECT_THROW(validate(c), ValidationError);
}

TEST(ConfigProperty, DerivedIdentitiesHold) {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 200; ++k) {
    const SystemConfig c = random_config(rng);
    const ValidatedConfig vc = validate(c);
    const auto& el = c.electronic;
    EXPECT_NEAR(vc.E_XX + el.E_Bind, 2.0 * el.E_X, 1e-12 * 2.0 * el.E_X);
    EXPECT_NEAR(vc.E_XH - vc.E_XV, el.E_FSP, 1e-12 * vc.E_XH);
  }
}

TEST(ConfigProperty, ValidateIsIdempotent) {
  std::mt19937_64 rng(12);
  for (int k = 0; k < 50; ++k) {
    const ValidatedConfig once = validate(random_config(rng));
    EXPECT_EQ(validate(once.config), once);
  }
}

TEST(ConfigRates, BiexcitonChannelsFollowRatio) {
  SystemConfig c;
  c.electronic.xx_rate_ratio = 5.0;
  const ValidatedConfig vc = validate(c);
  EXPECT_DOUBLE_EQ(exciton_rate(vc), 2.5 / kHbar);
  EXPECT_DOUBLE_EQ(biexciton_channel_rate(vc), 2.5 * 2.5 / kHbar);
}

// config_io

TEST(ConfigJson, UnknownKeyRejectedWithPath) {
  const json j = json::parse(R"({"cavity": {"hbar_g": 200, "hbar_gg": 1}, "extra": 3})");
  try {
    config_from_json(j);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has_path("cavity.hbar_gg"));
    EXPECT_TRUE(e.has_path("extra"));
  }
}

TEST(ConfigJson, TypeErrorsReported) {
  const json j = json::parse(R"({"cavity": {"n_max": 1.5, "enabled": "yes"}, "initial_state": "excited"})");
  try {
    config_from_json(j);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_TRUE(e.has_path("cavity.n_max"));
    EXPECT_TRUE(e.has_path("cavity.enabled"));
    EXPECT_TRUE(e.has_path("initial_state"));
  }
}

TEST(ConfigJson, RoundTrip) {
  std::mt19937_64 rng(13);
  for (int k = 0; k < 20; ++k) {
    SystemConfig c = random_config(rng);
    c.initial_state = k % 2 ? InitialState::ExcitonH : InitialState::Biexciton;
    c.pulse.laser_energy = 797000.0 + k;
    c.options.concurrence_order = ConcurrenceOrder::Reversed;
    const SystemConfig back = config_from_json(json::parse(to_json(c).dump()));
    EXPECT_EQ(back, c);
    EXPECT_EQ(config_hash(back), config_hash(c));
  }
}

TEST(ConfigJson, PartialDocumentKeepsDefaults) {
  const SystemConfig c = config_from_json(json::parse(R"({"cavity": {"hbar_kappa": 6000}})"));
  SystemConfig expected;
  expected.cavity.hbar_kappa = 6000.0;
  EXPECT_EQ(c, expected);
}

TEST(ConfigJson, HashSeparatesConfigs) {
  const std::string base = config_hash(SystemConfig{});
  EXPECT_EQ(base.size(), 16u);
  EXPECT_NE(base, hash_after([](SystemConfig& c) { c.cavity.hbar_g = 201.0; }));
  EXPECT_NE(base, hash_after([](SystemConfig& c) { c.options.freeze_pulse_in_tau = true; }));
  EXPECT_EQ(base, hash_after([](SystemConfig&) {}));
}

// operator algebra

TEST(HilbertSpace, Dimensions) {
  EXPECT_EQ(HilbertSpace(1).dim(), 16);
  EXPECT_EQ(HilbertSpace(2).dim(), 36);
}

TEST(HilbertSpace, IndexIsBijectionInDocumentedOrder) {
  for (int n = 1; n <= 3; ++n) {
    const HilbertSpace s(n);
    std::vector<int> hits(s.dim(), 0);
    int expected = 0;
    for (Level l : {Level::G, Level::XH, Level::XV, Level::XX})
      for (int h = 0; h <= n; ++h)
        for (int v = 0; v <= n; ++v) {
          const int i = s.index(l, h, v);
          EXPECT_EQ(i, expected++);
          ++hits[i];
          EXPECT_EQ(s.level_of(i), l);
          EXPECT_EQ(s.n_h_of(i), h);
          EXPECT_EQ(s.n_v_of(i), v);
        }
    for (int x : hits) EXPECT_EQ(x, 1);
  }
}

TEST(Operators, ProjectorStructure) {
  const HilbertSpace s(2);
  const Operator p = projector(s, Level::G, Level::XH);
  EXPECT_EQ((p.array() != cplx(0.0)).count(), 9);
  EXPECT_EQ(p.trace(), cplx(0.0));
  const Eigen::VectorXcd g = basis_vector(s, Level::G, 0, 0);
  EXPECT_TRUE((projector(s, Level::G, Level::G) * g).isApprox(g));
  EXPECT_TRUE((projector(s, Level::XH, Level::XX) * projector(s, Level::XX, Level::XH))
                  .isApprox(projector(s, Level::XH, Level::XH)));
}

TEST(Operators, NumberOperatorSpectrum) {
  const HilbertSpace s(3);
  for (Mode m : {Mode::H, Mode::V}) {
    const Operator n = number_operator(s, m);
    EXPECT_TRUE(n.isApprox(Operator(n.diagonal().asDiagonal())));
    for (int k = 0; k < s.dim(); ++k) {
      const double v = n(k, k).real();
      EXPECT_EQ(v, std::round(v));
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 3.0);
    }
    const Operator b = annihilator(s, m);
    EXPECT_LT((b.adjoint() * b - n).norm(), 1e-14);
  }
}

TEST(Operators, AnnihilatorActions) {
  const HilbertSpace s(1);
  const Operator bh = annihilator(s, Mode::H), bv = annihilator(s, Mode::V);
  EXPECT_TRUE((bh * basis_vector(s, Level::G, 1, 0)).isApprox(basis_vector(s, Level::G, 0, 0)));
  EXPECT_EQ((bh * bv - bv * bh).norm(), 0.0);
}

TEST(Operators, TruncatedCommutator) {
  for (int n = 1; n <= 3; ++n) {
    const HilbertSpace s(n);
    for (Mode m : {Mode::H, Mode::V}) {
      const Operator b = annihilator(s, m);
      const Operator c = b * b.adjoint() - b.adjoint() * b;
      for (int k = 0; k < s.dim(); ++k) {
        if (s.photons_of(k, m) == n) continue;
        const Eigen::VectorXcd e = Eigen::VectorXcd::Unit(s.dim(), k);
        EXPECT_LT((c * e - e).norm(), 1e-14) << s.label(k);
      }
    }
  }
}

TEST(Operators, EmissionChannels) {
  const HilbertSpace s(1);
  const Operator axx = emission_channel(s, ChannelKind::XX, Mode::H);
  const Operator ax = emission_channel(s, ChannelKind::X, Mode::H);
  EXPECT_TRUE((axx * basis_vector(s, Level::XX, 0, 0)).isApprox(basis_vector(s, Level::XH, 0, 0)));
  EXPECT_TRUE((axx * basis_vector(s, Level::G, 1, 0)).isApprox(basis_vector(s, Level::G, 0, 0)));
  EXPECT_EQ((ax * basis_vector(s, Level::XX, 0, 0)).norm(), 0.0);
  EXPECT_TRUE((ax * basis_vector(s, Level::XH, 0, 0)).isApprox(basis_vector(s, Level::G, 0, 0)));
  const Operator ax_cav = emission_channel(s, ChannelKind::X, Mode::H, true);
  EXPECT_TRUE((ax_cav * basis_vector(s, Level::G, 1, 0)).isApprox(basis_vector(s, Level::G, 0, 0)));
}

// Products of operators against a direct action on basis labels.
TEST(OperatorProperty, ProductsMatchIndexRules) {
  const HilbertSpace s(2);
  const Operator bh = annihilator(s, Mode::H);
  const Operator p = projector(s, Level::XV, Level::XX);
  const Operator prod = p * bh.adjoint() * bh.adjoint();
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> pick(0, s.dim() - 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = pick(rng);
    Eigen::VectorXcd expected = Eigen::VectorXcd::Zero(s.dim());
    const int nh = s.n_h_of(k);
    if (s.level_of(k) == Level::XX && nh + 2 <= s.n_max())
      expected(s.index(Level::XV, nh + 2, s.n_v_of(k))) = std::sqrt((nh + 1.0) * (nh + 2.0));
    EXPECT_LT((prod * Eigen::VectorXcd::Unit(s.dim(), k) - expected).norm(), 1e-12) << s.label(k);
  }
}

TEST(DensityMatrix, Checks) {
  const HilbertSpace s(1);
  const DensityMatrix g = DensityMatrix::basis(s, Level::G);
  EXPECT_TRUE(g.is_valid());
  EXPECT_DOUBLE_EQ(g.purity(), 1.0);
  EXPECT_DOUBLE_EQ(population(s, g.matrix(), Level::G), 1.0);
  Operator bad = g.matrix();
  bad(0, 1) = 0.1;
  EXPECT_FALSE(DensityMatrix(bad).is_valid());
  Operator neg = Operator::Zero(s.dim(), s.dim());
  neg(0, 0) = 1.1;
  neg(1, 1) = -0.1;
  EXPECT_LT(DensityMatrix(neg).min_eigenvalue(), -0.09);
}

// purcell bridge

TEST(Purcell, ReferenceValue) {
  EXPECT_NEAR(purcell_factor(200.0, 3000.0, 2.5), 10.6667, 1e-4);
  EXPECT_EQ(purcell_factor(0.0, 3000.0, 2.5), 0.0);
  EXPECT_NEAR(purcell_factor(200.0, 3000.0, 2.5, 3000.0), 0.5 * purcell_factor(200.0, 3000.0, 2.5), 1e-12);
}

TEST(Purcell, CouplingFromPurcell) {
  EXPECT_NEAR(coupling_from_purcell(32.0 / 3.0, 0.8e6, 0.8e6 / 3000.0, 2.5), 200.0, 1e-9);
  EXPECT_EQ(coupling_from_purcell(0.0, 0.8e6, 266.7, 2.5), 0.0);
}

TEST(PurcellProperty, RoundTrips) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double g = 10.0 + 990.0 * u(rng), kappa = 50.0 + 20000.0 * u(rng), gamma = 0.5 + 20.0 * u(rng);
    const double ec = 7e5 + 2e5 * u(rng);
    const double fp = purcell_factor(g, kappa, gamma);
    EXPECT_NEAR(coupling_from_purcell(fp, ec, ec / kappa, gamma), g, 1e-12 * g);
    EXPECT_NEAR(kappa_for_purcell(fp, g, gamma), kappa, 1e-12 * kappa);
    EXPECT_NEAR(coupling_for_purcell(fp, kappa, gamma), g, 1e-12 * g);
    const PurcellPoint p = purcell_point(g, kappa, gamma, ec, 100.0 * u(rng));
    EXPECT_NEAR(purcell_factor(p.hbar_g, p.hbar_kappa, gamma, p.Delta_E), p.F_P, 1e-10 * p.F_P);
    EXPECT_NEAR(p.Q * p.hbar_kappa, p.E_c, 1e-9 * p.E_c);
  }
}

TEST(PurcellProperty, Monotonicity) {
  for (double d = 0.0; d < 5000.0; d += 250.0)
    EXPECT_GT(purcell_factor(200, 3000, 2.5, d), purcell_factor(200, 3000, 2.5, d + 250.0));
  for (double k = 100.0; k < 20000.0; k *= 1.5)
    EXPECT_GT(purcell_factor(200, k, 2.5), purcell_factor(200, 1.5 * k, 2.5));
  for (double g = 10.0; g < 1000.0; g += 50.0)
    EXPECT_LT(purcell_factor(g, 3000, 2.5), purcell_factor(g + 50.0, 3000, 2.5));
}

TEST(RidgeFit, ParabolaVertexIsExactForQuadratics) {
  auto y = [](double x) { return -3.0 * (x - 1.7) * (x - 1.7) + 4.0; };
  EXPECT_NEAR(parabola_vertex(0.0, y(0.0), 1.0, y(1.0), 3.0, y(3.0)), 1.7, 1e-12);
}

TEST(RidgeFit, RecoversSyntheticRidge) {
  std::vector<SurfacePoint> surface;
  for (double g = 100.0; g <= 500.0; g += 50.0)
    for (double f = 1.0; f <= 50.0; f += 1.0) {
      const double ridge = (g - 40.0) / 10.0;
      surface.push_back({f, g, 1.0 - 0.01 * (f - ridge) * (f - ridge)});
    }
  const RidgeFit fit = ridge_fit(surface);
  EXPECT_NEAR(fit.alpha, 10.0, 1e-9);
  EXPECT_NEAR(fit.beta, 40.0, 1e-7);
  EXPECT_LT(fit.residual_rms, 1e-8);
  EXPECT_EQ(fit.points.size(), 9u);
}

TEST(RidgeFit, BoundaryMaximumIsDegenerate) {
  std::vector<SurfacePoint> surface;
  for (int r = 0; r < 5; ++r)
    for (double f = 1.0; f <= 10.0; f += 1.0)
      surface.push_back({f, 100.0 + 50.0 * r, r == 2 ? f : -(f - 5.0) * (f - 5.0)});
  try {
    ridge_fit(surface);
    FAIL() << "expected DegenerateRidge";
  } catch (const DegenerateRidge& e) {
    EXPECT_EQ(e.row(), 2u);
  }
}

TEST(RidgeFit, NeedsFourRows) {
  std::vector<SurfacePoint> surface;
  for (int r = 0; r < 3; ++r)
    for (double f = 1.0; f <= 5.0; f += 1.0) surface.push_back({f, 100.0 * (r + 1), -(f - 3.0) * (f - 3.0)});
  EXPECT_THROW(ridge_fit(surface), DegenerateRidge);
}
