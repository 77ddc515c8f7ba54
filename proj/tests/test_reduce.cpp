#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "qref/canon.hpp"
#include "qref/errors.hpp"
#include "qref/reduce.hpp"

using namespace qref;

namespace {

constexpr double pi = std::numbers::pi;

// Two-coordinate wavefunction sampled on a rectangular grid; returns the
// purity of the reduced state of the second coordinate, tr(rho^2)/tr(rho)^2,
// with rho = Psi^T conj(Psi) (trapezoid weights are uniform and cancel).
template <class F>
double grid_purity(F psi, double x_lo, double x_hi, std::size_t nx, double y_lo,
                   double y_hi, std::size_t ny) {
  Eigen::MatrixXcd m(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(ny));
  const auto xs = oracle::linspace(x_lo, x_hi, nx);
  const auto ys = oracle::linspace(y_lo, y_hi, ny);
  for (std::size_t i = 0; i < nx; ++i)
    for (std::size_t j = 0; j < ny; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = psi(xs[i], ys[j]);
  const Eigen::MatrixXcd rho = m.transpose() * m.conjugate();
  return (rho * rho).trace().real() / std::norm(rho.trace());
}

SuperposedState two_branch_relative(double cm_left, double cm_right, double L, double w) {
  return SuperposedState(MassConfig({1.0, 1.0}),
                         {{1.0, {GaussianPacket(cm_left, w), GaussianPacket(-L, w)}},
                          {1.0, {GaussianPacket(cm_right, w), GaussianPacket(L, w)}}},
                         CoordinateSystem::cm_relative);
}

}  // namespace

TEST_SUITE("reduce") {
  TEST_CASE("partial_trace of decoupled and entangled centre of mass") {
    const double L = 1.0, w = 1e-4;
    const auto pure = partial_trace(two_branch_relative(0.0, 0.0, L, w), {1});
    CHECK(std::abs(pure.trace() - 1.0) < 1e-12);
    CHECK(purity(pure) == doctest::Approx(1.0).epsilon(1e-12));

    const auto mixed = partial_trace(two_branch_relative(-L, L, L, w), {1});
    CHECK(std::abs(mixed.trace() - 1.0) < 1e-12);
    CHECK(purity(mixed) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(coherence(mixed, -L, L)) < 1e-12);
    CHECK(std::abs(coherence(pure, -L, L) - 0.5) < 1e-12);

    const auto s = two_branch_relative(0, 0, L, w);
    CHECK_THROWS_AS(partial_trace(s, {}), ContractError);
    CHECK_THROWS_AS(partial_trace(s, {0, 1}), ContractError);
    const MassConfig m3({1, 1, 1});
    std::vector<GaussianPacket> ps(3, GaussianPacket(0, 1.0));
    CHECK_THROWS_AS(partial_trace(SuperposedState(m3, {{1.0, ps}}), {1, 2}),
                    UnsupportedCaseError);
  }

  TEST_CASE("intermediate mass ratio against a two-coordinate grid oracle") {
    // Product-condition widths m_i d_i = m_p d_p make the product transform exact.
    const double mi = 1.0, mp = 0.1, L = 1.0, M = mi + mp;
    const double dc2 = 0.05 * 0.05;
    const double di = dc2 * M / mi;
    const double dp = mi * di / mp;
    REQUIRE(di * dp / (di + dp) == doctest::Approx(dc2));
    const MassConfig masses({mi, mp});
    SuperposedState lab(masses, {{1.0, {GaussianPacket(0, di), GaussianPacket(-L, dp)}},
                                 {1.0, {GaussianPacket(0, di), GaussianPacket(L, dp)}}});
    const auto rel = transform_state(lab, cm_relative_map(masses)).state;
    const double value = purity(partial_trace(rel, {1}));

    const double D = 2.0 * mp * L / M;
    const double s = std::exp(-D * D / (4.0 * dc2));
    CHECK(value == doctest::Approx((1.0 + s * s) / 2.0).epsilon(1e-9));

    const oracle::RawPacket pi_packet{0.0, di, 0.0, 0.0};
    const oracle::RawPacket left{-L, dp, 0.0, 0.0}, right{L, dp, 0.0, 0.0};
    const auto psi = [&](double X, double r) {
      const double xi = X - mp / M * r, xp = X + mi / M * r;
      return pi_packet(xi) * (left(xp) + right(xp));
    };
    const double grid = grid_purity(psi, -0.5, 0.5, 400, -2.5, 2.5, 500);
    CHECK(std::abs(value - grid) < 1e-6);
  }

  TEST_CASE("exact kernel trace against the grid oracle") {
    // Unbalanced widths: the relative coordinate is entangled with the cm.
    for (int trial = 0; trial < 5; ++trial) {
      const double m1 = oracle::log_uniform(0.5, 2.0), m2 = oracle::log_uniform(0.5, 2.0);
      const double M = m1 + m2;
      const double w1 = oracle::log_uniform(0.05, 0.3), w2 = oracle::log_uniform(0.05, 0.3);
      const double k = oracle::uniform(-2, 2), theta = oracle::uniform(0, 2 * pi);
      const complex w2t(w2, oracle::uniform(-0.2, 0.2));
      const MassConfig masses({m1, m2});
      SuperposedState lab(
          masses, {{1.0, {GaussianPacket(0.1, w1), GaussianPacket(-1.0, w2t, k)}},
                   {std::polar(1.0, theta), {GaussianPacket(-0.1, w1), GaussianPacket(1.0, w2t, -k)}}});
      const auto t = transform_state(lab, cm_relative_map(masses), TransformMode::exact);
      const auto rho = partial_trace(t.exact_branches, 1);
      CHECK(std::abs(rho.trace() - 1.0) < 1e-10);

      const oracle::RawPacket a1{0.1, w1, 0, 0}, b1{-1.0, w2t, k, 0};
      const oracle::RawPacket a2{-0.1, w1, 0, 0}, b2{1.0, w2t, -k, 0};
      const auto psi = [&](double X, double r) {
        const double x1 = X - m2 / M * r, x2 = X + m1 / M * r;
        return a1(x1) * b1(x2) + std::polar(1.0, theta) * a2(x1) * b2(x2);
      };
      const double grid = grid_purity(psi, -3.0, 3.0, 500, -5.0, 5.0, 600);
      CHECK(std::abs(purity(rho) - grid) < 1e-6);

      // Diagonal against the marginal density by quadrature over the cm.
      double norm = 0.0;
      for (const double r : oracle::linspace(-3.0, 3.0, 7)) {
        const complex marginal = oracle::integrate(
            [&](double X) { return complex(std::norm(psi(X, r)), 0.0); }, -6.0, 6.0);
        if (r == -3.0) {
          norm = oracle::integrate(
                     [&](double rr) {
                       return oracle::integrate(
                           [&](double X) { return complex(std::norm(psi(X, rr)), 0.0); },
                           -6.0, 6.0, 1e-10);
                     },
                     -8.0, 8.0, 1e-10)
                     .real();
        }
        CHECK(std::abs(rho.density(r) - marginal.real() / norm) < 1e-8);
      }
      // Hermiticity of the kernel.
      for (int p = 0; p < 10; ++p) {
        const double x = oracle::uniform(-2, 2), y = oracle::uniform(-2, 2);
        CHECK(std::abs(rho(x, y) - std::conj(rho(y, x))) < 1e-10);
      }
    }
  }

  TEST_CASE("kernel form of a mixture agrees with the mixture") {
    const double L = 2.0;
    SuperposedState s(MassConfig({1.0, 3.0}),
                      {{1.0, {GaussianPacket(0.2, 0.3), GaussianPacket(-L, complex(0.2, 0.1), 1.5)}},
                       {complex(0.3, 0.8), {GaussianPacket(-0.1, 0.3), GaussianPacket(L, 0.25, -0.5, 0.4)}}},
                      CoordinateSystem::cm_relative);
    const auto rho = partial_trace(s, {1});
    const auto kernel = GaussianKernelOperator::from_mixture(rho);
    CHECK(std::abs(kernel.trace() - rho.trace()) < 1e-13);
    CHECK(purity(kernel) == doctest::Approx(purity(rho)).epsilon(1e-12));
    CHECK(std::abs(coherence(kernel, -L, L) - coherence(rho, -L, L)) < 1e-13);
    for (int p = 0; p < 20; ++p) {
      const double x = oracle::uniform(-4, 4), y = oracle::uniform(-4, 4);
      CHECK(std::abs(kernel(x, y) - rho(x, y)) < 1e-13);
    }
  }

  TEST_CASE("purity trivial examples") {
    const GaussianPacket g(0.0, 0.5);
    CHECK(purity(GaussianMixtureOperator({{1.0, g, g}})) == doctest::Approx(1.0));
    const GaussianPacket h(30.0, 0.5);
    CHECK(purity(GaussianMixtureOperator({{0.5, g, g}, {0.5, h, h}})) ==
          doctest::Approx(0.5));
  }

  TEST_CASE("partial trace invariants on random states") {
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<Branch> branches;
      for (int b = 0; b < 3; ++b) {
        branches.push_back({complex(oracle::uniform(-1, 1), oracle::uniform(-1, 1)),
                            {GaussianPacket(oracle::uniform(-2, 2),
                                            complex(oracle::log_uniform(0.1, 2), oracle::uniform(-1, 1)),
                                            oracle::uniform(-2, 2), oracle::uniform(0, 6)),
                             GaussianPacket(oracle::uniform(-2, 2), oracle::log_uniform(0.1, 2),
                                            oracle::uniform(-2, 2))}});
      }
      const SuperposedState s(MassConfig({1.0, 2.0}), branches, CoordinateSystem::cm_relative);
      const auto rho = partial_trace(s, {0});
      CHECK(std::abs(rho.trace() - 1.0) < 1e-10);
      const double p = purity(rho);
      CHECK(p <= 1.0 + 1e-9);
      CHECK(p >= 1.0 / 3.0 - 1e-9);
      for (int q = 0; q < 5; ++q) {
        const double x = oracle::uniform(-3, 3), y = oracle::uniform(-3, 3);
        CHECK(std::abs(rho(x, y) - std::conj(rho(y, x))) < 1e-10);
      }
      // Positive semidefinite on a discretization.
      const auto xs = oracle::linspace(-6, 6, 120);
      Eigen::MatrixXcd mat(120, 120);
      for (int i = 0; i < 120; ++i)
        for (int j = 0; j < 120; ++j) mat(i, j) = rho(xs[i], xs[j]) * (xs[1] - xs[0]);
      const Eigen::MatrixXcd herm = 0.5 * (mat + mat.adjoint());
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd>(herm).eigenvalues().minCoeff() >
            -1e-9);
    }
  }

  TEST_CASE("Galilean invariance of the traced operator") {
    const MassConfig m({3.0, 1.0});
    SuperposedState lab(m, {{1.0, {GaussianPacket(0, 0.01), GaussianPacket(-1, 0.02)}},
                            {complex(0, 1), {GaussianPacket(0.3, 0.01), GaussianPacket(1, 0.02)}}});
    const auto base = partial_trace(transform_state(lab, cm_relative_map(m)).state, {1});
    for (int trial = 0; trial < 10; ++trial) {
      const double d = oracle::uniform(-5, 5), v = oracle::uniform(-2, 2);
      const auto moved =
          apply_weyl(lab, WeylShift{{d, d}, {v * m[0], v * m[1]}, oracle::uniform(0, 6)});
      const auto rho = partial_trace(transform_state(moved, cm_relative_map(m)).state, {1});
      for (int q = 0; q < 5; ++q) {
        const double x = oracle::uniform(-1.5, 1.5), y = oracle::uniform(-1.5, 1.5);
        CHECK(std::abs(rho(x, y) - base(x, y)) < 1e-9);
      }
      CHECK(purity(rho) == doctest::Approx(purity(base)).epsilon(1e-9));
    }
  }

  TEST_CASE("expectation_weyl") {
    const double m1 = 1.0, m2 = 2.0, L = 1.0;
    const double a = m2 * L / (m1 + m2), b = m1 * L / (m1 + m2);
    const double w = std::pow(L / 100, 2);
    const MassConfig m({m1, m2});
    const auto state = [&](double theta) {
      return SuperposedState(m, {{1.0, {GaussianPacket(-a, w), GaussianPacket(b, w)}},
                                 {std::polar(1.0, theta), {GaussianPacket(a, w), GaussianPacket(-b, w)}}});
    };
    const auto pr = relative_momentum_forms(m)[1];
    CHECK(std::abs(expectation_weyl(state(0), pr, 2 * L) - 0.5) < 1e-10);
    CHECK(std::abs(expectation_weyl(state(pi / 2), pr, 2 * L) - complex(0, 0.5)) < 1e-10);
    CHECK(std::abs(expectation_weyl(state(1.3), pr, 0.0) - 1.0) < 1e-14);

    // Lab route and relative route agree.
    for (int trial = 0; trial < 20; ++trial) {
      const double th = oracle::uniform(0, 2 * pi);
      const auto rel = transform_state(state(th), conjugate_momenta(cm_relative_map(m)));
      const auto form = transform_form(pr, conjugate_momenta(cm_relative_map(m)));
      CHECK(std::abs(expectation_weyl(state(th), pr, 2 * L) -
                     expectation_weyl(rel.state, form, 2 * L)) < 1e-10);
    }

    // Unitarity bound on random inputs.
    for (int trial = 0; trial < 50; ++trial) {
      SuperposedState s(m, {{complex(oracle::uniform(-1, 1), oracle::uniform(-1, 1)),
                             {GaussianPacket(oracle::uniform(-1, 1), complex(oracle::log_uniform(0.1, 1), oracle::uniform(-1, 1))),
                              GaussianPacket(oracle::uniform(-1, 1), 0.3, oracle::uniform(-3, 3))}},
                            {complex(oracle::uniform(-1, 1), oracle::uniform(-1, 1)),
                             {GaussianPacket(oracle::uniform(-1, 1), 0.2),
                              GaussianPacket(oracle::uniform(-1, 1), 0.5)}}});
      const auto f = trial % 2 ? LinearPhaseSpaceForm::position({oracle::uniform(-1, 1), oracle::uniform(-1, 1)})
                               : LinearPhaseSpaceForm::momentum({oracle::uniform(-1, 1), oracle::uniform(-1, 1)});
      CHECK(std::abs(expectation_weyl(s, f, oracle::uniform(-3, 3))) <= 1.0 + 1e-12);
    }
    LinearPhaseSpaceForm mixed{{1.0, 0.0}, {0.0, 1.0}, ""};
    CHECK_THROWS_AS(expectation_weyl(state(0), mixed, 1.0), UnsupportedCaseError);
  }

  TEST_CASE("fringe profiles and visibility") {
    const double p = 10.0, sigma = 1.0;
    const auto plus = GaussianPacket::from_sigma(0.0, sigma, p);
    const auto minus = GaussianPacket::from_sigma(0.0, sigma, -p);
    const GaussianMixtureOperator pure({{0.5, plus, plus}, {0.5, minus, minus},
                                        {0.5, plus, minus}, {0.5, minus, plus}});
    CHECK(shortest_fringe_period(pure) == doctest::Approx(pi / p));
    const auto profile = fringe_profile(pure, default_grid(pure));
    CHECK(visibility(profile) > 0.999);

    // Intensity agrees with the analytic |psi|^2 and integrates to the trace.
    const oracle::RawPacket rp{0.0, 2 * sigma * sigma, p, 0}, rm{0.0, 2 * sigma * sigma, -p, 0};
    double integral = 0.0;
    for (std::size_t i = 0; i < profile.samples.size(); ++i) {
      const auto& s = profile.samples[i];
      CHECK(std::abs(s.intensity - 0.5 * std::norm(rp(s.position) + rm(s.position))) < 1e-12);
      if (i > 0) integral += 0.5 * (s.intensity + profile.samples[i - 1].intensity) *
                             (s.position - profile.samples[i - 1].position);
    }
    CHECK(integral == doctest::Approx(pure.trace().real()).epsilon(1e-6));

    const GaussianMixtureOperator mixed({{0.5, plus, plus}, {0.5, minus, minus}});
    CHECK(visibility(fringe_profile(mixed, default_grid(mixed))) == 0.0);
    const GaussianMixtureOperator single({{1.0, plus, plus}});
    CHECK(visibility(fringe_profile(single, default_grid(single))) == 0.0);

    // Synthetic cosine fringes on a flat envelope.
    FringeProfile cosine{{}, {}};
    for (const double x : oracle::linspace(-10, 10, 4001)) {
      cosine.samples.push_back({x, 1.0 + std::cos(3.0 * x)});
    }
    CHECK(visibility(cosine) == doctest::Approx(1.0).epsilon(1e-4));
    FringeProfile flat{{}, {}};
    for (const double x : oracle::linspace(-10, 10, 101)) flat.samples.push_back({x, 2.0});
    CHECK(visibility(flat) == 0.0);
    CHECK_THROWS_AS(visibility(FringeProfile{}), ContractError);

    // Resolution checks.
    CHECK_THROWS_AS(fringe_profile(pure, default_grid(pure, 64)), ResolutionError);
    CHECK_THROWS_AS(fringe_profile(pure, GridSpec{0.0, 3.0, 4096}), ResolutionError);
  }

  TEST_CASE("detector probabilities") {
    const double L = 1.0, w = std::pow(L / 50, 2);
    const auto pure = partial_trace(two_branch_relative(0, 0, L, w), {1});
    auto d = detector_probabilities(pure, -L, L);
    CHECK(d.p_left == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.p_right == doctest::Approx(0.0).epsilon(1e-12));
    d = detector_probabilities(pure, -L, L, pi);
    CHECK(d.p_left == doctest::Approx(0.0).epsilon(1e-12));

    const auto mixed = partial_trace(two_branch_relative(-L, L, L, w), {1});
    d = detector_probabilities(mixed, -L, L);
    CHECK(d.p_left == doctest::Approx(0.5).epsilon(1e-12));

    for (const auto* rho : {&pure, &mixed}) {
      d = detector_probabilities(*rho, -L, L, 0.0, DetectorPlacement::mirrors);
      CHECK(d.p_left == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(d.p_right == doctest::Approx(0.5).epsilon(1e-12));
    }
    const auto wide = partial_trace(two_branch_relative(0, 0, L, 0.5), {1});
    CHECK_THROWS_AS(detector_probabilities(wide, -L, L), ContractError);
  }
}
