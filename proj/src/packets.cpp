#include "qref/packets.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "qref/errors.hpp"

namespace qref {

MassConfig::MassConfig(std::vector<double> masses) : masses_(std::move(masses)) {
  for (double m : masses_) {
    if (!(m > 0.0) || !std::isfinite(m)) {
      throw DomainError("mass must be finite and strictly positive, got " +
                        std::to_string(m));
    }
  }
}

double MassConfig::total() const {
  double sum = 0.0;
  for (double m : masses_) sum += m;
  return sum;
}

double MassConfig::reduced(std::size_t i, std::size_t j) const {
  const double mi = masses_.at(i);
  const double mj = masses_.at(j);
  return mi * mj / (mi + mj);
}

GaussianPacket::GaussianPacket(double centre, complex width, double momentum,
                               double phase)
    : centre_(centre), width_(width), momentum_(momentum), phase_(phase) {
  if (!(width.real() > 0.0) || !std::isfinite(width.imag()) ||
      !std::isfinite(width.real())) {
    throw DomainError("packet width parameter must have positive real part");
  }
  if (!std::isfinite(centre) || !std::isfinite(momentum) ||
      !std::isfinite(phase)) {
    throw DomainError("packet centre, momentum and phase must be finite");
  }
}

GaussianPacket GaussianPacket::from_sigma(double centre, double sigma,
                                          double momentum, double phase) {
  if (!(sigma > 0.0)) throw DomainError("packet sigma must be positive");
  return GaussianPacket(centre, complex(2.0 * sigma * sigma, 0.0), momentum,
                        phase);
}

double GaussianPacket::sigma() const {
  // |psi|^2 ~ exp(-Re(1/w) (x - c)^2) = exp(-(x - c)^2 / (2 sigma^2))
  return std::sqrt(0.5 / (1.0 / width_).real());
}

double GaussianPacket::norm_constant() const {
  return std::pow((1.0 / width_).real() / std::numbers::pi, 0.25);
}

complex GaussianPacket::operator()(double x) const {
  const double dx = x - centre_;
  const complex exponent =
      -dx * dx / (2.0 * width_) + complex(0.0, momentum_ * x + phase_);
  return norm_constant() * std::exp(exponent);
}

complex packet_overlap(const GaussianPacket& g1, const GaussianPacket& g2) {
  // Integrate around the midpoint of the two centres so the exponent stays
  // O(separation^2 / width) instead of O(centre^2 / width).
  const double mid = 0.5 * (g1.centre() + g2.centre());
  const double half = 0.5 * (g2.centre() - g1.centre());
  const complex u1 = 1.0 / std::conj(g1.width());
  const complex u2 = 1.0 / g2.width();
  const complex a = 0.5 * (u1 + u2);
  const double dk = g2.momentum() - g1.momentum();
  const complex b = half * (u2 - u1) + complex(0.0, dk);
  const complex exponent = b * b / (4.0 * a) - a * half * half +
                           complex(0.0, dk * mid + g2.phase() - g1.phase());
  return g1.norm_constant() * g2.norm_constant() *
         std::sqrt(std::numbers::pi / a) * std::exp(exponent);
}

GaussianPacket shifted(const GaussianPacket& g, double displacement,
                       double boost) {
  const double phase = g.phase() - g.momentum() * displacement -
                       0.5 * boost * displacement;
  return GaussianPacket(g.centre() + displacement, g.width(),
                        g.momentum() + boost, phase);
}

GaussianPacket evolved(const GaussianPacket& g, double mass, double t) {
  if (t == 0.0) return g;
  const complex w0 = g.width();
  const complex wt = w0 + complex(0.0, t / mass);
  const double k = g.momentum();
  // sqrt(w0 / wt) carries the Gouy-type phase; its modulus is absorbed by
  // the new normalization constant.
  const double phase = g.phase() - k * k * t / (2.0 * mass) +
                       0.5 * (std::arg(w0) - std::arg(wt));
  return GaussianPacket(g.centre() + k * t / mass, wt, k, phase);
}

std::string_view to_string(CoordinateSystem coords) {
  switch (coords) {
    case CoordinateSystem::lab:
      return "lab";
    case CoordinateSystem::cm_relative:
      return "cm+relative-x";
    case CoordinateSystem::cm_relative_q:
      return "cm+relative-q";
  }
  return "unknown";
}

SuperposedState::SuperposedState(MassConfig masses, std::vector<Branch> branches,
                                 CoordinateSystem coords)
    : masses_(std::move(masses)), branches_(std::move(branches)), coords_(coords) {
  if (masses_.size() == 0) throw ContractError("state needs at least one particle");
  for (const auto& b : branches_) {
    if (b.packets.size() != masses_.size()) {
      throw ContractError("branch has " + std::to_string(b.packets.size()) +
                          " packets but the mass configuration has " +
                          std::to_string(masses_.size()));
    }
  }
}

Eigen::MatrixXcd gram_matrix(const SuperposedState& state) {
  const auto& branches = state.branches();
  const auto n = static_cast<Eigen::Index>(branches.size());
  Eigen::MatrixXcd gram(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      complex g = 1.0;
      for (std::size_t p = 0; p < state.coordinate_count(); ++p) {
        g *= packet_overlap(branches[i].packets[p], branches[j].packets[p]);
      }
      gram(i, j) = g;
      gram(j, i) = std::conj(g);
    }
    gram(i, i) = gram(i, i).real();
  }
  return gram;
}

namespace {

double quadratic_form(const std::vector<Branch>& branches,
                      const Eigen::MatrixXcd& gram) {
  complex sum = 0.0;
  for (std::size_t i = 0; i < branches.size(); ++i) {
    for (std::size_t j = 0; j < branches.size(); ++j) {
      sum += std::conj(branches[i].amplitude) * branches[j].amplitude *
             gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  return sum.real();
}

}  // namespace

double norm_squared(const SuperposedState& state) {
  return quadratic_form(state.branches(), gram_matrix(state));
}

NormalizedState gram_and_normalize(const SuperposedState& state) {
  if (state.branch_count() == 0) {
    throw DegenerateStateError("state has no branches");
  }
  Eigen::MatrixXcd gram = gram_matrix(state);
  const double norm2 = quadratic_form(state.branches(), gram);
  double scale = 0.0;
  for (const auto& b : state.branches()) scale += std::norm(b.amplitude);
  if (!(norm2 > 1e-24 * scale)) {
    throw DegenerateStateError("superposition has zero norm");
  }
  const double factor = 1.0 / std::sqrt(norm2);
  std::vector<Branch> branches = state.branches();
  for (auto& b : branches) b.amplitude *= factor;
  return {SuperposedState(state.masses(), std::move(branches), state.coordinates()),
          std::move(gram)};
}

SuperposedState evolve_free(const SuperposedState& state, double t) {
  if (state.coordinates() != CoordinateSystem::lab) {
    throw ContractError("free evolution is defined on lab coordinates only");
  }
  if (!(t >= 0.0)) throw ContractError("evolution time must be non-negative");
  std::vector<Branch> branches = state.branches();
  for (auto& b : branches) {
    for (std::size_t p = 0; p < b.packets.size(); ++p) {
      b.packets[p] = evolved(b.packets[p], state.masses()[p], t);
    }
  }
  return SuperposedState(state.masses(), std::move(branches), state.coordinates());
}

WeylShift WeylShift::inverse() const {
  WeylShift inv{position_shifts, momentum_boosts, -global_phase};
  for (double& d : inv.position_shifts) d = -d;
  for (double& k : inv.momentum_boosts) k = -k;
  return inv;
}

WeylShift WeylShift::translation(std::vector<double> shifts) {
  std::vector<double> zeros(shifts.size(), 0.0);
  return WeylShift{std::move(shifts), std::move(zeros), 0.0};
}

WeylShift WeylShift::boost(std::vector<double> boosts) {
  std::vector<double> zeros(boosts.size(), 0.0);
  return WeylShift{std::move(zeros), std::move(boosts), 0.0};
}

SuperposedState apply_weyl(const SuperposedState& state, const WeylShift& shift) {
  const std::size_t n = state.coordinate_count();
  if (shift.position_shifts.size() != n || shift.momentum_boosts.size() != n) {
    throw ContractError("Weyl shift dimension does not match coordinate count");
  }
  const complex global = std::polar(1.0, shift.global_phase);
  std::vector<Branch> branches = state.branches();
  for (auto& b : branches) {
    b.amplitude *= global;
    for (std::size_t p = 0; p < n; ++p) {
      b.packets[p] =
          shifted(b.packets[p], shift.position_shifts[p], shift.momentum_boosts[p]);
    }
  }
  return SuperposedState(state.masses(), std::move(branches), state.coordinates());
}

}  // namespace qref
