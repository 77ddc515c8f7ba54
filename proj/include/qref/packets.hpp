// Exact algebra of one-dimensional Gaussian wavepackets and finite
// superpositions of their products.
//
// Conventions (hbar = 1):
//   psi(x) = N(w) exp(-(x - c)^2 / (2 w) + i k x + i phi),
//   N(w)   = (Re(1/w) / pi)^(1/4),
// so a real width parameter w = 2 sigma^2 gives a position standard deviation
// sigma. The plane-wave factor uses the absolute coordinate x, which keeps the
// Weyl-shift phase bookkeeping linear.
#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qref {

using complex = std::complex<double>;

class MassConfig {
 public:
  MassConfig() = default;
  explicit MassConfig(std::vector<double> masses);

  std::size_t size() const { return masses_.size(); }
  double operator[](std::size_t i) const { return masses_.at(i); }
  std::span<const double> masses() const { return masses_; }

  double total() const;
  /// m_i m_j / (m_i + m_j)
  double reduced(std::size_t i, std::size_t j) const;

 private:
  std::vector<double> masses_;
};

class GaussianPacket {
 public:
  /// Throws DomainError unless Re(width) > 0 and all fields are finite.
  GaussianPacket(double centre, complex width, double momentum = 0.0,
                 double phase = 0.0);

  /// Packet whose |psi|^2 has standard deviation `sigma`.
  static GaussianPacket from_sigma(double centre, double sigma,
                                   double momentum = 0.0, double phase = 0.0);

  double centre() const { return centre_; }
  complex width() const { return width_; }
  double momentum() const { return momentum_; }
  double phase() const { return phase_; }

  /// Position standard deviation of |psi|^2.
  double sigma() const;
  double norm_constant() const;
  complex operator()(double x) const;

 private:
  double centre_;
  complex width_;
  double momentum_;
  double phase_;
};

/// <g1|g2> in closed form.
complex packet_overlap(const GaussianPacket& g1, const GaussianPacket& g2);

/// exp(i(k x - d p)) applied to one packet: translate by d, boost by k.
GaussianPacket shifted(const GaussianPacket& g, double displacement,
                       double boost);

/// Exact free evolution of one packet of mass m for time t.
GaussianPacket evolved(const GaussianPacket& g, double mass, double t);

enum class CoordinateSystem { lab, cm_relative, cm_relative_q };

std::string_view to_string(CoordinateSystem coords);

struct Branch {
  complex amplitude;
  std::vector<GaussianPacket> packets;
};

class SuperposedState {
 public:
  SuperposedState(MassConfig masses, std::vector<Branch> branches,
                  CoordinateSystem coords = CoordinateSystem::lab);

  const MassConfig& masses() const { return masses_; }
  const std::vector<Branch>& branches() const { return branches_; }
  CoordinateSystem coordinates() const { return coords_; }
  std::size_t coordinate_count() const { return masses_.size(); }
  std::size_t branch_count() const { return branches_.size(); }

 private:
  MassConfig masses_;
  std::vector<Branch> branches_;
  CoordinateSystem coords_;
};

/// gram(i, j) = prod_p <branch_i.p | branch_j.p>.
Eigen::MatrixXcd gram_matrix(const SuperposedState& state);

/// Sum_ij conj(a_i) a_j gram(i, j).
double norm_squared(const SuperposedState& state);

struct NormalizedState {
  SuperposedState state;
  Eigen::MatrixXcd gram;
};

/// Rescales the amplitudes so the Gram norm is one. Throws
/// DegenerateStateError for a (numerically) zero-norm state.
NormalizedState gram_and_normalize(const SuperposedState& state);

/// Free evolution under sum_i p_i^2 / (2 m_i). Lab coordinates only.
SuperposedState evolve_free(const SuperposedState& state, double t);

struct WeylShift {
  std::vector<double> position_shifts;
  std::vector<double> momentum_boosts;
  double global_phase = 0.0;

  WeylShift inverse() const;
  static WeylShift translation(std::vector<double> shifts);
  static WeylShift boost(std::vector<double> boosts);
};

/// Applies prod_i exp(i(k_i x_i - d_i p_i)) times exp(i global_phase).
SuperposedState apply_weyl(const SuperposedState& state,
                           const WeylShift& shift);

}  // namespace qref
