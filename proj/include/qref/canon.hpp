// Linear canonical coordinate machinery: centre-of-mass / relative maps,
// conjugate operator sets, commutators of linear phase-space forms, and the
// approximate (product) and exact (correlated Gaussian) state transforms.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qref/correlated_gaussian.hpp"
#include "qref/packets.hpp"

namespace qref {

/// sum_i x_coeffs[i] x_i + p_coeffs[i] p_i
struct LinearPhaseSpaceForm {
  std::vector<double> x_coeffs;
  std::vector<double> p_coeffs;
  std::string label;

  static LinearPhaseSpaceForm position(std::vector<double> coeffs,
                                       std::string label = {});
  static LinearPhaseSpaceForm momentum(std::vector<double> coeffs,
                                       std::string label = {});

  std::size_t size() const { return x_coeffs.size(); }
  bool is_position_only() const;
  bool is_momentum_only() const;
};

/// [f, g] = i (f.x . g.p - g.x . f.p); exact for linear forms.
complex commutator(const LinearPhaseSpaceForm& f, const LinearPhaseSpaceForm& g);

/// New coordinates y = A x with optional companion momentum rows B.
/// `canonical()` is true when B is attached and A B^T = 1 within 1e-12.
class LinearCoordinateMap {
 public:
  LinearCoordinateMap(Eigen::MatrixXd position,
                      std::optional<Eigen::MatrixXd> momentum = std::nullopt,
                      std::vector<std::string> labels = {});

  const Eigen::MatrixXd& position_matrix() const { return position_; }
  const std::optional<Eigen::MatrixXd>& momentum_matrix() const {
    return momentum_;
  }
  bool canonical() const { return canonical_; }
  std::size_t size() const { return static_cast<std::size_t>(position_.rows()); }
  const std::vector<std::string>& labels() const { return labels_; }

  LinearPhaseSpaceForm position_form(std::size_t row) const;
  /// Throws ContractError when no momentum rows are attached.
  LinearPhaseSpaceForm momentum_form(std::size_t row) const;

  /// (A^-1)^T, the momenta conjugate to the new positions.
  Eigen::MatrixXd conjugate_of_position() const;

 private:
  Eigen::MatrixXd position_;
  std::optional<Eigen::MatrixXd> momentum_;
  std::vector<std::string> labels_;
  bool canonical_ = false;
};

/// Rows: centre of mass, then x_k - x_observer for every k != observer.
/// Momentum rows are left unset.
LinearCoordinateMap cm_relative_map(const MassConfig& masses,
                                    std::size_t observer = 0);

/// Physical relative momenta: p_cm = sum p_i and
/// p_rk = mu_{ok} (p_k / m_k - p_o / m_o) for the observer o.
std::vector<LinearPhaseSpaceForm> relative_momentum_forms(
    const MassConfig& masses, std::size_t observer = 0);

/// Matrix whose rows are relative_momentum_forms(masses, observer).
Eigen::MatrixXd physical_momentum_matrix(const MassConfig& masses,
                                         std::size_t observer = 0);

/// Attaches B = (A^-1)^T. Throws DomainError for a singular A.
LinearCoordinateMap conjugate_momenta(const LinearCoordinateMap& map);

/// Positions conjugate to the given momentum rows: A = (B^-1)^T.
LinearCoordinateMap conjugate_positions(const Eigen::MatrixXd& momentum_rows,
                                        std::vector<std::string> labels = {});

/// m1 m2 m3 / (M mu12 mu13), the mass factor of the conjugate q set.
double gamma_mass(const MassConfig& masses);

/// Re-expresses a form written in the old coordinates in terms of the new
/// positions y = A x and their conjugate momenta (A^-1)^T p.
LinearPhaseSpaceForm transform_form(const LinearPhaseSpaceForm& form,
                                    const LinearCoordinateMap& map);

/// Finite-width parameters of one two-body branch in (cm, relative)
/// coordinates: psi ~ exp(-(xc-alpha)^2/(2 dc^2) - (xr-beta)^2/(2 dr^2)
///                          + gamma_corr (xc-alpha)(xr-beta)).
struct ExactTransformReport {
  double delta_c_sq = 0.0;
  double delta_r_sq = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma_corr = 0.0;
};

/// Closed form for two real-width packets with widths^2 d1sq, d2sq
/// (psi_i ~ exp(-(x - c)^2 / (2 d_i^2))) centred at a and b.
ExactTransformReport exact_two_body_report(double m1, double m2, double d1sq,
                                           double d2sq, double a, double b);

/// Couplings left in the precision matrix of an exactly transformed branch.
struct ResidualCorrelationReport {
  Eigen::MatrixXd precision;
  double cm_coupling = 0.0;        // max |P(cm, r_k)|
  double relative_coupling = 0.0;  // max |P(r_j, r_k)|, j != k
  bool cm_decoupled = false;
};

ResidualCorrelationReport residual_correlation(const CorrelatedGaussian& g);

enum class TransformMode { approximate, exact };

struct TransformResult {
  SuperposedState state;
  TransformMode mode = TransformMode::approximate;
  /// Exact mode only: one entry per branch.
  std::vector<CorrelatedGaussian> exact_branches;
  std::vector<ExactTransformReport> exact_reports;  // N = 2, real widths
  std::vector<ResidualCorrelationReport> residuals;  // N = 3
  /// True when some branch is not a product in the new coordinates.
  bool correlated = false;
};

/// Maps a lab-coordinate state into y = A x.
///
/// Approximate mode keeps each branch a product of packets: centres map by A,
/// momenta by (A^-1)^T, and each new width is the reciprocal diagonal of the
/// transformed precision matrix, which drops the fluctuation correlations.
/// Exact mode additionally returns the correlated Gaussians for N in {2, 3}.
/// The two-body closed-form reports are only filled for real widths.
TransformResult transform_state(
    const SuperposedState& state, const LinearCoordinateMap& map,
    TransformMode mode = TransformMode::approximate,
    CoordinateSystem target = CoordinateSystem::cm_relative);

}  // namespace qref
