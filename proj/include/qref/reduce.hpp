// Reduced density operators of Gaussian superpositions: partial traces,
// purity, coherences, fringe rendering, visibility and the detector model.
//
// All traces and purities are closed-form Gaussian overlap algebra; grids are
// only used to render fringe profiles.
#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "qref/canon.hpp"
#include "qref/correlated_gaussian.hpp"
#include "qref/packets.hpp"

namespace qref {

struct MixtureTerm {
  complex coeff;
  GaussianPacket ket;
  GaussianPacket bra;
};

/// rho = sum_t coeff_t |ket_t><bra_t| over a single coordinate.
class GaussianMixtureOperator {
 public:
  explicit GaussianMixtureOperator(std::vector<MixtureTerm> terms);

  const std::vector<MixtureTerm>& terms() const { return terms_; }
  complex trace() const { return trace_; }

  /// rho(x, x')
  complex operator()(double x, double xp) const;
  double density(double x) const;
  /// <u|rho|v>
  complex matrix_element(const GaussianPacket& u, const GaussianPacket& v) const;
  /// Tr(rho exp(-i d p)), i.e. the overlap of rho with its translate by d.
  complex shift_expectation(double displacement) const;

 private:
  std::vector<MixtureTerm> terms_;
  complex trace_;
};

/// One term of a general Gaussian kernel
///   rho(x, x') = scale exp(-1/2 d^T Q d + b^T d),  d = (x - ket_origin, x' - bra_origin).
/// The origins are the retained-coordinate centres of the ket and bra branch.
struct GaussianKernelTerm {
  Eigen::Matrix2cd quad;
  Eigen::Vector2cd linear;
  complex scale;
  double ket_origin;
  double bra_origin;

  complex operator()(double x, double xp) const;
};

/// Reduced operator whose terms need not be rank one. This is what an exact
/// partial trace over correlated Gaussians produces.
class GaussianKernelOperator {
 public:
  explicit GaussianKernelOperator(std::vector<GaussianKernelTerm> terms);
  static GaussianKernelOperator from_mixture(const GaussianMixtureOperator& rho);

  const std::vector<GaussianKernelTerm>& terms() const { return terms_; }
  complex trace() const { return trace_; }
  complex operator()(double x, double xp) const;
  double density(double x) const;

 private:
  std::vector<GaussianKernelTerm> terms_;
  complex trace_;
};

/// Traces out every coordinate except the single index in `keep`.
/// The state is normalized first, so the result has unit trace.
GaussianMixtureOperator partial_trace(const SuperposedState& state,
                                      const std::vector<std::size_t>& keep);

/// Exact partial trace of a superposition of correlated Gaussians (one per
/// branch, amplitudes inside the prefactors), keeping coordinate `keep`.
/// Normalized to unit trace.
GaussianKernelOperator partial_trace(const std::vector<CorrelatedGaussian>& branches,
                                     std::size_t keep);

/// Tr(rho^2) / Tr(rho)^2
double purity(const GaussianMixtureOperator& rho);
double purity(const GaussianKernelOperator& rho);

/// <state| exp(-i displacement * form) |state> for a position-only or a
/// momentum-only form, computed by factorizing into per-coordinate shifts.
complex expectation_weyl(const SuperposedState& state,
                         const LinearPhaseSpaceForm& form, double displacement);

/// Sum of the terms whose ket sits near `ket_centre` and bra near
/// `bra_centre`, each weighted by the bra/ket overlap after translating the
/// ket onto the bra centre. For identical packet shapes this is the bare
/// coefficient, and |value| <= 1/2 for a normalized two-branch operator.
complex coherence(const GaussianMixtureOperator& rho, double ket_centre,
                  double bra_centre);
/// Kernel version: sum over the matching terms of Tr(term T), T translating
/// by bra_centre - ket_centre.
complex coherence(const GaussianKernelOperator& rho, double ket_centre,
                  double bra_centre);

struct GridSpec {
  double centre = 0.0;
  double half_extent = 1.0;
  std::size_t points = 2048;

  double spacing() const;
  double position(std::size_t i) const;
};

/// 2048 points spanning +-8 envelope sigmas around every significant term.
GridSpec default_grid(const GaussianMixtureOperator& rho, std::size_t points = 2048,
                      double sigmas = 8.0);
GridSpec default_grid(const GaussianKernelOperator& rho, std::size_t points = 2048,
                      double sigmas = 8.0);

struct FringeSample {
  double position;
  double intensity;
};

struct FringeProfile {
  std::vector<FringeSample> samples;
  GridSpec grid;
};

/// intensity(x) = rho(x, x). Throws ResolutionError when the grid does not
/// cover 6 envelope sigmas of every significant term or has fewer than 8
/// points per fringe period.
FringeProfile fringe_profile(const GaussianMixtureOperator& rho, const GridSpec& grid);
FringeProfile fringe_profile(const GaussianKernelOperator& rho, const GridSpec& grid);

/// Shortest local fringe period among the significant cross terms (infinite
/// when there are none).
double shortest_fringe_period(const GaussianMixtureOperator& rho);
double shortest_fringe_period(const GaussianKernelOperator& rho);

/// Fringe contrast (I_max - I_min) / (I_max + I_min) inside the central half
/// of the envelope (between its quartiles). Each local minimum there is paired
/// with its neighbouring maxima; extrema are refined by parabolic
/// interpolation and the contrasts are averaged. No interior minimum means no
/// fringes and V = 0.
double visibility(const FringeProfile& profile);

enum class DetectorPlacement { output_ports, mirrors };

struct DetectorProbabilities {
  double p_left;
  double p_right;
};

/// Click probabilities for a particle whose relative coordinate is a
/// two-branch superposition around `left_centre` and `right_centre`.
/// Output ports: p_left = 1/2 + Re(exp(i phase) C) with C the coherence from
/// the left ket to the right bra. Mirrors: populations only.
DetectorProbabilities detector_probabilities(
    const GaussianMixtureOperator& rho, double left_centre, double right_centre,
    double phase_convention = 0.0,
    DetectorPlacement placement = DetectorPlacement::output_ports);
DetectorProbabilities detector_probabilities(
    const GaussianKernelOperator& rho, double left_centre, double right_centre,
    double phase_convention = 0.0,
    DetectorPlacement placement = DetectorPlacement::output_ports);

}  // namespace qref
