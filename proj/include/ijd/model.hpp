#pragma once

#include "ijd/geometry.hpp"
#include "ijd/levy.hpp"
#include "ijd/types.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace ijd {

/// One Brownian driver field with an optional analytic Jacobian.
struct DiffusionField {
  std::function<Vec(const Vec&)> value;
  std::function<Mat(const Vec&)> jacobian;  // optional
};

/// gamma(h, x) = Delta(h, x) + sum_k delta_k(h) x_k with Delta vanishing to
/// first order at x = 0.
struct LevyDecomposition {
  std::function<Vec(const Vec&, const Vec&)> Delta;
  std::vector<std::function<Vec(const Vec&)>> deltas;
};

/// Jump-diffusion coefficients on R^d with generator matrix A, drift alpha,
/// finitely many diffusion fields and a jump map against the product Levy
/// measure on R^e.
struct JumpDiffusionModel {
  int dim = 0;       // d
  Mat A;             // d x d
  std::function<Vec(const Vec&)> alpha;
  std::vector<DiffusionField> sigmas;
  std::function<Vec(const Vec&, const Vec&)> gamma;  // (h, mark in R^e)
  LevyMeasure levy;
  std::optional<LevyDecomposition> decomposition;

  double domain_radius = 1e6;   // simulation aborts a path leaving this ball
  double lipschitz_bound = 0.0; // declared local Lipschitz constant; 0 = unchecked

  int mark_dim() const { return levy.mark_dim(); }
};

/// Jacobian of one diffusion field: analytic callback when present, else
/// central differences with step cbrt(eps)*scale.
Mat diffusion_jacobian(const DiffusionField& field, const Vec& h);

/// (1/2) sum_j D sigma_j(h) sigma_j(h).
Vec stratonovich_correction(const JumpDiffusionModel& model, const Vec& h);

/// alpha(h) minus the jump compensator restricted to big marks |x| >= epsilon.
Vec adjusted_drift_B(const JumpDiffusionModel& model, double epsilon, const Vec& h);

/// Spot-checks: declared Lipschitz bound on random pairs in the domain ball,
/// decomposition consistency gamma = Delta + sum delta_k x_k to 1e-10, and
/// gamma(h, 0) = 0 where the decomposition is present. Throws ModelError.
void validate_model(const JumpDiffusionModel& model, const std::vector<Vec>& sample_points,
                    std::uint64_t seed = 7);

/// Differentiable local inverse g of a chart, built on warm-started
/// Gauss-Newton nearest-point inversion. Value probes clamp the boundary
/// half-space (points in the closure invert exactly); derivative probes run
/// unclamped so they sample the smooth extension across the boundary face.
class ChartInverse {
 public:
  explicit ChartInverse(const Chart& chart) : chart_(&chart) {}

  Vec value(const Vec& h, const Vec& y_hint) const;

  /// Dg(h) w by central differences of the inversion along the ambient
  /// direction w (step cbrt(eps)*scale).
  Vec directional(const Vec& h, const Vec& y, const Vec& w) const;

  /// Full m x d matrix Dg(h) assembled from axis directions.
  Mat jacobian(const Vec& h, const Vec& y) const;

  /// D^2 g(h)(w, w) by central second differences (step eps^(1/4)*scale).
  Vec second_directional(const Vec& h, const Vec& y, const Vec& w) const;

  const Chart& chart() const { return *chart_; }

 private:
  Vec invert(const Vec& h, const Vec& y_hint, bool clamped) const;
  const Chart* chart_;
};

/// Pulled-back coefficients of the SDE in chart coordinates. Owns a copy of
/// the source chart so the callbacks stay valid independently of the
/// caller's chart lifetime.
struct ChartModel {
  std::shared_ptr<const Chart> chart;
  std::function<Vec(const Vec&)> Theta;
  std::vector<std::function<Vec(const Vec&)>> Sigmas;
  std::function<Vec(const Vec&, const Vec&)> Gamma;  // (y, mark)
  bool projected = false;

  int dim() const { return chart ? chart->dim_domain : 0; }
};

/// Pull the ambient coefficients back through the chart:
///   Theta(y) = Dg(h)(A h + alpha(h)) + (1/2) sum_j D^2 g(h)(sigma_j, sigma_j)
///              + integral of [g(h + gamma(h,x)) - g(h) - Dg(h) gamma(h,x)]
///   Sigma_j(y) = Dg(h) sigma_j(h),  Gamma(y, x) = g(h + gamma(h,x)) - g(h)
/// with h = phi(y) and g the chart inverse. The jump integrand vanishes
/// quadratically at x = 0, so the dyadic-shell quadrature applies. Throws
/// ChartEscapeError when h + gamma(h,x) leaves the invertible neighborhood
/// at a quadrature node.
ChartModel pullback_coefficients(const Chart& chart, const JumpDiffusionModel& model);

/// Half-space metric projection Pi(y) = ((y1)^+, y2, ..., ym) precomposed
/// with every coefficient. Identity for charts without boundary.
ChartModel project_chart_model(const ChartModel& cm);

/// Pi itself (identity when the chart has no boundary face).
Vec half_space_projection(const Vec& y, bool has_boundary);

}  // namespace ijd
