#pragma once

#include "ijd/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ijd {

/// Axis-aligned parameter box for a chart domain. Faces may be marked open
/// (excluded from the manifold); the y1 = 0 face of a boundary chart is
/// always closed and carries the boundary.
struct Box {
  Vec lo;
  Vec hi;
  std::vector<bool> open_lo;  // empty means all faces closed
  std::vector<bool> open_hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Vec& y, double slack = 0.0) const;
  Vec clamp(const Vec& y) const;
  static Box closed(const Vec& lo, const Vec& hi);
};

/// One parametrization phi : V in R^m_+ -> R^d of a manifold patch.
///
/// The map must extend smoothly a little past the box faces (builtin charts
/// are formula-based and extend everywhere); derivative probes rely on that.
/// When has_boundary is set, the y1 = 0 face of the domain is the manifold
/// boundary and inversion keeps y1 >= 0.
struct Chart {
  int dim_domain = 0;   // m
  int dim_ambient = 0;  // d
  std::function<Vec(const Vec&)> phi;
  Box domain_box;
  bool has_boundary = false;
  std::function<Mat(const Vec&)> jacobian;  // optional analytic Dphi
  double boundary_tol = 1e-9;

  bool on_boundary_face(const Vec& y) const {
    return has_boundary && y[0] <= boundary_tol;
  }
};

/// Orthonormal tangent data at a manifold point.
struct TangentFrame {
  Vec base_point;                      // h = phi(y)
  Mat basis;                           // d x m, orthonormal columns spanning T_h M
  bool is_boundary = false;
  Mat boundary_basis;                  // d x (m-1), present iff boundary
  Vec inward_normal;                   // unit eta_h, present iff boundary
};

enum class Direction {
  InteriorTangent,
  BoundaryTangent,
  Inward,
  Outward,
  NotTangent,
};

/// Dphi(y); analytic callback if provided, else central differences with
/// step cbrt(eps)*max(1,|y_i|), one-sided at the y1 = 0 face of boundary
/// charts. Throws DegenerateChartError when the smallest singular value
/// drops below 1e-10 times the largest.
Mat chart_jacobian(const Chart& chart, const Vec& y);

/// Same as chart_jacobian but skips the rank check (hot paths).
Mat chart_jacobian_raw(const Chart& chart, const Vec& y);

/// Second-derivative tensor as central differences of the Jacobian with
/// step eps^(1/4): result[j] = d(Dphi)/dy_j, a d x m matrix, so
/// D2phi(u,v) = sum_j v_j * result[j] * u. The (i,j) vs (j,i) agreement is
/// a genuine numerical check, not an identity of the formula.
std::vector<Mat> chart_second_derivative(const Chart& chart, const Vec& y);

/// Apply a second-derivative tensor to a pair of directions.
Vec apply_second_derivative(const std::vector<Mat>& tensor, const Vec& u, const Vec& v);

TangentFrame tangent_frame(const Chart& chart, const Vec& y);

/// Orthogonal split v = v_tan + v_perp against the frame's tangent space.
void project_tangent(const TangentFrame& frame, const Vec& v, Vec& v_tan, Vec& v_perp);
Vec tangential_part(const TangentFrame& frame, const Vec& v);
Vec normal_part(const TangentFrame& frame, const Vec& v);

/// Classify v relative to the (half) tangent space at the frame point.
/// NotTangent if the normal component exceeds tol*(1+|v|); at boundary
/// points the eta-component separates Inward / BoundaryTangent / Outward.
Direction classify_direction(const TangentFrame& frame, const Vec& v, double tol);

struct InvertOptions {
  int max_iterations = 50;
  double step_tol = 1e-12;
  bool clamp_half_space = true;  // keep y1 >= 0 on boundary charts
  bool clamp_box = false;        // keep iterates in the closed domain box
};

struct InvertResult {
  Vec y;
  double residual = 0.0;  // |phi(y) - h|
  int iterations = 0;
  bool converged = false;
};

/// Damped Gauss-Newton minimization of |phi(y) - h|^2 from y_guess.
/// Converged when the step norm falls below step_tol or the least-squares
/// gradient vanishes. Throws NoConvergenceError after max_iterations.
InvertResult invert_chart(const Chart& chart, const Vec& h, const Vec& y_guess,
                          const InvertOptions& opts = {});

/// Non-throwing variant; converged flag is false on failure.
InvertResult try_invert_chart(const Chart& chart, const Vec& h, const Vec& y_guess,
                              const InvertOptions& opts = {});

/// inf over the closed chart domain of |phi(y) - h|, via multi-start
/// inversion (8 grid starts). Propagates NoConvergenceError only if all
/// starts fail.
double distance_to_closure(const Chart& chart, const Vec& h);

/// Warm-start variant for trajectories: tries the hint first and falls back
/// to the multi-start scan when the hinted inversion is not competitive.
double distance_to_closure_hint(const Chart& chart, const Vec& h, const Vec& y_hint);

/// Multi-start inversion constrained to the closed domain box; returns the
/// best converged result (used by distance and membership queries).
InvertResult closest_point(const Chart& chart, const Vec& h);

/// Deterministic grid of starting points in the domain box (up to n points).
std::vector<Vec> grid_starts(const Box& box, int n);

/// Sampled-chart validation: full column rank, grid injectivity, and
/// symmetry of the finite-difference second derivative. Throws on failure.
void validate_chart(const Chart& chart, int points_per_dim = 5);

/// A list of charts with a selector picking the chart of smallest inversion
/// residual. Covers manifolds needing more than one patch.
struct Atlas {
  std::vector<Chart> charts;

  int select(const Vec& h) const;
  double distance_to_closure(const Vec& h) const;
};

}  // namespace ijd
