#include "ijd/geometry.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace ijd {

bool Box::contains(const Vec& y, double slack) const {
  for (int i = 0; i < dim(); ++i) {
    if (y[i] < lo[i] - slack || y[i] > hi[i] + slack) return false;
  }
  return true;
}

Vec Box::clamp(const Vec& y) const {
  Vec out = y;
  for (int i = 0; i < dim(); ++i) out[i] = std::clamp(out[i], lo[i], hi[i]);
  return out;
}

Box Box::closed(const Vec& lo, const Vec& hi) {
  Box b;
  b.lo = lo;
  b.hi = hi;
  return b;
}

namespace {

double fd_scale(double yi) { return std::max(1.0, std::abs(yi)); }

void check_rank(const Mat& J, const Vec& y) {
  Eigen::JacobiSVD<Mat> svd(J);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[s.size() - 1] < 1e-10 * s[0]) {
    throw DegenerateChartError("chart Jacobian is rank-deficient at y = [" +
                               [&] {
                                 std::string out;
                                 for (int i = 0; i < y.size(); ++i)
                                   out += (i ? ", " : "") + std::to_string(y[i]);
                                 return out;
                               }() +
                               "]");
  }
}

}  // namespace

Mat chart_jacobian_raw(const Chart& chart, const Vec& y) {
  if (chart.jacobian) return chart.jacobian(y);
  const int m = chart.dim_domain;
  const int d = chart.dim_ambient;
  Mat J(d, m);
  for (int i = 0; i < m; ++i) {
    const double h = num::fd_step * fd_scale(y[i]);
    Vec yp = y, ym = y;
    if (i == 0 && chart.has_boundary && y[0] - h < 0.0) {
      // one-sided second-order difference at the y1 = 0 face
      Vec y1 = y, y2 = y;
      y1[0] += h;
      y2[0] += 2.0 * h;
      J.col(i) = (-3.0 * chart.phi(y) + 4.0 * chart.phi(y1) - chart.phi(y2)) / (2.0 * h);
      continue;
    }
    yp[i] += h;
    ym[i] -= h;
    J.col(i) = (chart.phi(yp) - chart.phi(ym)) / (2.0 * h);
  }
  return J;
}

Mat chart_jacobian(const Chart& chart, const Vec& y) {
  Mat J = chart_jacobian_raw(chart, y);
  check_rank(J, y);
  return J;
}

std::vector<Mat> chart_second_derivative(const Chart& chart, const Vec& y) {
  const int m = chart.dim_domain;
  std::vector<Mat> tensor(m);
  for (int j = 0; j < m; ++j) {
    const double h = num::fd2_step * fd_scale(y[j]);
    if (j == 0 && chart.has_boundary && y[0] - h < 0.0) {
      Vec y1 = y, y2 = y;
      y1[0] += h;
      y2[0] += 2.0 * h;
      tensor[j] = (-3.0 * chart_jacobian_raw(chart, y) + 4.0 * chart_jacobian_raw(chart, y1) -
                   chart_jacobian_raw(chart, y2)) /
                  (2.0 * h);
      continue;
    }
    Vec yp = y, ym = y;
    yp[j] += h;
    ym[j] -= h;
    tensor[j] = (chart_jacobian_raw(chart, yp) - chart_jacobian_raw(chart, ym)) / (2.0 * h);
  }
  return tensor;
}

Vec apply_second_derivative(const std::vector<Mat>& tensor, const Vec& u, const Vec& v) {
  Vec out = Vec::Zero(tensor.empty() ? 0 : tensor[0].rows());
  for (int j = 0; j < static_cast<int>(tensor.size()); ++j) out += v[j] * (tensor[j] * u);
  return out;
}

TangentFrame tangent_frame(const Chart& chart, const Vec& y) {
  const Mat J = chart_jacobian(chart, y);
  const int d = chart.dim_ambient;
  const int m = chart.dim_domain;

  TangentFrame frame;
  frame.base_point = chart.phi(y);
  Eigen::HouseholderQR<Mat> qr(J);
  frame.basis = qr.householderQ() * Mat::Identity(d, m);
  frame.is_boundary = chart.on_boundary_face(y);
  if (!frame.is_boundary) return frame;

  if (m > 1) {
    Mat Jb = J.rightCols(m - 1);
    Eigen::HouseholderQR<Mat> qrb(Jb);
    frame.boundary_basis = qrb.householderQ() * Mat::Identity(d, m - 1);
  } else {
    frame.boundary_basis = Mat::Zero(d, 0);
  }

  // eta_h: unit tangent orthogonal to T_h dM, oriented along Dphi(y) e1.
  Vec w = J.col(0);
  Vec eta = w;
  if (frame.boundary_basis.cols() > 0)
    eta -= frame.boundary_basis * (frame.boundary_basis.transpose() * w);
  const double n = eta.norm();
  if (n < 1e-12 * std::max(1.0, w.norm()))
    throw DegenerateChartError("inward normal is numerically undefined: Dphi e1 lies in the boundary tangent");
  frame.inward_normal = eta / n;
  return frame;
}

void project_tangent(const TangentFrame& frame, const Vec& v, Vec& v_tan, Vec& v_perp) {
  v_tan = frame.basis * (frame.basis.transpose() * v);
  v_perp = v - v_tan;
}

Vec tangential_part(const TangentFrame& frame, const Vec& v) {
  return frame.basis * (frame.basis.transpose() * v);
}

Vec normal_part(const TangentFrame& frame, const Vec& v) {
  return v - tangential_part(frame, v);
}

Direction classify_direction(const TangentFrame& frame, const Vec& v, double tol) {
  Vec v_tan, v_perp;
  project_tangent(frame, v, v_tan, v_perp);
  if (v_perp.norm() > tol * (1.0 + v.norm())) return Direction::NotTangent;
  if (!frame.is_boundary) return Direction::InteriorTangent;
  const double s = frame.inward_normal.dot(v);
  if (std::abs(s) <= tol) return Direction::BoundaryTangent;
  return s > tol ? Direction::Inward : Direction::Outward;
}

namespace {

Vec apply_clamps(const Chart& chart, const InvertOptions& opts, Vec y) {
  if (opts.clamp_box) return chart.domain_box.clamp(y);
  if (opts.clamp_half_space && chart.has_boundary && y[0] < 0.0) y[0] = 0.0;
  return y;
}

}  // namespace

InvertResult try_invert_chart(const Chart& chart, const Vec& h, const Vec& y_guess,
                              const InvertOptions& opts) {
  InvertResult res;
  Vec y = apply_clamps(chart, opts, y_guess);
  Vec r = chart.phi(y) - h;
  double f = r.squaredNorm();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const Mat J = chart_jacobian_raw(chart, y);
    const Vec g = J.transpose() * r;
    if (g.norm() < 1e-14 * (1.0 + std::sqrt(f))) {
      res.converged = true;
      break;
    }
    Mat JtJ = J.transpose() * J;
    // tiny ridge keeps the solve well-posed near degenerate configurations
    JtJ.diagonal().array() += 1e-14 * JtJ.trace();
    const Vec delta = JtJ.ldlt().solve(-g);

    double t = 1.0;
    Vec y_new = y;
    Vec r_new = r;
    double f_new = f;
    bool improved = false;
    while (t > 1.0 / 4096.0) {
      y_new = apply_clamps(chart, opts, y + t * delta);
      r_new = chart.phi(y_new) - h;
      f_new = r_new.squaredNorm();
      if (f_new <= f) {
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      // stationary under clamping: accept as converged
      res.converged = true;
      break;
    }
    const double step = (y_new - y).norm();
    y = y_new;
    r = r_new;
    f = f_new;
    if (step < opts.step_tol) {
      res.converged = true;
      break;
    }
  }
  res.y = y;
  res.residual = std::sqrt(f);
  return res;
}

InvertResult invert_chart(const Chart& chart, const Vec& h, const Vec& y_guess,
                          const InvertOptions& opts) {
  InvertResult res = try_invert_chart(chart, h, y_guess, opts);
  if (!res.converged)
    throw NoConvergenceError("chart inversion did not converge within " +
                             std::to_string(opts.max_iterations) + " iterations");
  return res;
}

std::vector<Vec> grid_starts(const Box& box, int n) {
  const int m = box.dim();
  int per_dim = 1;
  while (std::pow(per_dim + 1, m) <= n || per_dim < 1) ++per_dim;
  per_dim = std::max(per_dim, 1);
  long total = 1;
  for (int i = 0; i < m; ++i) total *= per_dim;
  if (total < n && m == 1) {
    per_dim = n;
    total = n;
  }

  std::vector<Vec> pts;
  std::vector<long> keep;
  const long count = std::min<long>(n, total);
  for (long i = 0; i < count; ++i) keep.push_back(i * total / count);

  for (long flat : keep) {
    Vec y(m);
    long idx = flat;
    for (int i = 0; i < m; ++i) {
      const int cell = static_cast<int>(idx % per_dim);
      idx /= per_dim;
      y[i] = box.lo[i] + (cell + 0.5) * (box.hi[i] - box.lo[i]) / per_dim;
    }
    pts.push_back(y);
  }
  return pts;
}

InvertResult closest_point(const Chart& chart, const Vec& h) {
  InvertOptions opts;
  opts.clamp_box = true;
  InvertResult best;
  best.residual = std::numeric_limits<double>::infinity();
  bool any = false;
  for (const Vec& start : grid_starts(chart.domain_box, 8)) {
    InvertResult r = try_invert_chart(chart, h, start, opts);
    if (!r.converged) continue;
    any = true;
    if (r.residual < best.residual) best = r;
  }
  if (!any) throw NoConvergenceError("all multi-start chart inversions failed");
  return best;
}

double distance_to_closure(const Chart& chart, const Vec& h) {
  return closest_point(chart, h).residual;
}

double distance_to_closure_hint(const Chart& chart, const Vec& h, const Vec& y_hint) {
  InvertOptions opts;
  opts.clamp_box = true;
  InvertResult r = try_invert_chart(chart, h, y_hint, opts);
  if (r.converged && r.residual < 1e-8 * (1.0 + h.norm())) return r.residual;
  InvertResult global = closest_point(chart, h);
  return r.converged ? std::min(r.residual, global.residual) : global.residual;
}

void validate_chart(const Chart& chart, int points_per_dim) {
  const int m = chart.dim_domain;
  long total = 1;
  for (int i = 0; i < m; ++i) total *= points_per_dim;

  std::vector<Vec> pts;
  for (long flat = 0; flat < total; ++flat) {
    Vec y(m);
    long idx = flat;
    for (int i = 0; i < m; ++i) {
      const int cell = static_cast<int>(idx % points_per_dim);
      idx /= points_per_dim;
      y[i] = chart.domain_box.lo[i] +
             (cell + 0.5) * (chart.domain_box.hi[i] - chart.domain_box.lo[i]) / points_per_dim;
    }
    pts.push_back(y);
  }

  for (const Vec& y : pts) {
    chart_jacobian(chart, y);  // rank check

    const auto tensor = chart_second_derivative(chart, y);
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) {
        const Vec a = tensor[j].col(i);
        const Vec b = tensor[i].col(j);
        const double scale = std::max(1.0, std::max(a.norm(), b.norm()));
        if ((a - b).norm() > 1e-6 * scale)
          throw ModelError("finite-difference second derivative is not symmetric");
      }
    }
  }

  for (size_t a = 0; a < pts.size(); ++a) {
    for (size_t b = a + 1; b < pts.size(); ++b) {
      if ((pts[a] - pts[b]).norm() > 1e-6 &&
          (chart.phi(pts[a]) - chart.phi(pts[b])).norm() <= 1e-12)
        throw ModelError("chart map is not injective on the sample grid");
    }
  }
}

int Atlas::select(const Vec& h) const {
  int best = -1;
  double best_res = std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(charts.size()); ++i) {
    try {
      const double r = ijd::distance_to_closure(charts[i], h);
      if (r < best_res) {
        best_res = r;
        best = i;
      }
    } catch (const NoConvergenceError&) {
    }
  }
  if (best < 0) throw NoConvergenceError("no chart in the atlas could invert the point");
  return best;
}

double Atlas::distance_to_closure(const Vec& h) const {
  return ijd::distance_to_closure(charts[select(h)], h);
}

}  // namespace ijd
