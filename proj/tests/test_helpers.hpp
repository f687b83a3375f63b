#pragma once

#include "ijd/geometry.hpp"

#include <cmath>

namespace ijd::testing {

inline Chart circle_chart(bool analytic = true) {
  Chart chart;
  chart.dim_domain = 1;
  chart.dim_ambient = 2;
  chart.phi = [](const Vec& y) {
    Vec h(2);
    h << std::cos(y[0]), std::sin(y[0]);
    return h;
  };
  if (analytic) {
    chart.jacobian = [](const Vec& y) {
      Mat J(2, 1);
      J << -std::sin(y[0]), std::cos(y[0]);
      return J;
    };
  }
  Vec lo(1), hi(1);
  lo << 0.0;
  hi << 2.0 * M_PI;
  chart.domain_box = Box::closed(lo, hi);
  chart.has_boundary = false;
  return chart;
}

// annulus r in [1 - depth, 1] of the closed unit ball; boundary at y1 = 0
inline Chart ball_chart(double depth = 0.5, bool analytic = true) {
  Chart chart;
  chart.dim_domain = 2;
  chart.dim_ambient = 2;
  chart.phi = [](const Vec& y) {
    const double r = 1.0 - y[0];
    Vec h(2);
    h << r * std::cos(y[1]), r * std::sin(y[1]);
    return h;
  };
  if (analytic) {
    chart.jacobian = [](const Vec& y) {
      const double r = 1.0 - y[0];
      Mat J(2, 2);
      J << -std::cos(y[1]), -r * std::sin(y[1]), -std::sin(y[1]), r * std::cos(y[1]);
      return J;
    };
  }
  Vec lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << depth, 2.0 * M_PI;
  chart.domain_box = Box::closed(lo, hi);
  chart.has_boundary = true;
  return chart;
}

inline Chart cone_chart(const Mat& basis, double extent = 10.0) {
  Chart chart;
  chart.dim_domain = static_cast<int>(basis.cols());
  chart.dim_ambient = static_cast<int>(basis.rows());
  chart.phi = [basis](const Vec& y) { return (basis * y).eval(); };
  chart.jacobian = [basis](const Vec&) { return basis; };
  Vec lo = Vec::Zero(chart.dim_domain);
  Vec hi = Vec::Constant(chart.dim_domain, extent);
  chart.domain_box = Box::closed(lo, hi);
  chart.has_boundary = true;
  return chart;
}

}  // namespace ijd::testing
