#include "ijd/model.hpp"

#include <cmath>
#include <random>

namespace ijd {

Mat diffusion_jacobian(const DiffusionField& field, const Vec& h) {
  if (field.jacobian) return field.jacobian(h);
  const int d = static_cast<int>(h.size());
  const double scale = std::max(1.0, h.norm());
  const double t = num::fd_step * scale;
  Mat J(d, d);
  for (int i = 0; i < d; ++i) {
    Vec hp = h, hm = h;
    hp[i] += t;
    hm[i] -= t;
    J.col(i) = (field.value(hp) - field.value(hm)) / (2.0 * t);
  }
  return J;
}

Vec stratonovich_correction(const JumpDiffusionModel& model, const Vec& h) {
  Vec out = Vec::Zero(model.dim);
  for (const DiffusionField& sigma : model.sigmas) {
    const Vec s = sigma.value(h);
    out += 0.5 * (diffusion_jacobian(sigma, h) * s);
  }
  return out;
}

Vec adjusted_drift_B(const JumpDiffusionModel& model, double epsilon, const Vec& h) {
  const Vec compensator = integrate(
      model.levy, model.dim, [&](const Vec& x) { return model.gamma(h, x); },
      MarkRegion::outside(epsilon));
  return model.alpha(h) - compensator;
}

void validate_model(const JumpDiffusionModel& model, const std::vector<Vec>& sample_points,
                    std::uint64_t seed) {
  if (model.lipschitz_bound > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double radius = std::min(model.domain_radius, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
      Vec h1(model.dim), h2(model.dim);
      for (int i = 0; i < model.dim; ++i) {
        h1[i] = normal(rng);
        h2[i] = normal(rng);
      }
      h1 *= radius / std::max(1.0, h1.norm());
      h2 *= radius / std::max(1.0, h2.norm());
      const double lhs = (model.alpha(h1) - model.alpha(h2)).norm();
      const double rhs = model.lipschitz_bound * (h1 - h2).norm();
      if (lhs > rhs + 1e-12)
        throw ModelError("drift violates the declared Lipschitz bound on the sample ball");
    }
  }

  if (model.decomposition) {
    const auto& dec = *model.decomposition;
    if (static_cast<int>(dec.deltas.size()) != model.mark_dim())
      throw ModelError("jump decomposition must supply one delta field per mark coordinate");
    std::mt19937_64 rng(seed ^ 0x5bd1e995u);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const Vec zero_mark = Vec::Zero(model.mark_dim());
    for (const Vec& h : sample_points) {
      if (model.gamma(h, zero_mark).norm() > 1e-10)
        throw ModelError("gamma(h, 0) must vanish when a decomposition is declared");
      for (int trial = 0; trial < 8; ++trial) {
        Vec x(model.mark_dim());
        for (int k = 0; k < model.mark_dim(); ++k) x[k] = unif(rng);
        Vec recon = dec.Delta(h, x);
        for (int k = 0; k < model.mark_dim(); ++k) recon += x[k] * dec.deltas[k](h);
        if ((model.gamma(h, x) - recon).norm() > 1e-10 * (1.0 + model.gamma(h, x).norm()))
          throw ModelError("jump decomposition does not reproduce gamma at sampled (h, x)");
      }
    }
  }
}

Vec ChartInverse::invert(const Vec& h, const Vec& y_hint, bool clamped) const {
  InvertOptions opts;
  opts.clamp_half_space = clamped;
  const InvertResult res = invert_chart(*chart_, h, y_hint, opts);
  const double escape_tol = 1e-6 * (1.0 + h.norm());
  if (res.residual > escape_tol)
    throw ChartEscapeError("point left the invertible neighborhood of the chart (residual " +
                           std::to_string(res.residual) + ")");
  return res.y;
}

Vec ChartInverse::value(const Vec& h, const Vec& y_hint) const {
  return invert(h, y_hint, /*clamped=*/true);
}

Vec ChartInverse::directional(const Vec& h, const Vec& y, const Vec& w) const {
  const double scale = std::max(1.0, h.norm());
  const double t = num::fd_step * scale / std::max(1.0, w.norm());
  const Vec yp = invert(h + t * w, y, /*clamped=*/false);
  const Vec ym = invert(h - t * w, y, /*clamped=*/false);
  return (yp - ym) / (2.0 * t);
}

Mat ChartInverse::jacobian(const Vec& h, const Vec& y) const {
  const int d = chart_->dim_ambient;
  const int m = chart_->dim_domain;
  Mat Dg(m, d);
  Vec axis = Vec::Zero(d);
  for (int i = 0; i < d; ++i) {
    axis[i] = 1.0;
    Dg.col(i) = directional(h, y, axis);
    axis[i] = 0.0;
  }
  return Dg;
}

Vec ChartInverse::second_directional(const Vec& h, const Vec& y, const Vec& w) const {
  const double wn = w.norm();
  if (wn == 0.0) return Vec::Zero(chart_->dim_domain);
  const double scale = std::max(1.0, h.norm());
  const double t = num::fd2_step * scale / wn;
  const Vec yp = invert(h + t * w, y, /*clamped=*/false);
  const Vec ym = invert(h - t * w, y, /*clamped=*/false);
  return (yp - 2.0 * y + ym) / (t * t);
}

ChartModel pullback_coefficients(const Chart& chart, const JumpDiffusionModel& model) {
  auto chart_ptr = std::make_shared<const Chart>(chart);
  auto inverse = std::make_shared<ChartInverse>(*chart_ptr);
  auto model_ptr = std::make_shared<JumpDiffusionModel>(model);

  ChartModel cm;
  cm.chart = chart_ptr;

  cm.Theta = [inverse, model_ptr, chart_ptr](const Vec& y) {
    const Vec h = chart_ptr->phi(y);
    const Mat Dg = inverse->jacobian(h, y);

    Vec theta = Dg * (model_ptr->A * h + model_ptr->alpha(h));
    for (const DiffusionField& sigma : model_ptr->sigmas)
      theta += 0.5 * inverse->second_directional(h, y, sigma.value(h));

    if (!model_ptr->levy.components.empty()) {
      theta += integrate(model_ptr->levy, chart_ptr->dim_domain, [&](const Vec& x) {
        const Vec jump = model_ptr->gamma(h, x);
        return (inverse->value(h + jump, y) - y - Dg * jump).eval();
      });
    }
    return theta;
  };

  for (size_t j = 0; j < model.sigmas.size(); ++j) {
    cm.Sigmas.push_back([inverse, model_ptr, chart_ptr, j](const Vec& y) {
      const Vec h = chart_ptr->phi(y);
      return inverse->directional(h, y, model_ptr->sigmas[j].value(h));
    });
  }

  cm.Gamma = [inverse, model_ptr, chart_ptr](const Vec& y, const Vec& x) {
    const Vec h = chart_ptr->phi(y);
    return (inverse->value(h + model_ptr->gamma(h, x), y) - y).eval();
  };

  return cm;
}

Vec half_space_projection(const Vec& y, bool has_boundary) {
  if (!has_boundary || y.size() == 0 || y[0] >= 0.0) return y;
  Vec out = y;
  out[0] = 0.0;
  return out;
}

ChartModel project_chart_model(const ChartModel& cm) {
  const bool hb = cm.chart && cm.chart->has_boundary;
  ChartModel out;
  out.chart = cm.chart;
  out.projected = true;

  auto theta = cm.Theta;
  out.Theta = [theta, hb](const Vec& y) { return theta(half_space_projection(y, hb)); };
  for (const auto& sigma : cm.Sigmas)
    out.Sigmas.push_back([sigma, hb](const Vec& y) { return sigma(half_space_projection(y, hb)); });
  auto gamma = cm.Gamma;
  out.Gamma = [gamma, hb](const Vec& y, const Vec& x) {
    return gamma(half_space_projection(y, hb), x);
  };
  return out;
}

}  // namespace ijd
