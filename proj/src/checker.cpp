#include "ijd/checker.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>

namespace ijd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ConditionEntry make_entry(std::string id, std::string name, const Vec& point, double residual,
                          Verdict verdict, std::string note = {}, double margin = kNaN) {
  ConditionEntry e;
  e.id = std::move(id);
  e.name = std::move(name);
  e.point = point;
  e.residual = residual;
  e.margin = margin;
  e.verdict = verdict;
  e.note = std::move(note);
  return e;
}

std::vector<Vec> all_points(const SamplePlan& plan) {
  std::vector<Vec> pts = plan.interior_points;
  pts.insert(pts.end(), plan.boundary_points.begin(), plan.boundary_points.end());
  return pts;
}

/// Marks exercised by the pointwise jump checks: the plan's explicit lists
/// plus a shared batch of measure-distributed random marks.
std::vector<Vec> gather_marks(const JumpDiffusionModel& model, const SamplePlan& plan) {
  const int e = model.mark_dim();
  std::vector<Vec> marks;
  for (int k = 0; k < e && k < static_cast<int>(plan.quad_marks.size()); ++k) {
    for (double xi : plan.quad_marks[k]) {
      Vec x = Vec::Zero(e);
      x[k] = xi;
      marks.push_back(std::move(x));
    }
  }
  bool finite = true;
  for (const LevyComponent& c : model.levy.components)
    if (classify(c).kind != ActivityKind::A) finite = false;
  const SampleRegion region = finite ? SampleRegion::all : SampleRegion::complement_of_b;
  auto random_marks =
      sample_marks(model.levy, region, plan.split_epsilon, plan.n_random_marks, plan.seed);
  marks.insert(marks.end(), random_marks.begin(), random_marks.end());
  return marks;
}

double fd_mark_step() { return num::fd_step; }

}  // namespace

std::vector<std::vector<double>> default_quad_marks(const LevyMeasure& F, int per_side) {
  std::vector<std::vector<double>> marks(F.components.size());
  for (size_t k = 0; k < F.components.size(); ++k) {
    const LevyComponent& c = F.components[k];
    for (const auto& [loc, mass] : c.atoms) {
      (void)mass;
      marks[k].push_back(loc);
    }
    if (!c.has_density()) continue;
    const double inner = std::max(c.inner_cutoff, 1e-8);
    if (c.support_hi > inner) {
      const double lo = std::log(inner), hi = std::log(c.support_hi);
      for (int i = 0; i < per_side; ++i)
        marks[k].push_back(std::exp(lo + (i + 0.5) * (hi - lo) / per_side));
    }
    if (-c.support_lo > inner) {
      const double lo = std::log(inner), hi = std::log(-c.support_lo);
      for (int i = 0; i < per_side; ++i)
        marks[k].push_back(-std::exp(lo + (i + 0.5) * (hi - lo) / per_side));
    }
  }
  return marks;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::not_applicable: return "not-applicable";
  }
  return "?";
}

void ConditionReport::recompute_summary() {
  summary_pass = true;
  strict_pass = true;
  for (const ConditionEntry& e : entries) {
    if (e.verdict != Verdict::fail) continue;
    if (e.id == "(4s)") {
      strict_pass = false;
    } else {
      summary_pass = false;
      strict_pass = false;
    }
  }
}

std::vector<ConditionEntry> check_sigma_tangency(const JumpDiffusionModel& model,
                                                 const Chart& chart, const SamplePlan& plan) {
  std::vector<ConditionEntry> out;
  for (const Vec& y : all_points(plan)) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    double residual = 0.0;
    double scale = 0.0;
    for (const DiffusionField& sigma : model.sigmas) {
      const Vec s = sigma.value(h);
      double r = normal_part(frame, s).norm();
      if (frame.is_boundary) r += std::abs(frame.inward_normal.dot(s));
      residual = std::max(residual, r);
      scale = std::max(scale, s.norm());
    }
    const bool ok = residual <= plan.tolerances.tangency * (1.0 + scale);
    out.push_back(make_entry("(3)", "sigma-tangency", y, residual,
                             ok ? Verdict::pass : Verdict::fail));
  }
  return out;
}

std::vector<ConditionEntry> check_jump_closure(const JumpDiffusionModel& model, const Chart& chart,
                                               const SamplePlan& plan) {
  std::vector<ConditionEntry> out;
  const std::vector<Vec> marks = gather_marks(model, plan);
  const double strict_face_tol = 1e-9;

  for (const Vec& y : all_points(plan)) {
    const Vec h = chart.phi(y);
    double residual = 0.0;
    double strict_residual = 0.0;
    for (const Vec& x : marks) {
      const Vec target = h + model.gamma(h, x);

      InvertOptions warm;
      warm.clamp_box = true;
      InvertResult best = try_invert_chart(chart, target, y, warm);
      if (!best.converged || best.residual > plan.tolerances.closure)
        best = closest_point(chart, target);
      residual = std::max(residual, best.residual);

      // strict variant: the landing parameter must stay off open faces
      double strict = best.residual;
      const Box& box = chart.domain_box;
      for (int i = 0; i < box.dim(); ++i) {
        const bool olo = i < static_cast<int>(box.open_lo.size()) && box.open_lo[i];
        const bool ohi = i < static_cast<int>(box.open_hi.size()) && box.open_hi[i];
        if (olo && best.y[i] - box.lo[i] <= strict_face_tol)
          strict = std::max(strict, plan.tolerances.closure * 10.0 + 1.0);
        if (ohi && box.hi[i] - best.y[i] <= strict_face_tol)
          strict = std::max(strict, plan.tolerances.closure * 10.0 + 1.0);
      }
      strict_residual = std::max(strict_residual, strict);
    }
    out.push_back(make_entry("(4)", "jump-closure", y, residual,
                             residual <= plan.tolerances.closure ? Verdict::pass : Verdict::fail));
    out.push_back(make_entry("(4s)", "jump-membership-strict", y, strict_residual,
                             strict_residual <= plan.tolerances.closure ? Verdict::pass
                                                                        : Verdict::fail));
  }
  return out;
}

std::vector<ConditionEntry> check_fv_drift(const JumpDiffusionModel& model, const Chart& chart,
                                           const SamplePlan& plan) {
  std::vector<ConditionEntry> out;

  bool applicable = true;
  std::string na_note;
  for (const LevyComponent& c : model.levy.components) {
    if (classify(c).kind == ActivityKind::C) {
      applicable = false;
      na_note = "jumps have infinite variation; use the general drift conditions";
    }
  }
  if (applicable && !plan.interior_points.empty()) {
    const Vec h0 = chart.phi(plan.interior_points.front());
    if (!integral_decays(model.levy, [&](const Vec& x) { return model.gamma(h0, x).norm(); })) {
      applicable = false;
      na_note = "|gamma| is not F-integrable at the sample point; use the general drift conditions";
    }
  }

  for (const Vec& y : all_points(plan)) {
    if (!applicable) {
      out.push_back(make_entry("(5)", "fv-drift-tangency", y, 0.0, Verdict::not_applicable,
                               na_note));
      continue;
    }
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    Vec v;
    try {
      const Vec comp = integrate(model.levy, model.dim,
                                 [&](const Vec& x) { return model.gamma(h, x); });
      v = model.A * h + model.alpha(h) - stratonovich_correction(model, h) - comp;
    } catch (const NonIntegrableError& err) {
      out.push_back(make_entry("(5)", "fv-drift-tangency", y, 0.0, Verdict::not_applicable,
                               err.what()));
      continue;
    }
    const double tangency = normal_part(frame, v).norm();
    if (!frame.is_boundary) {
      const bool ok = tangency <= plan.tolerances.tangency * (1.0 + v.norm());
      out.push_back(make_entry("(5)", "fv-drift-tangency", y, tangency,
                               ok ? Verdict::pass : Verdict::fail));
    } else {
      const double margin = frame.inward_normal.dot(v);
      const bool ok = tangency <= plan.tolerances.tangency * (1.0 + v.norm()) &&
                      margin >= -plan.tolerances.inequality;
      out.push_back(make_entry("(5)", "fv-drift-inward", y,
                               tangency + std::max(0.0, -margin),
                               ok ? Verdict::pass : Verdict::fail, {}, margin));
    }
  }
  return out;
}

std::vector<ConditionEntry> check_general_drift(const JumpDiffusionModel& model,
                                                const Chart& chart, const SamplePlan& plan) {
  std::vector<ConditionEntry> out;

  // (6): shell decay of the |<eta, gamma>| integral at boundary points
  std::vector<bool> boundary_integrable(plan.boundary_points.size(), true);
  for (size_t i = 0; i < plan.boundary_points.size(); ++i) {
    const Vec& y = plan.boundary_points[i];
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    const Vec eta = frame.inward_normal;
    IntegralDiagnostics diag;
    bool decayed = true;
    try {
      integrate_scalar(model.levy, [&](const Vec& x) { return std::abs(eta.dot(model.gamma(h, x))); },
                       MarkRegion::all(), &diag);
      decayed = diag.inner_decayed;
    } catch (const NonIntegrableError&) {
      decayed = false;
    }
    boundary_integrable[i] = decayed;
    out.push_back(make_entry("(6)", "boundary-jump-variation", y,
                             decayed ? 0.0 : std::max(diag.worst_inner_ratio, 0.9),
                             decayed ? Verdict::pass : Verdict::fail,
                             decayed ? "" : "shell sums of the eta-component do not decay"));
  }

  // (7): tangency of the drift corrected by the normal jump component
  for (const Vec& y : all_points(plan)) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    try {
      const Vec perp_comp = integrate(model.levy, model.dim, [&](const Vec& x) {
        return normal_part(frame, model.gamma(h, x));
      });
      const Vec w = model.A * h + model.alpha(h) - stratonovich_correction(model, h) - perp_comp;
      const double residual = normal_part(frame, w).norm();
      const bool ok = residual <= plan.tolerances.tangency * (1.0 + w.norm());
      out.push_back(make_entry("(7)", "drift-tangency", y, residual,
                               ok ? Verdict::pass : Verdict::fail));
    } catch (const NonIntegrableError&) {
      // non-summable normal jump component contradicts the closure condition
      out.push_back(make_entry("(4)", "jump-closure", y, 1.0, Verdict::fail,
                               "normal jump component is not F-integrable, which closure forbids"));
      out.push_back(make_entry("(7)", "drift-tangency", y, 0.0, Verdict::not_applicable,
                               "normal jump integral diverges"));
    }
  }

  // (8): inward inequality for the eta-component at boundary points
  for (size_t i = 0; i < plan.boundary_points.size(); ++i) {
    const Vec& y = plan.boundary_points[i];
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    const Vec eta = frame.inward_normal;
    if (!boundary_integrable[i]) {
      out.push_back(make_entry("(8)", "boundary-drift-inward", y, 0.0, Verdict::not_applicable,
                               "eta-component of the jump integral is not summable"));
      continue;
    }
    const double jump_part =
        integrate_scalar(model.levy, [&](const Vec& x) { return eta.dot(model.gamma(h, x)); });
    double strat = 0.0;
    for (const DiffusionField& sigma : model.sigmas)
      strat += 0.5 * eta.dot(diffusion_jacobian(sigma, h) * sigma.value(h));
    const double margin = eta.dot(model.A * h + model.alpha(h)) - strat - jump_part;
    const bool ok = margin >= -plan.tolerances.inequality;
    out.push_back(make_entry("(8)", "boundary-drift-inward", y, std::max(0.0, -margin),
                             ok ? Verdict::pass : Verdict::fail, {}, margin));
  }
  return out;
}

std::vector<ConditionEntry> check_levy_conditions(const JumpDiffusionModel& model,
                                                  const Chart& chart, const SamplePlan& plan) {
  if (!model.decomposition)
    throw MissingDecompositionError("componentwise jump conditions need gamma = Delta + sum delta_k x_k");
  const auto& dec = *model.decomposition;
  const int e = model.mark_dim();

  std::vector<ActivityClass> classes;
  for (const LevyComponent& c : model.levy.components) classes.push_back(classify(c));

  std::vector<ConditionEntry> out;

  // (34): delta_k tangent to the boundary for infinite-variation components
  for (const Vec& y : plan.boundary_points) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    for (int k = 0; k < e; ++k) {
      if (classes[k].kind != ActivityKind::C) continue;
      const Vec dk = dec.deltas[k](h);
      const double residual =
          normal_part(frame, dk).norm() + std::abs(frame.inward_normal.dot(dk));
      const bool ok = residual <= plan.tolerances.tangency * (1.0 + dk.norm());
      out.push_back(make_entry("(34)", "delta-boundary-tangency[k=" + std::to_string(k) + "]", y,
                               residual, ok ? Verdict::pass : Verdict::fail));
    }
  }

  // (35): drift corrected by Delta and the finite-variation delta moments
  std::vector<double> first_moment(e, 0.0);
  for (int k = 0; k < e; ++k) {
    if (classes[k].kind == ActivityKind::C) continue;
    LevyMeasure single{{model.levy.components[k]}};
    first_moment[k] = integrate_scalar(single, [](const Vec& x) { return x[0]; });
  }
  for (const Vec& y : all_points(plan)) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    Vec jump_part = integrate(model.levy, model.dim,
                              [&](const Vec& x) { return dec.Delta(h, x); });
    for (int k = 0; k < e; ++k) {
      if (classes[k].kind == ActivityKind::C) continue;
      jump_part += first_moment[k] * dec.deltas[k](h);
    }
    const Vec v = model.A * h + model.alpha(h) - stratonovich_correction(model, h) - jump_part;
    const double tangency = normal_part(frame, v).norm();
    if (!frame.is_boundary) {
      const bool ok = tangency <= plan.tolerances.tangency * (1.0 + v.norm());
      out.push_back(make_entry("(35)", "decomposed-drift-tangency", y, tangency,
                               ok ? Verdict::pass : Verdict::fail));
    } else {
      const double margin = frame.inward_normal.dot(v);
      const bool ok = tangency <= plan.tolerances.tangency * (1.0 + v.norm()) &&
                      margin >= -plan.tolerances.inequality;
      out.push_back(make_entry("(35)", "decomposed-drift-inward", y,
                               tangency + std::max(0.0, -margin),
                               ok ? Verdict::pass : Verdict::fail, {}, margin));
    }
  }

  // (37): tangent-cone placement of delta_k by activity class and support side
  for (const Vec& y : all_points(plan)) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    for (int k = 0; k < e; ++k) {
      const ActivityClass& ac = classes[k];
      if (ac.kind == ActivityKind::A) continue;
      const Vec dk = dec.deltas[k](h);
      const std::string label = "delta-tangency[k=" + std::to_string(k) + "]";
      if (!frame.is_boundary) {
        const double residual = normal_part(frame, dk).norm();
        const bool ok = residual <= plan.tolerances.tangency * (1.0 + dk.norm());
        out.push_back(
            make_entry("(37)", label, y, residual, ok ? Verdict::pass : Verdict::fail));
        continue;
      }
      if (ac.kind == ActivityKind::B && ac.sub == BSubclass::b_plus) {
        const double sign =
            (model.levy.components[k].support == SupportSign::negative) ? -1.0 : 1.0;
        const double tangency = normal_part(frame, dk).norm();
        const double margin = sign * frame.inward_normal.dot(dk);
        const bool ok = tangency <= plan.tolerances.tangency * (1.0 + dk.norm()) &&
                        margin >= -plan.tolerances.inequality;
        out.push_back(make_entry("(37)", label, y, tangency + std::max(0.0, -margin),
                                 ok ? Verdict::pass : Verdict::fail, {}, margin));
      } else {
        // two-sided (B) and infinite-variation components pin delta to the boundary tangent
        const double residual =
            normal_part(frame, dk).norm() + std::abs(frame.inward_normal.dot(dk));
        const bool ok = residual <= plan.tolerances.tangency * (1.0 + dk.norm());
        out.push_back(
            make_entry("(37)", label, y, residual, ok ? Verdict::pass : Verdict::fail));
      }
    }
  }
  return out;
}

std::vector<ConditionEntry> check_diff_tangency(const JumpDiffusionModel& model,
                                                const Chart& chart, const SamplePlan& plan) {
  std::vector<ConditionEntry> out;
  const int e = model.mark_dim();
  const Vec zero_mark = Vec::Zero(e);

  for (const Vec& y : all_points(plan)) {
    const TangentFrame frame = tangent_frame(chart, y);
    const Vec h = frame.base_point;
    if (model.gamma(h, zero_mark).norm() > 1e-10) {
      out.push_back(make_entry("(D)", "mark-derivative-tangency", y, 0.0,
                               Verdict::not_applicable, "gamma(h, 0) does not vanish here"));
      continue;
    }
    for (int k = 0; k < e; ++k) {
      const SupportSign side = model.levy.components[k].support;
      const double t = fd_mark_step();
      Vec xp = zero_mark, xm = zero_mark;
      xp[k] += t;
      xm[k] -= t;
      Vec D = (model.gamma(h, xp) - model.gamma(h, xm)) / (2.0 * t);
      if (side == SupportSign::negative) D = -D;  // approach from the support side

      const std::string label = "mark-derivative-tangency[k=" + std::to_string(k) + "]";
      if (!frame.is_boundary) {
        const double residual = normal_part(frame, D).norm();
        const bool ok = residual <= 1e-6 * (1.0 + D.norm());
        out.push_back(make_entry("(D)", label, y, residual, ok ? Verdict::pass : Verdict::fail));
      } else if (side == SupportSign::two_sided) {
        const double residual =
            normal_part(frame, D).norm() + std::abs(frame.inward_normal.dot(D));
        const bool ok = residual <= 1e-6 * (1.0 + D.norm());
        out.push_back(make_entry("(D)", label, y, residual, ok ? Verdict::pass : Verdict::fail));
      } else {
        const double tangency = normal_part(frame, D).norm();
        const double margin = frame.inward_normal.dot(D);
        const bool ok = tangency <= 1e-6 * (1.0 + D.norm()) && margin >= -1e-6;
        out.push_back(make_entry("(D)", label, y, tangency + std::max(0.0, -margin),
                                 ok ? Verdict::pass : Verdict::fail, {}, margin));
      }
    }
  }
  return out;
}

std::vector<ConditionEntry> check_ou_cone(const JumpDiffusionModel& model, const Mat& cone_basis,
                                          const SamplePlan& plan) {
  std::vector<ConditionEntry> out;
  const int d = model.dim;
  const int m = static_cast<int>(cone_basis.cols());
  const Vec empty;

  Vec h_ref = Vec::Zero(d);
  for (int i = 0; i < m; ++i) h_ref += cone_basis.col(i);

  // cone coordinates by least squares against the basis
  const Mat pinv =
      (cone_basis.transpose() * cone_basis).ldlt().solve(cone_basis.transpose()).eval();
  auto cone_residual = [&](const Vec& v) {
    const Vec c = pinv * v;
    const double span_res = (v - cone_basis * c).norm();
    const double neg = c.size() > 0 ? std::max(0.0, -c.minCoeff()) : 0.0;
    return span_res + neg;
  };

  {
    double residual = 0.0;
    for (const DiffusionField& sigma : model.sigmas)
      residual = std::max(residual, sigma.value(h_ref).norm());
    out.push_back(make_entry("(OU-sigma)", "zero-diffusion", empty, residual,
                             residual <= plan.tolerances.tangency ? Verdict::pass : Verdict::fail));
  }

  {
    double residual = 0.0;
    for (const Vec& x : gather_marks(model, plan))
      residual = std::max(residual, cone_residual(model.gamma(h_ref, x)));
    out.push_back(make_entry("(OU-jumps)", "jumps-in-cone", empty, residual,
                             residual <= plan.tolerances.tangency * 10.0 ? Verdict::pass
                                                                         : Verdict::fail));
  }

  try {
    const Vec comp = integrate(model.levy, d, [&](const Vec& x) { return model.gamma(h_ref, x); });
    const double residual = cone_residual(model.alpha(h_ref) - comp);
    out.push_back(make_entry("(OU-drift)", "compensated-drift-in-cone", empty, residual,
                             residual <= plan.tolerances.tangency * 10.0 ? Verdict::pass
                                                                         : Verdict::fail));
  } catch (const NonIntegrableError& err) {
    out.push_back(
        make_entry("(OU-drift)", "compensated-drift-in-cone", empty, 1.0, Verdict::fail,
                   std::string("jump compensator is not summable: ") + err.what()));
  }

  {
    double residual = 0.0;
    for (int i = 0; i < m; ++i) {
      const Vec av = model.A * cone_basis.col(i);
      residual = std::max(residual, (av - cone_basis * (pinv * av)).norm());
    }
    out.push_back(make_entry("(OU-AV)", "span-invariant-under-A", empty, residual,
                             residual <= plan.tolerances.tangency ? Verdict::pass : Verdict::fail));
  }

  {
    // exp(tA) restricted to the span, in cone coordinates
    const Mat A_cone = pinv * model.A * cone_basis;
    double worst = 0.0;
    for (int p = -10; p <= 4; ++p) {
      const double t = std::pow(2.0, p);
      const Mat E = (t * A_cone).exp();
      worst = std::max(worst, std::max(0.0, -E.minCoeff()));
    }
    out.push_back(make_entry("(OU-semigroup)", "cone-invariant-under-exp-tA", empty, worst,
                             worst <= plan.tolerances.inequality * 100.0 ? Verdict::pass
                                                                         : Verdict::fail));
  }
  return out;
}

ConditionReport run_full_report(const JumpDiffusionModel& model, const Chart& chart,
                                const SamplePlan& plan) {
  ConditionReport report;
  report.seed = plan.seed;
  report.tolerances = plan.tolerances;

  report.entries.push_back(make_entry(
      "(2)", "generator-domain", Vec(), 0.0, Verdict::pass,
      "generator is a bounded matrix; the domain condition holds by construction"));

  auto run = [&](auto&& fn) {
    try {
      auto entries = fn();
      report.entries.insert(report.entries.end(), entries.begin(), entries.end());
    } catch (const Error& err) {
      report.entries.push_back(
          make_entry("(error)", "check-aborted", Vec(), 1.0, Verdict::fail, err.what()));
    }
  };

  run([&] { return check_sigma_tangency(model, chart, plan); });
  run([&] { return check_jump_closure(model, chart, plan); });
  run([&] { return check_fv_drift(model, chart, plan); });
  run([&] { return check_general_drift(model, chart, plan); });
  if (model.decomposition) {
    run([&] { return check_levy_conditions(model, chart, plan); });
    run([&] { return check_diff_tangency(model, chart, plan); });
  }

  report.recompute_summary();
  return report;
}

}  // namespace ijd
