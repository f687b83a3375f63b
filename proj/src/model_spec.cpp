#include "ijd/model_spec.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace ijd {

namespace {

Mat rotation_generator() {
  Mat rot(2, 2);
  rot << 0.0, 1.0, -1.0, 0.0;
  return rot;
}

Vec vec_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw SpecError(where + ": expected an array of numbers");
  Vec v(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw SpecError(where + ": expected an array of numbers");
    v[static_cast<int>(i)] = arr[i].get<double>();
    if (!std::isfinite(v[static_cast<int>(i)]))
      throw SpecError(where + ": all numeric fields must be finite");
  }
  return v;
}

Mat mat_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array() || arr.empty()) throw SpecError(where + ": expected a matrix (array of rows)");
  const size_t cols = arr[0].size();
  Mat m(arr.size(), cols);
  for (size_t r = 0; r < arr.size(); ++r) {
    const Vec row = vec_from_json(arr[r], where);
    if (static_cast<size_t>(row.size()) != cols) throw SpecError(where + ": ragged matrix rows");
    m.row(static_cast<int>(r)) = row.transpose();
  }
  return m;
}

double get_num(const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw SpecError("field '" + key + "' must be a number");
  const double v = obj[key].get<double>();
  if (!std::isfinite(v)) throw SpecError("field '" + key + "' must be finite");
  return v;
}

SupportSign support_from_string(const std::string& s) {
  if (s == "positive") return SupportSign::positive;
  if (s == "negative") return SupportSign::negative;
  if (s == "two_sided") return SupportSign::two_sided;
  throw SpecError("levy support must be positive, negative or two_sided");
}

}  // namespace

LevyMeasure make_levy(const json& spec) {
  LevyMeasure F;
  if (!spec.contains("components") || !spec["components"].is_array())
    throw SpecError("levy: expected {\"components\": [...]}");
  for (const json& cj : spec["components"]) {
    LevyComponent c;
    c.beta = get_num(cj, "beta", 0.0);
    if (c.beta < 0.0 || c.beta >= 3.0) throw SpecError("levy beta must lie in [0, 3)");
    c.support = support_from_string(cj.value("support", "two_sided"));

    if (cj.contains("atoms")) {
      for (const json& a : cj["atoms"]) {
        if (!a.is_array() || a.size() != 2) throw SpecError("levy atoms must be [location, mass] pairs");
        const double loc = a[0].get<double>();
        const double mass = a[1].get<double>();
        if (loc == 0.0) throw SpecError("levy atoms may not sit at zero");
        if (!(mass > 0.0) || !std::isfinite(loc) || !std::isfinite(mass))
          throw SpecError("levy atom entries must be finite with positive mass");
        c.atoms.push_back({loc, mass});
      }
    }

    if (cj.contains("density")) {
      const json& dj = cj["density"];
      const std::string kind = dj.value("kind", "");
      const json params = dj.value("params", json::object());
      const double scale = get_num(params, "c", 1.0);
      const double x_min = get_num(params, "x_min", 0.0);

      if (kind == "power") {
        const double x_max = get_num(params, "x_max", 1.0);
        const double beta = c.beta;
        c.density = [scale, beta](double x) { return scale * std::pow(std::abs(x), -1.0 - beta); };
        c.inner_cutoff = x_min;
        c.support_lo = (c.support == SupportSign::positive) ? 0.0 : -x_max;
        c.support_hi = (c.support == SupportSign::negative) ? 0.0 : x_max;
      } else if (kind == "exp_tilted") {
        const double lambda = get_num(params, "lambda", 1.0);
        c.density = [scale, lambda](double x) { return scale * std::exp(-lambda * std::abs(x)); };
        c.inner_cutoff = x_min;
        const double x_max = get_num(params, "x_max", std::numeric_limits<double>::infinity());
        c.support_lo = (c.support == SupportSign::positive) ? 0.0 : -x_max;
        c.support_hi = (c.support == SupportSign::negative) ? 0.0 : x_max;
      } else if (kind == "uniform") {
        const double x_max = get_num(params, "x_max", M_PI);
        c.density = [scale](double) { return scale; };
        c.inner_cutoff = x_min;
        c.support_lo = (c.support == SupportSign::positive) ? 0.0 : -x_max;
        c.support_hi = (c.support == SupportSign::negative) ? 0.0 : x_max;
      } else {
        throw SpecError("levy density kind must be power, exp_tilted or uniform");
      }
    }
    if (!c.has_density() && c.atoms.empty())
      throw SpecError("levy component needs a density or at least one atom");
    F.components.push_back(std::move(c));
  }
  return F;
}

Chart make_chart(const json& spec) {
  const std::string name = spec.value("builtin", spec.contains("affine") ? "affine" : "");

  if (name == "circle") {
    Chart chart;
    chart.dim_domain = 1;
    chart.dim_ambient = 2;
    chart.phi = [](const Vec& y) {
      Vec h(2);
      h << std::cos(y[0]), std::sin(y[0]);
      return h;
    };
    chart.jacobian = [](const Vec& y) {
      Mat J(2, 1);
      J << -std::sin(y[0]), std::cos(y[0]);
      return J;
    };
    Vec lo(1), hi(1);
    lo << 0.0;
    hi << 2.0 * M_PI;
    chart.domain_box = Box::closed(lo, hi);
    chart.has_boundary = false;
    return chart;
  }

  if (name == "ball_annulus") {
    const double r_min = get_num(spec, "r_min", 0.05);
    Chart chart;
    chart.dim_domain = 2;
    chart.dim_ambient = 2;
    chart.phi = [](const Vec& y) {
      const double r = 1.0 - y[0];
      Vec h(2);
      h << r * std::cos(y[1]), r * std::sin(y[1]);
      return h;
    };
    chart.jacobian = [](const Vec& y) {
      const double r = 1.0 - y[0];
      Mat J(2, 2);
      J << -std::cos(y[1]), -r * std::sin(y[1]), -std::sin(y[1]), r * std::cos(y[1]);
      return J;
    };
    Vec lo(2), hi(2);
    lo << 0.0, 0.0;
    hi << 1.0 - r_min, 2.0 * M_PI;
    chart.domain_box = Box::closed(lo, hi);
    chart.has_boundary = true;
    return chart;
  }

  if (name == "cone") {
    const Mat basis = mat_from_json(spec.at("basis"), "chart.basis");
    const double extent = get_num(spec, "extent", 50.0);
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

  if (name == "interval") {
    const double lo_v = get_num(spec, "lo", 0.0);
    const double hi_v = get_num(spec, "hi", 1e6);
    const bool open_hi = spec.value("open_hi", false);
    Chart chart;
    chart.dim_domain = 1;
    chart.dim_ambient = 1;
    chart.phi = [lo_v](const Vec& y) {
      Vec h(1);
      h << lo_v + y[0];
      return h;
    };
    chart.jacobian = [](const Vec&) {
      Mat J(1, 1);
      J << 1.0;
      return J;
    };
    Vec lo(1), hi(1);
    lo << 0.0;
    hi << hi_v - lo_v;
    chart.domain_box = Box::closed(lo, hi);
    if (open_hi) chart.domain_box.open_hi = {true};
    chart.has_boundary = true;
    return chart;
  }

  if (name == "affine") {
    const json& aff = spec.contains("affine") ? spec["affine"] : spec;
    const Mat basis = mat_from_json(aff.at("basis"), "chart.affine.basis");
    Vec offset = Vec::Zero(basis.rows());
    if (aff.contains("offset")) offset = vec_from_json(aff["offset"], "chart.affine.offset");
    const double extent = get_num(aff, "extent", 100.0);
    Chart chart;
    chart.dim_domain = static_cast<int>(basis.cols());
    chart.dim_ambient = static_cast<int>(basis.rows());
    chart.phi = [basis, offset](const Vec& y) { return (offset + basis * y).eval(); };
    chart.jacobian = [basis](const Vec&) { return basis; };
    Vec lo = Vec::Constant(chart.dim_domain, -extent);
    Vec hi = Vec::Constant(chart.dim_domain, extent);
    chart.domain_box = Box::closed(lo, hi);
    chart.has_boundary = aff.value("has_boundary", false);
    if (chart.has_boundary) chart.domain_box.lo[0] = 0.0;
    return chart;
  }

  throw SpecError("unknown chart builtin '" + name +
                  "' (expected circle, ball_annulus, cone, interval or affine)");
}

namespace {

SamplePlan plan_from_json(const json& pj, const Chart& chart, const LevyMeasure& F,
                          std::vector<Vec> default_interior, std::vector<Vec> default_boundary) {
  SamplePlan plan;
  plan.interior_points = std::move(default_interior);
  plan.boundary_points = std::move(default_boundary);

  if (pj.contains("interior_points")) {
    plan.interior_points.clear();
    for (const json& p : pj["interior_points"])
      plan.interior_points.push_back(vec_from_json(p, "plan.interior_points"));
  } else if (pj.contains("n_interior")) {
    const int n = pj["n_interior"].get<int>();
    // resample the default layout at the requested count
    plan.interior_points.clear();
    const Box& box = chart.domain_box;
    const int m = box.dim();
    if (m == 1) {
      const double margin = 0.08 * (box.hi[0] - box.lo[0]);
      for (int i = 0; i < n; ++i) {
        Vec y(1);
        y[0] = box.lo[0] + margin + (i + 0.5) * (box.hi[0] - box.lo[0] - 2 * margin) / n;
        plan.interior_points.push_back(y);
      }
    } else {
      for (const Vec& y : grid_starts(box, n)) {
        Vec p = y;
        if (chart.has_boundary && p[0] <= chart.boundary_tol)
          p[0] = 0.1 * (box.hi[0] - box.lo[0]);
        plan.interior_points.push_back(p);
      }
    }
  }
  if (pj.contains("boundary_points")) {
    plan.boundary_points.clear();
    for (const json& p : pj["boundary_points"]) {
      Vec y = vec_from_json(p, "plan.boundary_points");
      if (y[0] != 0.0) throw SpecError("plan.boundary_points must have first coordinate 0");
      plan.boundary_points.push_back(y);
    }
  }
  for (const Vec& y : plan.interior_points)
    if (!chart.domain_box.contains(y))
      throw SpecError("plan point lies outside the chart domain box");

  plan.quad_marks = default_quad_marks(F);
  if (pj.contains("tolerances")) {
    const json& t = pj["tolerances"];
    plan.tolerances.tangency = get_num(t, "tangency_tol", plan.tolerances.tangency);
    plan.tolerances.inequality = get_num(t, "inequality_tol", plan.tolerances.inequality);
    plan.tolerances.closure = get_num(t, "closure_tol", plan.tolerances.closure);
  }
  plan.n_random_marks = static_cast<int>(get_num(pj, "n_random_marks", plan.n_random_marks));
  plan.seed = static_cast<std::uint64_t>(get_num(pj, "seed", static_cast<double>(plan.seed)));
  plan.split_epsilon = get_num(pj, "split_epsilon", plan.split_epsilon);
  return plan;
}

SimConfig sim_from_json(const json& sj) {
  SimConfig sim;
  sim.dt = get_num(sj, "dt", sim.dt);
  sim.horizon = get_num(sj, "horizon", sim.horizon);
  sim.n_paths = static_cast<int>(get_num(sj, "n_paths", sim.n_paths));
  sim.seed = static_cast<std::uint64_t>(get_num(sj, "seed", static_cast<double>(sim.seed)));
  sim.truncation_epsilon = get_num(sj, "truncation_epsilon", sim.truncation_epsilon);
  const std::string scheme = sj.value("scheme", "ambient");
  if (scheme == "ambient") {
    sim.scheme = Scheme::ambient;
  } else if (scheme == "chart" || scheme == "chart_projected") {
    sim.scheme = Scheme::chart_projected;
  } else {
    throw SpecError("sim.scheme must be ambient or chart");
  }
  if (!(sim.dt > 0.0) || sim.horizon < sim.dt) throw SpecError("sim needs dt > 0 and horizon >= dt");
  if (sim.n_paths <= 0) throw SpecError("sim.n_paths must be positive");
  return sim;
}

json default_levy_json(const std::string& model_name) {
  if (model_name == "circle") {
    return json{{"components",
                 {{{"atoms", {{1.0, 0.5}, {-1.0, 0.5}}}, {"beta", 0.0}, {"support", "two_sided"}}}}};
  }
  if (model_name == "ball") {
    return json{
        {"components", {{{"atoms", {{0.1, 1.0}}}, {"beta", 0.0}, {"support", "positive"}}}}};
  }
  if (model_name == "ou_cone") {
    return json{{"components",
                 {{{"atoms", {{1.0, 0.25}}}, {"beta", 0.0}, {"support", "positive"}},
                  {{"atoms", {{1.0, 0.25}}}, {"beta", 0.0}, {"support", "positive"}}}}};
  }
  if (model_name == "subordinator") {
    return json{
        {"components", {{{"atoms", {{1.0, 0.5}}}, {"beta", 0.0}, {"support", "positive"}}}}};
  }
  if (model_name == "hjm_affine_toy") {
    return json{{"components",
                 {{{"atoms", {{0.5, 0.5}, {-0.5, 0.5}}}, {"beta", 0.0}, {"support", "two_sided"}}}}};
  }
  throw UnknownExampleError("no builtin example named '" + model_name + "'");
}

ProblemInstance build_circle(const json& params, const LevyMeasure& F) {
  ProblemInstance inst;
  inst.name = "circle";
  inst.chart = make_chart(json{{"builtin", "circle"}});

  const Mat rot = rotation_generator();
  const double cos_correction =
      integrate_scalar(F, [](const Vec& x) { return std::cos(x[0]) - 1.0; });
  const double alpha_bump = get_num(params, "alpha_normal_bump", 0.0);
  const double sigma_bump = get_num(params, "sigma_normal_bump", 0.0);
  const double radial = 0.5 - cos_correction;

  JumpDiffusionModel& model = inst.model;
  model.dim = 2;
  model.A = Mat::Zero(2, 2);
  model.alpha = [rot, radial, alpha_bump](const Vec& h) {
    return (rot * h - radial * h + alpha_bump * h).eval();
  };
  DiffusionField sigma;
  sigma.value = [rot, sigma_bump](const Vec& h) { return (rot * h + sigma_bump * h).eval(); };
  sigma.jacobian = [rot, sigma_bump](const Vec&) {
    return (rot + sigma_bump * Mat::Identity(2, 2)).eval();
  };
  model.sigmas.push_back(sigma);
  model.gamma = [](const Vec& h, const Vec& x) {
    const double c = std::cos(x[0]), s = std::sin(x[0]);
    Vec out(2);
    out << (c - 1.0) * h[0] + s * h[1], -s * h[0] + (c - 1.0) * h[1];
    return out;
  };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [](const Vec& h, const Vec& x) {
    const double c = std::cos(x[0]) - 1.0, s = std::sin(x[0]) - x[0];
    Vec out(2);
    out << c * h[0] + s * h[1], -s * h[0] + c * h[1];
    return out;
  };
  dec.deltas = {[rot](const Vec& h) { return (rot * h).eval(); }};
  model.decomposition = dec;
  model.domain_radius = 100.0;
  model.lipschitz_bound = 2.0 + std::abs(radial) + std::abs(alpha_bump);

  for (int i = 0; i < 64; ++i) {
    Vec y(1);
    y[0] = 0.5 + (i + 0.5) * (2.0 * M_PI - 1.0) / 64.0;
    inst.plan.interior_points.push_back(y);
  }
  inst.plan.quad_marks = default_quad_marks(F);

  inst.y0 = Vec(1);
  inst.y0 << M_PI;
  inst.sim.dt = 1e-3;
  inst.sim.horizon = 1.0;
  inst.sim.n_paths = 200;
  inst.sim.seed = 20120205;
  return inst;
}

ProblemInstance build_ball(const json& params, const LevyMeasure& F) {
  ProblemInstance inst;
  inst.name = "ball";
  inst.chart = make_chart(json{{"builtin", "ball_annulus"}});

  const double a = get_num(params, "a", 0.25);
  if (a < 0.0) throw SpecError("ball parameter a must be nonnegative");
  const double m2 = integrate_scalar(F, [](const Vec& x) { return x[0] * x[0]; });
  const double pull = a + 0.5 + 2.0 * m2;
  const Mat rot = rotation_generator();

  JumpDiffusionModel& model = inst.model;
  model.dim = 2;
  model.A = Mat::Zero(2, 2);
  model.alpha = [pull](const Vec& h) { return (-pull * h).eval(); };
  DiffusionField sigma;
  sigma.value = [rot](const Vec& h) { return (rot * h).eval(); };
  sigma.jacobian = [rot](const Vec&) { return rot; };
  model.sigmas.push_back(sigma);
  model.gamma = [](const Vec& h, const Vec& x) { return (-2.0 * x[0] * x[0] * h).eval(); };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [](const Vec& h, const Vec& x) { return (-2.0 * x[0] * x[0] * h).eval(); };
  dec.deltas = {[](const Vec& h) { return Vec::Zero(h.size()).eval(); }};
  model.decomposition = dec;
  model.domain_radius = 100.0;
  model.lipschitz_bound = pull + 0.01;

  for (double r : {0.1, 0.3, 0.5, 0.7}) {
    for (int i = 0; i < 8; ++i) {
      Vec y(2);
      y << r, (i + 0.5) * 2.0 * M_PI / 8.0;
      inst.plan.interior_points.push_back(y);
    }
  }
  for (int i = 0; i < 16; ++i) {
    Vec y(2);
    y << 0.0, (i + 0.5) * 2.0 * M_PI / 16.0;
    inst.plan.boundary_points.push_back(y);
  }
  inst.plan.quad_marks = default_quad_marks(F);

  inst.y0 = Vec(2);
  inst.y0 << 0.0, M_PI / 4.0;
  inst.sim.dt = 1e-3;
  inst.sim.horizon = 1.0;
  inst.sim.n_paths = 200;
  inst.sim.seed = 20120205;
  return inst;
}

ProblemInstance build_ou_cone(const json& params, const LevyMeasure& F) {
  ProblemInstance inst;
  inst.name = "ou_cone";

  Mat A(2, 2);
  A << -1.0, 0.5, 0.0, -1.0;
  if (params.contains("A")) A = mat_from_json(params["A"], "params.A");
  Mat basis = Mat::Identity(A.rows(), A.rows());
  if (params.contains("cone_basis")) basis = mat_from_json(params["cone_basis"], "params.cone_basis");
  const int d = static_cast<int>(A.rows());
  const int e = F.mark_dim();
  if (static_cast<int>(basis.cols()) < 1 || basis.rows() != d)
    throw SpecError("cone basis must have ambient-dimension rows");

  json chart_spec;
  chart_spec["builtin"] = "cone";
  chart_spec["basis"] = json::array();
  for (int r = 0; r < d; ++r) {
    json row = json::array();
    for (int c = 0; c < basis.cols(); ++c) row.push_back(basis(r, c));
    chart_spec["basis"].push_back(row);
  }
  inst.chart = make_chart(chart_spec);

  // jump directions default to the cone edges
  std::vector<Vec> jump_dirs;
  if (params.contains("jump_dirs")) {
    for (const json& jd : params["jump_dirs"])
      jump_dirs.push_back(vec_from_json(jd, "params.jump_dirs"));
  } else {
    for (int k = 0; k < e; ++k) jump_dirs.push_back(basis.col(k % basis.cols()));
  }
  if (static_cast<int>(jump_dirs.size()) != e)
    throw SpecError("need one jump direction per levy component");

  JumpDiffusionModel& model = inst.model;
  model.dim = d;
  model.A = A;
  Vec jump_mean = Vec::Zero(d);
  {
    LevyMeasure FF = F;
    for (int k = 0; k < e; ++k) {
      LevyMeasure single{{FF.components[k]}};
      jump_mean += integrate_scalar(single, [](const Vec& x) { return x[0]; }) * jump_dirs[k];
    }
  }
  Vec alpha_vec = jump_mean + 0.5 * (basis.col(0) + basis.col(basis.cols() - 1));
  if (params.contains("alpha")) alpha_vec = vec_from_json(params["alpha"], "params.alpha");
  model.alpha = [alpha_vec](const Vec&) { return alpha_vec; };
  if (params.contains("sigma")) {
    const Vec sv = vec_from_json(params["sigma"], "params.sigma");
    DiffusionField sigma;
    sigma.value = [sv](const Vec&) { return sv; };
    sigma.jacobian = [d](const Vec&) { return Mat::Zero(d, d).eval(); };
    model.sigmas.push_back(sigma);
  }
  model.gamma = [jump_dirs, d](const Vec&, const Vec& x) {
    Vec out = Vec::Zero(d);
    for (int k = 0; k < static_cast<int>(jump_dirs.size()); ++k) out += x[k] * jump_dirs[k];
    return out;
  };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [d](const Vec&, const Vec&) { return Vec::Zero(d).eval(); };
  for (const Vec& jd : jump_dirs) dec.deltas.push_back([jd](const Vec&) { return jd; });
  model.decomposition = dec;
  model.domain_radius = 1e3;
  model.lipschitz_bound = 0.0;

  const int m = static_cast<int>(basis.cols());
  for (double c1 : {0.5, 1.0, 2.0}) {
    for (double c2 : {0.5, 1.0, 2.0}) {
      Vec y = Vec::Constant(m, c2);
      y[0] = c1;
      inst.plan.interior_points.push_back(y);
    }
  }
  for (double c : {0.5, 1.0, 2.0}) {
    Vec y = Vec::Constant(m, c);
    y[0] = 0.0;
    inst.plan.boundary_points.push_back(y);
  }
  inst.plan.quad_marks = default_quad_marks(F);

  inst.y0 = Vec::Constant(m, 0.5);
  inst.sim.dt = 1e-3;
  inst.sim.horizon = 2.0;
  inst.sim.n_paths = 200;
  inst.sim.seed = 20120205;
  return inst;
}

ProblemInstance build_subordinator(const json& params, const LevyMeasure& F) {
  ProblemInstance inst;
  inst.name = "subordinator";
  inst.chart = make_chart(json{{"builtin", "interval"}, {"hi", 1e6}});

  const double alpha = get_num(params, "alpha", 1.0);
  const double sigma_level = get_num(params, "sigma", 0.0);

  JumpDiffusionModel& model = inst.model;
  model.dim = 1;
  model.A = Mat::Zero(1, 1);
  model.alpha = [alpha](const Vec& h) { return Vec::Constant(h.size(), alpha).eval(); };
  if (sigma_level != 0.0) {
    DiffusionField sigma;
    sigma.value = [sigma_level](const Vec& h) {
      return Vec::Constant(h.size(), sigma_level).eval();
    };
    sigma.jacobian = [](const Vec&) { return Mat::Zero(1, 1).eval(); };
    model.sigmas.push_back(sigma);
  }
  model.gamma = [](const Vec&, const Vec& x) {
    Vec out(1);
    out << x[0];
    return out;
  };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [](const Vec&, const Vec&) { return Vec::Zero(1).eval(); };
  dec.deltas = {[](const Vec&) { return Vec::Ones(1).eval(); }};
  model.decomposition = dec;
  model.domain_radius = 1e5;
  model.lipschitz_bound = 1e-9;

  for (double v : {0.5, 1.0, 2.0, 5.0}) {
    Vec y(1);
    y << v;
    inst.plan.interior_points.push_back(y);
  }
  {
    Vec y(1);
    y << 0.0;
    inst.plan.boundary_points.push_back(y);
  }
  inst.plan.quad_marks = default_quad_marks(F);

  inst.y0 = Vec(1);
  inst.y0 << 1.0;
  inst.sim.dt = 1e-3;
  inst.sim.horizon = 1.0;
  inst.sim.n_paths = 1000;
  inst.sim.seed = 20120205;
  return inst;
}

ProblemInstance build_hjm_toy(const json& params, const LevyMeasure& F) {
  // Finite-dimensional illustration only: the forward-curve state is
  // truncated to d nodes and d/dxi is replaced by the nilpotent upper
  // shift, so this instance documents the affine-manifold mechanics and is
  // excluded from acceptance gating.
  ProblemInstance inst;
  inst.name = "hjm_affine_toy";
  const int d = static_cast<int>(get_num(params, "dim", 4.0));

  Mat A = Mat::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) A(i, i + 1) = 1.0;

  Mat basis(d, 2);
  for (int i = 0; i < d; ++i) {
    basis(i, 0) = std::pow(0.5, i);
    basis(i, 1) = (i == 0) ? 0.0 : std::pow(0.5, i - 1);
  }
  Vec offset = Vec::Constant(d, 0.1);

  json chart_spec;
  chart_spec["affine"]["basis"] = json::array();
  for (int r = 0; r < d; ++r)
    chart_spec["affine"]["basis"].push_back(json::array({basis(r, 0), basis(r, 1)}));
  chart_spec["affine"]["offset"] = json::array();
  for (int r = 0; r < d; ++r) chart_spec["affine"]["offset"].push_back(offset[r]);
  chart_spec["affine"]["extent"] = 10.0;
  inst.chart = make_chart(chart_spec);

  JumpDiffusionModel& model = inst.model;
  model.dim = d;
  model.A = A;
  const Vec b0 = basis.col(0);
  const Vec b1 = basis.col(1);
  model.alpha = [A, b0](const Vec& h) { return (0.05 * b0 - A * h).eval(); };
  DiffusionField sigma;
  sigma.value = [b1](const Vec&) { return b1; };
  sigma.jacobian = [d](const Vec&) { return Mat::Zero(d, d).eval(); };
  model.sigmas.push_back(sigma);
  model.gamma = [b0](const Vec&, const Vec& x) { return (x[0] * b0).eval(); };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [d](const Vec&, const Vec&) { return Vec::Zero(d).eval(); };
  dec.deltas = {[b0](const Vec&) { return b0; }};
  model.decomposition = dec;
  model.domain_radius = 1e3;

  for (double u : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
    for (double v : {-2.0, 0.0, 2.0}) {
      Vec y(2);
      y << u, v;
      inst.plan.interior_points.push_back(y);
    }
  }
  inst.plan.quad_marks = default_quad_marks(F);

  inst.y0 = Vec::Zero(2);
  inst.sim.dt = 1e-3;
  inst.sim.horizon = 1.0;
  inst.sim.n_paths = 100;
  inst.sim.seed = 20120205;
  return inst;
}

ProblemInstance build_affine(const json& params, const LevyMeasure& F, const json& chart_spec) {
  ProblemInstance inst;
  inst.name = "affine";
  if (chart_spec.is_null()) throw SpecError("affine model requires an explicit chart block");
  inst.chart = make_chart(chart_spec);
  const int d = inst.chart.dim_ambient;

  JumpDiffusionModel& model = inst.model;
  model.dim = d;
  model.A = params.contains("A") ? mat_from_json(params["A"], "model.A") : Mat::Zero(d, d).eval();
  const Vec alpha0 = params.contains("alpha0") ? vec_from_json(params["alpha0"], "model.alpha0")
                                               : Vec::Zero(d).eval();
  Mat alpha_lin = Mat::Zero(d, d);
  if (params.contains("alpha_lin")) alpha_lin = mat_from_json(params["alpha_lin"], "model.alpha_lin");
  model.alpha = [alpha0, alpha_lin](const Vec& h) { return (alpha0 + alpha_lin * h).eval(); };
  if (params.contains("sigmas")) {
    for (const json& sj : params["sigmas"]) {
      const Vec sv = vec_from_json(sj, "model.sigmas");
      DiffusionField sigma;
      sigma.value = [sv](const Vec&) { return sv; };
      sigma.jacobian = [d](const Vec&) { return Mat::Zero(d, d).eval(); };
      model.sigmas.push_back(sigma);
    }
  }
  std::vector<Vec> jump_dirs;
  if (params.contains("jump_dirs")) {
    for (const json& jd : params["jump_dirs"])
      jump_dirs.push_back(vec_from_json(jd, "model.jump_dirs"));
  }
  if (static_cast<int>(jump_dirs.size()) != F.mark_dim())
    throw SpecError("affine model needs one jump direction per levy component");
  model.gamma = [jump_dirs, d](const Vec&, const Vec& x) {
    Vec out = Vec::Zero(d);
    for (int k = 0; k < static_cast<int>(jump_dirs.size()); ++k) out += x[k] * jump_dirs[k];
    return out;
  };
  model.levy = F;
  LevyDecomposition dec;
  dec.Delta = [d](const Vec&, const Vec&) { return Vec::Zero(d).eval(); };
  for (const Vec& jd : jump_dirs) dec.deltas.push_back([jd](const Vec&) { return jd; });
  model.decomposition = dec;

  for (const Vec& y : grid_starts(inst.chart.domain_box, 8)) inst.plan.interior_points.push_back(y);
  inst.plan.quad_marks = default_quad_marks(F);
  inst.y0 = Vec::Zero(inst.chart.dim_domain);
  return inst;
}

}  // namespace

ProblemInstance builtin_example(const std::string& name, const json& params) {
  const json levy_spec = params.contains("levy") ? params["levy"] : default_levy_json(name);
  const LevyMeasure F = make_levy(levy_spec);

  ProblemInstance inst;
  if (name == "circle") {
    inst = build_circle(params, F);
  } else if (name == "ball") {
    inst = build_ball(params, F);
  } else if (name == "ou_cone") {
    inst = build_ou_cone(params, F);
  } else if (name == "subordinator") {
    inst = build_subordinator(params, F);
  } else if (name == "hjm_affine_toy") {
    inst = build_hjm_toy(params, F);
  } else {
    throw UnknownExampleError("no builtin example named '" + name + "'");
  }

  if (params.contains("chart")) inst.chart = make_chart(params["chart"]);
  if (params.contains("plan"))
    inst.plan = plan_from_json(params["plan"], inst.chart, F, inst.plan.interior_points,
                               inst.plan.boundary_points);
  if (params.contains("sim")) inst.sim = sim_from_json(params["sim"]);
  if (params.contains("initial")) inst.y0 = vec_from_json(params["initial"], "initial");
  return inst;
}

json builtin_spec_json(const std::string& name) {
  json doc;
  doc["spec_version"] = 1;
  std::string model_name;
  if (name == "circle") model_name = "circle_model";
  else if (name == "ball") model_name = "ball_model";
  else if (name == "ou_cone") model_name = "ou_cone";
  else if (name == "subordinator") model_name = "subordinator";
  else if (name == "hjm_affine_toy") model_name = "hjm_affine_toy";
  else throw UnknownExampleError("no builtin example named '" + name + "'");
  doc["model"] = {{"builtin", model_name}};
  doc["levy"] = default_levy_json(name);
  doc["sim"] = {{"dt", 1e-3}, {"horizon", 1.0}, {"n_paths", 200}, {"seed", 20120205},
                {"scheme", "ambient"}};
  return doc;
}

ProblemInstance load_spec(const json& doc) {
  if (!doc.is_object()) throw SpecError("specification must be a JSON object");
  if (doc.value("spec_version", 0) != 1) throw SpecError("spec_version must be 1");
  if (!doc.contains("model") || !doc["model"].is_object())
    throw SpecError("missing required object field 'model'");

  const json& mj = doc["model"];
  std::string builtin = mj.value("builtin", "");
  std::string example_name;
  if (builtin == "circle_model") example_name = "circle";
  else if (builtin == "ball_model") example_name = "ball";
  else if (builtin == "ou_cone") example_name = "ou_cone";
  else if (builtin == "subordinator") example_name = "subordinator";
  else if (builtin == "hjm_affine_toy") example_name = "hjm_affine_toy";
  else if (builtin == "affine") example_name = "affine";
  else throw SpecError("model.builtin must be one of circle_model, ball_model, ou_cone, "
                       "subordinator, hjm_affine_toy, affine");

  json params = mj.value("params", json::object());
  if (doc.contains("levy")) params["levy"] = doc["levy"];
  if (doc.contains("chart")) params["chart"] = doc["chart"];
  if (doc.contains("plan")) params["plan"] = doc["plan"];
  if (doc.contains("sim")) params["sim"] = doc["sim"];
  if (doc.contains("initial")) params["initial"] = doc["initial"];

  ProblemInstance inst;
  if (example_name == "affine") {
    const LevyMeasure F = make_levy(params.contains("levy") ? params["levy"]
                                                            : json(default_levy_json("circle")));
    inst = build_affine(params, F, params.value("chart", json()));
    if (params.contains("plan"))
      inst.plan = plan_from_json(params["plan"], inst.chart, F, inst.plan.interior_points,
                                 inst.plan.boundary_points);
    if (params.contains("sim")) inst.sim = sim_from_json(params["sim"]);
    if (params.contains("initial")) inst.y0 = vec_from_json(params["initial"], "initial");
  } else {
    inst = builtin_example(example_name, params);
  }
  return inst;
}

ProblemInstance load_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("cannot open specification file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const nlohmann::json::parse_error& err) {
    // recover the line number from the byte offset
    std::ifstream again(path);
    std::string text((std::istreambuf_iterator<char>(again)), std::istreambuf_iterator<char>());
    size_t line = 1;
    for (size_t i = 0; i < text.size() && i + 1 < err.byte; ++i)
      if (text[i] == '\n') ++line;
    throw SpecError(path + ":" + std::to_string(line) + ": " + err.what());
  }
  try {
    return load_spec(doc);
  } catch (const SpecError& err) {
    throw SpecError(path + ": " + err.what());
  }
}

VerdictBundle verify(const ProblemInstance& instance) {
  VerdictBundle bundle;
  bundle.report = run_full_report(instance.model, instance.chart, instance.plan);

  SimConfig chart_cfg = instance.sim;
  chart_cfg.scheme = Scheme::chart_projected;
  try {
    const PathEnsemble chart_ens =
        simulate_chart(instance.model, instance.chart, chart_cfg, instance.y0, instance.plan);
    bundle.chart_stats = distance_statistics(chart_ens, instance.chart);
    bundle.chart_scheme_ran = true;
  } catch (const Error& err) {
    bundle.chart_refusal = err.what();
  }

  const Vec h0 = instance.chart.phi(instance.y0);
  SimConfig ambient_cfg = instance.sim;
  ambient_cfg.scheme = Scheme::ambient;
  for (int level = 0; level < 3; ++level) {
    SimConfig cfg = ambient_cfg;
    cfg.dt = ambient_cfg.dt / std::pow(2.0, level);
    const PathEnsemble ens = simulate_ambient(instance.model, cfg, h0);
    const DistanceStats stats = distance_statistics(ens, instance.chart);
    bundle.convergence.push_back({cfg.dt, stats.mean_dist});
    if (level == 0) bundle.ambient_stats = stats;
  }

  if (bundle.report.summary_pass) {
    bool ok = bundle.chart_scheme_ran && bundle.chart_stats.max_dist < 1e-8 &&
              bundle.chart_stats.boundary_violations == 0;
    if (!ok) {
      bundle.agreement = false;
      bundle.discrepancy_note = bundle.chart_scheme_ran
                                    ? "conditions pass but the chart scheme left the manifold"
                                    : "conditions pass but the chart scheme refused to run: " +
                                          bundle.chart_refusal;
    }
    for (size_t i = 1; i < bundle.convergence.size(); ++i) {
      if (!(bundle.convergence[i].mean_max_dist < bundle.convergence[i - 1].mean_max_dist)) {
        bundle.agreement = false;
        bundle.discrepancy_note +=
            (bundle.discrepancy_note.empty() ? "" : "; ") +
            std::string("ambient mean max-distance does not shrink under dt halving");
        break;
      }
    }
  }
  return bundle;
}

json report_to_json(const ConditionReport& report) {
  json out;
  out["conditions"] = json::array();
  for (const ConditionEntry& e : report.entries) {
    json entry;
    entry["id"] = e.id;
    entry["name"] = e.name;
    entry["point"] = json::array();
    for (int i = 0; i < e.point.size(); ++i) entry["point"].push_back(e.point[i]);
    entry["residual"] = e.residual;
    if (std::isfinite(e.margin)) entry["margin"] = e.margin;
    entry["verdict"] = to_string(e.verdict);
    if (!e.note.empty()) entry["note"] = e.note;
    out["conditions"].push_back(entry);
  }
  out["summary"] = report.summary_pass ? "pass" : "fail";
  out["strict_summary"] = report.strict_pass ? "pass" : "fail";
  out["provenance"] = {{"model_hash", report.provenance_hash},
                       {"seed", report.seed},
                       {"tolerances",
                        {{"tangency_tol", report.tolerances.tangency},
                         {"inequality_tol", report.tolerances.inequality},
                         {"closure_tol", report.tolerances.closure}}}};
  return out;
}

std::string report_to_table(const ConditionReport& report) {
  std::ostringstream out;
  out << "  id      verdict          residual      margin        condition\n";
  for (const ConditionEntry& e : report.entries) {
    char margin[32];
    if (std::isfinite(e.margin)) {
      std::snprintf(margin, sizeof margin, "%-13.3e", e.margin);
    } else {
      std::snprintf(margin, sizeof margin, "%-13s", "-");
    }
    char line[256];
    std::snprintf(line, sizeof line, "  %-7s %-16s %-13.3e %s %s\n", e.id.c_str(),
                  to_string(e.verdict), e.residual, margin, e.name.c_str());
    out << line;
  }
  out << "summary: " << (report.summary_pass ? "pass" : "fail")
      << "  (strict jump membership: " << (report.strict_pass ? "pass" : "fail") << ")\n";
  return out.str();
}

json bundle_to_json(const VerdictBundle& bundle, const ProblemInstance& instance) {
  json out;
  out["example"] = instance.name;
  out["report"] = report_to_json(bundle.report);
  auto stats_json = [](const DistanceStats& s) {
    return json{{"max_dist", s.max_dist},
                {"mean_max_dist", s.mean_dist},
                {"boundary_violations", s.boundary_violations},
                {"paths_escaped", s.paths_escaped},
                {"paths_exploded", s.paths_exploded}};
  };
  if (bundle.chart_scheme_ran) {
    out["chart_scheme"] = stats_json(bundle.chart_stats);
  } else {
    out["chart_scheme"] = {{"refused", bundle.chart_refusal}};
  }
  out["ambient_scheme"] = stats_json(bundle.ambient_stats);
  out["convergence"] = json::array();
  for (const ConvergenceRow& row : bundle.convergence)
    out["convergence"].push_back({{"dt", row.dt}, {"mean_max_dist", row.mean_max_dist}});
  out["agreement"] = bundle.agreement;
  if (!bundle.discrepancy_note.empty()) out["discrepancy_note"] = bundle.discrepancy_note;
  return out;
}

}  // namespace ijd
