#include "ijd/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <random>
#include <thread>

namespace ijd {

int simulation_threads() {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (n <= 0) n = 1;
  if (const char* env = std::getenv("IJD_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace {

/// Runs fn(i) for i in [0, n) across the worker pool; results must be
/// written into pre-sized slots so the schedule cannot affect the output.
void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(simulation_threads(), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Regular grid {0, dt, ..., T} with the path's jump times inserted.
/// Each entry knows which event (if any) fires at that time.
struct TimeAxis {
  std::vector<double> times;
  std::vector<int> event_index;  // -1 when no jump at this time
};

TimeAxis build_time_axis(double dt, double horizon, const JumpEventStream& events) {
  TimeAxis axis;
  const long steps = std::lround(std::ceil(horizon / dt - 1e-12));
  size_t next_event = 0;
  axis.times.push_back(0.0);
  axis.event_index.push_back(-1);
  for (long i = 1; i <= steps; ++i) {
    const double t = std::min(i * dt, horizon);
    while (next_event < events.events.size() && events.events[next_event].time < t) {
      axis.times.push_back(events.events[next_event].time);
      axis.event_index.push_back(static_cast<int>(next_event));
      ++next_event;
    }
    if (next_event < events.events.size() && events.events[next_event].time == t) {
      axis.times.push_back(t);
      axis.event_index.push_back(static_cast<int>(next_event));
      ++next_event;
    } else {
      axis.times.push_back(t);
      axis.event_index.push_back(-1);
    }
  }
  while (next_event < events.events.size() && events.events[next_event].time <= horizon) {
    axis.times.push_back(events.events[next_event].time);
    axis.event_index.push_back(static_cast<int>(next_event));
    ++next_event;
  }
  // inserted events may precede the final grid point; restore order
  std::vector<size_t> order(axis.times.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return axis.times[a] < axis.times[b]; });
  TimeAxis sorted;
  for (size_t i : order) {
    sorted.times.push_back(axis.times[i]);
    sorted.event_index.push_back(axis.event_index[i]);
  }
  return sorted;
}

bool finite_state(const Vec& v) { return v.allFinite(); }

}  // namespace

PathEnsemble simulate_ambient(const JumpDiffusionModel& model, const SimConfig& config,
                              const Vec& h0) {
  PathEnsemble ens;
  ens.scheme = Scheme::ambient;
  ens.state_dim = model.dim;
  ens.dt = config.dt;
  ens.horizon = config.horizon;
  ens.seed = config.seed;
  ens.paths.resize(config.n_paths);

  const double explosion_scale = 1e3 * std::max(1.0, h0.norm());
  const double eps = config.truncation_epsilon;

  parallel_for(config.n_paths, [&](int p) {
    const std::uint64_t path_seed = derive_seed(config.seed, static_cast<std::uint64_t>(p));
    Path path;
    path.jumps = sample_events(model.levy, SampleRegion::complement_of_b, eps, config.horizon,
                               path_seed);
    const TimeAxis axis = build_time_axis(config.dt, config.horizon, path.jumps);

    std::mt19937_64 rng(derive_seed(path_seed, 0x9e37u));
    std::normal_distribution<double> normal(0.0, 1.0);

    Vec r = h0;
    path.times.push_back(0.0);
    path.states.push_back(r);
    path.lifetime = config.horizon;

    for (size_t i = 1; i < axis.times.size(); ++i) {
      const double delta = axis.times[i] - axis.times[i - 1];
      if (delta > 0.0) {
        Vec drift = model.A * r + model.alpha(r);
        if (!model.levy.components.empty())
          drift -= integrate(model.levy, model.dim,
                             [&](const Vec& x) { return model.gamma(r, x); },
                             MarkRegion::outside(eps));
        Vec incr = drift * delta;
        const double sq = std::sqrt(delta);
        for (const DiffusionField& sigma : model.sigmas)
          incr += sigma.value(r) * (sq * normal(rng));
        r += incr;
      }
      if (axis.event_index[i] >= 0) {
        const JumpEvent& ev = path.jumps.events[axis.event_index[i]];
        r += model.gamma(r, ev.mark);
      }
      path.times.push_back(axis.times[i]);
      path.states.push_back(r);

      if (!finite_state(r) || r.norm() > explosion_scale) {
        path.exploded = true;
        path.lifetime = axis.times[i];
        break;
      }
      if (r.norm() > model.domain_radius) {
        path.escaped = true;
        path.lifetime = axis.times[i];
        break;
      }
    }
    ens.paths[p] = std::move(path);
  });
  return ens;
}

PathEnsemble simulate_chart(const JumpDiffusionModel& model, const Chart& chart,
                            const SimConfig& config, const Vec& y0,
                            const std::optional<SamplePlan>& plan_opt) {
  // refuse to run on models whose volatilities or jumps leave the patch
  SamplePlan plan;
  if (plan_opt) {
    plan = *plan_opt;
  } else {
    for (const Vec& y : grid_starts(chart.domain_box, 8)) {
      if (chart.on_boundary_face(y)) {
        Vec b = y;
        b[0] = 0.0;
        plan.boundary_points.push_back(b);
      } else {
        plan.interior_points.push_back(y);
      }
    }
    plan.quad_marks = default_quad_marks(model.levy);
    plan.n_random_marks = 128;
  }
  for (const ConditionEntry& e : check_sigma_tangency(model, chart, plan))
    if (e.verdict == Verdict::fail)
      throw ModelError("chart scheme refused: volatilities are not tangent on the patch");
  for (const ConditionEntry& e : check_jump_closure(model, chart, plan))
    if (e.id == "(4)" && e.verdict == Verdict::fail)
      throw ModelError("chart scheme refused: jumps leave the manifold closure on the patch");

  const ChartModel cm = project_chart_model(pullback_coefficients(chart, model));
  const bool hb = chart.has_boundary;
  const int m = chart.dim_domain;
  const double eps = config.truncation_epsilon;

  PathEnsemble ens;
  ens.scheme = Scheme::chart_projected;
  ens.state_dim = m;
  ens.dt = config.dt;
  ens.horizon = config.horizon;
  ens.seed = config.seed;
  ens.paths.resize(config.n_paths);

  parallel_for(config.n_paths, [&](int p) {
    const std::uint64_t path_seed = derive_seed(config.seed, static_cast<std::uint64_t>(p));
    Path path;
    path.jumps = sample_events(model.levy, SampleRegion::complement_of_b, eps, config.horizon,
                               path_seed);
    const TimeAxis axis = build_time_axis(config.dt, config.horizon, path.jumps);

    std::mt19937_64 rng(derive_seed(path_seed, 0x9e37u));
    std::normal_distribution<double> normal(0.0, 1.0);

    Vec y = half_space_projection(y0, hb);
    path.times.push_back(0.0);
    path.states.push_back(y);
    path.lifetime = config.horizon;

    try {
      for (size_t i = 1; i < axis.times.size(); ++i) {
        const double delta = axis.times[i] - axis.times[i - 1];
        if (delta > 0.0) {
          Vec drift = cm.Theta(y);
          if (!model.levy.components.empty())
            drift -= integrate(model.levy, m, [&](const Vec& x) { return cm.Gamma(y, x); },
                               MarkRegion::outside(eps));
          Vec incr = drift * delta;
          const double sq = std::sqrt(delta);
          for (const auto& sigma : cm.Sigmas) incr += sigma(y) * (sq * normal(rng));
          y = half_space_projection(y + incr, hb);
        }
        if (axis.event_index[i] >= 0) {
          const JumpEvent& ev = path.jumps.events[axis.event_index[i]];
          y = half_space_projection(y + cm.Gamma(y, ev.mark), hb);
        }
        path.times.push_back(axis.times[i]);
        path.states.push_back(y);

        if (!finite_state(y)) {
          path.exploded = true;
          path.lifetime = axis.times[i];
          break;
        }
        if (!chart.domain_box.contains(y, 1e-12)) {
          path.escaped = true;
          path.lifetime = axis.times[i];
          break;
        }
      }
    } catch (const ChartEscapeError&) {
      path.escaped = true;
      path.lifetime = path.times.back();
    }
    ens.paths[p] = std::move(path);
  });
  return ens;
}

DistanceStats distance_statistics(const PathEnsemble& ensemble, const Chart& chart) {
  DistanceStats stats;
  if (ensemble.paths.empty()) return stats;

  std::vector<double> per_path_max(ensemble.paths.size(), 0.0);
  std::vector<long> per_path_violations(ensemble.paths.size(), 0);

  parallel_for(static_cast<int>(ensemble.paths.size()), [&](int p) {
    const Path& path = ensemble.paths[p];
    double worst = 0.0;
    long violations = 0;
    Vec hint;  // chained inversion hint along the trajectory
    for (size_t i = 0; i < path.states.size(); ++i) {
      Vec h;
      if (ensemble.scheme == Scheme::chart_projected) {
        const Vec& y = path.states[i];
        if (y.size() > 0 && y[0] < -1e-12) ++violations;
        h = chart.phi(y);
        hint = y;
      } else {
        h = path.states[i];
      }
      double dist;
      if (hint.size() > 0) {
        dist = distance_to_closure_hint(chart, h, hint);
      } else {
        const InvertResult best = closest_point(chart, h);
        dist = best.residual;
        hint = best.y;
      }
      worst = std::max(worst, dist);
    }
    per_path_max[p] = worst;
    per_path_violations[p] = violations;
  });

  double sum = 0.0;
  for (size_t p = 0; p < ensemble.paths.size(); ++p) {
    stats.max_dist = std::max(stats.max_dist, per_path_max[p]);
    sum += per_path_max[p];
    stats.boundary_violations += per_path_violations[p];
    if (ensemble.paths[p].escaped) ++stats.paths_escaped;
    if (ensemble.paths[p].exploded) ++stats.paths_exploded;
  }
  stats.mean_dist = sum / static_cast<double>(ensemble.paths.size());
  return stats;
}

void write_csv(const PathEnsemble& ensemble, const std::string& filename) {
  std::ofstream out(filename);
  if (!out) throw Error("cannot open " + filename + " for writing");
  out << "time,path_id";
  for (int c = 0; c < ensemble.state_dim; ++c) out << ",c" << c;
  out << "\n";
  out.precision(17);
  for (size_t p = 0; p < ensemble.paths.size(); ++p) {
    const Path& path = ensemble.paths[p];
    for (size_t i = 0; i < path.times.size(); ++i) {
      out << path.times[i] << "," << p;
      for (int c = 0; c < ensemble.state_dim; ++c) out << "," << path.states[i][c];
      out << "\n";
    }
  }
}

void write_binary(const PathEnsemble& ensemble, const std::string& filename) {
  std::ofstream out(filename, std::ios::binary);
  if (!out) throw Error("cannot open " + filename + " for writing");
  out.write("IJD1", 4);
  auto put_u32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  auto put_f64 = [&](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u32(static_cast<std::uint32_t>(ensemble.state_dim));
  put_u32(static_cast<std::uint32_t>(ensemble.paths.size()));
  for (const Path& path : ensemble.paths) {
    put_u32(static_cast<std::uint32_t>(path.times.size()));
    for (size_t i = 0; i < path.times.size(); ++i) {
      put_f64(path.times[i]);
      for (int c = 0; c < ensemble.state_dim; ++c) put_f64(path.states[i][c]);
    }
  }
}

}  // namespace ijd
