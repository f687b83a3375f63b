#include "ijd/levy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace ijd {

namespace {

constexpr int kGaussNodes = 32;

struct GaussRule {
  std::array<double, kGaussNodes> nodes;    // on [-1, 1]
  std::array<double, kGaussNodes> weights;
};

// Gauss-Legendre nodes by Newton iteration on the Legendre recurrence.
GaussRule build_gauss_rule() {
  GaussRule rule{};
  const int n = kGaussNodes;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

const GaussRule& gauss_rule() {
  static const GaussRule rule = build_gauss_rule();
  return rule;
}

// Integral of f over [a, b] with 32-node Gauss-Legendre.
template <typename F>
double gauss_segment(const F& f, double a, double b) {
  const GaussRule& rule = gauss_rule();
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double sum = 0.0;
  for (int i = 0; i < kGaussNodes; ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

constexpr double kRelTol = 1e-12;
constexpr int kTinyShellsToStop = 3;
constexpr int kNoDecayShellsToFail = 5;
constexpr int kMaxInnerShells = 200;
constexpr int kMaxOuterShells = 1024;

// One side of a component's density, reduced to magnitudes: integrand(m) for
// m in [a, b], a >= 0. Descends dyadic shells [2^(k-1), 2^k] toward zero,
// ascending first when b is unbounded. `from_zero` marks a == 0 (a genuine
// singularity test rather than a truncated support).
template <typename F>
double shell_integrate(const F& integrand, double a, double b, bool* decayed_out,
                       double* worst_ratio_out, bool* diverged_out) {
  double total = 0.0;
  bool decayed = true;
  double worst_ratio = 0.0;
  bool diverged = false;
  const bool from_zero = (a <= 0.0);

  if (b <= a) {
    if (decayed_out) *decayed_out = true;
    if (worst_ratio_out) *worst_ratio_out = 0.0;
    if (diverged_out) *diverged_out = false;
    return 0.0;
  }

  int k_top;
  if (std::isfinite(b)) {
    k_top = static_cast<int>(std::ceil(std::log2(std::max(b, 1e-300))));
  } else {
    // expand upward until contributions become relatively negligible
    k_top = 1;
    double run = 0.0;
    int tiny = 0;
    int k = std::max(1, static_cast<int>(std::ceil(std::log2(std::max(a, 1.0)))) + 1);
    const int k0 = k;
    while (k - k0 < kMaxOuterShells) {
      const double lo = std::pow(2.0, k - 1);
      const double hi = std::pow(2.0, k);
      const double s = gauss_segment(integrand, std::max(lo, a), hi);
      run += s;
      k_top = k;
      if (std::abs(s) < kRelTol * std::max(std::abs(run), 1e-300)) {
        if (++tiny >= kTinyShellsToStop) break;
      } else {
        tiny = 0;
      }
      ++k;
    }
    if (k - k0 >= kMaxOuterShells)
      throw NonIntegrableError("outer dyadic shells did not converge; integrand does not decay");
    b = std::pow(2.0, k_top);
  }

  double prev = 0.0;
  bool have_prev = false;
  int no_decay_run = 0;
  int tiny_run = 0;
  int shells = 0;
  for (int k = k_top; shells < kMaxInnerShells + (k_top > 0 ? k_top : 0); --k, ++shells) {
    const double hi = std::min(b, std::pow(2.0, k));
    const double lo = std::max(a, std::pow(2.0, k - 1));
    if (hi <= lo) {
      if (std::pow(2.0, k - 1) <= a) break;  // below the support cutoff
      continue;
    }
    const double s = gauss_segment(integrand, lo, hi);
    total += s;

    const double mag = std::abs(s);
    if (have_prev && std::abs(prev) > 0.0) {
      const double ratio = mag / std::abs(prev);
      worst_ratio = std::max(worst_ratio, ratio);
      if (ratio >= 0.9 && mag > kRelTol * std::max(std::abs(total), 1e-300)) {
        if (++no_decay_run >= kNoDecayShellsToFail) {
          decayed = false;
          if (from_zero) {
            diverged = true;
            break;
          }
        }
      } else {
        no_decay_run = 0;
      }
    }
    prev = s;
    have_prev = true;

    if (std::pow(2.0, k - 1) <= a) break;  // support cutoff reached
    if (from_zero && mag < kRelTol * std::max(std::abs(total), 1e-300)) {
      if (++tiny_run >= kTinyShellsToStop) break;
    } else {
      tiny_run = 0;
    }
  }
  if (from_zero && shells >= kMaxInnerShells) decayed = false;

  if (decayed_out) *decayed_out = decayed;
  if (worst_ratio_out) *worst_ratio_out = std::max(*worst_ratio_out, worst_ratio);
  if (diverged_out) *diverged_out = *diverged_out || diverged;
  return total;
}

// Positive and negative magnitude ranges of a component's density inside a
// region. Returns {a, b} per side with a >= 0 (empty side: a >= b).
struct SideRange {
  double a, b;
};

SideRange positive_side(const LevyComponent& c, const MarkRegion& region) {
  const double lo = std::max({c.inner_cutoff, region.lo, 0.0});
  const double hi = std::min(c.support_hi, region.hi);
  return {lo, hi};
}

SideRange negative_side(const LevyComponent& c, const MarkRegion& region) {
  // magnitudes of the negative part: x in [support_lo, -inner_cutoff)
  const double lo = std::max({c.inner_cutoff, region.lo, 0.0});
  const double hi = std::min(-c.support_lo, region.hi);
  return {lo, hi};
}

}  // namespace

Vec integrate(const LevyMeasure& F, int out_dim, const std::function<Vec(const Vec&)>& g,
              MarkRegion region, IntegralDiagnostics* diag) {
  const int e = F.mark_dim();
  Vec total = Vec::Zero(out_dim);
  IntegralDiagnostics d;

  for (int k = 0; k < e; ++k) {
    const LevyComponent& comp = F.components[k];
    Vec mark = Vec::Zero(e);

    for (const auto& [loc, mass] : comp.atoms) {
      if (!region.contains(std::abs(loc))) continue;
      mark[k] = loc;
      total += mass * g(mark);
      mark[k] = 0.0;
    }
    if (!comp.has_density()) continue;

    // shells are scalar; integrate each output coordinate against the norm
    // of the vector shell sums for the decay test
    for (int sign = -1; sign <= 1; sign += 2) {
      const SideRange r = (sign > 0) ? positive_side(comp, region) : negative_side(comp, region);
      if (r.a >= r.b) continue;
      for (int c = 0; c < out_dim; ++c) {
        auto integrand = [&](double m) {
          Vec x = Vec::Zero(e);
          x[k] = sign * m;
          return g(x)[c] * comp.density(sign * m);
        };
        bool decayed = true;
        bool diverged = false;
        total[c] += shell_integrate(integrand, r.a, r.b, &decayed, &d.worst_inner_ratio, &diverged);
        d.inner_decayed = d.inner_decayed && decayed;
        d.hit_inner_support = d.hit_inner_support || (r.a > 0.0);
        ++d.shells;
        if (diverged)
          throw NonIntegrableError("dyadic shell sums fail to decay toward zero mark size");
      }
    }
  }
  if (diag) *diag = d;
  return total;
}

double integrate_scalar(const LevyMeasure& F, const std::function<double(const Vec&)>& g,
                        MarkRegion region, IntegralDiagnostics* diag) {
  const Vec v = integrate(
      F, 1,
      [&](const Vec& x) {
        Vec out(1);
        out[0] = g(x);
        return out;
      },
      region, diag);
  return v[0];
}

bool integral_decays(const LevyMeasure& F, const std::function<double(const Vec&)>& g,
                     MarkRegion region) {
  IntegralDiagnostics d;
  try {
    integrate_scalar(F, g, region, &d);
  } catch (const NonIntegrableError&) {
    return false;
  }
  return d.inner_decayed;
}

double region_mass(const LevyMeasure& F, MarkRegion region) {
  return integrate_scalar(F, [](const Vec&) { return 1.0; }, region);
}

ActivityClass classify(const LevyComponent& component) {
  // consistency: observed inner-shell growth of the density mass must not
  // exceed the declared 2^beta rate by more than 10x over five shells
  if (component.has_density()) {
    std::vector<double> shell_mass;
    const double hi0 = std::max(std::abs(component.support_lo), std::abs(component.support_hi));
    const double lo0 = component.inner_cutoff;
    int k = static_cast<int>(std::ceil(std::log2(std::max(hi0, 1e-300))));
    for (int count = 0; count < 48 && std::pow(2.0, k - 1) > 1e-300; --k, ++count) {
      const double lo = std::max(lo0, std::pow(2.0, k - 1));
      const double hi = std::min(hi0, std::pow(2.0, k));
      if (hi <= lo) {
        if (std::pow(2.0, k - 1) <= lo0) break;
        continue;
      }
      double s = 0.0;
      auto pos = positive_side(component, MarkRegion{lo, hi});
      if (pos.a < pos.b) s += gauss_segment([&](double m) { return component.density(m); }, pos.a, pos.b);
      auto neg = negative_side(component, MarkRegion{lo, hi});
      if (neg.a < neg.b) s += gauss_segment([&](double m) { return component.density(-m); }, neg.a, neg.b);
      shell_mass.push_back(s);
      if (std::pow(2.0, k - 1) <= lo0) break;
    }
    std::vector<double> nz;
    for (double s : shell_mass)
      if (s > 0.0) nz.push_back(s);
    if (nz.size() >= 6) {
      const double outer = nz[nz.size() - 6];
      const double inner = nz.back();
      const double predicted = outer * std::pow(2.0, 5.0 * component.beta);
      if (inner > 10.0 * predicted)
        throw ModelError("declared singularity exponent contradicts the numerical shell decay");
    }
  }

  ActivityClass ac;
  if (!component.has_density()) {
    ac.kind = ActivityKind::A;
    return ac;
  }
  if (component.beta <= 0.0) {
    ac.kind = ActivityKind::A;
    // beta = 0 declares an integrable density; the mass must be summable
    LevyMeasure one{{component}};
    try {
      region_mass(one, MarkRegion::all());
    } catch (const NonIntegrableError&) {
      throw ModelError("declared beta = 0 but the density mass quadrature diverges");
    }
    return ac;
  }
  if (component.beta <= 1.0) {
    ac.kind = ActivityKind::B;
    ac.sub = (component.support == SupportSign::two_sided) ? BSubclass::b_plus_minus
                                                           : BSubclass::b_plus;
    return ac;
  }
  ac.kind = ActivityKind::C;
  return ac;
}

BigSmallSplit split_big_small(const LevyMeasure& F, double epsilon) {
  if (epsilon <= 0.0) throw ModelError("split epsilon must be positive");
  BigSmallSplit split;
  split.epsilon = epsilon;
  split.complement_mass = region_mass(F, MarkRegion::outside(epsilon));
  return split;
}

namespace {

// Deterministic Poisson sampler (Knuth); rates stay moderate in-scope.
int sample_poisson(std::mt19937_64& rng, double lambda) {
  if (lambda > 1e6) throw ModelError("compound-Poisson rate is implausibly large");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double L = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= unif(rng);
  } while (p > L);
  return k - 1;
}

// Piecewise-linear CDF over density magnitudes of one side, on a grid
// refined within each dyadic shell.
struct SideCdf {
  std::vector<double> x;    // signed mark values, monotone
  std::vector<double> cum;  // cumulative mass
  double mass() const { return cum.empty() ? 0.0 : cum.back(); }
};

SideCdf build_side_cdf(const LevyComponent& comp, int sign, const MarkRegion& region) {
  SideCdf cdf;
  const SideRange r = (sign > 0) ? positive_side(comp, region) : negative_side(comp, region);
  if (r.a >= r.b || !comp.has_density()) return cdf;

  double b = r.b;
  if (std::isinf(b)) {
    // expand until the density mass beyond the bound is negligible
    double hi = std::max(r.a * 2.0, 2.0);
    double total = 0.0;
    while (hi < 1e300) {
      const double s = gauss_segment([&](double m) { return comp.density(sign * m); }, hi / 2.0, hi);
      total += s;
      if (s < 1e-14 * std::max(total, 1e-300)) break;
      hi *= 2.0;
    }
    b = hi;
  }

  // subdivide each dyadic shell of [a, b] into equal cells
  constexpr int kCellsPerShell = 32;
  std::vector<double> grid;
  grid.push_back(r.a);
  const int k_top = static_cast<int>(std::ceil(std::log2(std::max(b, 1e-300))));
  std::vector<std::pair<double, double>> shells;
  for (int k = k_top;; --k) {
    const double hi = std::min(b, std::pow(2.0, k));
    const double lo = std::max(r.a, std::pow(2.0, k - 1));
    if (hi > lo) shells.push_back({lo, hi});
    if (std::pow(2.0, k - 1) <= r.a || static_cast<int>(shells.size()) > 300) break;
  }
  std::reverse(shells.begin(), shells.end());
  for (const auto& [lo, hi] : shells) {
    for (int c = 1; c <= kCellsPerShell; ++c) grid.push_back(lo + c * (hi - lo) / kCellsPerShell);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  cdf.x.resize(grid.size());
  cdf.cum.resize(grid.size());
  double running = 0.0;
  double prev_m = grid[0];
  double prev_f = comp.density(sign * prev_m);
  cdf.x[0] = sign * prev_m;
  cdf.cum[0] = 0.0;
  for (size_t i = 1; i < grid.size(); ++i) {
    const double m = grid[i];
    const double f = comp.density(sign * m);
    running += 0.5 * (prev_f + f) * (m - prev_m);
    cdf.x[i] = sign * m;
    cdf.cum[i] = running;
    prev_m = m;
    prev_f = f;
  }
  return cdf;
}

double invert_cdf(const SideCdf& cdf, double target) {
  if (cdf.x.empty()) throw ModelError("inverse-CDF lookup on an empty density side");
  const auto it = std::lower_bound(cdf.cum.begin(), cdf.cum.end(), target);
  if (it == cdf.cum.begin()) return cdf.x.front();
  if (it == cdf.cum.end()) return cdf.x.back();
  const size_t i = static_cast<size_t>(it - cdf.cum.begin());
  const double c0 = cdf.cum[i - 1], c1 = cdf.cum[i];
  const double t = (c1 > c0) ? (target - c0) / (c1 - c0) : 0.0;
  return cdf.x[i - 1] + t * (cdf.x[i] - cdf.x[i - 1]);
}

}  // namespace

JumpEventStream sample_events(const LevyMeasure& F, SampleRegion region, double epsilon,
                              double horizon, std::uint64_t seed) {
  const MarkRegion mr =
      (region == SampleRegion::all) ? MarkRegion::all() : MarkRegion::outside(epsilon);
  const int e = F.mark_dim();

  JumpEventStream stream;
  stream.horizon = horizon;
  stream.seed = seed;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int k = 0; k < e; ++k) {
    const LevyComponent& comp = F.components[k];
    if (region == SampleRegion::all && comp.has_density()) {
      const ActivityClass ac = classify(comp);
      if (ac.kind != ActivityKind::A)
        throw InfiniteMassError("sampling the full measure requires finite activity");
    }

    // restricted measure: atoms + two density sides
    std::vector<std::pair<double, double>> atoms;
    for (const auto& [loc, mass] : comp.atoms)
      if (mr.contains(std::abs(loc))) atoms.push_back({loc, mass});
    const SideCdf pos = build_side_cdf(comp, +1, mr);
    const SideCdf neg = build_side_cdf(comp, -1, mr);

    double mass = pos.mass() + neg.mass();
    for (const auto& [loc, m] : atoms) {
      (void)loc;
      mass += m;
    }
    if (mass <= 0.0) continue;

    const int count = sample_poisson(rng, horizon * mass);
    for (int i = 0; i < count; ++i) {
      const double t = horizon * unif(rng);
      const double u = mass * unif(rng);

      double magnitude = 0.0;
      double acc = 0.0;
      bool chosen = false;
      for (const auto& [loc, m] : atoms) {
        acc += m;
        if (u <= acc) {
          magnitude = loc;
          chosen = true;
          break;
        }
      }
      if (!chosen) {
        double rest = u - acc;
        if (pos.mass() + neg.mass() <= 0.0) {
          magnitude = atoms.back().first;  // rounding pushed u past the atom total
        } else if (rest <= pos.mass() && pos.mass() > 0.0) {
          magnitude = invert_cdf(pos, rest);
        } else {
          rest -= pos.mass();
          magnitude = invert_cdf(neg, std::min(rest, neg.mass()));
        }
      }

      JumpEvent ev;
      ev.time = t;
      ev.component = k;
      ev.magnitude = magnitude;
      ev.mark = Vec::Zero(e);
      ev.mark[k] = magnitude;
      stream.events.push_back(std::move(ev));
    }
  }

  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const JumpEvent& a, const JumpEvent& b) { return a.time < b.time; });
  // strictly increasing times: nudge astronomically unlikely ties
  for (size_t i = 1; i < stream.events.size(); ++i) {
    if (stream.events[i].time <= stream.events[i - 1].time)
      stream.events[i].time = std::nextafter(stream.events[i - 1].time, horizon + 1.0);
  }
  return stream;
}

std::vector<Vec> sample_marks(const LevyMeasure& F, SampleRegion region, double epsilon, int count,
                              std::uint64_t seed) {
  const MarkRegion mr =
      (region == SampleRegion::all) ? MarkRegion::all() : MarkRegion::outside(epsilon);
  const int e = F.mark_dim();

  struct ComponentSampler {
    std::vector<std::pair<double, double>> atoms;
    SideCdf pos, neg;
    double mass = 0.0;
  };
  std::vector<ComponentSampler> samplers(e);
  double total_mass = 0.0;
  for (int k = 0; k < e; ++k) {
    const LevyComponent& comp = F.components[k];
    if (region == SampleRegion::all && comp.has_density() &&
        classify(comp).kind != ActivityKind::A)
      throw InfiniteMassError("sampling the full measure requires finite activity");
    ComponentSampler& s = samplers[k];
    for (const auto& [loc, mass] : comp.atoms)
      if (mr.contains(std::abs(loc))) s.atoms.push_back({loc, mass});
    s.pos = build_side_cdf(comp, +1, mr);
    s.neg = build_side_cdf(comp, -1, mr);
    s.mass = s.pos.mass() + s.neg.mass();
    for (const auto& [loc, m] : s.atoms) {
      (void)loc;
      s.mass += m;
    }
    total_mass += s.mass;
  }

  std::vector<Vec> marks;
  if (total_mass <= 0.0) return marks;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  marks.reserve(count);
  for (int i = 0; i < count; ++i) {
    double pick = total_mass * unif(rng);
    int k = 0;
    while (k + 1 < e && pick > samplers[k].mass) {
      pick -= samplers[k].mass;
      ++k;
    }
    const ComponentSampler& s = samplers[k];
    const double u = s.mass * unif(rng);
    double magnitude = 0.0;
    double acc = 0.0;
    bool chosen = false;
    for (const auto& [loc, m] : s.atoms) {
      acc += m;
      if (u <= acc) {
        magnitude = loc;
        chosen = true;
        break;
      }
    }
    if (!chosen) {
      double rest = u - acc;
      if (s.pos.mass() + s.neg.mass() <= 0.0) {
        magnitude = s.atoms.back().first;
      } else if (rest <= s.pos.mass() && s.pos.mass() > 0.0) {
        magnitude = invert_cdf(s.pos, rest);
      } else {
        rest -= s.pos.mass();
        magnitude = invert_cdf(s.neg, std::min(rest, s.neg.mass()));
      }
    }
    Vec mark = Vec::Zero(e);
    mark[k] = magnitude;
    marks.push_back(std::move(mark));
  }
  return marks;
}

}  // namespace ijd
