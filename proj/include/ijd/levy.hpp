#pragma once

#include "ijd/types.hpp"

#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace ijd {

enum class SupportSign { positive, negative, two_sided };

/// One scalar jump measure F_k on R \ {0}: optional density on a declared
/// support interval plus optional atoms. The singularity exponent beta is
/// declared, not inferred: density(x) ~ c |x|^(-1-beta) near zero, with
/// beta = 0 meaning no genuine singularity (bounded or integrable density).
struct LevyComponent {
  std::function<double(double)> density;  // may be empty
  double support_lo = 0.0;                // density support interval
  double support_hi = 0.0;
  double inner_cutoff = 0.0;              // support excludes (-cutoff, cutoff)
  std::vector<std::pair<double, double>> atoms;  // (location != 0, mass > 0)
  double beta = 0.0;                      // in [0, 3)
  SupportSign support = SupportSign::two_sided;

  bool has_density() const { return static_cast<bool>(density); }
};

/// Product-form measure on R^e: marks live on coordinate axes, one scalar
/// component per axis.
struct LevyMeasure {
  std::vector<LevyComponent> components;

  int mark_dim() const { return static_cast<int>(components.size()); }
};

enum class ActivityKind { A, B, C };
enum class BSubclass { b_plus, b_plus_minus, not_applicable };

struct ActivityClass {
  ActivityKind kind;
  BSubclass sub = BSubclass::not_applicable;
};

/// Radial restriction lo <= |x| < hi applied per coordinate.
struct MarkRegion {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();

  static MarkRegion all() { return {}; }
  static MarkRegion outside(double eps) { return {eps, std::numeric_limits<double>::infinity()}; }
  static MarkRegion inside(double eps) { return {0.0, eps}; }
  bool contains(double magnitude) const { return magnitude >= lo && magnitude < hi; }
};

/// Activity classification from the declared exponent:
/// atoms only or beta = 0 with finite mass -> A; beta in (0,1] -> B;
/// beta in (1,3) -> C. Throws ModelError when the numerical shell decay of
/// the density mass is more singular than the declared beta allows (>10x
/// over a five-shell span).
ActivityClass classify(const LevyComponent& component);

struct IntegralDiagnostics {
  bool inner_decayed = true;    // shell sums decay toward zero mark size
  double worst_inner_ratio = 0.0;
  int shells = 0;
  bool hit_inner_support = false;  // descent stopped at a support cutoff
};

/// sum_k integral of g(x e_k) dF_k over the region, by graded dyadic-shell
/// Gauss-Legendre quadrature (32 nodes per shell) plus atom sums. Throws
/// NonIntegrableError when the support reaches zero and shell contributions
/// fail to decay (ratio >= 0.9 over 5 consecutive shells).
Vec integrate(const LevyMeasure& F, int out_dim, const std::function<Vec(const Vec&)>& g,
              MarkRegion region = MarkRegion::all(), IntegralDiagnostics* diag = nullptr);

double integrate_scalar(const LevyMeasure& F, const std::function<double(const Vec&)>& g,
                        MarkRegion region = MarkRegion::all(),
                        IntegralDiagnostics* diag = nullptr);

/// Shell-decay test for a scalar integrand (no value needed): true iff the
/// descending shell sums keep decaying, i.e. the integral is numerically
/// summable near zero even when a support truncation makes it finite.
bool integral_decays(const LevyMeasure& F, const std::function<double(const Vec&)>& g,
                     MarkRegion region = MarkRegion::all());

/// Total mass of the region (g == 1).
double region_mass(const LevyMeasure& F, MarkRegion region);

struct BigSmallSplit {
  double epsilon = 0.1;
  double complement_mass = 0.0;  // F({|x| >= epsilon}), finite for Levy measures
};

BigSmallSplit split_big_small(const LevyMeasure& F, double epsilon);

struct JumpEvent {
  double time = 0.0;
  int component = 0;      // axis index k
  double magnitude = 0.0; // signed scalar mark xi
  Vec mark;               // xi * e_k
};

/// Time-ordered compound-Poisson event stream on (0, T].
struct JumpEventStream {
  std::vector<JumpEvent> events;
  double horizon = 0.0;
  std::uint64_t seed = 0;
};

enum class SampleRegion { all, complement_of_b };

/// Compound-Poisson sampling of the restricted measure: Poisson event count,
/// uniform order-statistic times, inverse-CDF marks on the quadrature grid.
/// Deterministic given the seed. `all` requires finite total mass.
JumpEventStream sample_events(const LevyMeasure& F, SampleRegion region, double epsilon,
                              double horizon, std::uint64_t seed);

/// Exactly `count` i.i.d. marks from the normalized restricted measure,
/// spread over components proportionally to their restricted masses.
std::vector<Vec> sample_marks(const LevyMeasure& F, SampleRegion region, double epsilon, int count,
                              std::uint64_t seed);

}  // namespace ijd
