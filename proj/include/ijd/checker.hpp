#pragma once

#include "ijd/geometry.hpp"
#include "ijd/levy.hpp"
#include "ijd/model.hpp"
#include "ijd/types.hpp"

#include <string>
#include <vector>

namespace ijd {

struct Tolerances {
  double tangency = 1e-8;
  double inequality = 1e-10;
  double closure = 1e-8;
};

/// Where the conditions get evaluated: chart coordinates of interior and
/// boundary sample points (boundary points have y1 = 0 exactly), explicit
/// mark magnitudes per measure component, plus a budget of random
/// measure-distributed marks for the jump-closure scan.
struct SamplePlan {
  std::vector<Vec> interior_points;
  std::vector<Vec> boundary_points;
  std::vector<std::vector<double>> quad_marks;  // per component, signed magnitudes
  Tolerances tolerances;
  int n_random_marks = 1000;
  std::uint64_t seed = 20120205;
  double split_epsilon = 0.1;
};

/// Default mark lists for a measure: atom locations plus log-spaced
/// magnitudes over each density support side.
std::vector<std::vector<double>> default_quad_marks(const LevyMeasure& F, int per_side = 24);

enum class Verdict { pass, fail, not_applicable };

struct ConditionEntry {
  std::string id;      // stable condition label, e.g. "(3)", "(7)", "(OU-drift)"
  std::string name;    // what the condition checks, e.g. "sigma-tangency"
  Vec point;           // chart coordinates (empty for global conditions)
  double residual = 0.0;
  double margin = std::numeric_limits<double>::quiet_NaN();  // boundary inequality slack
  Verdict verdict = Verdict::pass;
  std::string note;
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  bool summary_pass = true;    // every applicable entry except "(4s)" passes
  bool strict_pass = true;     // additionally the strict jump condition "(4s)"
  std::uint64_t provenance_hash = 0;
  std::uint64_t seed = 0;
  Tolerances tolerances;

  void recompute_summary();
};

const char* to_string(Verdict v);

/// (3): sigma_j tangent on the interior, tangent to the boundary at
/// boundary points. Residual is the worst offending component norm.
std::vector<ConditionEntry> check_sigma_tangency(const JumpDiffusionModel& model,
                                                 const Chart& chart, const SamplePlan& plan);

/// (4): h + gamma(h, x) stays in the closure, tested on the plan marks plus
/// random measure-distributed marks; "(4s)" is the strict variant requiring
/// membership in the manifold itself (open faces excluded).
std::vector<ConditionEntry> check_jump_closure(const JumpDiffusionModel& model, const Chart& chart,
                                               const SamplePlan& plan);

/// (5), finite-variation route: A h + alpha - stratonovich - integral of
/// gamma dF must be tangent (interior) or inward (boundary). Applicable only
/// when |gamma| is F-integrable; otherwise entries are not_applicable.
std::vector<ConditionEntry> check_fv_drift(const JumpDiffusionModel& model, const Chart& chart,
                                           const SamplePlan& plan);

/// (6)/(7)/(8), infinite-variation-capable route:
///   (6) shell decay of the |<eta, gamma>| integral at boundary points,
///   (7) tangency of A h + alpha - strat - integral of the normal jump part,
///   (8) boundary inequality on the eta-component of the drift.
std::vector<ConditionEntry> check_general_drift(const JumpDiffusionModel& model,
                                                const Chart& chart, const SamplePlan& plan);

/// (34)/(35)/(37): componentwise conditions on the delta fields of the jump
/// decomposition, gated by the activity class of each component.
std::vector<ConditionEntry> check_levy_conditions(const JumpDiffusionModel& model,
                                                  const Chart& chart, const SamplePlan& plan);

/// (D): finite-difference mark derivative of gamma at marks where gamma
/// vanishes; the derivative direction must respect the tangent cone, with
/// one-sided mark support weakening the requirement at boundary points.
std::vector<ConditionEntry> check_diff_tangency(const JumpDiffusionModel& model,
                                                const Chart& chart, const SamplePlan& plan);

/// Cone conditions for constant-coefficient models on a polyhedral cone:
/// zero diffusion, jumps in the cone, compensated drift in the cone,
/// invariance of the cone span under A and of the cone under exp(tA) on a
/// dyadic time grid.
std::vector<ConditionEntry> check_ou_cone(const JumpDiffusionModel& model, const Mat& cone_basis,
                                          const SamplePlan& plan);

/// Dispatch every applicable check and aggregate. Sampled verification,
/// not a proof; condition "(2)" records that the generator matrix is
/// globally defined, which holds by construction here.
ConditionReport run_full_report(const JumpDiffusionModel& model, const Chart& chart,
                                const SamplePlan& plan);

}  // namespace ijd
