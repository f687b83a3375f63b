#pragma once

#include "ijd/checker.hpp"
#include "ijd/geometry.hpp"
#include "ijd/model.hpp"
#include "ijd/simulator.hpp"
#include "ijd/types.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace ijd {

using json = nlohmann::ordered_json;

/// A fully assembled problem instance: coefficients, chart, sampling plan,
/// simulation settings and the initial chart point.
struct ProblemInstance {
  JumpDiffusionModel model;
  Chart chart;
  SamplePlan plan;
  SimConfig sim;
  Vec y0;           // initial chart coordinates
  std::string name; // builtin name or "custom"
};

/// Builtin charts named in the file schema: circle, ball_annulus, cone,
/// interval, affine.
Chart make_chart(const json& spec);

/// Builtin measures from the levy block:
///   {"components":[{"density":{"kind":"power|exp_tilted|uniform","params":{...}},
///                   "atoms":[[loc,mass],...], "beta":b,
///                   "support":"positive|negative|two_sided"}]}
LevyMeasure make_levy(const json& spec);

/// Shipped example instances: circle, ball, ou_cone, subordinator,
/// hjm_affine_toy. Parameters override the documented defaults.
ProblemInstance builtin_example(const std::string& name, const json& params = json::object());

/// Parse a model specification document (schema version 1). Throws
/// SpecError with a line-anchored message on parse errors and a
/// field-anchored message on schema violations.
ProblemInstance load_spec(const json& doc);
ProblemInstance load_spec_file(const std::string& path);

/// Default spec documents for the builtin examples (what `examples run`
/// executes and what the sample files ship).
json builtin_spec_json(const std::string& name);

struct ConvergenceRow {
  double dt = 0.0;
  double mean_max_dist = 0.0;
};

struct VerdictBundle {
  ConditionReport report;
  DistanceStats chart_stats;
  DistanceStats ambient_stats;
  bool chart_scheme_ran = false;
  std::string chart_refusal;
  std::vector<ConvergenceRow> convergence;
  bool agreement = true;
  std::string discrepancy_note;
};

/// End-to-end verdict: full condition report, both simulation schemes,
/// distance statistics and the dt-halving refinement table. The agreement
/// flag asserts: conditions pass implies (chart max distance < 1e-8 and the
/// ambient mean max distance shrinks monotonically across the table).
VerdictBundle verify(const ProblemInstance& instance);

json report_to_json(const ConditionReport& report);
std::string report_to_table(const ConditionReport& report);
json bundle_to_json(const VerdictBundle& bundle, const ProblemInstance& instance);

}  // namespace ijd
