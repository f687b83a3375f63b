#pragma once

#include "ijd/checker.hpp"
#include "ijd/geometry.hpp"
#include "ijd/levy.hpp"
#include "ijd/model.hpp"
#include "ijd/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ijd {

enum class Scheme { ambient, chart_projected };

struct SimConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  int n_paths = 100;
  std::uint64_t seed = 1;
  double truncation_epsilon = 0.01;  // small-jump cutoff
  Scheme scheme = Scheme::ambient;
};

/// One simulated trajectory: a shared regular grid with the path's jump
/// times inserted, the applied jump events, and truncation flags.
struct Path {
  std::vector<double> times;
  std::vector<Vec> states;  // ambient R^d or chart R^m depending on scheme
  JumpEventStream jumps;
  bool exploded = false;
  bool escaped = false;
  double lifetime = 0.0;
};

struct PathEnsemble {
  Scheme scheme = Scheme::ambient;
  int state_dim = 0;
  double dt = 0.0;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  std::vector<Path> paths;
};

/// Euler scheme on R^d with big-jump splitting: sampled jumps with
/// |x| >= epsilon are inserted exactly at their event times, the drift is
/// compensated by the big-jump integral, and the small-jump martingale is
/// dropped (documented truncation bias of order int_{|x|<eps} |gamma|^2 dF).
PathEnsemble simulate_ambient(const JumpDiffusionModel& model, const SimConfig& config,
                              const Vec& h0);

/// Projected Euler scheme in chart coordinates: half-space projection after
/// every increment keeps y1 >= 0; paths leaving the domain box truncate at
/// their escape time. Refuses to run unless sigma-tangency and jump-closure
/// hold on the plan (throws ModelError).
PathEnsemble simulate_chart(const JumpDiffusionModel& model, const Chart& chart,
                            const SimConfig& config, const Vec& y0,
                            const std::optional<SamplePlan>& plan = std::nullopt);

struct DistanceStats {
  double max_dist = 0.0;               // max over paths and times
  double mean_dist = 0.0;              // mean over paths of the per-path max
  long boundary_violations = 0;        // chart states with y1 < -1e-12
  int paths_escaped = 0;
  int paths_exploded = 0;
};

/// Per-path maxima of the distance to the manifold closure; chart ensembles
/// are mapped through phi first.
DistanceStats distance_statistics(const PathEnsemble& ensemble, const Chart& chart);

/// CSV export: header "time,path_id,c0,c1,...", one row per recorded state.
void write_csv(const PathEnsemble& ensemble, const std::string& filename);

/// Compact binary export. Layout (little-endian):
///   bytes 0..3   magic "IJD1"
///   uint32       state dimension
///   uint32       number of paths
///   per path:    uint32 number of samples, then samples as
///                float64 time followed by float64 state coordinates.
void write_binary(const PathEnsemble& ensemble, const std::string& filename);

/// Worker-thread cap: min(IJD_THREADS, hardware concurrency), at least 1.
int simulation_threads();

}  // namespace ijd
