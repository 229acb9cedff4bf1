#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsmpc/constraint.hpp"

namespace dsmpc {

inline constexpr const char* kToolVersion = "0.1.0";

/// SplitMix64: counter-based 64-bit generator. The state walks a fixed odd
/// stride and each output passes an avalanche finalizer, so the sequence
/// for a given (seed, stream) is bit-reproducible and substreams are
/// decorrelated by construction rather than by jump-ahead.
class SplitMix64 {
 public:
  SplitMix64(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on (0,1] — safe under log().
  double uniform_open();
  /// Uniform on [0,1).
  double uniform_half_open();
  /// N(0,1) via Box–Muller; draws come in cached pairs.
  double standard_normal();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Disturbance source for closed-loop simulation. The gaussian kind draws
/// ω = W_chol z with z standard normal; the custom kind defers to a
/// user-supplied generator (which then owns the determinism contract).
class DisturbanceSampler {
 public:
  enum class Kind { gaussian, custom };

  static DisturbanceSampler gaussian(const Mat& W, std::uint64_t seed,
                                     std::uint64_t stream);
  static DisturbanceSampler custom(std::function<Vec()> generator);

  Vec sample();
  /// Scalar N(0,1) from the same stream (used for initial-state draws so a
  /// run stays reproducible from one (seed, stream) pair).
  double standard_normal();

  Kind kind = Kind::gaussian;
  Mat W_chol;  ///< lower-triangular, W = W_chol W_cholᵀ (PSD factor)
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

 private:
  DisturbanceSampler() = default;
  SplitMix64 rng_{0, 0};
  std::function<Vec()> generator_;
};

/// Rolling controller state between closed-loop steps.
struct MpcState {
  int k = 0;
  Vec x;
  double eps = 0.0;  ///< ε_k at k = 0 (preset), else updated inside step()
  std::optional<MpcSolution> prev;
  std::optional<Vec> prev_x;
  std::optional<Vec> prev_u;
  std::optional<Vec> prev_omega;  ///< actual draw, for the debug cross-check
};

struct StepRecord {
  int k = 0;
  Vec x;
  Vec u;
  double eps = 0.0;
  double stage_cost = 0.0;  ///< ‖x − x_ref‖²_Q + ‖u − u_ref‖²_R
  int violation = 0;        ///< 1{‖Cx‖ ≥ t}
  double J_star = 0.0;
  double lambda_star = 0.0;
  double constraint_value = 0.0;
  /// Analytic supermartingale slack γ·𝔼_k[ε_{k+1}] − (ε_k − ‖Cx_k‖²/t²);
  /// nonpositive up to solver tolerance.
  double contraction_gap = 0.0;
};

struct TrajectoryLog {
  std::vector<StepRecord> records;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string model_hash;
  int T = 0;
  double max_contraction_gap = 0.0;

  /// CSV with a metadata comment line and the header
  /// k,x_1..x_nx,u_1..u_nu,eps,stage_cost,violation,J_star,lambda_star,constraint_value
  std::string to_csv() const;
};

void write_csv(const TrajectoryLog& log, const std::string& path);

/// One Algorithm-1 iteration: update ε from the measurement (k > 0), solve
/// the QCQP, apply u_k = m*₀, draw ω and advance the plant. Returns the
/// advanced state and the record for time k.
/// Errors: Infeasible propagates only from k = 0; at k > 0 it is wrapped —
/// like NonConvergence — into SolverFailure carrying (k, x, ε) context.
std::pair<MpcState, StepRecord> step(const MpcState& state, const SystemModel& model,
                                     const Precomputed& pre,
                                     DisturbanceSampler& sampler);

/// T steps from x0 with budget ε₀. The sampler is consumed by value so a
/// fresh (seed, stream) reproduces the log byte for byte.
TrajectoryLog run(const SystemModel& model, const Precomputed& pre, const Vec& x0,
                  double eps0, int T, DisturbanceSampler sampler);

/// Initial-state policy for ensembles: a fixed x₀, or standard-normal draws
/// with initially infeasible draws discarded (redrawn, up to 1000 times).
struct InitPolicy {
  enum class Kind { fixed, standard_normal };
  Kind kind = Kind::fixed;
  Vec x0;

  static InitPolicy fixed(const Vec& x0) { return {Kind::fixed, x0}; }
  static InitPolicy standard_normal() { return {Kind::standard_normal, {}}; }
};

struct RunSummary {
  std::uint64_t stream = 0;
  double mean_cost = 0.0;
  double v_hat = 0.0;  ///< Σ_{k<T} γᵏ 1{‖Cx_k‖ ≥ t}
  int violations = 0;
  int discarded_draws = 0;
  double max_contraction_gap = 0.0;
  double final_eps = 0.0;
};

struct EnsembleSummary {
  double avg_cost = 0.0;
  double avg_cost_stderr = 0.0;
  double V_hat = 0.0;
  double V_hat_stderr = 0.0;
  double trWP = 0.0;
  double e = 0.0;
  int runs = 0;
  int T = 0;
  std::uint64_t seed = 0;
  std::string model_hash;
  long total_steps = 0;
  double max_contraction_gap = 0.0;
  int discarded_draws = 0;
  std::vector<RunSummary> per_run;

  std::string to_json() const;
};

/// `runs` independent closed-loop runs on substreams (base_seed, 0..runs−1),
/// reduced in run order so the result is worker-count invariant. workers > 1
/// distributes runs across threads (model and pre are shared read-only).
EnsembleSummary monte_carlo(const SystemModel& model, const Precomputed& pre,
                            const InitPolicy& init, double eps0, int T, int runs,
                            std::uint64_t base_seed, int workers = 1);

}  // namespace dsmpc
