#include "dsmpc/sim.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "dsmpc/model_io.hpp"
#include "dsmpc/qcqp.hpp"
#include "json.hpp"

namespace dsmpc {

namespace {

constexpr std::uint64_t kStride = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

void append_number(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream)
    : state_(mix64(seed + kStride * (stream + 1))) {}

std::uint64_t SplitMix64::next_u64() {
  state_ += kStride;
  return mix64(state_);
}

double SplitMix64::uniform_open() {
  // 53-bit mantissa, shifted into (0,1].
  return double((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double SplitMix64::uniform_half_open() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double SplitMix64::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double r = std::sqrt(-2.0 * std::log(uniform_open()));
  const double theta = 2.0 * std::numbers::pi * uniform_half_open();
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

DisturbanceSampler DisturbanceSampler::gaussian(const Mat& W, std::uint64_t seed,
                                                std::uint64_t stream) {
  DisturbanceSampler s;
  s.kind = Kind::gaussian;
  s.W_chol = cholesky_psd(W);
  s.seed = seed;
  s.stream = stream;
  s.rng_ = SplitMix64(seed, stream);
  return s;
}

DisturbanceSampler DisturbanceSampler::custom(std::function<Vec()> generator) {
  DisturbanceSampler s;
  s.kind = Kind::custom;
  s.generator_ = std::move(generator);
  return s;
}

Vec DisturbanceSampler::sample() {
  if (kind == Kind::custom) return generator_();
  Vec z(W_chol.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng_.standard_normal();
  return W_chol * z;
}

double DisturbanceSampler::standard_normal() { return rng_.standard_normal(); }

std::pair<MpcState, StepRecord> step(const MpcState& state, const SystemModel& model,
                                     const Precomputed& pre,
                                     DisturbanceSampler& sampler) {
  const double t2 = model.t * model.t;
  double eps = state.eps;
  if (state.k > 0) {
    if (!state.prev)
      throw MissingPreviousSolution("step: k > 0 but no previous solution");
#ifndef NDEBUG
    if (state.prev_omega) {
      const Vec rec = reconstruct_disturbance(state.x, *state.prev, model);
      if ((rec - *state.prev_omega).norm() > 1e-12)
        throw SolverFailure("step: disturbance reconstruction mismatch");
    }
#endif
    eps = update_epsilon(state.x, *state.prev, pre, model);
  }

  MpcSolution sol;
  try {
    sol = solve_mpc(state.x, eps, pre, model);
  } catch (const Infeasible& ex) {
    if (state.k == 0) throw;
    std::ostringstream ctx;
    ctx << "step: recursive feasibility violated at k = " << state.k
        << ", eps = " << eps << ", x = [" << state.x.transpose() << "]: " << ex.what();
    throw SolverFailure(ctx.str());
  } catch (const NonConvergence& ex) {
    std::ostringstream ctx;
    ctx << "step: solver did not converge at k = " << state.k << ", eps = " << eps
        << ", x = [" << state.x.transpose() << "]: " << ex.what();
    throw SolverFailure(ctx.str());
  }

  const Vec u = sol.m_star.head(model.nu());

  StepRecord rec;
  rec.k = state.k;
  rec.x = state.x;
  rec.u = u;
  rec.eps = eps;
  const Vec dx = state.x - model.x_ref;
  const Vec du = u - model.u_ref;
  rec.stage_cost = dx.dot(model.Q * dx) + du.dot(model.R * du);
  rec.violation = (model.C * state.x).norm() >= model.t ? 1 : 0;
  rec.J_star = sol.J_star;
  rec.lambda_star = sol.lambda_star;
  rec.constraint_value = sol.constraint_value;
  rec.contraction_gap = model.gamma * expected_epsilon_next(sol, pre, model) -
                (eps - (model.C * state.x).squaredNorm() / t2);

  const Vec omega = sampler.sample();
  MpcState next;
  next.k = state.k + 1;
  next.x = model.A * state.x + model.B * u + omega;
  next.eps = eps;  // refreshed by the next step's update
  next.prev = std::move(sol);
  next.prev_x = state.x;
  next.prev_u = u;
  next.prev_omega = omega;
  return {std::move(next), std::move(rec)};
}

TrajectoryLog run(const SystemModel& model, const Precomputed& pre, const Vec& x0,
                  double eps0, int T, DisturbanceSampler sampler) {
  if (T < 1) throw std::invalid_argument("run: T must be >= 1");
  if (x0.size() != model.nx())
    throw DimensionMismatch("run: x0 must have length nx");

  TrajectoryLog log;
  log.seed = sampler.seed;
  log.stream = sampler.stream;
  log.model_hash = model_hash(model);
  log.T = T;
  log.records.reserve(size_t(T));
  log.max_contraction_gap = -std::numeric_limits<double>::infinity();

  MpcState state;
  state.k = 0;
  state.x = x0;
  state.eps = eps0;
  for (int k = 0; k < T; ++k) {
    auto [next, rec] = step(state, model, pre, sampler);
    log.max_contraction_gap = std::max(log.max_contraction_gap, rec.contraction_gap);
    log.records.push_back(std::move(rec));
    state = std::move(next);
  }
  return log;
}

std::string TrajectoryLog::to_csv() const {
  std::string out;
  out += "# seed=" + std::to_string(seed) + " stream=" + std::to_string(stream) +
         " model_hash=" + model_hash + " T=" + std::to_string(T) +
         " tool_version=" + kToolVersion + "\n";
  const Eigen::Index nx = records.empty() ? 0 : records.front().x.size();
  const Eigen::Index nu = records.empty() ? 0 : records.front().u.size();
  out += "k";
  for (Eigen::Index i = 1; i <= nx; ++i) out += ",x_" + std::to_string(i);
  for (Eigen::Index i = 1; i <= nu; ++i) out += ",u_" + std::to_string(i);
  out += ",eps,stage_cost,violation,J_star,lambda_star,constraint_value\n";
  for (const StepRecord& r : records) {
    out += std::to_string(r.k);
    for (Eigen::Index i = 0; i < nx; ++i) {
      out += ',';
      append_number(out, r.x(i));
    }
    for (Eigen::Index i = 0; i < nu; ++i) {
      out += ',';
      append_number(out, r.u(i));
    }
    out += ',';
    append_number(out, r.eps);
    out += ',';
    append_number(out, r.stage_cost);
    out += ',' + std::to_string(r.violation);
    out += ',';
    append_number(out, r.J_star);
    out += ',';
    append_number(out, r.lambda_star);
    out += ',';
    append_number(out, r.constraint_value);
    out += '\n';
  }
  return out;
}

void write_csv(const TrajectoryLog& log, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("write_csv: cannot open '" + path + "'");
  out << log.to_csv();
}

namespace {

RunSummary execute_run(const SystemModel& model, const Precomputed& pre,
                       const InitPolicy& init, double eps0, int T,
                       std::uint64_t base_seed, int run_index) {
  DisturbanceSampler sampler =
      DisturbanceSampler::gaussian(model.W, base_seed, std::uint64_t(run_index));

  Vec x0;
  int discarded = 0;
  if (init.kind == InitPolicy::Kind::fixed) {
    x0 = init.x0;
  } else {
    // Standard-normal initial states; draws whose k = 0 problem cannot meet
    // the budget are discarded and redrawn.
    double last_min = 0.0;
    for (;;) {
      x0.resize(model.nx());
      for (Eigen::Index i = 0; i < x0.size(); ++i) x0(i) = sampler.standard_normal();
      last_min = min_constraint_value(build_problem(x0, eps0, pre, model));
      if (last_min <= eps0 + 1e-9) break;
      if (++discarded >= 1000)
        throw Infeasible(
            "monte_carlo: 1000 consecutive initial draws were infeasible at eps0 = " +
                std::to_string(eps0),
            last_min);
    }
  }

  const TrajectoryLog log = run(model, pre, x0, eps0, T, std::move(sampler));

  RunSummary rs;
  rs.stream = std::uint64_t(run_index);
  rs.discarded_draws = discarded;
  rs.max_contraction_gap = log.max_contraction_gap;
  rs.final_eps = log.records.back().eps;
  double cost = 0.0, v = 0.0, gk = 1.0;
  for (const StepRecord& r : log.records) {
    cost += r.stage_cost;
    v += gk * r.violation;
    rs.violations += r.violation;
    gk *= model.gamma;
  }
  rs.mean_cost = cost / double(T);
  rs.v_hat = v;
  return rs;
}

}  // namespace

EnsembleSummary monte_carlo(const SystemModel& model, const Precomputed& pre,
                            const InitPolicy& init, double eps0, int T, int runs,
                            std::uint64_t base_seed, int workers) {
  if (runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
  if (T < 1) throw std::invalid_argument("monte_carlo: T must be >= 1");

  std::vector<RunSummary> results(static_cast<size_t>(runs));
  if (workers <= 1 || runs == 1) {
    for (int r = 0; r < runs; ++r)
      results[size_t(r)] = execute_run(model, pre, init, eps0, T, base_seed, r);
  } else {
    std::atomic<int> next_run{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const int n_threads = std::min(workers, runs);
    std::vector<std::thread> pool;
    pool.reserve(size_t(n_threads));
    for (int tidx = 0; tidx < n_threads; ++tidx) {
      pool.emplace_back([&] {
        for (;;) {
          const int r = next_run.fetch_add(1);
          if (r >= runs) return;
          try {
            results[size_t(r)] = execute_run(model, pre, init, eps0, T, base_seed, r);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  EnsembleSummary s;
  s.runs = runs;
  s.T = T;
  s.seed = base_seed;
  s.trWP = pre.trWP;
  s.e = model.e;
  s.model_hash = model_hash(model);
  s.total_steps = long(runs) * long(T);
  s.max_contraction_gap = -std::numeric_limits<double>::infinity();
  for (const RunSummary& r : results) {
    s.avg_cost += r.mean_cost;
    s.V_hat += r.v_hat;
    s.discarded_draws += r.discarded_draws;
    s.max_contraction_gap = std::max(s.max_contraction_gap, r.max_contraction_gap);
  }
  s.avg_cost /= double(runs);
  s.V_hat /= double(runs);
  if (runs > 1) {
    double var_cost = 0.0, var_v = 0.0;
    for (const RunSummary& r : results) {
      var_cost += (r.mean_cost - s.avg_cost) * (r.mean_cost - s.avg_cost);
      var_v += (r.v_hat - s.V_hat) * (r.v_hat - s.V_hat);
    }
    var_cost /= double(runs - 1);
    var_v /= double(runs - 1);
    s.avg_cost_stderr = std::sqrt(var_cost / double(runs));
    s.V_hat_stderr = std::sqrt(var_v / double(runs));
  }
  s.per_run = std::move(results);
  return s;
}

std::string EnsembleSummary::to_json() const {
  nlohmann::json j;
  j["avg_cost"] = avg_cost;
  j["avg_cost_stderr"] = avg_cost_stderr;
  j["V_hat"] = V_hat;
  j["V_hat_stderr"] = V_hat_stderr;
  j["trWP"] = trWP;
  j["e"] = e;
  j["runs"] = runs;
  j["T"] = T;
  j["seed"] = seed;
  j["model_hash"] = model_hash;
  j["tool_version"] = kToolVersion;
  j["total_steps"] = total_steps;
  j["max_contraction_gap"] = max_contraction_gap;
  j["discarded_draws"] = discarded_draws;
  nlohmann::json per = nlohmann::json::array();
  for (const RunSummary& r : per_run) {
    per.push_back({{"stream", r.stream},
                   {"mean_cost", r.mean_cost},
                   {"v_hat", r.v_hat},
                   {"violations", r.violations},
                   {"discarded_draws", r.discarded_draws},
                   {"max_contraction_gap", r.max_contraction_gap},
                   {"final_eps", r.final_eps}});
  }
  j["per_run"] = per;
  return j.dump(2);
}

}  // namespace dsmpc
