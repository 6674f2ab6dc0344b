#include "kcc/sdre_feedback.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kcc/csv.hpp"
#include "kcc/errors.hpp"

namespace kcc {

FeedbackEval feedback_from_riccati(const Vec2& x, const Mat2& pi, const CostWeights<double>& w) {
  FeedbackEval e;
  e.Pi = pi;
  e.gradV = 2.0 * (pi * x);
  e.V = x.dot(pi * x);
  e.u = -0.5 * w.R.ldlt().solve(w.B.transpose() * e.gradV);
  return e;
}

FeedbackEval sdre_feedback(const TransformedState& t, const ModelConfig& cfg) {
  const auto problem = sdre_problem(t, cfg);
  const auto sol = solve_care_hamiltonian(problem);
  return feedback_from_riccati(t.vec(), sol.Pi, cost_weights(cfg));
}

ControllerKind parse_controller(const std::string& name) {
  if (name == "none") return ControllerKind::none;
  if (name == "sdre") return ControllerKind::sdre;
  if (name == "nn_value") return ControllerKind::nn_value;
  if (name == "nn_direct") return ControllerKind::nn_direct;
  if (name == "openloop") return ControllerKind::openloop;
  throw ValidationError("unknown controller '" + name +
                        "' (expected none, sdre, nn_value, nn_direct or openloop)");
}

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::none: return "none";
    case ControllerKind::sdre: return "sdre";
    case ControllerKind::nn_value: return "nn_value";
    case ControllerKind::nn_direct: return "nn_direct";
    case ControllerKind::openloop: return "openloop";
  }
  return "unknown";
}

void FeedbackController::control_batch(std::span<const double> self, std::span<const double> mean,
                                       std::span<double> out) const {
  const auto n = static_cast<std::ptrdiff_t>(self.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < n; ++k) out[k] = control(self[k], mean[k]);
}

void NoControl::control_batch(std::span<const double>, std::span<const double>,
                              std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

double SdreController::control(double self, double mean) const {
  return sdre_feedback(TransformedState{self, mean}, cfg_).u(0);
}

std::pair<double, double> pair_controls(const BinaryState& s, const FeedbackController& c) {
  const double mean = (s.xi + s.xj) / 2.0;
  return {c.control(s.xi, mean), c.control(s.xj, mean)};
}

std::pair<double, double> pair_controls(const BinaryState& s, const ModelConfig& cfg) {
  return pair_controls(s, SdreController(cfg));
}

double running_cost(const BinaryState& s, double ui, double uj, const ModelConfig& cfg) {
  const auto w = cost_weights(cfg);
  const Vec2 x(s.xi, (s.xi + s.xj) / 2.0);
  const Vec2 u(ui, (ui + uj) / 2.0);
  return x.dot(w.Q * x) + u.dot(w.R * u);
}

double TrajectoryRecord::total_cost() const {
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < running_cost.size(); ++k) sum += dt * running_cost[k];
  return sum;
}

double TrajectoryRecord::first_time_gap_below(double threshold) const {
  for (std::size_t k = 0; k < consensus_gap.size(); ++k) {
    if (consensus_gap[k] < threshold) return times[k];
  }
  return -1.0;
}

void write_trajectory_csv(const TrajectoryRecord& rec, const std::string& path) {
  AtomicFile f(path);
  f.write("t,xi,xj,ui,uj,cost,gap\n");
  for (std::size_t k = 0; k < rec.size(); ++k) {
    f.line({rec.times[k], rec.states[k].xi, rec.states[k].xj, rec.controls[k].first,
            rec.controls[k].second, rec.running_cost[k], rec.consensus_gap[k]});
  }
  f.commit();
}

TrajectoryRecord read_trajectory_csv(const std::string& path) {
  const auto table = read_csv(path);
  require_header(table, {"t", "xi", "xj", "ui", "uj", "cost", "gap"}, path);
  TrajectoryRecord rec;
  for (const auto& r : table.rows) {
    rec.times.push_back(r[0]);
    rec.states.push_back({r[1], r[2]});
    rec.controls.emplace_back(r[3], r[4]);
    rec.running_cost.push_back(r[5]);
    rec.consensus_gap.push_back(r[6]);
  }
  if (rec.times.size() >= 2) rec.dt = rec.times[1] - rec.times[0];
  return rec;
}

namespace {

int step_count(double dt, double T) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt must be > 0");
  if (!(T >= dt)) throw ValidationError("horizon T must be >= dt");
  return static_cast<int>(std::llround(T / dt));
}

void check_state(const BinaryState& s, const std::string& who) {
  if (!in_domain(s.xi) || !in_domain(s.xj)) {
    throw DomainViolation(who + ": initial opinions must lie in [-1, 1]");
  }
}

double clamp_counted(double x, int& hits) {
  const double c = clamp_to_domain(x);
  if (c != x) ++hits;
  return c;
}

void record_point(TrajectoryRecord& rec, double t, const BinaryState& s,
                  std::pair<double, double> u, const ModelConfig& cfg) {
  rec.times.push_back(t);
  rec.states.push_back(s);
  rec.controls.push_back(u);
  rec.running_cost.push_back(running_cost(s, u.first, u.second, cfg));
  rec.consensus_gap.push_back(std::abs(s.xi - s.xj));
}

template <typename ControlAt>
TrajectoryRecord integrate(const BinaryState& s0, double dt, int n, const ModelConfig& cfg,
                           ControlAt&& control_at) {
  TrajectoryRecord rec;
  rec.dt = dt;
  rec.times.reserve(n + 1);
  BinaryState s = s0;
  for (int k = 0;; ++k) {
    const auto u = control_at(k, s);
    record_point(rec, k * dt, s, u, cfg);
    if (k == n) break;
    const double xi = euler_update(s.xi, s.xj, u.first, dt, cfg.beta);
    const double xj = euler_update(s.xj, s.xi, u.second, dt, cfg.beta);
    if (!std::isfinite(xi) || !std::isfinite(xj)) {
      throw NonFiniteState("trajectory became non-finite at t = " + std::to_string((k + 1) * dt));
    }
    s = {clamp_counted(xi, rec.clamp_hits), clamp_counted(xj, rec.clamp_hits)};
  }
  return rec;
}

}  // namespace

TrajectoryRecord integrate_closed_loop(const BinaryState& s0, const FeedbackController& c,
                                       double dt, double T, const ModelConfig& cfg) {
  cfg.validate();
  check_state(s0, "integrate_closed_loop");
  const int n = step_count(dt, T);
  return integrate(s0, dt, n, cfg, [&](int, const BinaryState& s) { return pair_controls(s, c); });
}

TrajectoryRecord integrate_open_loop(const BinaryState& s0, const OpenLoopSchedule& schedule,
                                     const ModelConfig& cfg) {
  cfg.validate();
  check_state(s0, "integrate_open_loop");
  if (schedule.controls.empty()) throw ValidationError("open-loop schedule is empty");
  const int n = static_cast<int>(schedule.controls.size());
  step_count(schedule.dt, schedule.dt * n);
  return integrate(s0, schedule.dt, n, cfg, [&](int k, const BinaryState&) {
    return schedule.controls[std::min(k, n - 1)];
  });
}

namespace {

// Discretized transformed problem used by the sweep: states x_0..x_n,
// controls u_0..u_{n-1}.
struct SweepProblem {
  ModelConfig cfg;
  CostWeights<double> w;
  Mat2 r_inv;
  double dt;
  int n;
  Vec2 x0;

  std::vector<Vec2> forward(const std::vector<Vec2>& u) const {
    std::vector<Vec2> x(n + 1);
    x[0] = x0;
    for (int k = 0; k < n; ++k) {
      x[k + 1] = x[k] + dt * (transformed_drift(TransformedState{x[k](0), x[k](1)}, cfg) + w.B * u[k]);
    }
    return x;
  }

  double cost(const std::vector<Vec2>& x, const std::vector<Vec2>& u) const {
    double j = 0.0;
    for (int k = 0; k < n; ++k) j += dt * (x[k].dot(w.Q * x[k]) + u[k].dot(w.R * u[k]));
    return j;
  }

  // p[k] = dJ/dx_k for k = 0..n, p[n] = 0.
  std::vector<Vec2> adjoint(const std::vector<Vec2>& x) const {
    std::vector<Vec2> p(n + 1, Vec2::Zero());
    for (int k = n - 1; k >= 0; --k) {
      const Mat2 jac = transformed_drift_jacobian(TransformedState{x[k](0), x[k](1)}, cfg);
      p[k] = 2.0 * dt * (w.Q * x[k]) + (Mat2::Identity() + dt * jac).transpose() * p[k + 1];
    }
    return p;
  }
};

}  // namespace

TrajectoryRecord pmp_open_loop(const BinaryState& s0, const ModelConfig& cfg,
                               const PmpOptions& opts) {
  cfg.validate();
  check_state(s0, "pmp_open_loop");
  if (opts.max_sweeps < 0) throw ValidationError("pmp max_sweeps must be >= 0");
  if (!(opts.tol > 0.0)) throw ValidationError("pmp tol must be > 0");
  const int n = step_count(opts.dt, opts.T);

  const auto t0 = to_transformed(s0);
  SweepProblem sp{cfg, cost_weights(cfg), Mat2::Zero(), opts.dt, n, t0.vec()};
  sp.r_inv = sp.w.R.inverse();

  std::vector<Vec2> u(n, Vec2::Zero());
  std::vector<Vec2> x = sp.forward(u);
  double j = sp.cost(x, u);
  bool converged = false;
  int sweep = 0;
  std::vector<Vec2> dir(n), trial(n);
  for (; sweep < opts.max_sweeps; ++sweep) {
    const auto p = sp.adjoint(x);
    double step_norm = 0.0;
    double slope = 0.0;  // <dJ/du, dir>
    for (int k = 0; k < n; ++k) {
      dir[k] = -0.5 * sp.r_inv * sp.w.B.transpose() * p[k + 1] - u[k];
      const Vec2 grad = opts.dt * (2.0 * sp.w.R * u[k] + sp.w.B.transpose() * p[k + 1]);
      slope += grad.dot(dir[k]);
      step_norm = std::max(step_norm, dir[k].cwiseAbs().maxCoeff());
    }
    if (step_norm < opts.tol) {
      converged = true;
      break;
    }
    double omega = 1.0;
    bool accepted = false;
    for (; omega > 1e-14; omega *= 0.5) {
      for (int k = 0; k < n; ++k) trial[k] = u[k] + omega * dir[k];
      auto xt = sp.forward(trial);
      const double jt = sp.cost(xt, trial);
      if (std::isfinite(jt) && jt <= j + 1e-4 * omega * slope) {
        u.swap(trial);
        x = std::move(xt);
        j = jt;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }

  OpenLoopSchedule schedule{opts.dt, {}};
  schedule.controls.reserve(n);
  for (int k = 0; k < n; ++k) {
    // Physical controls whose transformed image is (u1, u2).
    schedule.controls.emplace_back(u[k](0), 2.0 * u[k](1) - u[k](0));
  }
  auto rec = integrate_open_loop(s0, schedule, cfg);
  rec.converged = converged;
  rec.sweeps = sweep;
  return rec;
}

}  // namespace kcc
