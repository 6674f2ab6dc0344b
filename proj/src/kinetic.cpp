#include "kcc/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kcc/csv.hpp"
#include "kcc/errors.hpp"
#include "kcc/neural.hpp"

namespace kcc {

MixtureSpec MixtureSpec::bimodal() { return {{{0.5, -0.5, 0.15}, {0.5, 0.5, 0.15}}}; }

void MixtureSpec::validate() const {
  if (components.empty()) throw ValidationError("mixture has no components");
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0) || !std::isfinite(c.weight)) throw ValidationError("mixture weights must be >= 0");
    if (!in_domain(c.mean)) throw ValidationError("mixture means must lie in [-1, 1]");
    if (!(c.std > 0.0) || !std::isfinite(c.std)) throw ValidationError("mixture stds must be > 0");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ValidationError("mixture weights must sum to 1 (got " + std::to_string(total) + ")");
  }
}

void KineticConfig::validate() const {
  if (n_agents < 2 || n_agents % 2 != 0) throw ValidationError("n_agents must be even and >= 2");
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be > 0");
  if (n_steps < 0) throw ValidationError("n_steps must be >= 0");
  if (histogram_bins < 1) throw ValidationError("histogram_bins must be >= 1");
  if (controller == ControllerKind::openloop) {
    throw ValidationError("the open-loop controller is only defined for a single pair");
  }
  f0.validate();
}

Population sample_initial(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n < 2 || n % 2 != 0) throw ValidationError("sample_initial: n must be even and >= 2");
  std::vector<double> weights;
  for (const auto& c : spec.components) weights.push_back(c.weight);
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> normal;

  Population p;
  p.rng_seed = seed;
  p.opinions.reserve(n);
  std::size_t attempts = 0;
  while (p.opinions.size() < n) {
    const auto& c = spec.components[pick(rng)];
    const double x = c.mean + c.std * normal(rng);
    ++attempts;
    if (in_domain(x)) p.opinions.push_back(x);
    if (attempts >= 1000 && p.opinions.size() * 100 < attempts) {
      throw RejectionStall("sample_initial: acceptance rate below 1% (" +
                           std::to_string(p.opinions.size()) + " of " + std::to_string(attempts) +
                           " draws in [-1, 1])");
    }
  }
  return p;
}

std::pair<double, double> collide_pair(double xi, double xj, double eta,
                                       const FeedbackController* controller, const ModelConfig& cfg) {
  if (!in_domain(xi) || !in_domain(xj)) throw DomainViolation("collide_pair: opinions outside [-1, 1]");
  if (!(eta >= 0.0)) throw ValidationError("collide_pair: eta must be >= 0");
  const auto u = controller ? pair_controls(BinaryState{xi, xj}, *controller) : std::pair{0.0, 0.0};
  return {clamp_to_domain(euler_update(xi, xj, u.first, eta, cfg.beta)),
          clamp_to_domain(euler_update(xj, xi, u.second, eta, cfg.beta))};
}

std::vector<std::size_t> random_matching(std::size_t n, std::mt19937_64& rng) {
  if (n % 2 != 0) throw ValidationError("random_matching: n must be even");
  std::vector<std::size_t> m(n);
  std::iota(m.begin(), m.end(), 0);
  std::shuffle(m.begin(), m.end(), rng);
  return m;
}

void step(Population& p, const FeedbackController& controller, double eps, const ModelConfig& cfg,
          std::mt19937_64& rng) {
  const std::size_t n = p.size();
  const auto m = random_matching(n, rng);
  const auto& x = p.opinions;

  // Slot 2k is agent m[2k], slot 2k+1 its partner; both see the pair mean.
  std::vector<double> self(n), mean(n), u(n);
  const auto pairs = static_cast<std::ptrdiff_t>(n / 2);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < pairs; ++k) {
    const double a = x[m[2 * k]], b = x[m[2 * k + 1]];
    self[2 * k] = a;
    self[2 * k + 1] = b;
    mean[2 * k] = mean[2 * k + 1] = (a + b) / 2.0;
  }
  controller.control_batch(self, mean, u);

  std::vector<double> next(n);
  bool bad = false;
#pragma omp parallel for schedule(static) reduction(|| : bad)
  for (std::ptrdiff_t k = 0; k < pairs; ++k) {
    const double a = self[2 * k], b = self[2 * k + 1];
    const double na = clamp_to_domain(euler_update(a, b, u[2 * k], eps, cfg.beta));
    const double nb = clamp_to_domain(euler_update(b, a, u[2 * k + 1], eps, cfg.beta));
    bad = bad || !std::isfinite(na) || !std::isfinite(nb);
    next[m[2 * k]] = na;
    next[m[2 * k + 1]] = nb;
  }
  if (bad) {
    throw NonFiniteState("kinetic step " + std::to_string(p.step_count + 1) +
                         " produced a non-finite opinion (controller " + controller.name() + ")");
  }
  p.opinions = std::move(next);
  ++p.step_count;
}

Histogram histogram(const std::vector<double>& x, int bins) {
  if (bins < 1) throw ValidationError("histogram: bins must be >= 1");
  if (x.empty()) throw ValidationError("histogram: no samples");
  Histogram h;
  h.width = 2.0 / bins;
  h.centers.resize(bins);
  h.density.assign(bins, 0.0);
  for (int b = 0; b < bins; ++b) h.centers[b] = -1.0 + (b + 0.5) * h.width;
  for (double v : x) {
    const int b = std::clamp(static_cast<int>(std::floor((v + 1.0) / h.width)), 0, bins - 1);
    h.density[b] += 1.0;
  }
  const double scale = 1.0 / (static_cast<double>(x.size()) * h.width);
  for (auto& d : h.density) d *= scale;
  return h;
}

StepStats statistics(const Population& p) {
  const auto n = static_cast<double>(p.size());
  StepStats s;
  s.step = p.step_count;
  s.mean = std::accumulate(p.opinions.begin(), p.opinions.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : p.opinions) ss += (v - s.mean) * (v - s.mean);
  s.variance = p.size() > 1 ? ss / (n - 1.0) : 0.0;
  return s;
}

namespace {

void check_support(const Population& p) {
  for (double v : p.opinions) {
    if (!in_domain(v)) {
      throw DomainViolation("opinion " + std::to_string(v) + " left [-1, 1] at step " +
                            std::to_string(p.step_count));
    }
  }
}

}  // namespace

KineticResult run_from(Population p, const KineticConfig& kc, const ModelConfig& cfg,
                       const FeedbackController& controller) {
  cfg.validate();
  if (kc.n_steps < 0) throw ValidationError("n_steps must be >= 0");
  if (!(kc.eps > 0.0)) throw ValidationError("eps must be > 0");
  if (p.size() < 2 || p.size() % 2 != 0) throw ValidationError("population size must be even and >= 2");
  check_support(p);
  // Matching stream separate from the sampling stream.
  std::mt19937_64 rng(kc.seed ^ 0x6a09e667f3bcc909ULL);
  KineticResult r;
  r.stats.push_back(statistics(p));
  r.histograms.push_back(histogram(p.opinions, kc.histogram_bins));
  for (int s = 0; s < kc.n_steps; ++s) {
    step(p, controller, kc.eps, cfg, rng);
    check_support(p);
    r.stats.push_back(statistics(p));
    r.histograms.push_back(histogram(p.opinions, kc.histogram_bins));
  }
  r.final_population = std::move(p);
  return r;
}

KineticResult run(const KineticConfig& kc, const ModelConfig& cfg, const FeedbackController& controller) {
  kc.validate();
  return run_from(sample_initial(kc.f0, kc.n_agents, kc.seed), kc, cfg, controller);
}

std::unique_ptr<FeedbackController> make_controller(ControllerKind kind, const ModelConfig& cfg,
                                                    const Mlp* value_net, const Mlp* control_net) {
  switch (kind) {
    case ControllerKind::none: return std::make_unique<NoControl>();
    case ControllerKind::sdre: return std::make_unique<SdreController>(cfg);
    case ControllerKind::nn_value:
      if (!value_net) throw ValidationError("controller nn_value needs a trained value model");
      return std::make_unique<ValueNetController>(*value_net, cfg);
    case ControllerKind::nn_direct:
      if (!control_net) throw ValidationError("controller nn_direct needs a trained control model");
      return std::make_unique<DirectNetController>(*control_net);
    case ControllerKind::openloop: break;
  }
  throw ValidationError("controller '" + to_string(kind) + "' has no feedback form");
}

void write_stats_csv(const std::vector<StepStats>& stats, const std::string& path) {
  require_parent_directory(path);
  AtomicFile f(path);
  f.write("step,mean,variance\n");
  for (const auto& s : stats) f.line({static_cast<double>(s.step), s.mean, s.variance});
  f.commit();
}

void write_histogram_csv(const Histogram& h, const std::string& path) {
  require_parent_directory(path);
  AtomicFile f(path);
  f.write("bin_center,density\n");
  for (std::size_t b = 0; b < h.centers.size(); ++b) f.line({h.centers[b], h.density[b]});
  f.commit();
}

}  // namespace kcc
