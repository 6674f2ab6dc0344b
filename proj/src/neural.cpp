#include "kcc/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"
#include "kcc/csv.hpp"
#include "kcc/errors.hpp"
#include "kcc/sdre_feedback.hpp"

namespace kcc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Activation a) {
  return a == Activation::sigmoid ? "sigmoid" : "identity";
}

Activation parse_activation(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ValidationError("unknown activation '" + name + "'");
}

std::string to_string(Target t) { return t == Target::value ? "value" : "control"; }

Target parse_target(const std::string& name) {
  if (name == "value") return Target::value;
  if (name == "control") return Target::control;
  throw ValidationError("unknown training target '" + name + "' (expected value or control)");
}

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(int input_dim, std::vector<DenseLayer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
  validate();
}

void Mlp::validate() const {
  if (input_dim_ < 1) throw ValidationError("Mlp: input dimension must be >= 1");
  if (layers_.empty()) throw ValidationError("Mlp: no layers");
  Eigen::Index in = input_dim_;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& L = layers_[l];
    if (L.W.cols() != in || L.W.rows() < 1 || L.b.size() != L.W.rows()) {
      throw ValidationError("Mlp: layer " + std::to_string(l) + " does not chain (W is " +
                            std::to_string(L.W.rows()) + "x" + std::to_string(L.W.cols()) +
                            ", expected input " + std::to_string(in) + ")");
    }
    in = L.W.rows();
  }
}

int Mlp::output_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.back().W.rows());
}

std::vector<int> Mlp::layer_dims() const {
  std::vector<int> dims;
  for (const auto& L : layers_) dims.push_back(static_cast<int>(L.W.rows()));
  return dims;
}

Eigen::Index Mlp::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& L : layers_) n += L.W.size() + L.b.size();
  return n;
}

VectorXd flatten(const std::vector<DenseLayer>& layers) {
  Eigen::Index n = 0;
  for (const auto& L : layers) n += L.W.size() + L.b.size();
  VectorXd theta(n);
  Eigen::Index o = 0;
  for (const auto& L : layers) {
    theta.segment(o, L.W.size()) = L.W.reshaped();
    o += L.W.size();
    theta.segment(o, L.b.size()) = L.b;
    o += L.b.size();
  }
  return theta;
}

VectorXd Mlp::parameters() const { return flatten(layers_); }

void Mlp::set_parameters(const VectorXd& theta) {
  if (theta.size() != parameter_count()) {
    throw ValidationError("Mlp::set_parameters: expected " + std::to_string(parameter_count()) +
                          " parameters, got " + std::to_string(theta.size()));
  }
  Eigen::Index o = 0;
  for (auto& L : layers_) {
    L.W.reshaped() = theta.segment(o, L.W.size());
    o += L.W.size();
    L.b = theta.segment(o, L.b.size());
    o += L.b.size();
  }
}

bool Mlp::all_finite() const {
  return std::all_of(layers_.begin(), layers_.end(),
                     [](const DenseLayer& L) { return L.W.allFinite() && L.b.allFinite(); });
}

Mlp make_mlp(int out, std::uint64_t seed, int width, int depth) {
  if (out < 1) throw ValidationError("make_mlp: output size must be >= 1");
  if (width < 1 || depth < 1) throw ValidationError("make_mlp: width and depth must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  auto add = [&](int in, int n, Activation act) {
    std::uniform_real_distribution<double> unif(-1.0 / std::sqrt(in), 1.0 / std::sqrt(in));
    DenseLayer L;
    L.W = MatrixXd::NullaryExpr(n, in, [&] { return unif(rng); });
    L.b = VectorXd::NullaryExpr(n, [&] { return unif(rng); });
    L.act = act;
    layers.push_back(std::move(L));
  };
  add(2, 2, Activation::identity);
  int in = 2;
  for (int k = 0; k < depth; ++k) {
    add(in, width, Activation::sigmoid);
    in = width;
  }
  add(in, out, Activation::identity);
  return Mlp(2, std::move(layers));
}

// ---------------------------------------------------------------------------
// Forward passes. Forward-mode tangents carry d(activations)/dx_k through
// the net; the reverse pass then differentiates through them, which gives
// the exact parameter gradient of the gradient-matching term.

namespace {

struct LayerCache {
  MatrixXd Z;                 // pre-activation
  MatrixXd A;                 // output activations
  MatrixXd D1, D2;            // act', act'' at the pre-activation (sigmoid only)
  std::vector<MatrixXd> S;    // pre-activation tangents, one per input direction
  std::vector<MatrixXd> T;    // output tangents
  // Reverse-pass buffers.
  MatrixXd a_bar, z_bar;
  std::vector<MatrixXd> t_bar, s_bar;
};

// Buffers keep their storage between calls, so a training loop does not
// reallocate the large hidden-layer matrices every epoch.
struct Workspace {
  const MatrixXd* X = nullptr;
  std::vector<LayerCache> layers;
  std::vector<DenseLayer> grads;

  const MatrixXd& output() const { return layers.back().A; }
  const MatrixXd& input_of(std::size_t l) const { return l == 0 ? *X : layers[l - 1].A; }
};

void check_input(const Mlp& net, const MatrixXd& X) {
  if (X.rows() != net.input_dim()) {
    throw ValidationError("forward: input has " + std::to_string(X.rows()) + " rows, net expects " +
                          std::to_string(net.input_dim()));
  }
}

void run_forward(const Mlp& net, const MatrixXd& X, bool tangents, Workspace& c) {
  check_input(net, X);
  c.X = &X;
  const auto B = X.cols();
  const int d = net.input_dim();
  c.layers.resize(net.layers().size());
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& L = net.layers()[l];
    auto& lc = c.layers[l];
    lc.Z.noalias() = L.W * c.input_of(l);
    lc.Z.colwise() += L.b;
    if (L.act == Activation::sigmoid) {
      lc.A = (1.0 + (-lc.Z.array()).exp()).inverse().matrix();
      lc.D1 = (lc.A.array() * (1.0 - lc.A.array())).matrix();
      lc.D2 = (lc.D1.array() * (1.0 - 2.0 * lc.A.array())).matrix();
    } else {
      lc.A = lc.Z;
    }
    if (!tangents) continue;
    lc.S.resize(d);
    lc.T.resize(d);
    for (int k = 0; k < d; ++k) {
      // The input tangent is e_k in every column.
      if (l == 0) {
        lc.S[k] = L.W.col(k).replicate(1, B);
      } else {
        lc.S[k].noalias() = L.W * c.layers[l - 1].T[k];
      }
      if (L.act == Activation::sigmoid) {
        lc.T[k] = (lc.D1.array() * lc.S[k].array()).matrix();
      } else {
        lc.T[k] = lc.S[k];
      }
    }
  }
}

}  // namespace

VectorXd forward(const Mlp& net, const VectorXd& x) {
  return forward_batch(net, MatrixXd(x)).col(0);
}

MatrixXd forward_batch(const Mlp& net, const MatrixXd& X) {
  // Plain pass without keeping intermediates.
  if (X.rows() != net.input_dim()) {
    throw ValidationError("forward: input has " + std::to_string(X.rows()) + " rows, net expects " +
                          std::to_string(net.input_dim()));
  }
  MatrixXd a = X;
  for (const auto& L : net.layers()) {
    MatrixXd z = L.W * a;
    z.colwise() += L.b;
    if (L.act == Activation::sigmoid) {
      a = (1.0 + (-z.array()).exp()).inverse().matrix();
    } else {
      a = std::move(z);
    }
  }
  return a;
}

ValueGradientBatch input_gradient_batch(const Mlp& net, const MatrixXd& X) {
  if (net.output_dim() != 1) throw ValidationError("input_gradient: net must have scalar output");
  Workspace c;
  run_forward(net, X, true, c);
  ValueGradientBatch out;
  out.value = c.output().row(0);
  out.gradient.resize(net.input_dim(), X.cols());
  for (int k = 0; k < net.input_dim(); ++k) out.gradient.row(k) = c.layers.back().T[k].row(0);
  return out;
}

ValueGradient input_gradient(const Mlp& net, const VectorXd& x) {
  const auto b = input_gradient_batch(net, MatrixXd(x));
  return {b.value(0), b.gradient.col(0)};
}

// ---------------------------------------------------------------------------
// Loss and parameter gradients

TrainingBatch make_batch(const Dataset& d, const std::vector<std::size_t>& idx) {
  TrainingBatch b;
  const auto n = static_cast<Eigen::Index>(idx.size());
  b.x.resize(2, n);
  b.V.resize(n);
  b.dV.resize(2, n);
  b.u.resize(2, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const auto& s = d.samples.at(idx[c]);
    b.x.col(c) = s.state.vec();
    b.V(c) = s.V;
    b.dV.col(c) = s.gradV;
    b.u.col(c) = s.u;
  }
  return b;
}

namespace {

void check_batch(const Mlp& net, const TrainingBatch& batch, Target target) {
  if (batch.x.cols() == 0) throw ValidationError("loss: empty batch");
  if (target == Target::value) {
    if (net.output_dim() != 1) throw ValidationError("loss: value target needs a scalar-output net");
    if (batch.V.size() != batch.x.cols() || batch.dV.cols() != batch.x.cols()) {
      throw ValidationError("loss: batch value/gradient targets do not match inputs");
    }
  } else {
    if (net.output_dim() != 2) throw ValidationError("loss: control target needs a 2-output net");
    if (batch.u.cols() != batch.x.cols()) throw ValidationError("loss: control targets do not match inputs");
  }
}

// Fills ws.grads when `with_grads`; the returned result carries no grads.
LossResult compute_loss(const Mlp& net, const TrainingBatch& batch, double mu_dV, Target target,
                        bool with_grads, Workspace& ws) {
  check_batch(net, batch, target);
  if (!(mu_dV >= 0.0)) throw ValidationError("loss: mu_dV must be >= 0");
  const bool value = target == Target::value;
  run_forward(net, batch.x, value, ws);
  const double B = static_cast<double>(batch.x.cols());
  const int d = net.input_dim();
  auto& top = ws.layers.back();

  // top.a_bar = dLoss/d(output), top.t_bar[k] = dLoss/d(output tangent k)
  LossResult r;
  if (value) {
    top.a_bar = ws.output() - batch.V;
    r.value_part = top.a_bar.squaredNorm() / B;
    top.a_bar *= 2.0 / B;
    top.t_bar.resize(d);
    double g = 0.0;
    for (int k = 0; k < d; ++k) {
      top.t_bar[k] = top.T[k] - batch.dV.row(k);
      g += top.t_bar[k].squaredNorm();
      top.t_bar[k] *= 2.0 * mu_dV / B;
    }
    r.gradient_part = g / B;
    r.loss = r.value_part + mu_dV * r.gradient_part;
  } else {
    top.a_bar = ws.output() - batch.u;
    r.value_part = top.a_bar.squaredNorm() / B;
    r.loss = r.value_part;
    top.a_bar *= 2.0 / B;
  }
  if (!with_grads) return r;

  const bool second_order = value && mu_dV > 0.0;
  const auto& layers = net.layers();
  ws.grads.resize(layers.size());
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& L = layers[li];
    auto& lc = ws.layers[li];
    if (second_order) lc.s_bar.resize(d);
    if (L.act == Activation::sigmoid) {
      lc.z_bar = (lc.D1.array() * lc.a_bar.array()).matrix();
      if (second_order) {
        for (int k = 0; k < d; ++k) {
          lc.z_bar.array() += lc.D2.array() * lc.S[k].array() * lc.t_bar[k].array();
          lc.s_bar[k] = (lc.D1.array() * lc.t_bar[k].array()).matrix();
        }
      }
    } else {
      lc.z_bar = lc.a_bar;
      if (second_order) {
        for (int k = 0; k < d; ++k) lc.s_bar[k] = lc.t_bar[k];
      }
    }

    auto& g = ws.grads[li];
    g.act = L.act;
    g.W.noalias() = lc.z_bar * ws.input_of(li).transpose();
    g.b = lc.z_bar.rowwise().sum();
    if (second_order) {
      for (int k = 0; k < d; ++k) {
        if (li == 0) {
          g.W.col(k) += lc.s_bar[k].rowwise().sum();
        } else {
          g.W.noalias() += lc.s_bar[k] * ws.layers[li - 1].T[k].transpose();
        }
      }
    }
    if (li == 0) break;
    auto& below = ws.layers[li - 1];
    below.a_bar.noalias() = L.W.transpose() * lc.z_bar;
    if (second_order) {
      below.t_bar.resize(d);
      for (int k = 0; k < d; ++k) below.t_bar[k].noalias() = L.W.transpose() * lc.s_bar[k];
    }
  }
  return r;
}

}  // namespace

LossResult loss_and_param_grad(const Mlp& net, const TrainingBatch& batch, double mu_dV,
                               Target target) {
  Workspace ws;
  auto r = compute_loss(net, batch, mu_dV, target, true, ws);
  r.grads = std::move(ws.grads);
  return r;
}

LossResult loss_only(const Mlp& net, const TrainingBatch& batch, double mu_dV, Target target) {
  Workspace ws;
  return compute_loss(net, batch, mu_dV, target, false, ws);
}

// ---------------------------------------------------------------------------
// Training

void TrainConfig::validate() const {
  if (!(mu_dV >= 0.0) || !std::isfinite(mu_dV)) throw ValidationError("mu_dV must be a finite value >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be > 0");
  }
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 0) throw ValidationError("batch_size must be >= 0 (0 = full batch)");
  if (optimizer != "adam" && optimizer != "sgd") {
    throw ValidationError("unknown optimizer '" + optimizer + "' (expected adam or sgd)");
  }
  if (width < 1 || depth < 1) throw ValidationError("width and depth must be >= 1");
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& tc, Eigen::Index n)
      : adam_(tc.optimizer == "adam"), lr_(tc.learning_rate), m_(VectorXd::Zero(n)), v_(VectorXd::Zero(n)) {}

  void step(VectorXd& theta, const VectorXd& g) {
    if (!adam_) {
      theta -= lr_ * g;
      return;
    }
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++t_;
    m_ = b1 * m_ + (1.0 - b1) * g;
    v_ = b2 * v_ + (1.0 - b2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(b1, t_);
    const double c2 = 1.0 - std::pow(b2, t_);
    theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

 private:
  bool adam_;
  double lr_;
  VectorXd m_, v_;
  int t_ = 0;
};

void check_finite(const EpochRecord& rec) {
  if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
    throw DivergedTraining("training diverged at epoch " + std::to_string(rec.epoch) +
                           " (train loss " + std::to_string(rec.train_loss) + ", validation loss " +
                           std::to_string(rec.val_loss) + ")");
  }
}

}  // namespace

TrainResult train(const Dataset& d, Target target, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
  tc.validate();
  if (d.samples.empty()) throw ValidationError("train: dataset is empty");
  if (d.train.empty() || d.validation.empty()) {
    throw ValidationError("train: dataset needs nonempty train and validation splits");
  }
  const auto train_batch = make_batch(d, d.train);
  const auto val_batch = make_batch(d, d.validation);

  TrainResult res;
  res.net = make_mlp(target == Target::value ? 1 : 2, tc.seed, tc.width, tc.depth);
  Mlp net = res.net;
  VectorXd theta = net.parameters();
  Optimizer opt(tc, theta.size());
  const double mu = target == Target::value ? tc.mu_dV : 0.0;

  const std::size_t n_train = d.train.size();
  const bool full = tc.batch_size == 0 || static_cast<std::size_t>(tc.batch_size) >= n_train;
  std::mt19937_64 rng(tc.seed ^ 0xa0761d6478bd642fULL);
  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  Workspace train_ws, val_ws;
  res.best_val_loss = std::numeric_limits<double>::infinity();
  for (int epoch = 0;; ++epoch) {
    const bool last = epoch == tc.epochs;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = compute_loss(net, train_batch, mu, target, full && !last, train_ws).loss;
    rec.val_loss = compute_loss(net, val_batch, mu, target, false, val_ws).loss;
    res.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    check_finite(rec);
    if (rec.val_loss < res.best_val_loss) {
      res.best_val_loss = rec.val_loss;
      res.best_epoch = epoch;
      res.net = net;
    }
    if (last) break;

    if (full) {
      opt.step(theta, flatten(train_ws.grads));
      net.set_parameters(theta);
    } else {
      std::shuffle(order.begin(), order.end(), rng);
      Workspace batch_ws;
      for (std::size_t start = 0; start < n_train; start += tc.batch_size) {
        const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(tc.batch_size));
        std::vector<std::size_t> idx;
        for (std::size_t k = start; k < stop; ++k) idx.push_back(d.train[order[k]]);
        compute_loss(net, make_batch(d, idx), mu, target, true, batch_ws);
        opt.step(theta, flatten(batch_ws.grads));
        net.set_parameters(theta);
      }
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Metrics and evaluation

FitMetrics fit_metrics(const MatrixXd& pred, const MatrixXd& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols() || truth.size() == 0) {
    throw ValidationError("fit_metrics: prediction and truth shapes differ or are empty");
  }
  FitMetrics m;
  const MatrixXd e = pred - truth;
  const double ss_res = e.squaredNorm();
  m.mse = ss_res / static_cast<double>(truth.cols());
  const double ss_tot = (truth.array() - truth.mean()).square().sum();
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - ss_res / ss_tot;
  } else {
    m.r2 = ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  }
  double rel = 0.0;
  Eigen::Index counted = 0;
  for (Eigen::Index c = 0; c < truth.cols(); ++c) {
    const double t = truth.col(c).norm();
    if (t <= 1e-12) continue;
    rel += e.col(c).norm() / t;
    ++counted;
  }
  m.mre = counted ? rel / static_cast<double>(counted) : 0.0;
  return m;
}

std::vector<TransformedState> uniform_grid(int per_axis) {
  if (per_axis < 2) throw ValidationError("uniform_grid: need at least 2 points per axis");
  std::vector<TransformedState> out;
  out.reserve(static_cast<std::size_t>(per_axis) * per_axis);
  for (int i = 0; i < per_axis; ++i) {
    const double xi = -1.0 + 2.0 * i / (per_axis - 1);
    for (int j = 0; j < per_axis; ++j) {
      const double xj = -1.0 + 2.0 * j / (per_axis - 1);
      out.push_back(to_transformed(BinaryState{xi, xj}));
    }
  }
  return out;
}

EvaluationGrid make_evaluation_grid(const std::vector<TransformedState>& states,
                                    const ModelConfig& cfg) {
  cfg.validate();
  if (states.empty()) throw ValidationError("evaluation grid is empty");
  EvaluationGrid g;
  g.states = states;
  const auto n = static_cast<Eigen::Index>(states.size());
  g.x.resize(2, n);
  g.V.resize(n);
  g.dV.resize(2, n);
  g.u.resize(2, n);
  std::string failure;
#pragma omp parallel for schedule(static)
  for (Eigen::Index k = 0; k < n; ++k) {
    try {
      const auto f = sdre_feedback(states[k], cfg);
      g.x.col(k) = states[k].vec();
      g.V(k) = f.V;
      g.dV.col(k) = f.gradV;
      g.u.col(k) = f.u;
    } catch (const Error& e) {
#pragma omp critical(kcc_grid_failure)
      if (failure.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << "grid point (" << states[k].xi << ", " << states[k].xbar << "): " << e.what();
        failure = os.str();
      }
    }
  }
  if (!failure.empty()) throw NumericalError(failure);
  return g;
}

EvaluationGrid make_evaluation_grid(const Dataset& d, const std::vector<std::size_t>& idx) {
  const auto b = make_batch(d, idx);
  EvaluationGrid g;
  for (std::size_t i : idx) g.states.push_back(d.samples[i].state);
  g.x = b.x;
  g.V = b.V;
  g.dV = b.dV;
  g.u = b.u;
  return g;
}

namespace {

constexpr Eigen::Index kChunk = 4096;

}  // namespace

MatrixXd value_net_controls(const Mlp& net, const MatrixXd& X, const ModelConfig& cfg) {
  const auto w = cost_weights(cfg);
  const Mat2 m = -0.5 * w.R.ldlt().solve(w.B.transpose());
  return m * input_gradient_batch(net, X).gradient;
}

EvaluationReport evaluate(const Mlp& net, const EvaluationGrid& grid, const ModelConfig& cfg,
                          Target target) {
  const auto n = grid.x.cols();
  EvaluationReport rep;
  rep.target = target;
  if (target == Target::value) {
    if (net.output_dim() != 1) throw ValidationError("evaluate: value target needs a scalar-output net");
    const auto w = cost_weights(cfg);
    const Mat2 m = -0.5 * w.R.ldlt().solve(w.B.transpose());
    MatrixXd V(1, n), G(2, n);
    for (Eigen::Index s = 0; s < n; s += kChunk) {
      const auto len = std::min(kChunk, n - s);
      const auto b = input_gradient_batch(net, grid.x.middleCols(s, len));
      V.middleCols(s, len) = b.value;
      G.middleCols(s, len) = b.gradient;
    }
    rep.V = fit_metrics(V, MatrixXd(grid.V));
    rep.dV = fit_metrics(G, grid.dV);
    rep.u_V = fit_metrics(m * G, grid.u);
  } else {
    if (net.output_dim() != 2) throw ValidationError("evaluate: control target needs a 2-output net");
    MatrixXd U(2, n);
    for (Eigen::Index s = 0; s < n; s += kChunk) {
      const auto len = std::min(kChunk, n - s);
      U.middleCols(s, len) = forward_batch(net, grid.x.middleCols(s, len));
    }
    rep.u = fit_metrics(U, grid.u);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Grid search

GridSearchResult grid_search(const Dataset& d, const GridSpec& spec) {
  if (spec.mu_dV.empty() || spec.widths.empty() || spec.depths.empty()) {
    throw ValidationError("grid_search: every grid axis needs at least one value");
  }
  for (double mu : spec.mu_dV) {
    if (!(mu >= 0.0 && mu <= 2.0)) throw ValidationError("grid_search: mu_dV values must lie in [0, 2]");
  }
  const auto val_grid = make_evaluation_grid(d, d.validation);

  struct Entry {
    LeaderboardRow row;
    TrainConfig tc;
    Mlp net;
  };
  std::vector<Entry> entries;
  for (double mu : spec.mu_dV) {
    for (int width : spec.widths) {
      for (int depth : spec.depths) {
        Entry e;
        e.tc = spec.base;
        e.tc.mu_dV = mu;
        e.tc.width = width;
        e.tc.depth = depth;
        e.row.mu_dV = mu;
        e.row.width = width;
        e.row.depth = depth;
        try {
          auto res = train(d, spec.target, e.tc);
          const auto rep = evaluate(res.net, val_grid, d.model, spec.target);
          const FitMetrics& m = spec.target == Target::value ? *rep.u_V : *rep.u;
          e.row.val_mre = m.mre;
          e.row.val_mse = m.mse;
          e.row.val_r2 = m.r2;
          e.net = std::move(res.net);
        } catch (const Error& err) {
          e.row.error = err.what();
          e.row.val_mre = e.row.val_mse = e.row.val_r2 = std::numeric_limits<double>::quiet_NaN();
        }
        entries.push_back(std::move(e));
      }
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    const bool fa = !a.row.error.empty(), fb = !b.row.error.empty();
    if (fa != fb) return fb;
    if (fa) return false;
    return a.row.val_mre < b.row.val_mre;
  });
  if (!entries.front().row.error.empty()) {
    throw NumericalError("grid_search: every configuration failed; first error: " +
                         entries.front().row.error);
  }
  GridSearchResult out;
  out.best = entries.front().tc;
  out.best_net = entries.front().net;
  for (auto& e : entries) out.leaderboard.push_back(e.row);
  return out;
}

// ---------------------------------------------------------------------------
// Controllers

namespace {

// Runs `eval` over column chunks of (self, mean) pairs. Chunks are disjoint,
// so the parallel loop writes each output exactly once.
template <typename Eval>
void batched_controls(std::span<const double> self, std::span<const double> mean, std::span<double> out,
                      Eval&& eval) {
  if (self.size() != mean.size() || out.size() != self.size()) {
    throw ValidationError("control_batch: input and output sizes differ");
  }
  const auto n = static_cast<Eigen::Index>(self.size());
  const Eigen::Index chunks = (n + kChunk - 1) / kChunk;
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index s = c * kChunk;
    const Eigen::Index len = std::min(kChunk, n - s);
    MatrixXd X(2, len);
    for (Eigen::Index k = 0; k < len; ++k) {
      X(0, k) = self[s + k];
      X(1, k) = mean[s + k];
    }
    const MatrixXd U = eval(X);
    for (Eigen::Index k = 0; k < len; ++k) out[s + k] = U(0, k);
  }
}

}  // namespace

ValueNetController::ValueNetController(Mlp net, ModelConfig cfg) : net_(std::move(net)), cfg_(cfg) {
  cfg_.validate();
  if (net_.input_dim() != 2 || net_.output_dim() != 1) {
    throw ValidationError("nn_value controller needs a 2-input scalar-output net");
  }
}

double ValueNetController::control(double self, double mean) const {
  double u = 0.0;
  control_batch({&self, 1}, {&mean, 1}, {&u, 1});
  return u;
}

void ValueNetController::control_batch(std::span<const double> self, std::span<const double> mean,
                                       std::span<double> out) const {
  batched_controls(self, mean, out, [&](const MatrixXd& X) { return value_net_controls(net_, X, cfg_); });
}

DirectNetController::DirectNetController(Mlp net) : net_(std::move(net)) {
  if (net_.input_dim() != 2 || net_.output_dim() != 2) {
    throw ValidationError("nn_direct controller needs a 2-input 2-output net");
  }
}

double DirectNetController::control(double self, double mean) const {
  double u = 0.0;
  control_batch({&self, 1}, {&mean, 1}, {&u, 1});
  return u;
}

void DirectNetController::control_batch(std::span<const double> self, std::span<const double> mean,
                                        std::span<double> out) const {
  batched_controls(self, mean, out, [&](const MatrixXd& X) { return forward_batch(net_, X); });
}

// ---------------------------------------------------------------------------
// Model files

std::string mlp_to_json(const Mlp& net) {
  nlohmann::json j;
  j["format"] = "kcc-mlp";
  j["version"] = 1;
  j["input_dim"] = net.input_dim();
  j["layer_dims"] = net.layer_dims();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& L : net.layers()) {
    std::vector<double> w;
    w.reserve(L.W.size());
    for (Eigen::Index r = 0; r < L.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) w.push_back(L.W(r, c));
    }
    layers.push_back({{"activation", to_string(L.act)},
                      {"weights", w},
                      {"bias", std::vector<double>(L.b.data(), L.b.data() + L.b.size())}});
  }
  return j.dump(1) + "\n";
}

Mlp mlp_from_json(const std::string& text, const std::string& where) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(where + ": not valid JSON (" + e.what() + ")");
  }
  try {
    if (j.at("format").get<std::string>() != "kcc-mlp") throw SchemaError(where + ": not a model file");
    if (j.at("version").get<int>() != 1) throw SchemaError(where + ": unsupported model version");
    const int input_dim = j.at("input_dim").get<int>();
    const auto dims = j.at("layer_dims").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    if (input_dim < 1 || dims.empty() || layers.size() != dims.size()) {
      throw SchemaError(where + ": layer_dims and layers disagree");
    }
    std::vector<DenseLayer> out;
    int in = input_dim;
    for (std::size_t l = 0; l < dims.size(); ++l) {
      const auto& jl = layers[l];
      const int rows = dims[l];
      const auto w = jl.at("weights").get<std::vector<double>>();
      const auto b = jl.at("bias").get<std::vector<double>>();
      if (rows < 1 || w.size() != static_cast<std::size_t>(rows) * in ||
          b.size() != static_cast<std::size_t>(rows)) {
        throw SchemaError(where + ": layer " + std::to_string(l) + " has mismatched dimensions");
      }
      DenseLayer L;
      L.act = parse_activation(jl.at("activation").get<std::string>());
      L.W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), rows, in);
      L.b = Eigen::Map<const VectorXd>(b.data(), rows);
      out.push_back(std::move(L));
      in = rows;
    }
    Mlp net(input_dim, std::move(out));
    if (!net.all_finite()) throw SchemaError(where + ": non-finite parameters");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(where + ": malformed model (" + e.what() + ")");
  } catch (const SchemaError&) {
    throw;
  } catch (const ValidationError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

void save_mlp(const Mlp& net, const std::string& path) {
  net.validate();
  require_parent_directory(path);
  AtomicFile f(path);
  f.write(mlp_to_json(net));
  f.commit();
}

Mlp load_mlp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return mlp_from_json(ss.str(), path);
}

}  // namespace kcc
