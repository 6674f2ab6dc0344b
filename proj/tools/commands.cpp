#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include "cli.hpp"
#include "kcc/csv.hpp"
#include "kcc/dataset.hpp"
#include "kcc/errors.hpp"
#include "svg.hpp"

namespace kcc::cli {
namespace {

namespace fs = std::filesystem;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<double> gamma, beta, eps;
  std::vector<double> mu_dv;
  std::optional<std::string> controller;
};

RunConfig build_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  if (g.seed) cfg.dataset.seed = cfg.train.seed = cfg.kinetic.seed = *g.seed;
  if (g.threads) cfg.threads = *g.threads;
  if (g.out_dir) cfg.paths.out_dir = *g.out_dir;
  if (g.gamma) cfg.model.gamma = *g.gamma;
  if (g.beta) cfg.model.beta = *g.beta;
  if (g.eps) cfg.kinetic.eps = *g.eps;
  if (g.mu_dv.size() == 1) cfg.train.mu_dV = g.mu_dv.front();
  if (!g.mu_dv.empty()) cfg.grid.mu_dV = g.mu_dv;
  return cfg;
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw IoError(what + " '" + path + "' does not exist");
}

/// Output paths are checked before any work so a bad path fails fast and
/// leaves nothing behind.
void require_output(const std::string& path) {
  require_parent_directory(path);
  if (fs::is_directory(path)) throw IoError("output path '" + path + "' is a directory");
}

std::string stem_with(const std::string& path, const std::string& suffix) {
  fs::path p(path);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

std::string model_path_for(const RunConfig& cfg, Target t) {
  return cfg.resolve(t == Target::value ? cfg.paths.value_model : cfg.paths.control_model);
}

void write_history(const std::vector<EpochRecord>& h, const std::string& path) {
  AtomicFile f(path);
  f.write("epoch,train_loss,val_loss\n");
  for (const auto& r : h) f.line({static_cast<double>(r.epoch), r.train_loss, r.val_loss});
  f.commit();
}

Target target_of(const Mlp& net, const std::string& path) {
  if (net.input_dim() != 2) throw SchemaError("model '" + path + "' must take 2 inputs");
  if (net.output_dim() == 1) return Target::value;
  if (net.output_dim() == 2) return Target::control;
  throw SchemaError("model '" + path + "' has " + std::to_string(net.output_dim()) +
                    " outputs; expected 1 (value) or 2 (control)");
}

struct LoadedNets {
  std::optional<Mlp> value, control;
};

LoadedNets load_nets_for(ControllerKind kind, const RunConfig& cfg) {
  LoadedNets n;
  if (kind == ControllerKind::nn_value) {
    const auto p = model_path_for(cfg, Target::value);
    require_file(p, "value model");
    n.value = load_mlp(p);
    if (target_of(*n.value, p) != Target::value) throw SchemaError("'" + p + "' is not a value model");
  }
  if (kind == ControllerKind::nn_direct) {
    const auto p = model_path_for(cfg, Target::control);
    require_file(p, "control model");
    n.control = load_mlp(p);
    if (target_of(*n.control, p) != Target::control) throw SchemaError("'" + p + "' is not a control model");
  }
  return n;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct GenDataArgs {
  std::string out;
  std::optional<std::size_t> n;
};

int cmd_gen_data(RunConfig cfg, const GenDataArgs& a, std::ostream& out) {
  if (a.n) cfg.dataset.n_samples = *a.n;
  cfg.validate();
  const auto path = cfg.resolve(a.out.empty() ? cfg.paths.data : a.out);
  require_output(path);
  const auto d = generate(cfg.dataset.n_samples, cfg.dataset.seed, cfg.model);
  save_dataset(d, path);

  double vmax = 0.0, umax = 0.0;
  for (const auto& s : d.samples) {
    vmax = std::max(vmax, s.V);
    umax = std::max(umax, s.u.cwiseAbs().maxCoeff());
  }
  out << "wrote " << path << ": n=" << d.size() << " train=" << d.train.size()
      << " validation=" << d.validation.size() << " V in [0, " << fmt(vmax) << "] |u|max=" << fmt(umax)
      << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data, out, history;
  std::optional<std::string> target;
  std::optional<int> epochs;
};

int cmd_train(RunConfig cfg, const TrainArgs& a, std::ostream& out) {
  if (a.target) cfg.target = parse_target(*a.target);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.validate();
  const auto data = cfg.resolve(a.data.empty() ? cfg.paths.data : a.data);
  const auto model = a.out.empty() ? model_path_for(cfg, cfg.target) : cfg.resolve(a.out);
  const auto history = a.history.empty() ? stem_with(model, "_history.csv") : cfg.resolve(a.history);
  require_file(data, "dataset");
  require_output(model);
  require_output(history);

  const auto d = load_dataset(data);
  std::vector<EpochRecord> seen;
  TrainResult res;
  try {
    res = train(d, cfg.target, cfg.train, [&](const EpochRecord& r) { seen.push_back(r); });
  } catch (const DivergedTraining&) {
    write_history(seen, history);
    throw;
  }
  save_mlp(res.net, model);
  write_history(res.history, history);
  out << "wrote " << model << " (" << to_string(cfg.target) << ", mu_dV=" << fmt(cfg.train.mu_dV)
      << ", best epoch " << res.best_epoch << ", validation loss " << fmt(res.best_val_loss) << ")\n";
  return kOk;
}

struct GridArgs {
  std::string data, out, model;
  std::optional<std::string> target;
  std::optional<int> epochs;
};

int cmd_grid_search(RunConfig cfg, const GridArgs& a, std::ostream& out) {
  if (a.target) cfg.target = parse_target(*a.target);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.validate();
  const auto data = cfg.resolve(a.data.empty() ? cfg.paths.data : a.data);
  const auto board = cfg.resolve(a.out.empty() ? "leaderboard.csv" : a.out);
  const auto model = a.model.empty() ? model_path_for(cfg, cfg.target) : cfg.resolve(a.model);
  require_file(data, "dataset");
  require_output(board);
  require_output(model);

  const auto d = load_dataset(data);
  GridSpec spec;
  spec.mu_dV = cfg.grid.mu_dV;
  spec.widths = cfg.grid.widths;
  spec.depths = cfg.grid.depths;
  spec.base = cfg.train;
  spec.target = cfg.target;
  const auto res = grid_search(d, spec);

  AtomicFile f(board);
  f.write("mu_dV,width,depth,val_mre,val_mse,val_r2\n");
  for (const auto& r : res.leaderboard) {
    f.line({r.mu_dV, static_cast<double>(r.width), static_cast<double>(r.depth), r.val_mre, r.val_mse, r.val_r2});
  }
  f.commit();
  save_mlp(res.best_net, model);
  for (const auto& r : res.leaderboard) {
    out << "mu_dV=" << fmt(r.mu_dV) << " width=" << r.width << " depth=" << r.depth;
    if (r.error.empty()) {
      out << " val_mre=" << fmt(r.val_mre) << " val_r2=" << fmt(r.val_r2) << "\n";
    } else {
      out << " failed: " << r.error << "\n";
    }
  }
  out << "wrote " << board << " and best model " << model << "\n";
  return kOk;
}

struct EvalArgs {
  std::vector<std::string> models;
  std::string out;
  std::optional<int> grid;
};

int cmd_eval(RunConfig cfg, const EvalArgs& a, std::ostream& out) {
  if (a.grid) cfg.eval.grid_per_axis = *a.grid;
  cfg.validate();
  std::vector<std::string> paths;
  for (const auto& m : a.models) paths.push_back(cfg.resolve(m));
  if (paths.empty()) {
    paths.push_back(model_path_for(cfg, Target::value));
    const auto c = model_path_for(cfg, Target::control);
    if (fs::is_regular_file(c)) paths.push_back(c);
  }
  const auto csv = cfg.resolve(a.out.empty() ? "eval.csv" : a.out);
  for (const auto& p : paths) require_file(p, "model");
  require_output(csv);

  LoadedNets nets;
  for (const auto& p : paths) {
    Mlp net = load_mlp(p);
    auto& slot = target_of(net, p) == Target::value ? nets.value : nets.control;
    if (slot) throw ValidationError("eval: two models of the same kind given ('" + p + "')");
    slot = std::move(net);
  }

  const auto grid = make_evaluation_grid(uniform_grid(cfg.eval.grid_per_axis), cfg.model);
  EvaluationReport report;
  if (nets.value) report = evaluate(*nets.value, grid, cfg.model, Target::value);
  if (nets.control) report.u = evaluate(*nets.control, grid, cfg.model, Target::control).u;

  AtomicFile f(csv);
  f.write("quantity,mse,r2,mre\n");
  const std::pair<const char*, const std::optional<FitMetrics>*> rows[] = {
      {"V_theta", &report.V}, {"dV_theta", &report.dV}, {"u_V", &report.u_V}, {"u_theta", &report.u}};
  for (const auto& [name, m] : rows) {
    if (!*m) continue;
    f.write(std::string(name) + "," + format_double((*m)->mse) + "," + format_double((*m)->r2) + "," +
            format_double((*m)->mre) + "\n");
    out << std::left << std::setw(9) << name << " mse=" << fmt((*m)->mse) << " r2=" << fmt((*m)->r2)
        << " mre=" << fmt((*m)->mre) << "\n";
  }
  f.commit();
  out << "wrote " << csv << " (" << grid.states.size() << " grid points)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

svg::LinePlot gap_plot(const std::vector<std::pair<std::string, TrajectoryRecord>>& runs) {
  svg::LinePlot p{"Consensus gap of one pair", "t", "|x_i - x_j|", {}, false};
  for (const auto& [name, rec] : runs) p.series.push_back({name, rec.times, rec.consensus_gap});
  return p;
}

struct BinaryArgs {
  std::vector<std::string> controllers;
  std::optional<double> xi, xj, T, dt;
  std::string out_prefix;
};

int cmd_simulate_binary(RunConfig cfg, const BinaryArgs& a, const std::optional<std::string>& global_ctrl,
                        std::ostream& out) {
  if (a.xi) cfg.binary.xi = *a.xi;
  if (a.xj) cfg.binary.xj = *a.xj;
  if (a.T) cfg.binary.T = *a.T;
  if (a.dt) cfg.binary.dt = *a.dt;
  std::vector<ControllerKind> kinds;
  if (!a.controllers.empty()) {
    for (const auto& c : a.controllers) kinds.push_back(parse_controller(c));
  } else {
    kinds.push_back(global_ctrl ? parse_controller(*global_ctrl) : cfg.binary.controller);
  }
  cfg.validate();
  const std::string prefix = cfg.resolve(a.out_prefix.empty() ? "trajectory" : a.out_prefix);
  std::vector<std::string> csvs;
  for (auto k : kinds) {
    csvs.push_back(prefix + "_" + to_string(k) + ".csv");
    require_output(csvs.back());
  }
  const std::string plot = prefix + "_gap.svg";
  require_output(plot);
  std::vector<LoadedNets> nets;
  for (auto k : kinds) nets.push_back(load_nets_for(k, cfg));

  const BinaryState s0{cfg.binary.xi, cfg.binary.xj};
  std::vector<std::pair<std::string, TrajectoryRecord>> runs;
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    TrajectoryRecord rec;
    if (kinds[i] == ControllerKind::openloop) {
      PmpOptions o;
      o.T = cfg.binary.T;
      o.dt = cfg.binary.dt;
      o.max_sweeps = cfg.binary.pmp_max_sweeps;
      o.tol = cfg.binary.pmp_tol;
      rec = pmp_open_loop(s0, cfg.model, o);
    } else {
      const auto ctrl = make_controller(kinds[i], cfg.model, nets[i].value ? &*nets[i].value : nullptr,
                                        nets[i].control ? &*nets[i].control : nullptr);
      rec = integrate_closed_loop(s0, *ctrl, cfg.binary.dt, cfg.binary.T, cfg.model);
    }
    const double t01 = rec.first_time_gap_below(0.1);
    out << std::left << std::setw(9) << to_string(kinds[i]) << " cost=" << fmt(rec.total_cost())
        << " final_gap=" << fmt(rec.consensus_gap.back())
        << " t(gap<0.1)=" << (t01 < 0 ? std::string("never") : fmt(t01));
    if (kinds[i] == ControllerKind::openloop) {
      out << " sweeps=" << rec.sweeps << (rec.converged ? " converged" : " not-converged");
    }
    out << "\n";
    runs.emplace_back(to_string(kinds[i]), std::move(rec));
  }
  for (std::size_t i = 0; i < runs.size(); ++i) write_trajectory_csv(runs[i].second, csvs[i]);
  svg::write(svg::render(gap_plot(runs)), plot);
  out << "wrote " << runs.size() << " trajectory CSV(s) and " << plot << "\n";
  return kOk;
}

svg::LinePlot density_plot(const std::string& title, const std::vector<std::pair<std::string, Histogram>>& hs) {
  svg::LinePlot p{title, "opinion x", "density", {}, false};
  for (const auto& [label, h] : hs) p.series.push_back({label, h.centers, h.density});
  return p;
}

svg::Surface density_surface(const std::string& title, const std::vector<Histogram>& hs) {
  svg::Surface s{title, "opinion x", "step", hs.front().centers, {}, {}};
  for (std::size_t k = 0; k < hs.size(); ++k) {
    s.y.push_back(static_cast<double>(k));
    s.z.push_back(hs[k].density);
  }
  return s;
}

struct KineticArgs {
  std::optional<std::size_t> n_agents;
  std::optional<int> steps;
  std::string out_prefix;
};

int cmd_simulate_kinetic(RunConfig cfg, const KineticArgs& a, const std::optional<std::string>& global_ctrl,
                         std::ostream& out) {
  if (a.n_agents) cfg.kinetic.n_agents = *a.n_agents;
  if (a.steps) cfg.kinetic.n_steps = *a.steps;
  if (global_ctrl) cfg.kinetic.controller = parse_controller(*global_ctrl);
  cfg.validate();
  const auto kind = cfg.kinetic.controller;
  const std::string prefix =
      cfg.resolve(a.out_prefix.empty() ? "kinetic_" + to_string(kind) : a.out_prefix);
  require_output(prefix + "_stats.csv");
  const auto nets = load_nets_for(kind, cfg);
  const auto ctrl = make_controller(kind, cfg.model, nets.value ? &*nets.value : nullptr,
                                    nets.control ? &*nets.control : nullptr);

  const auto r = run(cfg.kinetic, cfg.model, *ctrl);

  write_stats_csv(r.stats, prefix + "_stats.csv");
  std::vector<std::pair<std::string, Histogram>> all;
  for (std::size_t k = 0; k < r.histograms.size(); ++k) {
    std::ostringstream tag;
    tag << "_step" << std::setw(2) << std::setfill('0') << k;
    write_histogram_csv(r.histograms[k], prefix + tag.str() + ".csv");
    svg::write(svg::render(density_plot("Density at step " + std::to_string(k),
                                        {{"step " + std::to_string(k), r.histograms[k]}})),
               prefix + tag.str() + ".svg");
    all.emplace_back("step " + std::to_string(k), r.histograms[k]);
  }
  svg::write(svg::render(density_plot("Density evolution (" + to_string(kind) + ")", all)),
             prefix + "_overlay.svg");
  svg::write(svg::render(density_surface("Density over time (" + to_string(kind) + ")", r.histograms)),
             prefix + "_surface.svg");

  std::vector<double> steps, var;
  for (const auto& s : r.stats) {
    steps.push_back(s.step);
    var.push_back(s.variance);
  }
  svg::write(svg::render(svg::LinePlot{"Opinion variance", "step", "variance", {{to_string(kind), steps, var}}}),
             prefix + "_variance.svg");

  const auto& s0 = r.stats.front();
  const auto& s1 = r.stats.back();
  out << to_string(kind) << ": N=" << cfg.kinetic.n_agents << " eps=" << fmt(cfg.kinetic.eps)
      << " steps=" << cfg.kinetic.n_steps << " mean " << fmt(s0.mean) << " -> " << fmt(s1.mean) << " variance "
      << fmt(s0.variance) << " -> " << fmt(s1.variance) << " (ratio " << fmt(s1.variance / s0.variance) << ")\n"
      << "wrote " << prefix << "_*.csv/svg\n";
  return kOk;
}

// ---------------------------------------------------------------------------

enum class CsvKind { trajectory, histogram, stats, history };

CsvKind classify(const CsvTable& t, const std::string& path) {
  using H = std::vector<std::string>;
  if (t.header == H{"t", "xi", "xj", "ui", "uj", "cost", "gap"}) return CsvKind::trajectory;
  if (t.header == H{"bin_center", "density"}) return CsvKind::histogram;
  if (t.header == H{"step", "mean", "variance"}) return CsvKind::stats;
  if (t.header == H{"epoch", "train_loss", "val_loss"}) return CsvKind::history;
  throw SchemaError("plot: '" + path + "' has an unrecognized header");
}

struct PlotArgs {
  std::vector<std::string> inputs;
  std::string overlay;
};

int cmd_plot(RunConfig cfg, const PlotArgs& a, std::ostream& out) {
  cfg.validate();
  struct Input {
    std::string path;
    CsvTable table;
    CsvKind kind;
  };
  // Read everything first: a malformed file must not leave half the plots.
  std::vector<Input> inputs;
  for (const auto& p : a.inputs) {
    auto t = read_csv(p);
    if (t.rows.empty()) throw SchemaError("plot: '" + p + "' has no data rows");
    const auto kind = classify(t, p);
    inputs.push_back({p, std::move(t), kind});
  }
  auto target = [&](const std::string& in) { return cfg.resolve(fs::path(in).stem().string() + ".svg"); };
  for (const auto& in : inputs) require_output(target(in.path));
  const std::string overlay = cfg.resolve(a.overlay.empty() ? "density_overlay.svg" : a.overlay);
  require_output(overlay);

  svg::LinePlot combined{"Density overlay", "opinion x", "density", {}, false};
  int written = 0;
  for (const auto& in : inputs) {
    const auto label = fs::path(in.path).stem().string();
    svg::LinePlot p;
    switch (in.kind) {
      case CsvKind::trajectory:
        p = {"Consensus gap", "t", "|x_i - x_j|", {{label, in.table.column_values("t"), in.table.column_values("gap")}}};
        break;
      case CsvKind::histogram: {
        svg::Series s{label, in.table.column_values("bin_center"), in.table.column_values("density")};
        p = {"Density", "opinion x", "density", {s}};
        combined.series.push_back(std::move(s));
        break;
      }
      case CsvKind::stats:
        p = {"Opinion variance", "step", "variance",
             {{label, in.table.column_values("step"), in.table.column_values("variance")}}};
        break;
      case CsvKind::history:
        p = {"Training history", "epoch", "loss",
             {{"train", in.table.column_values("epoch"), in.table.column_values("train_loss")},
              {"validation", in.table.column_values("epoch"), in.table.column_values("val_loss")}},
             true};
        break;
    }
    svg::write(svg::render(p), target(in.path));
    ++written;
  }
  if (combined.series.size() > 1) {
    svg::write(svg::render(combined), overlay);
    ++written;
  }
  out << "wrote " << written << " plot file(s) to " << cfg.paths.out_dir << "\n";
  return kOk;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e)) return kValidation;
  if (dynamic_cast<const NumericalError*>(&e)) return kNumerical;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const SchemaError*>(&e)) return kIo;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kIo;
  return kValidation;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Controlled opinion consensus: Riccati feedback, neural surrogates, kinetic simulation"};
  app.name("kcc");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "INI configuration file");
  app.add_option("--seed", g.seed, "Seed for data, training and simulation");
  app.add_option("--threads", g.threads, "Worker threads (default: all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", g.out_dir, "Directory for relative output paths");
  app.add_option("--gamma", g.gamma, "Control penalty (R = gamma/2 I)");
  app.add_option("--beta", g.beta, "Interaction strength");
  app.add_option("--eps", g.eps, "Kinetic time step and interaction strength");
  app.add_option("--mu-dv", g.mu_dv, "Gradient-loss weight (a list for grid-search)");
  app.add_option("--controller", g.controller, "none, sdre, nn_value, nn_direct or openloop");

  GenDataArgs gen;
  auto* sc_gen = app.add_subcommand("gen-data", "Sample states and label them with Riccati solutions");
  sc_gen->add_option("--out", gen.out, "Dataset CSV (metadata goes to <out>.meta)");
  sc_gen->add_option("--n", gen.n, "Number of samples");

  TrainArgs tr;
  auto* sc_train = app.add_subcommand("train", "Train a value or control network");
  sc_train->add_option("--data", tr.data, "Dataset CSV");
  sc_train->add_option("--target", tr.target, "value or control");
  sc_train->add_option("--out", tr.out, "Model file");
  sc_train->add_option("--history", tr.history, "Loss history CSV");
  sc_train->add_option("--epochs", tr.epochs, "Training epochs");

  GridArgs gr;
  auto* sc_grid = app.add_subcommand("grid-search", "Train over a hyperparameter grid, keep the best model");
  sc_grid->add_option("--data", gr.data, "Dataset CSV");
  sc_grid->add_option("--target", gr.target, "value or control");
  sc_grid->add_option("--out", gr.out, "Leaderboard CSV");
  sc_grid->add_option("--model", gr.model, "Best model file");
  sc_grid->add_option("--epochs", gr.epochs, "Training epochs per configuration");

  EvalArgs ev;
  auto* sc_eval = app.add_subcommand("eval", "Goodness of fit on a uniform state grid");
  sc_eval->add_option("--model", ev.models, "Model file(s): one value and/or one control net");
  sc_eval->add_option("--out", ev.out, "Metrics CSV");
  sc_eval->add_option("--grid", ev.grid, "Grid points per axis");

  BinaryArgs bi;
  auto* sc_bin = app.add_subcommand("simulate-binary", "Integrate one controlled pair");
  sc_bin->add_option("--controllers", bi.controllers, "Several controllers on one plot")->delimiter(',');
  sc_bin->add_option("--xi", bi.xi, "Initial opinion of agent i");
  sc_bin->add_option("--xj", bi.xj, "Initial opinion of agent j");
  sc_bin->add_option("--T", bi.T, "Horizon");
  sc_bin->add_option("--dt", bi.dt, "Time step");
  sc_bin->add_option("--out-prefix", bi.out_prefix, "Output prefix");

  KineticArgs ki;
  auto* sc_kin = app.add_subcommand("simulate-kinetic", "Monte Carlo simulation of the agent population");
  sc_kin->add_option("--n-agents", ki.n_agents, "Population size (even)");
  sc_kin->add_option("--steps", ki.steps, "Collision steps");
  sc_kin->add_option("--out-prefix", ki.out_prefix, "Output prefix");

  PlotArgs pl;
  auto* sc_plot = app.add_subcommand("plot", "SVG plots from CSV outputs");
  sc_plot->add_option("csv", pl.inputs, "CSV files")->required();
  sc_plot->add_option("--overlay", pl.overlay, "Combined density plot file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
      out << app.help();
      return kOk;
    }
    err << "kcc: " << e.what() << "\n";
    return kValidation;
  }

  try {
    RunConfig cfg = build_config(g);
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    if (g.mu_dv.size() > 1 && !sc_grid->parsed()) {
      throw ValidationError("--mu-dv takes a single value outside grid-search");
    }
    if (g.controller && !sc_bin->parsed() && !sc_kin->parsed()) {
      throw ValidationError("--controller only applies to simulate-binary and simulate-kinetic");
    }
    if (sc_gen->parsed()) return cmd_gen_data(cfg, gen, out);
    if (sc_train->parsed()) return cmd_train(cfg, tr, out);
    if (sc_grid->parsed()) return cmd_grid_search(cfg, gr, out);
    if (sc_eval->parsed()) return cmd_eval(cfg, ev, out);
    if (sc_bin->parsed()) return cmd_simulate_binary(cfg, bi, g.controller, out);
    if (sc_kin->parsed()) return cmd_simulate_kinetic(cfg, ki, g.controller, out);
    if (sc_plot->parsed()) return cmd_plot(cfg, pl, out);
  } catch (const std::exception& e) {
    err << "kcc: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kValidation;
}

}  // namespace kcc::cli
