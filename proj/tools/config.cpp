#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "kcc/csv.hpp"
#include "kcc/errors.hpp"

namespace kcc::cli {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& text, const std::string& key) {
  const std::string s = trim(text);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw ValidationError("config key '" + key + "': cannot parse '" + text + "' as a number");
  }
  return v;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
  std::vector<T> out;
  for (const auto& item : split(text, ',')) out.push_back(parse_number<T>(item, key));
  if (out.empty()) throw ValidationError("config key '" + key + "' is an empty list");
  return out;
}

MixtureSpec parse_mixture(const std::string& text) {
  // "weight:mean:std, weight:mean:std, ..."
  MixtureSpec m;
  for (const auto& item : split(text, ',')) {
    const auto f = split(item, ':');
    if (f.size() != 3) throw ValidationError("kinetic.mixture: expected weight:mean:std, got '" + item + "'");
    m.components.push_back({parse_number<double>(f[0], "kinetic.mixture"),
                            parse_number<double>(f[1], "kinetic.mixture"),
                            parse_number<double>(f[2], "kinetic.mixture")});
  }
  return m;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) s += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(v[k]);
    } else {
      s += std::to_string(v[k]);
    }
  }
  return s;
}

using Setter = void (*)(RunConfig&, const std::string&);

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"model.beta", [](RunConfig& c, const std::string& v) { c.model.beta = parse_number<double>(v, "model.beta"); }},
      {"model.gamma", [](RunConfig& c, const std::string& v) { c.model.gamma = parse_number<double>(v, "model.gamma"); }},
      {"dataset.n_samples",
       [](RunConfig& c, const std::string& v) { c.dataset.n_samples = parse_number<std::size_t>(v, "dataset.n_samples"); }},
      {"dataset.seed",
       [](RunConfig& c, const std::string& v) { c.dataset.seed = parse_number<std::uint64_t>(v, "dataset.seed"); }},
      {"train.target", [](RunConfig& c, const std::string& v) { c.target = parse_target(trim(v)); }},
      {"train.mu_dv", [](RunConfig& c, const std::string& v) { c.train.mu_dV = parse_number<double>(v, "train.mu_dv"); }},
      {"train.learning_rate",
       [](RunConfig& c, const std::string& v) { c.train.learning_rate = parse_number<double>(v, "train.learning_rate"); }},
      {"train.epochs", [](RunConfig& c, const std::string& v) { c.train.epochs = parse_number<int>(v, "train.epochs"); }},
      {"train.batch_size",
       [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_number<int>(v, "train.batch_size"); }},
      {"train.seed", [](RunConfig& c, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(v, "train.seed"); }},
      {"train.optimizer", [](RunConfig& c, const std::string& v) { c.train.optimizer = trim(v); }},
      {"train.width", [](RunConfig& c, const std::string& v) { c.train.width = parse_number<int>(v, "train.width"); }},
      {"train.depth", [](RunConfig& c, const std::string& v) { c.train.depth = parse_number<int>(v, "train.depth"); }},
      {"grid.mu_dv", [](RunConfig& c, const std::string& v) { c.grid.mu_dV = parse_list<double>(v, "grid.mu_dv"); }},
      {"grid.widths", [](RunConfig& c, const std::string& v) { c.grid.widths = parse_list<int>(v, "grid.widths"); }},
      {"grid.depths", [](RunConfig& c, const std::string& v) { c.grid.depths = parse_list<int>(v, "grid.depths"); }},
      {"binary.xi", [](RunConfig& c, const std::string& v) { c.binary.xi = parse_number<double>(v, "binary.xi"); }},
      {"binary.xj", [](RunConfig& c, const std::string& v) { c.binary.xj = parse_number<double>(v, "binary.xj"); }},
      {"binary.dt", [](RunConfig& c, const std::string& v) { c.binary.dt = parse_number<double>(v, "binary.dt"); }},
      {"binary.T", [](RunConfig& c, const std::string& v) { c.binary.T = parse_number<double>(v, "binary.T"); }},
      {"binary.controller", [](RunConfig& c, const std::string& v) { c.binary.controller = parse_controller(trim(v)); }},
      {"binary.pmp_max_sweeps",
       [](RunConfig& c, const std::string& v) { c.binary.pmp_max_sweeps = parse_number<int>(v, "binary.pmp_max_sweeps"); }},
      {"binary.pmp_tol",
       [](RunConfig& c, const std::string& v) { c.binary.pmp_tol = parse_number<double>(v, "binary.pmp_tol"); }},
      {"kinetic.n_agents",
       [](RunConfig& c, const std::string& v) { c.kinetic.n_agents = parse_number<std::size_t>(v, "kinetic.n_agents"); }},
      {"kinetic.eps", [](RunConfig& c, const std::string& v) { c.kinetic.eps = parse_number<double>(v, "kinetic.eps"); }},
      {"kinetic.n_steps",
       [](RunConfig& c, const std::string& v) { c.kinetic.n_steps = parse_number<int>(v, "kinetic.n_steps"); }},
      {"kinetic.controller",
       [](RunConfig& c, const std::string& v) { c.kinetic.controller = parse_controller(trim(v)); }},
      {"kinetic.histogram_bins",
       [](RunConfig& c, const std::string& v) { c.kinetic.histogram_bins = parse_number<int>(v, "kinetic.histogram_bins"); }},
      {"kinetic.seed",
       [](RunConfig& c, const std::string& v) { c.kinetic.seed = parse_number<std::uint64_t>(v, "kinetic.seed"); }},
      {"kinetic.mixture", [](RunConfig& c, const std::string& v) { c.kinetic.f0 = parse_mixture(v); }},
      {"eval.grid_per_axis",
       [](RunConfig& c, const std::string& v) { c.eval.grid_per_axis = parse_number<int>(v, "eval.grid_per_axis"); }},
      {"paths.out_dir", [](RunConfig& c, const std::string& v) { c.paths.out_dir = trim(v); }},
      {"paths.data", [](RunConfig& c, const std::string& v) { c.paths.data = trim(v); }},
      {"paths.value_model", [](RunConfig& c, const std::string& v) { c.paths.value_model = trim(v); }},
      {"paths.control_model", [](RunConfig& c, const std::string& v) { c.paths.control_model = trim(v); }},
      {"run.threads", [](RunConfig& c, const std::string& v) { c.threads = parse_number<int>(v, "run.threads"); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  kinetic.validate();
  if (dataset.n_samples < 2) throw ValidationError("dataset.n_samples must be >= 2");
  if (!in_domain(binary.xi) || !in_domain(binary.xj)) {
    throw ValidationError("binary.xi and binary.xj must lie in [-1, 1]");
  }
  if (!(binary.dt > 0.0) || !std::isfinite(binary.dt)) throw ValidationError("binary.dt must be > 0");
  if (!(binary.T >= binary.dt) || !std::isfinite(binary.T)) throw ValidationError("binary.T must be >= binary.dt");
  if (binary.pmp_max_sweeps < 1) throw ValidationError("binary.pmp_max_sweeps must be >= 1");
  if (!(binary.pmp_tol > 0.0)) throw ValidationError("binary.pmp_tol must be > 0");
  for (double m : grid.mu_dV) {
    if (!(m >= 0.0 && m <= 2.0)) throw ValidationError("grid.mu_dv values must lie in [0, 2]");
  }
  for (int w : grid.widths) {
    if (w < 1) throw ValidationError("grid.widths must be >= 1");
  }
  for (int d : grid.depths) {
    if (d < 1) throw ValidationError("grid.depths must be >= 1");
  }
  if (eval.grid_per_axis < 2) throw ValidationError("eval.grid_per_axis must be >= 2");
  if (threads < 0) throw ValidationError("threads must be >= 0");
  if (paths.out_dir.empty()) throw ValidationError("paths.out_dir must not be empty");
}

std::string RunConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return path;
  return (std::filesystem::path(paths.out_dir) / p).lexically_normal().string();
}

RunConfig parse_config(const std::string& text, const std::string& where) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(where + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  RunConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ValidationError(where + ": key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = setters().find(name);
      if (it == setters().end()) throw ValidationError(where + ": unknown key '" + name + "'");
      it->second(cfg, value.data());
    }
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string format_config(const RunConfig& c) {
  std::ostringstream o;
  std::string mixture;
  for (const auto& m : c.kinetic.f0.components) {
    if (!mixture.empty()) mixture += ", ";
    mixture += format_double(m.weight) + ":" + format_double(m.mean) + ":" + format_double(m.std);
  }
  o << "[model]\nbeta = " << format_double(c.model.beta) << "\ngamma = " << format_double(c.model.gamma)
    << "\n\n[dataset]\nn_samples = " << c.dataset.n_samples << "\nseed = " << c.dataset.seed
    << "\n\n[train]\ntarget = " << to_string(c.target) << "\nmu_dv = " << format_double(c.train.mu_dV)
    << "\nlearning_rate = " << format_double(c.train.learning_rate) << "\nepochs = " << c.train.epochs
    << "\nbatch_size = " << c.train.batch_size << "\nseed = " << c.train.seed
    << "\noptimizer = " << c.train.optimizer << "\nwidth = " << c.train.width << "\ndepth = " << c.train.depth
    << "\n\n[grid]\nmu_dv = " << join(c.grid.mu_dV) << "\nwidths = " << join(c.grid.widths)
    << "\ndepths = " << join(c.grid.depths) << "\n\n[binary]\nxi = " << format_double(c.binary.xi)
    << "\nxj = " << format_double(c.binary.xj) << "\ndt = " << format_double(c.binary.dt)
    << "\nT = " << format_double(c.binary.T) << "\ncontroller = " << to_string(c.binary.controller)
    << "\npmp_max_sweeps = " << c.binary.pmp_max_sweeps << "\npmp_tol = " << format_double(c.binary.pmp_tol)
    << "\n\n[kinetic]\nn_agents = " << c.kinetic.n_agents << "\neps = " << format_double(c.kinetic.eps)
    << "\nn_steps = " << c.kinetic.n_steps << "\ncontroller = " << to_string(c.kinetic.controller)
    << "\nhistogram_bins = " << c.kinetic.histogram_bins << "\nseed = " << c.kinetic.seed
    << "\nmixture = " << mixture << "\n\n[eval]\ngrid_per_axis = " << c.eval.grid_per_axis
    << "\n\n[paths]\nout_dir = " << c.paths.out_dir << "\ndata = " << c.paths.data
    << "\nvalue_model = " << c.paths.value_model << "\ncontrol_model = " << c.paths.control_model
    << "\n\n[run]\nthreads = " << c.threads << "\n";
  return o.str();
}

}  // namespace kcc::cli
