#include "kcc/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "kcc/csv.hpp"
#include "kcc/errors.hpp"

namespace kcc {

namespace {

const std::vector<std::string> kDatasetHeader = {"xi", "xbar", "V", "dV1", "dV2", "u1", "u2"};

std::string join_indices(const std::vector<std::size_t>& idx) {
  std::string s;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(idx[i]);
  }
  return s;
}

std::vector<std::size_t> parse_indices(const std::string& s, const std::string& where) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    if (tok.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stoull(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw SchemaError(where + ": bad split index '" + tok + "'");
    }
  }
  return out;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(where + ": bad number '" + s + "'");
  }
}

}  // namespace

std::size_t train_split_size(std::size_t n) { return (4 * n) / 5; }

std::vector<TransformedState> sample_states(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ValidationError("sample_states: n must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<TransformedState> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double xi = unif(rng);
    const double xj = unif(rng);
    out.push_back(to_transformed(BinaryState{xi, xj}));
  }
  return out;
}

LabeledSample label_state(const TransformedState& t, const ModelConfig& cfg) {
  const auto f = sdre_feedback(t, cfg);
  return {t, f.V, f.gradV, f.u};
}

Dataset generate(std::size_t n, std::uint64_t seed, const ModelConfig& cfg) {
  cfg.validate();
  if (n < 2) throw ValidationError("generate: need at least 2 samples for a train/validation split");
  const auto states = sample_states(n, seed);

  Dataset d;
  d.seed = seed;
  d.model = cfg;
  d.samples.resize(n);
  std::string failure;
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < count; ++k) {
    try {
      d.samples[k] = label_state(states[k], cfg);
    } catch (const NumericalError& e) {
#pragma omp critical(kcc_dataset_failure)
      if (failure.empty()) {
        std::ostringstream os;
        os.precision(17);
        os << "sample " << k << " at (xi, xbar) = (" << states[k].xi << ", " << states[k].xbar
           << "): " << e.what();
        failure = os.str();
      }
    }
  }
  if (!failure.empty()) throw NumericalError("generate: " + failure);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(perm.begin(), perm.end(), shuffle_rng);
  const std::size_t n_train = train_split_size(n);
  d.train.assign(perm.begin(), perm.begin() + n_train);
  d.validation.assign(perm.begin() + n_train, perm.end());
  return d;
}

std::string metadata_path(const std::string& csv_path) { return csv_path + ".meta"; }

void save_dataset(const Dataset& d, const std::string& csv_path) {
  require_parent_directory(csv_path);
  AtomicFile csv(csv_path);
  AtomicFile meta(metadata_path(csv_path));
  csv.write("xi,xbar,V,dV1,dV2,u1,u2\n");
  for (const auto& s : d.samples) {
    csv.line({s.state.xi, s.state.xbar, s.V, s.gradV(0), s.gradV(1), s.u(0), s.u(1)});
  }
  std::ostringstream m;
  m << "format=kcc-dataset\n"
    << "version=1\n"
    << "n=" << d.samples.size() << "\n"
    << "seed=" << d.seed << "\n"
    << "beta=" << format_double(d.model.beta) << "\n"
    << "gamma=" << format_double(d.model.gamma) << "\n"
    << "n_train=" << d.train.size() << "\n"
    << "n_validation=" << d.validation.size() << "\n"
    << "train=" << join_indices(d.train) << "\n"
    << "validation=" << join_indices(d.validation) << "\n";
  meta.write(m.str());
  csv.commit();
  meta.commit();
}

Dataset load_dataset(const std::string& csv_path, bool verify) {
  const auto table = read_csv(csv_path);
  require_header(table, kDatasetHeader, csv_path);

  const std::string mpath = metadata_path(csv_path);
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open dataset metadata '" + mpath + "'");
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError(mpath + ": expected key=value, got '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"format", "seed", "beta", "gamma", "train", "validation"}) {
    if (!kv.count(key)) throw SchemaError(mpath + ": missing key '" + std::string(key) + "'");
  }
  if (kv["format"] != "kcc-dataset") throw SchemaError(mpath + ": not a dataset metadata file");

  Dataset d;
  try {
    d.seed = std::stoull(kv["seed"]);
  } catch (const std::exception&) {
    throw SchemaError(mpath + ": bad seed");
  }
  d.model.beta = parse_double(kv["beta"], mpath);
  d.model.gamma = parse_double(kv["gamma"], mpath);
  d.model.validate();
  d.train = parse_indices(kv["train"], mpath);
  d.validation = parse_indices(kv["validation"], mpath);

  d.samples.reserve(table.rows.size());
  for (const auto& r : table.rows) {
    LabeledSample s;
    s.state = {r[0], r[1]};
    s.V = r[2];
    s.gradV = {r[3], r[4]};
    s.u = {r[5], r[6]};
    d.samples.push_back(s);
  }

  std::vector<int> seen(d.samples.size(), 0);
  for (const auto* split : {&d.train, &d.validation}) {
    for (std::size_t i : *split) {
      if (i >= seen.size()) throw SchemaError(mpath + ": split index out of range");
      ++seen[i];
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw SchemaError(mpath + ": train/validation split is not a disjoint cover of the rows");
  }
  if (verify) verify_labels(d);
  return d;
}

void verify_labels(const Dataset& d, std::size_t rows, double tol) {
  if (d.samples.empty()) return;
  std::mt19937_64 rng(d.seed + 0x51ed2701ULL);
  std::uniform_int_distribution<std::size_t> pick(0, d.samples.size() - 1);
  for (std::size_t r = 0; r < std::min(rows, d.samples.size()); ++r) {
    const std::size_t k = pick(rng);
    const auto& s = d.samples[k];
    const auto fresh = label_state(s.state, d.model);
    const double err = std::max({std::abs(fresh.V - s.V), (fresh.gradV - s.gradV).cwiseAbs().maxCoeff(),
                                 (fresh.u - s.u).cwiseAbs().maxCoeff()});
    if (!(err <= tol)) {
      throw ValidationError("dataset row " + std::to_string(k) +
                            " does not match a fresh Riccati solve (max error " +
                            std::to_string(err) + "); was the model config changed?");
    }
  }
}

}  // namespace kcc
