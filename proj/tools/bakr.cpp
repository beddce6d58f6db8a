// Command-line frontend: simulate / fit / predict / associate / benchmark.
//
// Every run accepts a flat key=value config file via --config; command-line
// flags override config values, and the fully resolved configuration is
// written next to the outputs so any run can be reproduced bit-exactly.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bakr/chain_store.hpp"
#include "bakr/common.hpp"
#include "bakr/data.hpp"
#include "bakr/eval.hpp"
#include "bakr/kernel.hpp"
#include "bakr/model.hpp"
#include "bakr/parallel.hpp"
#include "bakr/pipeline.hpp"
#include "bakr/rng.hpp"
#include "bakr/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace bakr;

namespace {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) {
      throw DataError("cannot write " + tmp.string());
    }
    out << content;
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw DataError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

// Output paths resolve against BAKR_OUTPUT_ROOT when relative.
fs::path resolve_out(const std::string& out) {
  if (out.empty()) {
    throw UsageError("--out is required");
  }
  fs::path path(out);
  const char* root = std::getenv("BAKR_OUTPUT_ROOT");
  if (path.is_relative() && root != nullptr && *root != '\0') {
    path = fs::path(root) / path;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Config plumbing: a flat key=value file expanded into tokens that parse
// before the command line, with take-last semantics so flags win.

std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open config file " + path);
  }
  std::vector<std::string> tokens;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
    const std::size_t eq = trimmed.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) +
                       " is not key=value: " + line);
    }
    std::string key = trimmed.substr(0, eq);
    std::string value = trimmed.substr(eq + 1);
    auto strip = [](std::string& s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
    };
    strip(key);
    strip(value);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

// Registers options and remembers how to serialize their final values.
class ConfigRegistry {
 public:
  explicit ConfigRegistry(CLI::App* cmd) : cmd_(cmd) {
    cmd_->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  CLI::Option* bind(const std::string& name, double& var, const std::string& desc) {
    remember(name, [&var] { return format_g17(var); });
    return cmd_->add_option("--" + name, var, desc);
  }
  CLI::Option* bind(const std::string& name, int& var, const std::string& desc) {
    remember(name, [&var] { return std::to_string(var); });
    return cmd_->add_option("--" + name, var, desc);
  }
  CLI::Option* bind(const std::string& name, Index& var, const std::string& desc) {
    remember(name, [&var] { return std::to_string(var); });
    return cmd_->add_option("--" + name, var, desc);
  }
  CLI::Option* bind(const std::string& name, std::uint64_t& var,
                    const std::string& desc) {
    remember(name, [&var] { return std::to_string(var); });
    return cmd_->add_option("--" + name, var, desc);
  }
  CLI::Option* bind(const std::string& name, std::string& var,
                    const std::string& desc) {
    remember(name, [&var] {
      if (var.find_first_of(" \t#;") != std::string::npos) {
        return "\"" + var + "\"";
      }
      return var;
    });
    return cmd_->add_option("--" + name, var, desc);
  }
  CLI::Option* bind_flag(const std::string& name, bool& var, const std::string& desc) {
    remember(name, [&var] { return std::string(var ? "true" : "false"); });
    return cmd_->add_flag("--" + name, var, desc);
  }

  std::string serialized() const {
    std::ostringstream out;
    for (const auto& [key, getter] : entries_) {
      out << key << '=' << getter() << '\n';
    }
    return out.str();
  }

 private:
  void remember(const std::string& name, std::function<std::string()> getter) {
    entries_.emplace_back(name, std::move(getter));
  }

  CLI::App* cmd_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

// ---------------------------------------------------------------------------
// Shared option blocks

struct TableOpts {
  std::string format = "csv";
  bool header = false;
  bool row_labels = false;
  std::string na_policy = "error";

  void bind(ConfigRegistry& reg) {
    reg.bind("format", format, "Input table format: csv or tsv");
    reg.bind_flag("header", header, "Input files carry a header row");
    reg.bind_flag("row-labels", row_labels, "First column holds row labels");
    reg.bind("na-policy", na_policy, "Missing value policy: error or mean-impute");
  }

  LoadOptions to_load_options() const {
    LoadOptions opts;
    if (format == "csv") {
      opts.format = TableFormat::Csv;
    } else if (format == "tsv") {
      opts.format = TableFormat::Tsv;
    } else {
      throw UsageError("unknown table format: " + format);
    }
    opts.header_row = header;
    opts.row_labels = row_labels;
    if (na_policy == "error") {
      opts.na_policy = NaPolicy::Error;
    } else if (na_policy == "mean-impute") {
      opts.na_policy = NaPolicy::MeanImpute;
    } else {
      throw UsageError("unknown NA policy: " + na_policy);
    }
    return opts;
  }
};

struct ModelOpts {
  std::string family = "gaussian-rff";
  double h = 1.0;
  Index d = 0;  // 0 resolves to the covariate count
  double q_var = 0.95;
  double nu = 5.0;
  double phi = 0.4;
  int iters = 50000;
  int burnin = 25000;
  int thin = 1;
  std::uint64_t seed = 0;
  std::string projection = "collapsed";
  double pinv_tol = kDefaultPinvTolerance;
  bool no_standardize = false;
  bool no_center_y = false;

  void bind(ConfigRegistry& reg) {
    reg.bind("family", family,
             "Kernel family: gaussian-rff, gaussian-exact, linear-exact");
    reg.bind("h", h, "Gaussian kernel bandwidth");
    reg.bind("d", d, "Random Fourier feature count (0 = covariate count)");
    reg.bind("q-var", q_var, "Cumulative variance threshold for factor truncation");
    reg.bind("nu", nu, "Scaled-inv-chi^2 degrees of freedom");
    reg.bind("phi", phi, "Scaled-inv-chi^2 scale");
    reg.bind("iters", iters, "Total MCMC iterations");
    reg.bind("burnin", burnin, "Burn-in iterations");
    reg.bind("thin", thin, "Thinning stride");
    reg.bind("seed", seed, "Sampler seed (kernel seed is derived from it)");
    reg.bind("projection", projection, "Projection mode: collapsed or composite");
    reg.bind("pinv-tol", pinv_tol, "Relative pseudoinverse tolerance");
    reg.bind_flag("no-standardize", no_standardize, "Skip column standardization");
    reg.bind_flag("no-center-y", no_center_y, "Skip response centering");
  }

  FitConfig to_fit_config() const {
    FitConfig cfg;
    cfg.kernel.family = kernel_family_from_string(family);
    cfg.kernel.bandwidth = h;
    cfg.kernel.feature_count = d;
    cfg.kernel.seed = mix_seed(seed, 0xfea71);
    cfg.variance_threshold = q_var;
    cfg.projection = projection_mode_from_string(projection);
    cfg.pinv_tolerance = pinv_tol;
    cfg.hyper.nu = nu;
    cfg.hyper.phi = phi;
    cfg.sampler.total_iterations = iters;
    cfg.sampler.burn_in = burnin;
    cfg.sampler.thin = thin;
    cfg.sampler.seed = seed;
    cfg.standardize_x = !no_standardize;
    cfg.center_y = !no_center_y;
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string kind = "scenario";
  std::string out;
  Index n = 500;
  Index p = 2000;
  double h2 = 0.6;
  double rho = 0.2;
  Index n_causal = 100;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateOpts& opts, const ConfigRegistry& reg) {
  const fs::path out = resolve_out(opts.out);
  fs::create_directories(out);

  SimulatedDataset ds;
  if (opts.kind == "scenario") {
    ds = simulate_scenario(opts.n, opts.p, opts.h2, opts.rho, opts.seed);
  } else if (opts.kind == "polynomial") {
    ds = simulate_polynomial(opts.n, opts.p, opts.n_causal, opts.seed);
  } else {
    throw UsageError("unknown simulation kind: " + opts.kind);
  }

  save_matrix((out / "X.csv").string(), ds.x.values);
  save_vector((out / "y.csv").string(), ds.y);

  json truth;
  truth["kind"] = opts.kind;
  truth["n"] = opts.n;
  truth["p"] = opts.p;
  truth["seed"] = opts.seed;
  truth["achieved_h2"] = ds.achieved_h2;
  truth["achieved_rho"] = ds.achieved_rho;
  truth["causal_group1"] = ds.causal_group1;
  truth["causal_group2"] = ds.causal_group2;
  json effects = json::object();
  for (Index j = 0; j < ds.true_b.size(); ++j) {
    if (ds.true_b(j) != 0.0) {
      effects[ds.x.col_ids[j]] = ds.true_b(j);
    }
  }
  truth["additive_effects"] = effects;
  json interactions = json::array();
  for (Index i = 0; i < ds.true_a.size(); ++i) interactions.push_back(ds.true_a(i));
  truth["interaction_effects"] = interactions;
  write_text_atomic(out / "truth.json", truth.dump(2) + "\n");
  write_text_atomic(out / "config.resolved.ini", reg.serialized());

  std::cerr << "simulated " << opts.kind << " dataset: " << opts.n << " x " << opts.p
            << " -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// fit

struct FitOpts {
  std::string x_path;
  std::string y_path;
  std::string out;
  ModelOpts model;
  TableOpts table;
  double holdout = 0.0;
  std::uint64_t split_seed = 1;
};

int cmd_fit(const FitOpts& opts, const ConfigRegistry& reg) {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path out = resolve_out(opts.out);
  fs::create_directories(out);

  const LoadOptions load_opts = opts.table.to_load_options();
  DesignMatrix x = load_matrix(opts.x_path, load_opts);
  const Vector y = load_vector(opts.y_path, load_opts);
  if (x.n() != y.size()) {
    throw DataError("X has " + std::to_string(x.n()) + " rows but y has " +
                    std::to_string(y.size()));
  }

  DesignMatrix train_x = x;
  Vector train_y = y;
  std::optional<Split> split;
  if (opts.holdout > 0.0) {
    split = split_rows(x.n(), 1.0 - opts.holdout, opts.split_seed);
    train_x.values = select_rows(x.values, split->train_rows);
    train_x.row_ids.clear();
    for (Index r : split->train_rows) train_x.row_ids.push_back(x.row_ids[r]);
    train_y = select_rows(y, split->train_rows);
  }

  const FitConfig cfg = opts.model.to_fit_config();
  FitResult fit = fit_pipeline(train_x, train_y, cfg);
  for (const std::string& name : fit.preprocessing.standardization.dropped_columns) {
    std::cerr << "dropped constant column: " << name << "\n";
  }

  StoredChain stored;
  stored.chain = std::move(fit.chain);
  stored.factorization = std::move(fit.factorization);
  stored.preprocessing = fit.preprocessing;
  stored.y_train = train_y;
  for (Index kept : fit.preprocessing.standardization.kept) {
    stored.column_ids.push_back(train_x.col_ids[kept]);
  }
  save_chain(out.string(), stored);

  const PosteriorSummary summary = posterior_summary(stored.chain);
  {
    std::ostringstream csv;
    csv << "covariate,beta_mean,beta_sd\n";
    for (Index j = 0; j < summary.beta_mean.size(); ++j) {
      csv << stored.column_ids[j] << ',' << format_g17(summary.beta_mean(j)) << ','
          << format_g17(summary.beta_sd(j)) << '\n';
    }
    write_text_atomic(out / "beta_summary.csv", csv.str());
  }

  json report;
  report["n_train"] = stored.chain.info.n;
  report["p"] = stored.chain.covariate_count();
  report["q"] = stored.chain.factor_count();
  report["draws"] = stored.chain.draw_count();
  report["variance_explained"] = stored.factorization.variance_explained;
  report["sigma2_mean"] = summary.sigma2_mean;
  report["tau2_mean"] = summary.tau2_mean;
  report["y_offset"] = stored.chain.info.y_offset;
  report["seed"] = opts.model.seed;
  report["kernel_seed"] = stored.chain.info.kernel.seed;
  report["dropped_columns"] =
      stored.preprocessing.standardization.dropped_columns.size();

  if (split) {
    std::ostringstream csv;
    csv << "row,role\n";
    std::vector<char> role(x.n(), 't');
    for (Index r : split->test_rows) role[r] = 'h';
    for (Index r = 0; r < x.n(); ++r) {
      csv << x.row_ids[r] << ',' << (role[r] == 't' ? "train" : "holdout") << '\n';
    }
    write_text_atomic(out / "split.csv", csv.str());

    const Matrix test_raw = select_rows(x.values, split->test_rows);
    const Vector test_y = select_rows(y, split->test_rows);
    const Matrix test_design = stored.preprocessing.apply(test_raw);
    const Predictions preds = predict(test_design, stored.chain, {});
    report["holdout_fraction"] = opts.holdout;
    report["holdout_n"] = static_cast<Index>(split->test_rows.size());
    report["holdout_mspe"] = mspe(test_y, preds.mean);
    report["holdout_r2"] = r_squared(test_y, preds.mean);
  }
  write_text_atomic(out / "summary.json", report.dump(2) + "\n");
  write_text_atomic(out / "config.resolved.ini", reg.serialized());

  // Wall time lives outside summary.json so reruns stay bit-identical.
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json timing;
  timing["fit_seconds"] = seconds;
  write_text_atomic(out / "timing.json", timing.dump(2) + "\n");

  std::cerr << "fit: q=" << stored.chain.factor_count() << ", " << stored.chain.draw_count()
            << " retained draws -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOpts {
  std::string chain_dir;
  std::string x_star_path;
  std::string out;
  std::string levels = "0.95";
  TableOpts table;
};

std::vector<double> parse_double_list(const std::string& csv_list,
                                      const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(csv_list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      values.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("cannot parse " + what + " entry: " + item);
    }
  }
  if (values.empty()) {
    throw UsageError(what + " list is empty");
  }
  return values;
}

int cmd_predict(const PredictOpts& opts, const ConfigRegistry& reg) {
  const fs::path out = resolve_out(opts.out);
  fs::create_directories(out);

  const StoredChain stored = load_chain(opts.chain_dir);
  const DesignMatrix x_star = load_matrix(opts.x_star_path, opts.table.to_load_options());
  const Matrix design = stored.preprocessing.apply(x_star.values);
  const std::vector<double> levels = parse_double_list(opts.levels, "levels");
  const Predictions preds = predict(design, stored.chain, levels);

  std::ostringstream csv;
  csv << "row,mean";
  for (double level : levels) {
    csv << ",lower_" << format_g(level) << ",upper_" << format_g(level);
  }
  csv << '\n';
  for (Index i = 0; i < preds.mean.size(); ++i) {
    csv << x_star.row_ids[i] << ',' << format_g17(preds.mean(i));
    for (std::size_t l = 0; l < levels.size(); ++l) {
      csv << ',' << format_g17(preds.lower(i, static_cast<Index>(l))) << ','
          << format_g17(preds.upper(i, static_cast<Index>(l)));
    }
    csv << '\n';
  }
  write_text_atomic(out / "predictions.csv", csv.str());
  write_text_atomic(out / "config.resolved.ini", reg.serialized());

  std::cerr << "predicted " << preds.mean.size() << " rows -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// associate

struct AssociateOpts {
  std::string chain_dir;
  std::string out;
  double z = 0.0;  // 0 = default-quantile policy
  double kappa = 0.05;
  double r = 0.5;
  int perms = 0;
  double fwer = 0.05;
  std::uint64_t perm_seed = 0;
  int threads = 1;
};

int cmd_associate(const AssociateOpts& opts, const ConfigRegistry& reg) {
  const fs::path out = resolve_out(opts.out);
  fs::create_directories(out);

  const StoredChain stored = load_chain(opts.chain_dir);

  AssociationResult result;
  if (opts.z > 0.0) {
    result.threshold_z = opts.z;
    result.calibration = "fixed";
  } else {
    result.threshold_z = default_threshold(stored.chain, opts.kappa);
    result.calibration = "default-quantile";
  }
  result.ppaa = ppaa(stored.chain, result.threshold_z);
  result.inclusion_r = opts.r;

  json calibration;
  calibration["policy"] = result.calibration;
  calibration["z"] = result.threshold_z;
  calibration["kappa"] = opts.kappa;

  if (opts.perms > 0) {
    ProjectionOperator proj;
    proj.matrix = stored.chain.projection;
    proj.mode = stored.chain.info.projection_mode;
    const Vector y_centered =
        stored.y_train.array() - stored.chain.info.y_offset;
    const PermutationCalibration cal = permutation_threshold(
        y_centered, stored.factorization, proj, stored.chain.info.hyper,
        stored.chain.info.sampler, result.threshold_z, opts.perms, opts.fwer,
        opts.perm_seed, opts.threads);
    result.inclusion_r = cal.inclusion_r;
    result.calibration = "permutation";
    result.n_perm = cal.n_perm;
    result.fwer = cal.fwer;
    result.selected = select_above(result.ppaa, result.inclusion_r);
    calibration["policy"] = "permutation";
    calibration["n_perm"] = cal.n_perm;
    calibration["fwer"] = cal.fwer;
    calibration["permutation_seed"] = opts.perm_seed;
    calibration["max_ppaa"] = cal.max_ppaa;
    calibration["conservative_max_used"] = cal.conservative_max_used;
    if (cal.conservative_max_used) {
      std::cerr << "warning: " << opts.perms << " permutations cannot resolve the "
                << format_g(opts.fwer) << " FWER quantile; using the conservative "
                   "maximum\n";
    }
  } else {
    result.selected = select(result.ppaa, result.inclusion_r);
  }
  calibration["r"] = result.inclusion_r;
  write_text_atomic(out / "calibration.json", calibration.dump(2) + "\n");

  std::vector<bool> chosen(result.ppaa.size(), false);
  for (Index j : result.selected) chosen[j] = true;
  std::ostringstream csv;
  csv << "covariate,ppaa,selected\n";
  for (Index j = 0; j < result.ppaa.size(); ++j) {
    csv << stored.column_ids[j] << ',' << format_g17(result.ppaa(j)) << ','
        << (chosen[j] ? 1 : 0) << '\n';
  }
  write_text_atomic(out / "ppaa.csv", csv.str());
  write_text_atomic(out / "config.resolved.ini", reg.serialized());

  std::cerr << "associate: z=" << format_g(result.threshold_z)
            << ", r=" << format_g(result.inclusion_r) << ", selected "
            << result.selected.size() << " covariates -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkOpts {
  std::string out;
  std::string kind = "scenario";
  Index n = 500;
  Index p = 2000;
  double h2 = 0.6;
  double rho = 0.2;
  Index n_causal = 100;
  std::string h_grid = "5,2,1,0.5,0.01";
  int datasets = 10;
  double train_frac = 0.5;
  ModelOpts model;
  int threads = 1;
};

struct BenchmarkCell {
  int dataset = 0;
  std::uint64_t data_seed = 0;
  std::string method;
  double h = 0.0;
  Index q = 0;
  double mspe_value = std::numeric_limits<double>::quiet_NaN();
  double r2_value = std::numeric_limits<double>::quiet_NaN();
  double auc_group1 = std::numeric_limits<double>::quiet_NaN();
  double auc_group2 = std::numeric_limits<double>::quiet_NaN();
};

int cmd_benchmark(const BenchmarkOpts& opts, const ConfigRegistry& reg) {
  const fs::path out = resolve_out(opts.out);
  fs::create_directories(out);
  if (opts.datasets < 1) {
    throw UsageError("benchmark needs at least one dataset");
  }
  if (!(opts.train_frac > 0.0) || opts.train_frac > 1.0) {
    throw UsageError("train fraction must lie in (0, 1]");
  }

  const std::vector<double> h_values = parse_double_list(opts.h_grid, "h-grid");
  // Methods: one BAKR column per h plus the linear-exact baseline.
  const int n_methods = static_cast<int>(h_values.size()) + 1;
  const Index n_cells = static_cast<Index>(opts.datasets) * n_methods;
  std::vector<BenchmarkCell> cells(n_cells);

  parallel_for(n_cells, opts.threads, [&](Index cell) {
    const int dataset = static_cast<int>(cell) / n_methods;
    const int method = static_cast<int>(cell) % n_methods;
    const bool linear = method == static_cast<int>(h_values.size());

    const std::uint64_t data_seed = mix_seed(opts.model.seed, 500000 + dataset);
    SimulatedDataset ds;
    if (opts.kind == "scenario") {
      ds = simulate_scenario(opts.n, opts.p, opts.h2, opts.rho, data_seed);
    } else if (opts.kind == "polynomial") {
      ds = simulate_polynomial(opts.n, opts.p, opts.n_causal, data_seed);
    } else {
      throw UsageError("unknown benchmark kind: " + opts.kind);
    }

    DesignMatrix train_x = ds.x;
    Vector train_y = ds.y;
    std::optional<Split> split;
    if (opts.train_frac < 1.0) {
      split = split_rows(ds.x.n(), opts.train_frac,
                         mix_seed(opts.model.seed, 600000 + dataset));
      train_x.values = select_rows(ds.x.values, split->train_rows);
      train_x.row_ids.clear();
      for (Index r : split->train_rows) train_x.row_ids.push_back(ds.x.row_ids[r]);
      train_y = select_rows(ds.y, split->train_rows);
    }

    FitConfig cfg = opts.model.to_fit_config();
    if (linear) {
      cfg.kernel.family = KernelFamily::LinearExact;
    } else {
      cfg.kernel.family = KernelFamily::GaussianRff;
      cfg.kernel.bandwidth = h_values[method];
    }
    cfg.kernel.seed = mix_seed(opts.model.seed, 800000 + 100 * dataset + method);
    cfg.sampler.seed = mix_seed(opts.model.seed, 700000 + 100 * dataset + method);

    const FitResult fit = fit_pipeline(train_x, train_y, cfg);

    BenchmarkCell& slot = cells[cell];
    slot.dataset = dataset;
    slot.data_seed = data_seed;
    slot.method = linear ? "linear" : "bakr";
    slot.h = linear ? std::numeric_limits<double>::quiet_NaN() : h_values[method];
    slot.q = fit.chain.factor_count();

    if (split) {
      const Matrix test_design =
          fit.preprocessing.apply(select_rows(ds.x.values, split->test_rows));
      const Vector test_y = select_rows(ds.y, split->test_rows);
      const Predictions preds = predict(test_design, fit.chain, {});
      slot.mspe_value = mspe(test_y, preds.mean);
      slot.r2_value = r_squared(test_y, preds.mean);
    }

    // Effect-magnitude ranking against the known causal sets, mapped through
    // any dropped columns.
    const PosteriorSummary summary = posterior_summary(fit.chain);
    const std::vector<Index>& kept = fit.preprocessing.standardization.kept;
    std::vector<Index> original_to_kept(ds.x.p(), -1);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      original_to_kept[kept[i]] = static_cast<Index>(i);
    }
    auto remap = [&](const std::vector<Index>& truth) {
      std::vector<Index> mapped;
      for (Index j : truth) {
        if (original_to_kept[j] >= 0) mapped.push_back(original_to_kept[j]);
      }
      return mapped;
    };
    const Vector magnitudes = summary.beta_mean.cwiseAbs();
    const std::vector<Index> group1 = remap(ds.causal_group1);
    const std::vector<Index> group2 = remap(ds.causal_group2);
    if (!group1.empty()) {
      slot.auc_group1 = power_curve(magnitudes, group1).auc;
    }
    if (!group2.empty()) {
      slot.auc_group2 = power_curve(magnitudes, group2).auc;
    }
  });

  std::ostringstream csv;
  csv << "dataset,data_seed,method,h,q,mspe,r2,auc_group1,auc_group2\n";
  auto field = [](double v) {
    return std::isnan(v) ? std::string("NA") : format_g17(v);
  };
  for (const BenchmarkCell& cell : cells) {
    csv << cell.dataset << ',' << cell.data_seed << ',' << cell.method << ','
        << (std::isnan(cell.h) ? std::string("NA") : format_g(cell.h)) << ','
        << cell.q << ',' << field(cell.mspe_value) << ',' << field(cell.r2_value)
        << ',' << field(cell.auc_group1) << ',' << field(cell.auc_group2) << '\n';
  }
  write_text_atomic(out / "results.csv", csv.str());

  // Per-method aggregates.
  json summary = json::object();
  for (int method = 0; method < n_methods; ++method) {
    std::vector<double> mspes, auc2s;
    for (int dataset = 0; dataset < opts.datasets; ++dataset) {
      const BenchmarkCell& cell = cells[dataset * n_methods + method];
      if (!std::isnan(cell.mspe_value)) mspes.push_back(cell.mspe_value);
      if (!std::isnan(cell.auc_group2)) auc2s.push_back(cell.auc_group2);
    }
    const BenchmarkCell& tag = cells[method];
    const std::string key =
        tag.method == "linear" ? "linear" : "bakr_h=" + format_g(tag.h);
    json entry;
    auto put = [&](const char* name, const std::vector<double>& xs) {
      if (xs.empty()) return;
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var = xs.size() > 1 ? var / static_cast<double>(xs.size() - 1) : 0.0;
      entry[std::string(name) + "_mean"] = mean;
      entry[std::string(name) + "_sd"] = std::sqrt(var);
    };
    put("mspe", mspes);
    put("auc_group2", auc2s);
    summary[key] = entry;
  }
  write_text_atomic(out / "summary.json", summary.dump(2) + "\n");
  write_text_atomic(out / "config.resolved.ini", reg.serialized());

  std::cerr << "benchmark: " << n_cells << " cells -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"Bayesian approximate kernel regression with variable selection"};
  app.set_help_flag("--help", "Print help");
  app.require_subcommand(1);

  SimulateOpts sim;
  FitOpts fit;
  PredictOpts pred;
  AssociateOpts assoc;
  BenchmarkOpts bench;

  CLI::App* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic dataset");
  sim_cmd->set_help_flag("--help", "Print help");
  ConfigRegistry sim_reg(sim_cmd);
  sim_reg.bind("kind", sim.kind, "Generator: scenario or polynomial");
  sim_reg.bind("out", sim.out, "Output directory");
  sim_reg.bind("n", sim.n, "Sample count");
  sim_reg.bind("p", sim.p, "Covariate count");
  sim_reg.bind("h2", sim.h2, "Broad-sense heritability target");
  sim_reg.bind("rho", sim.rho, "Additive fraction of the genetic variance");
  sim_reg.bind("n-causal", sim.n_causal, "Causal covariates (polynomial kind)");
  sim_reg.bind("seed", sim.seed, "Generator seed");

  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the kernel regression model");
  fit_cmd->set_help_flag("--help", "Print help");
  ConfigRegistry fit_reg(fit_cmd);
  fit_reg.bind("x", fit.x_path, "Covariate matrix file");
  fit_reg.bind("y", fit.y_path, "Response vector file");
  fit_reg.bind("out", fit.out, "Output directory");
  fit.model.bind(fit_reg);
  fit.table.bind(fit_reg);
  fit_reg.bind("holdout", fit.holdout, "Holdout fraction for an internal MSPE check");
  fit_reg.bind("split-seed", fit.split_seed, "Holdout split seed");

  CLI::App* pred_cmd = app.add_subcommand("predict", "Predict from a stored chain");
  pred_cmd->set_help_flag("--help", "Print help");
  ConfigRegistry pred_reg(pred_cmd);
  pred_reg.bind("chain", pred.chain_dir, "Chain directory written by fit");
  pred_reg.bind("x-star", pred.x_star_path, "Out-of-sample covariate matrix");
  pred_reg.bind("out", pred.out, "Output directory");
  pred_reg.bind("levels", pred.levels, "Comma-separated interval levels");
  pred.table.bind(pred_reg);

  CLI::App* assoc_cmd =
      app.add_subcommand("associate", "Variable selection from a stored chain");
  assoc_cmd->set_help_flag("--help", "Print help");
  ConfigRegistry assoc_reg(assoc_cmd);
  assoc_reg.bind("chain", assoc.chain_dir, "Chain directory written by fit");
  assoc_reg.bind("out", assoc.out, "Output directory");
  assoc_reg.bind("z", assoc.z, "Fixed effect-size threshold (0 = pooled quantile)");
  assoc_reg.bind("kappa", assoc.kappa, "Pooled-quantile tail mass for the default z");
  assoc_reg.bind("r", assoc.r, "Inclusion cutoff on PPAA");
  assoc_reg.bind("perms", assoc.perms, "Permutations for FWER calibration (0 = off)");
  assoc_reg.bind("fwer", assoc.fwer, "Family-wise error rate target");
  assoc_reg.bind("perm-seed", assoc.perm_seed, "Permutation seed");
  assoc_reg.bind("threads", assoc.threads, "Worker threads for permutation fits");

  CLI::App* bench_cmd =
      app.add_subcommand("benchmark", "Run a simulation grid with baselines");
  bench_cmd->set_help_flag("--help", "Print help");
  ConfigRegistry bench_reg(bench_cmd);
  bench_reg.bind("out", bench.out, "Output directory");
  bench_reg.bind("kind", bench.kind, "Generator: scenario or polynomial");
  bench_reg.bind("n", bench.n, "Sample count");
  bench_reg.bind("p", bench.p, "Covariate count");
  bench_reg.bind("h2", bench.h2, "Broad-sense heritability target");
  bench_reg.bind("rho", bench.rho, "Additive fraction of the genetic variance");
  bench_reg.bind("n-causal", bench.n_causal, "Causal covariates (polynomial kind)");
  bench_reg.bind("h-grid", bench.h_grid, "Comma-separated bandwidth sweep");
  bench_reg.bind("datasets", bench.datasets, "Number of simulated datasets");
  bench_reg.bind("train-frac", bench.train_frac, "Training fraction (1 = no holdout)");
  bench.model.bind(bench_reg);
  bench_reg.bind("threads", bench.threads, "Worker threads across grid cells");

  // Expand --config into tokens that parse before the command line.
  std::vector<std::string> tokens;
  std::string config_path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config") {
      if (i + 1 >= argc) {
        throw UsageError("--config requires a file path");
      }
      config_path = argv[++i];
    } else if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
    } else {
      tokens.push_back(arg);
    }
  }
  if (!config_path.empty()) {
    if (tokens.empty()) {
      throw UsageError("--config must follow a subcommand");
    }
    const std::vector<std::string> extra = config_tokens(config_path);
    tokens.insert(tokens.begin() + 1, extra.begin(), extra.end());
  }

  std::reverse(tokens.begin(), tokens.end());
  try {
    app.parse(tokens);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (sim_cmd->parsed()) return cmd_simulate(sim, sim_reg);
  if (fit_cmd->parsed()) return cmd_fit(fit, fit_reg);
  if (pred_cmd->parsed()) return cmd_predict(pred, pred_reg);
  if (assoc_cmd->parsed()) return cmd_associate(assoc, assoc_reg);
  if (bench_cmd->parsed()) return cmd_benchmark(bench, bench_reg);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
