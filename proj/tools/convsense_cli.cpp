// Batch experiment runner. Every subcommand resolves a config (defaults,
// then --config file, then flags), validates it, and writes one directory
// per run: the resolved config.json, a report.json, and one CSV per
// histogram or series. All randomness derives from --seed; reruns with the
// same config produce byte-identical files.
//
// Exit codes: 0 success, 2 config error, 1 runtime error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <convsense/convsense.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace convsense;

namespace {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

// Overlay keys onto the defaults; keys the subcommand does not define are
// rejected.
void merge_config(json& base, const json& overlay, const std::string& origin) {
  for (const auto& [key, value] : overlay.items()) {
    if (!base.contains(key))
      throw ConfigError("unknown config key '" + key + "' (" + origin + ")");
    base[key] = value;
  }
}

template <typename T>
T get_field(const json& config, const std::string& key) {
  try {
    return config.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

int get_positive(const json& config, const std::string& key) {
  const int v = get_field<int>(config, key);
  if (v < 1) throw ConfigError("config key '" + key + "' must be >= 1");
  return v;
}

std::uint64_t require_seed(const json& config) {
  if (config.at("seed").is_null())
    throw ConfigError("--seed is required (no wall-clock seeding)");
  try {
    return config.at("seed").get<std::uint64_t>();
  } catch (const json::exception&) {
    throw ConfigError("config key 'seed' must be an unsigned integer");
  }
}

Upsampling parse_upsampling(const json& config) {
  const auto mode = get_field<std::string>(config, "upsampling");
  if (mode == "switches") return Upsampling::kSwitches;
  if (mode == "naive") return Upsampling::kNaive;
  throw ConfigError("config key 'upsampling' must be 'switches' or 'naive'");
}

PoolingGeometry parse_pooling(const json& config) {
  const auto mode = get_field<std::string>(config, "pool");
  if (mode == "full") return PoolingGeometry::full_block();
  if (mode == "regions") return PoolingGeometry::regions(get_positive(config, "region"));
  throw ConfigError("config key 'pool' must be 'full' or 'regions'");
}

// Builds the operator for a shape config; geometry problems are config
// errors, not runtime ones.
StructuredOperator build_operator(const json& config, std::uint64_t seed) {
  const int dims = get_field<int>(config, "dims");
  if (dims != 1 && dims != 2) throw ConfigError("config key 'dims' must be 1 or 2");
  const int K = get_positive(config, "K");
  const int M = get_positive(config, "M");
  const int l = get_positive(config, "l");
  const int D = get_positive(config, "D");
  const int t = get_positive(config, "t");
  try {
    FilterBank bank = random_filter_bank(K, M, l, dims, seed);
    if (get_field<bool>(config, "normalize")) bank = normalize_rows(bank);
    return StructuredOperator(std::move(bank), InputGeometry{D, t});
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

PoolingLayout build_layout(const StructuredOperator& op, const json& config) {
  try {
    return PoolingLayout(op.grid(), parse_pooling(config));
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

fs::path prepare_out_dir(const json& config) {
  const auto out = get_field<std::string>(config, "out");
  if (out.empty()) throw ConfigError("config key 'out' must not be empty");
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out + ": " + ec.message());
  return dir;
}

void write_series_histogram(const fs::path& dir, const std::string& name,
                            const std::vector<double>& values, int bins, double lo,
                            double hi) {
  write_histogram_csv((dir / name).string(), histogram(values, bins, lo, hi));
}

RipReport make_rip_report(std::vector<double> ratios, RipParams params) {
  RipReport report;
  report.ratios = std::move(ratios);
  report.params = std::move(params);
  detail::finalize_ratio_stats(report);
  return report;
}

// ---------------------------------------------------------------------------
// Subcommand payloads

int run_rip_1d(const json& config) {
  const std::uint64_t seed = require_seed(config);
  const int trials = get_positive(config, "trials");
  const int bins = get_positive(config, "bins");
  const int k = get_positive(config, "k");
  const StructuredOperator op = build_operator(config, seed);
  const PoolingLayout layout = build_layout(op, config);
  const Upsampling upsampling = parse_upsampling(config);
  if (k > op.grid().num_blocks) throw ConfigError("config key 'k' exceeds the filter count");

  const ReconstructionReport rec =
      reconstruction_experiment(op, k, layout, upsampling, trials, seed);

  RipParams params{op.dims(), op.grid().num_blocks, op.grid().block_extent,
                   k,         0.0,
                   get_field<std::string>(config, "pool"),
                   config.at("region").get<int>(),
                   seed,      trials,
                   rec.resampled};
  const RipReport report = make_rip_report(rec.rip_ratios, params);

  const fs::path dir = prepare_out_dir(config);
  write_json_file((dir / "config.json").string(), config);
  write_json_file((dir / "report.json").string(), to_json(report));
  write_series_histogram(dir, "rip_ratio_hist.csv", rec.rip_ratios, bins, 0.0, 2.0);
  write_series_histogram(dir, "wwt_ratio_hist.csv", rec.code_ratios, bins, 0.0, 2.0);
  write_series_histogram(dir, "recon_error_hist.csv", rec.errors_matched, bins, 0.0, 1.0);
  std::cout << "rip-1d: mean ratio " << format_double(report.mean) << ", delta_hat "
            << format_double(report.delta_hat) << '\n';
  return 0;
}

int run_rip_2d(const json& config) {
  const std::uint64_t seed = require_seed(config);
  const int trials = get_positive(config, "trials");
  const int bins = get_positive(config, "bins");
  const double fraction = get_field<double>(config, "sparsity_fraction");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw ConfigError("config key 'sparsity_fraction' must be in (0, 1]");
  const StructuredOperator op = build_operator(config, seed);
  const PoolingLayout layout = build_layout(op, config);

  const RipReport report = rip_2d_experiment(op, layout, fraction, trials, seed);

  const fs::path dir = prepare_out_dir(config);
  write_json_file((dir / "config.json").string(), config);
  write_json_file((dir / "report.json").string(), to_json(report));
  write_series_histogram(dir, "rip_ratio_hist.csv", report.ratios, bins, 0.0, 2.0);
  std::cout << "rip-2d: mean ratio " << format_double(report.mean) << ", delta_hat "
            << format_double(report.delta_hat) << '\n';
  return 0;
}

int run_coherence(const json& config) {
  const auto filters = get_field<std::string>(config, "filters");
  FilterBank bank;
  std::uint64_t seed = 0;
  if (!filters.empty()) {
    try {
      bank = load_filter_bank(filters);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
  } else {
    seed = require_seed(config);
    const int dims = get_field<int>(config, "dims");
    if (dims != 1 && dims != 2) throw ConfigError("config key 'dims' must be 1 or 2");
    bank = random_filter_bank(get_positive(config, "K"), get_positive(config, "M"),
                              get_positive(config, "l"), dims, seed);
  }
  if (get_field<bool>(config, "normalize")) bank = normalize_rows(bank);

  const auto save = get_field<std::string>(config, "save_filters");
  if (!save.empty()) save_filter_bank(bank, save);

  const int D = get_positive(config, "D");
  const int t = get_positive(config, "t");
  std::optional<StructuredOperator> op;
  try {
    op.emplace(std::move(bank), InputGeometry{D, t});
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const double mu = coherence(*op);

  const fs::path dir = prepare_out_dir(config);
  write_json_file((dir / "config.json").string(), config);
  json report;
  report["mu"] = mu;
  report["dims"] = op->dims();
  report["num_filters"] = op->bank().num_filters;
  report["num_channels"] = op->bank().num_channels;
  report["filter_len"] = op->bank().filter_len;
  report["extent"] = D;
  report["stride"] = t;
  report["shifts"] = op->shifts();
  if (filters.empty()) report["seed"] = seed;
  write_json_file((dir / "report.json").string(), report);
  std::cout << "mu = " << format_double(mu) << '\n';
  return 0;
}

int run_recover(const json& config) {
  const std::uint64_t seed = require_seed(config);
  const int trials = get_positive(config, "trials");
  const int k = get_positive(config, "k");
  const StructuredOperator op = build_operator(config, seed);
  const PoolingLayout layout = build_layout(op, config);
  if (k > op.grid().num_blocks) throw ConfigError("config key 'k' exceeds the filter count");

  const auto input = get_field<std::string>(config, "input");
  std::optional<Eigen::VectorXd> loaded;
  if (!input.empty()) {
    if (trials != 1) throw ConfigError("file input requires trials == 1");
    std::ifstream in(input);
    if (!in) throw ConfigError("cannot open input file: " + input);
    std::vector<double> values;
    double v;
    while (in >> v) values.push_back(v);
    if (static_cast<Eigen::Index>(values.size()) != op.cols())
      throw ConfigError("input length " + std::to_string(values.size()) +
                        " does not match the operator's column count " +
                        std::to_string(op.cols()));
    loaded = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                               static_cast<Eigen::Index>(values.size()));
  }

  LassoConfig lasso;
  lasso.max_iters = get_positive(config, "ista_max_iters");
  lasso.objective_tol = get_field<double>(config, "ista_tol");
  if (lasso.objective_tol < 0.0) throw ConfigError("config key 'ista_tol' must be >= 0");
  const double lambda_cfg = get_field<double>(config, "lambda");
  if (lambda_cfg < 0.0) throw ConfigError("config key 'lambda' must be >= 0 (0 = auto)");

  const fs::path dir = prepare_out_dir(config);
  CsvWriter recovered((dir / "recovered.csv").string(),
                      {"trial", "flat_index", "block", "position", "value"});
  json trials_report = json::array();

  const ActivationGrid grid = op.grid();
  const int positions = grid.positions_per_block();
  for (int trial = 0; trial < trials; ++trial) {
    Eigen::VectorXd x;
    std::vector<std::pair<int, int>> planted;
    if (loaded) {
      x = *loaded;
    } else {
      // Planted code: k blocks, positions uniform, magnitudes in [0.5, 1)
      // with random signs, so every coefficient is well separated from zero.
      RngStream stream(seed, static_cast<std::uint64_t>(trial) + 1);
      ModelSparseSignal z;
      z.coeffs = Eigen::VectorXd::Zero(grid.size());
      std::vector<int> blocks(static_cast<std::size_t>(grid.num_blocks));
      for (int i = 0; i < grid.num_blocks; ++i) blocks[static_cast<std::size_t>(i)] = i;
      for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(stream.below(grid.num_blocks - i));
        std::swap(blocks[static_cast<std::size_t>(i)], blocks[static_cast<std::size_t>(j)]);
        const int position = static_cast<int>(stream.below(positions));
        const double sign = stream.uniform01() < 0.5 ? -1.0 : 1.0;
        z.coeffs[static_cast<Eigen::Index>(blocks[static_cast<std::size_t>(i)]) * positions +
                 position] = sign * stream.uniform(0.5, 1.0);
      }
      z.support = detail::support_of(z.coeffs, grid);
      planted = z.support;
      x = op.adjoint_sparse(z);
    }

    lasso.lambda = lambda_cfg > 0.0 ? lambda_cfg : default_lambda(op, x);
    const ModelSparseSignal result = recover_activation(op, x, lasso, layout);

    for (const auto& [block, position] : result.support) {
      const Eigen::Index flat = static_cast<Eigen::Index>(block) * positions + position;
      recovered.write_row({std::to_string(trial), std::to_string(flat),
                           std::to_string(block), std::to_string(position),
                           format_double(result.coeffs[flat])});
    }

    json entry;
    entry["trial"] = trial;
    entry["lambda"] = lasso.lambda;
    entry["support_size"] = result.support.size();
    const double z_norm = result.coeffs.norm();
    entry["ratio"] = z_norm > 0.0 ? op.adjoint_sparse(result).norm() / z_norm : 0.0;
    if (!planted.empty()) {
      std::size_t hit = 0;
      for (const auto& s : result.support)
        if (std::find(planted.begin(), planted.end(), s) != planted.end()) ++hit;
      entry["recall"] = static_cast<double>(hit) / planted.size();
      entry["precision"] =
          result.support.empty() ? 0.0 : static_cast<double>(hit) / result.support.size();
    }
    trials_report.push_back(std::move(entry));
  }

  write_json_file((dir / "config.json").string(), config);
  json report;
  report["trials"] = trials_report;
  write_json_file((dir / "report.json").string(), report);
  std::cout << "recover: " << trials << " trial(s) written to " << dir.string() << '\n';
  return 0;
}

int run_iht(const json& config) {
  const std::uint64_t seed = require_seed(config);
  const int trials = get_positive(config, "trials");
  const int k = get_positive(config, "k");
  const StructuredOperator op = build_operator(config, seed);
  const PoolingLayout layout = build_layout(op, config);
  if (k > op.grid().num_blocks) throw ConfigError("config key 'k' exceeds the filter count");

  IhtConfig iht;
  iht.sparsity = k;
  iht.max_iters = get_positive(config, "iht_max_iters");
  iht.residual_tol = get_field<double>(config, "iht_tol");
  if (iht.residual_tol < 0.0) throw ConfigError("config key 'iht_tol' must be >= 0");
  iht.pooling = parse_pooling(config);
  iht.upsampling = parse_upsampling(config);

  const fs::path dir = prepare_out_dir(config);
  CsvWriter history((dir / "residual_history.csv").string(),
                    {"trial", "iter", "relative_residual"});
  std::vector<double> finals;

  const ActivationGrid grid = op.grid();
  for (int trial = 0; trial < trials; ++trial) {
    RngStream stream(seed, static_cast<std::uint64_t>(trial) + 1);
    ModelSparseSignal z = sample_model_sparse(grid, k, stream);
    while (z.coeffs.norm() == 0.0) z = sample_model_sparse(grid, k, stream);
    const Eigen::VectorXd x = op.adjoint_sparse(z);
    const IhtResult result = model_iht(op, x, iht);
    for (std::size_t i = 0; i < result.residual_history.size(); ++i)
      history.write_row({std::to_string(trial), std::to_string(i + 1),
                         format_double(result.residual_history[i])});
    finals.push_back(result.residual_history.back());
  }

  write_json_file((dir / "config.json").string(), config);
  json report;
  report["final_residuals"] = finals;
  report["max_iters"] = iht.max_iters;
  report["trials"] = trials;
  report["seed"] = seed;
  write_json_file((dir / "report.json").string(), report);
  std::cout << "iht: " << trials << " trial(s), max_iters " << iht.max_iters << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// Wiring

struct SubcommandSpec {
  std::string name;
  json defaults;
  int (*run)(const json&);
};

json common_defaults(std::string out_name) {
  return json{{"seed", nullptr}, {"trials", 1}, {"out", std::move(out_name)}};
}

std::vector<SubcommandSpec> subcommand_specs() {
  std::vector<SubcommandSpec> specs;

  json rip1d = common_defaults("run-rip-1d");
  rip1d.update(json{{"dims", 1},
                    {"K", 96},
                    {"M", 32},
                    {"l", 5},
                    {"D", 32},
                    {"t", 1},
                    {"k", 10},
                    {"normalize", true},
                    {"pool", "full"},
                    {"region", 0},
                    {"upsampling", "switches"},
                    {"bins", 40}});
  rip1d["trials"] = 1000;
  specs.push_back({"rip-1d", rip1d, run_rip_1d});

  json rip2d = common_defaults("run-rip-2d");
  rip2d.update(json{{"dims", 2},
                    {"K", 512},
                    {"M", 512},
                    {"l", 3},
                    {"D", 16},
                    {"t", 1},
                    {"normalize", true},
                    {"pool", "regions"},
                    {"region", 2},
                    {"sparsity_fraction", 0.239},
                    {"bins", 40}});
  rip2d["trials"] = 1000;
  specs.push_back({"rip-2d", rip2d, run_rip_2d});

  json coh = json{{"seed", nullptr},
                  {"out", "run-coherence"},
                  {"dims", 2},
                  {"K", 512},
                  {"M", 512},
                  {"l", 3},
                  {"D", 16},
                  {"t", 1},
                  {"normalize", true},
                  {"filters", ""},
                  {"save_filters", ""}};
  specs.push_back({"coherence", coh, run_coherence});

  json recover = common_defaults("run-recover");
  recover.update(json{{"dims", 1},
                      {"K", 96},
                      {"M", 32},
                      {"l", 5},
                      {"D", 32},
                      {"t", 1},
                      {"k", 10},
                      {"normalize", true},
                      {"pool", "full"},
                      {"region", 0},
                      {"lambda", 0.0},
                      {"ista_max_iters", 1000},
                      {"ista_tol", 1e-12},
                      {"input", ""}});
  specs.push_back({"recover", recover, run_recover});

  json iht = common_defaults("run-iht");
  iht.update(json{{"dims", 1},
                  {"K", 96},
                  {"M", 32},
                  {"l", 5},
                  {"D", 32},
                  {"t", 1},
                  {"k", 10},
                  {"normalize", true},
                  {"pool", "full"},
                  {"region", 0},
                  {"upsampling", "switches"},
                  {"iht_max_iters", 10},
                  {"iht_tol", 0.0}});
  specs.push_back({"iht", iht, run_iht});

  return specs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CNN-structured sparse measurement operators: experiments and diagnostics"};
  app.require_subcommand(1);

  struct PendingRun {
    SubcommandSpec spec;
    std::string config_path;
    json flag_overlay = json::object();
    bool dump_config = false;
  };
  std::vector<PendingRun> pending;
  const auto specs = subcommand_specs();
  pending.reserve(specs.size());

  for (const auto& spec : specs) {
    pending.push_back({spec, "", json::object(), false});
    PendingRun& run = pending.back();
    CLI::App* sub = app.add_subcommand(spec.name, "");
    sub->add_option("--config", run.config_path, "JSON config file; flags override it");
    sub->add_flag("--dump-config", run.dump_config,
                  "Print the resolved config and exit without running");
    for (const auto& [key, value] : spec.defaults.items()) {
      const std::string flag = "--" + key;
      const std::string k = key;
      json* overlay = &run.flag_overlay;
      if (value.is_boolean()) {
        sub->add_option_function<bool>(flag, [overlay, k](const bool& v) { (*overlay)[k] = v; });
      } else if (value.is_number_float()) {
        sub->add_option_function<double>(flag,
                                         [overlay, k](const double& v) { (*overlay)[k] = v; });
      } else if (value.is_number_integer()) {
        sub->add_option_function<std::int64_t>(
            flag, [overlay, k](const std::int64_t& v) { (*overlay)[k] = v; });
      } else if (value.is_string()) {
        sub->add_option_function<std::string>(
            flag, [overlay, k](const std::string& v) { (*overlay)[k] = v; });
      } else {  // null: the seed
        sub->add_option_function<std::uint64_t>(
            flag, [overlay, k](const std::uint64_t& v) { (*overlay)[k] = v; });
      }
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << '\n';
    return 2;
  }

  for (const auto& run : pending) {
    if (!app.get_subcommand(run.spec.name)->parsed()) continue;
    try {
      json config = run.spec.defaults;
      if (!run.config_path.empty())
        merge_config(config, load_config_file(run.config_path), "from " + run.config_path);
      merge_config(config, run.flag_overlay, "from flags");
      if (run.dump_config) {
        std::cout << config.dump(2) << '\n';
        return 0;
      }
      return run.spec.run(config);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
  }
  return 2;
}
