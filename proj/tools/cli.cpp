#include "cli.hpp"

#include "spu/oracle.hpp"

#include "CLI11.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <future>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace spu::cli {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + " " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed ") + what + " " + path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

nlohmann::json rows_json(const std::vector<Eigen::VectorXd>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) out.push_back(std::vector<double>(r.data(), r.data() + r.size()));
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

bool parses_as_number(const std::string& s) {
  if (s == "nan" || s == "-nan" || s == "inf" || s == "-inf") return true;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return !s.empty() && end == s.c_str() + s.size();
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  double final_return = std::nan("");
  std::string error;
};

SeedOutcome train_one_seed(trainer::SpuConfig config, std::uint64_t seed, const fs::path& csv_path) {
  SeedOutcome outcome;
  outcome.seed = seed;
  config.seed = seed;
  try {
    trainer::Trainer trainer(config);
    std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
    const auto history = trainer::run(trainer, &csv);
    if (!history.empty()) outcome.final_return = history.back().mean_return_100;
  } catch (const std::exception& e) {
    outcome.error = e.what();
  }
  return outcome;
}

trainer::SpuConfig config_for_train(const TrainArgs& args) {
  trainer::SpuConfig config;
  if (args.config_path) config = trainer::config_from_json(read_json_file(*args.config_path, "config"));
  if (args.env) config.env = *args.env;
  if (args.constraint) {
    try {
      config.constraint_kind = proximal::parse_constraint_kind(*args.constraint);
    } catch (const std::invalid_argument& e) {
      throw trainer::ConfigError("constraint_kind", e.what());
    }
  }
  if (args.iters) config.iterations = *args.iters;
  if (args.seed) config.seed = *args.seed;
  config.ablations.no_grad_kl |= args.no_grad_kl;
  config.ablations.no_dynamic_stopping |= args.no_dynamic_stopping;
  config.ablations.no_per_state_acceptance |= args.no_per_state_acceptance;
  config.validate();
  return config;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest

std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(blob.data(), blob.size(), digest, &length, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string config_hash(const trainer::SpuConfig& config) {
  return git_blob_sha1(trainer::to_json(config).dump());
}

nlohmann::json RunManifest::to_json() const {
  return {{"config", config},         {"seeds", seeds},
          {"out_dir", out_dir},       {"config_hash", config_hash},
          {"created_utc", created_utc}, {"format", "spu-run-manifest/1"}};
}

RunManifest RunManifest::from_json(const nlohmann::json& doc) {
  RunManifest m;
  try {
    m.config = doc.at("config");
    m.seeds = doc.at("seeds").get<std::vector<std::uint64_t>>();
    m.out_dir = doc.value("out_dir", "");
    m.config_hash = doc.value("config_hash", "");
    m.created_utc = doc.value("created_utc", "");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  if (m.seeds.empty()) throw ValidationError("malformed manifest: empty seed list");
  return m;
}

std::string seed_csv_name(std::uint64_t seed) { return "seed_" + std::to_string(seed) + ".csv"; }

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  trainer::SpuConfig config;
  RunManifest manifest;
  fs::path out_dir = args.out;
  bool keep_manifest_file = false;

  if (args.manifest_path) {
    if (args.config_path || args.seed || args.env || args.constraint || args.iters ||
        args.seeds != 1 || args.no_grad_kl || args.no_dynamic_stopping ||
        args.no_per_state_acceptance) {
      throw ValidationError("--manifest cannot be combined with config overrides");
    }
    manifest = RunManifest::from_json(read_json_file(*args.manifest_path, "manifest"));
    config = trainer::config_from_json(manifest.config);
    if (!manifest.config_hash.empty() && manifest.config_hash != config_hash(config)) {
      throw ValidationError("manifest config_hash does not match its config");
    }
    if (!args.out_given) out_dir = args.manifest_path->parent_path();
    if (out_dir.empty()) out_dir = ".";
    keep_manifest_file = fs::exists(out_dir / kManifestFile) &&
                         fs::equivalent(out_dir / kManifestFile, *args.manifest_path);
  } else {
    if (args.seeds < 1) throw ValidationError("--seeds must be >= 1");
    config = config_for_train(args);
    manifest.config = trainer::to_json(config);
    for (int i = 0; i < args.seeds; ++i) manifest.seeds.push_back(config.seed + i);
    manifest.config_hash = config_hash(config);
    manifest.created_utc = utc_timestamp();
  }
  manifest.out_dir = out_dir.string();

  fs::create_directories(out_dir);
  if (args.manifest_path && !keep_manifest_file) {
    fs::copy_file(*args.manifest_path, out_dir / kManifestFile,
                  fs::copy_options::overwrite_existing);
  } else if (!args.manifest_path) {
    write_text_file(out_dir / kManifestFile, manifest.to_json().dump(2) + "\n");
  }

  std::vector<SeedOutcome> outcomes;
  const int jobs = std::max(1, args.jobs);
  for (std::size_t begin = 0; begin < manifest.seeds.size(); begin += jobs) {
    const std::size_t end = std::min(manifest.seeds.size(), begin + jobs);
    std::vector<std::future<SeedOutcome>> running;
    for (std::size_t i = begin; i < end; ++i) {
      const auto seed = manifest.seeds[i];
      running.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async,
                                   train_one_seed, config, seed, out_dir / seed_csv_name(seed)));
    }
    for (auto& f : running) {
      outcomes.push_back(f.get());
      const auto& o = outcomes.back();
      if (!o.error.empty()) {
        err << "seed " << o.seed << " failed: " << o.error << "\n";
      } else if (!args.quiet) {
        out << "seed " << o.seed << ": final mean_return_100 = " << o.final_return << "\n";
      }
    }
  }

  std::vector<double> finals;
  nlohmann::json per_seed = nlohmann::json::array();
  bool failed = false;
  for (const auto& o : outcomes) {
    failed |= !o.error.empty();
    per_seed.push_back({{"seed", o.seed},
                        {"final_return", finite_or_null(o.final_return)},
                        {"status", o.error.empty() ? "ok" : "failed"},
                        {"error", o.error}});
    if (o.error.empty() && std::isfinite(o.final_return)) finals.push_back(o.final_return);
  }
  nlohmann::json summary{{"env", config.env},
                         {"constraint_kind", std::string(proximal::to_string(config.constraint_kind))},
                         {"iterations", config.iterations},
                         {"config_hash", manifest.config_hash},
                         {"seeds", per_seed},
                         {"num_finite", finals.size()}};
  if (finals.empty()) {
    summary["mean"] = nullptr;
    summary["std"] = nullptr;
    summary["median"] = nullptr;
  } else {
    double mean = 0.0;
    for (double f : finals) mean += f;
    mean /= static_cast<double>(finals.size());
    double var = 0.0;
    for (double f : finals) var += (f - mean) * (f - mean);
    var /= static_cast<double>(finals.size());
    summary["mean"] = mean;
    summary["std"] = std::sqrt(var);
    summary["median"] = median_of(finals);
  }
  write_text_file(out_dir / kSummaryFile, summary.dump(2) + "\n");
  if (!args.quiet) out << "wrote " << (out_dir / kSummaryFile).string() << "\n";
  return failed ? exit_runtime : exit_ok;
}

// ---------------------------------------------------------------------------
// solve

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  if (args.random < 0) throw ValidationError("--random must be >= 0");
  if (args.random == 0 && !args.instance_path) {
    throw ValidationError("solve needs an instance file or --random N");
  }
  auto apply_overrides = [&](proximal::ProblemInstance& inst) {
    if (args.constraint) {
      try {
        inst.kind = proximal::parse_constraint_kind(*args.constraint);
      } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
      }
    }
    if (args.delta) inst.delta = *args.delta;
    if (args.epsilon) inst.epsilon = *args.epsilon;
    try {
      inst.validate();
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  };

  struct Checked {
    nlohmann::json report;
    double gap = 0.0;
  };
  auto check = [&](const proximal::ProblemInstance& inst, std::uint64_t seed) {
    proximal::ClosedFormSolution closed;
    try {
      closed = proximal::solve_closed_form(inst);
    } catch (const std::domain_error& e) {
      throw ValidationError(std::string("infeasible parameters: ") + e.what());
    }
    proximal::OracleOptions options;
    options.seed = seed;
    const auto oracle = proximal::brute_force_oracle(inst, options);
    const auto closed_res = proximal::constraint_report(inst, closed.rows);
    const auto oracle_res = proximal::constraint_report(inst, oracle.rows);
    const double gap = std::abs(closed.objective - oracle.objective);
    nlohmann::json duals = nlohmann::json::array();
    for (double d : closed.duals) duals.push_back(finite_or_null(d));
    auto residuals = [&](const proximal::ConstraintReport& r) {
      return nlohmann::json{{"max_state_kl", r.max_state_kl},
                            {"aggregate", r.aggregate},
                            {"max_ratio_dev", r.max_ratio_dev},
                            {"delta", inst.delta},
                            {"epsilon", inst.epsilon}};
    };
    nlohmann::json report{
        {"constraint", std::string(proximal::to_string(inst.kind))},
        {"closed_form",
         {{"targets", rows_json(closed.rows)},
          {"objective", closed.objective},
          {"constraint_binding", closed.constraint_binding},
          {"duals", duals},
          {"residuals", residuals(closed_res)}}},
        {"oracle",
         {{"targets", rows_json(oracle.rows)},
          {"objective", oracle.objective},
          {"max_violation", oracle.max_violation},
          {"residuals", residuals(oracle_res)}}},
        {"objective_gap", gap},
        {"pass", gap <= args.tolerance}};
    return Checked{std::move(report), gap};
  };

  if (args.random == 0) {
    proximal::ProblemInstance inst;
    try {
      inst = proximal::instance_from_json(read_json_file(*args.instance_path, "instance"));
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    apply_overrides(inst);
    const auto result = check(inst, args.seed);
    out << std::setprecision(10) << result.report.dump(2) << "\n";
    if (result.gap > args.tolerance) {
      err << "objective gap " << result.gap << " exceeds " << args.tolerance << "\n";
      return exit_runtime;
    }
    return exit_ok;
  }

  proximal::ConstraintKind kind = proximal::ConstraintKind::forward_kl;
  if (args.constraint) {
    try {
      kind = proximal::parse_constraint_kind(*args.constraint);
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
  }
  std::mt19937_64 rng(args.seed);
  std::uniform_int_distribution<int> states(1, 10);
  std::uniform_int_distribution<int> actions(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double max_gap = 0.0;
  int failures = 0;
  for (int i = 0; i < args.random; ++i) {
    const int s = states(rng);
    const int a = actions(rng);
    const double delta = args.delta.value_or(0.01 + 0.19 * unit(rng));
    const double epsilon = args.epsilon.value_or(delta * (0.5 + 1.5 * unit(rng)));
    const auto inst = proximal::random_instance(kind, rng, s, a, delta, epsilon);
    const auto result = check(inst, args.seed + static_cast<std::uint64_t>(i));
    max_gap = std::max(max_gap, result.gap);
    if (result.gap > args.tolerance) {
      ++failures;
      err << "instance " << i << " gap " << result.gap << ": "
          << proximal::to_json(inst).dump() << "\n";
    }
  }
  out << nlohmann::json{{"constraint", std::string(proximal::to_string(kind))},
                        {"instances", args.random},
                        {"max_objective_gap", max_gap},
                        {"failures", failures}}
             .dump(2)
      << "\n";
  return failures > 0 ? exit_runtime : exit_ok;
}

// ---------------------------------------------------------------------------
// plotdata

const std::vector<std::string>& metric_columns() {
  static const std::vector<std::string> columns{"steps",       "mean_return_100", "mean_kl_stop",
                                                "epochs_used", "reject_frac",     "critic_loss",
                                                "lr"};
  return columns;
}

std::vector<std::vector<std::string>> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing metrics CSV " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != trainer::csv_header()) {
    throw ValidationError("corrupt metrics CSV " + path.string() + ": unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_csv_line(line);
    if (fields.size() != metric_columns().size() + 1 ||
        !std::all_of(fields.begin(), fields.end(), parses_as_number)) {
      throw ValidationError("corrupt metrics CSV " + path.string() + " at line " +
                            std::to_string(line_no));
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::vector<LongRow> long_format(const fs::path& run_dir) {
  const fs::path manifest_path = run_dir / kManifestFile;
  if (!fs::exists(manifest_path)) {
    throw ValidationError("missing manifest: " + manifest_path.string() + " not found");
  }
  const auto manifest = RunManifest::from_json(read_json_file(manifest_path, "manifest"));
  std::vector<LongRow> rows;
  for (const auto seed : manifest.seeds) {
    for (const auto& fields : read_metrics_csv(run_dir / seed_csv_name(seed))) {
      const int iteration = std::stoi(fields[0]);
      for (std::size_t m = 0; m < metric_columns().size(); ++m) {
        rows.push_back({iteration, seed, metric_columns()[m], fields[m + 1]});
      }
    }
  }
  return rows;
}

void write_long_format(std::ostream& out, const std::vector<LongRow>& rows) {
  out << "iteration,seed,metric,value\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << r.seed << ',' << r.metric << ',' << r.value << '\n';
  }
}

std::vector<LongRow> read_long_format(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "iteration,seed,metric,value") {
    throw ValidationError("long-format CSV: unexpected header");
  }
  const auto& metrics = metric_columns();
  std::vector<LongRow> rows;
  while (std::getline(in, line)) {
    const auto f = split_csv_line(line);
    if (f.size() != 4 || std::find(metrics.begin(), metrics.end(), f[2]) == metrics.end() ||
        !parses_as_number(f[0]) || !parses_as_number(f[1]) || !parses_as_number(f[3])) {
      throw ValidationError("long-format CSV: malformed row '" + line + "'");
    }
    rows.push_back({std::stoi(f[0]), std::stoull(f[1]), f[2], f[3]});
  }
  return rows;
}

int cmd_plotdata(const PlotdataArgs& args, std::ostream& out, std::ostream&) {
  const auto rows = long_format(args.run_dir);
  if (args.out) {
    std::ofstream file(*args.out, std::ios::binary | std::ios::trunc);
    if (!file) throw std::runtime_error("cannot write " + args.out->string());
    write_long_format(file, rows);
  } else {
    write_long_format(out, rows);
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------
// Entry point

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"SPU proximal solvers and training runs", "spu"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "spu 0.1.0");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one or more seeds and write CSV metrics");
  train_cmd->add_option("--config", train.config_path, "Config JSON (SpuConfig fields)");
  train_cmd->add_option("--manifest", train.manifest_path,
                        "Re-run exactly the config and seeds of an existing manifest");
  train_cmd->add_option("--seed", train.seed, "First seed (overrides config.seed)");
  train_cmd->add_option("--seeds", train.seeds, "Number of consecutive seeds")->capture_default_str();
  train_cmd->add_option("--env", train.env, "gridworld-5x5 | cartpole | pointmass");
  train_cmd->add_option("--constraint", train.constraint, "forward-kl | backward-kl | linf");
  train_cmd->add_option("--iters", train.iters, "Iterations (overrides config.iterations)");
  train_cmd->add_flag("--no-grad-kl", train.no_grad_kl, "Drop the KL gradient term");
  train_cmd->add_flag("--no-dynamic-stopping", train.no_dynamic_stopping,
                      "Always run zeta epochs");
  train_cmd->add_flag("--no-per-state-acceptance", train.no_per_state_acceptance,
                      "Keep samples whose per-state KL exceeds epsilon");
  auto* out_opt = train_cmd->add_option("--out", train.out, "Output directory")->capture_default_str();
  train_cmd->add_option("--jobs", train.jobs, "Seeds trained concurrently")->capture_default_str();
  train_cmd->add_flag("--quiet", train.quiet, "Only report errors");

  SolveArgs solve;
  auto* solve_cmd =
      app.add_subcommand("solve", "Closed-form proximal targets with an oracle cross-check");
  solve_cmd->add_option("instance", solve.instance_path, "Instance JSON file");
  solve_cmd->add_option("--constraint", solve.constraint, "forward-kl | backward-kl | linf");
  solve_cmd->add_option("--delta", solve.delta, "Override delta");
  solve_cmd->add_option("--epsilon", solve.epsilon, "Override epsilon");
  solve_cmd->add_option("--random", solve.random, "Check N random instances instead of a file");
  solve_cmd->add_option("--seed", solve.seed, "Seed for --random and the oracle restarts");
  solve_cmd->add_option("--tolerance", solve.tolerance, "Maximum objective gap")
      ->capture_default_str();

  PlotdataArgs plot;
  auto* plot_cmd =
      app.add_subcommand("plotdata", "Long-format CSV (iteration, seed, metric, value) of a run");
  plot_cmd->add_option("run_dir", plot.run_dir, "Run directory written by train")->required();
  plot_cmd->add_option("--out", plot.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  }
  train.out_given = out_opt->count() > 0;

  try {
    if (*train_cmd) return cmd_train(train, out, err);
    if (*solve_cmd) return cmd_solve(solve, out, err);
    if (*plot_cmd) return cmd_plotdata(plot, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return exit_validation;
  } catch (const trainer::ConfigError& e) {
    err << "invalid config field " << e.what() << "\n";
    return exit_validation;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << "\n";
    return exit_runtime;
  }
  return exit_validation;
}

}  // namespace spu::cli
