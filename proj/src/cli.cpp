#include "ssde/cli.hpp"

#include <filesystem>
#include <functional>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ssde/diffusion_cond.hpp"
#include "ssde/errors.hpp"
#include "ssde/io.hpp"
#include "ssde/log.hpp"
#include "ssde/sampler.hpp"
#include "ssde/sim.hpp"
#include "ssde/switching_cond.hpp"

namespace ssde::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

std::mutex g_stderr_mutex;

void report_error(const std::string& what) {
  std::string line = what;
  for (char& c : line)
    if (c == '\n' || c == '\r') c = ' ';
  std::lock_guard lock(g_stderr_mutex);
  std::cerr << "error: " << line << '\n';
}

/// Runs `body`, mapping library exceptions to exit codes.
int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    report_error(e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    report_error(e.what());
    return kNumerical;
  } catch (const IoError& e) {
    report_error(e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    report_error(e.what());
    return kIo;
  } catch (const std::exception& e) {
    report_error(e.what());
    return 1;
  }
}

json load_config(const RunConfig& cfg) {
  if (cfg.config_path.empty()) return json::object();
  json doc = io::load_json(cfg.config_path);
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");
  return doc;
}

bool has_model(const json& doc) { return doc.contains("rates") && doc.contains("modes"); }

template <typename T>
T setting(const std::optional<T>& flag, const json& section, const char* key, T fallback) {
  if (flag) return *flag;
  if (section.is_object() && section.contains(key)) return section.at(key).get<T>();
  return fallback;
}

TimeGrid grid_from(const RunConfig& cfg, const json& doc, std::optional<double> default_horizon) {
  const json grid = doc.value("grid", json::object());
  const double h = setting(cfg.step, grid, "h", 0.01);
  std::optional<double> T = cfg.horizon;
  if (!T && grid.contains("T")) T = grid.at("T").get<double>();
  if (!T) T = default_horizon;
  if (!T) throw ValidationError("config: missing grid horizon 'grid.T'");
  if (!(h > 0.0)) throw ValidationError("invalid step: h must be positive");
  return TimeGrid(*T, h);
}

/// Files written by the current command; removed again if the command fails.
class OutputGuard {
 public:
  explicit OutputGuard(fs::path dir) : dir_(std::move(dir)) {}
  ~OutputGuard() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove_all(p, ec);
  }
  fs::path add(const std::string& name) {
    written_.push_back(dir_ / name);
    return written_.back();
  }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

void write_filter_dump(const fs::path& dir, OutputGuard& guard, const GibbsState& state, const ObservationSet& obs,
                       const TimeGrid& grid) {
  const auto& p = state.params;
  const auto info = run_information_filter(state.z, p.modes, obs, p.obs.Sigma_x, grid);
  const int n = p.dim();
  {
    io::CsvWriter w(guard.add("info_filter.csv"));
    std::vector<std::string> header{"t"};
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) header.push_back("I_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    for (int i = 0; i < n; ++i) header.push_back("a_" + std::to_string(i + 1));
    w.row(header);
    Vec row(n * n + n);
    for (int l = 0; l < grid.points(); ++l) {
      const Mat I = info.I(l);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) row[i * n + j] = I(i, j);
      row.tail(n) = info.a(l);
      w.row(grid.time(l), row);
    }
    w.close();
  }
  const auto ks = run_ks_filter(state.y, p.modes, p.rates, p.init.pi, grid);
  io::CsvWriter w(guard.add("ks_filter.csv"));
  std::vector<std::string> header{"t"};
  for (int k = 0; k < p.num_modes(); ++k) header.push_back("p" + std::to_string(k + 1));
  w.row(header);
  for (int l = 0; l < grid.points(); ++l) w.row(grid.time(l), ks.p.col(l));
  w.close();
  (void)dir;
}

int infer_chain(const RunConfig& cfg, const json& doc, const fs::path& out, std::uint64_t seed) {
  std::optional<ModelParams> model;
  if (has_model(doc)) model = io::model_from_json(doc);

  std::optional<int> dim;
  if (model) dim = model->dim();
  if (cfg.data_path.empty()) throw ValidationError("infer: missing --data");
  const ObservationSet obs = io::read_observations(cfg.data_path, dim);
  if (obs.size() == 0) throw ValidationError("infer: observation file has no rows");

  int K = 0;
  if (model) K = model->num_modes();
  if (doc.contains("num_modes")) K = doc.at("num_modes").get<int>();
  if (K < 1) throw ValidationError("config: missing 'num_modes' (or a model with 'rates')");
  if (model && model->num_modes() != K) throw ValidationError("dimension mismatch: num_modes differs from model");

  const TimeGrid grid = grid_from(cfg, doc, obs.times.back());
  obs.validate(grid);

  const json sampler = doc.value("sampler", json::object());
  SamplerConfig sc;
  sc.num_samples = setting(cfg.samples, sampler, "samples", 1000);
  sc.burn_in = setting(cfg.burn_in, sampler, "burnin", -1);
  sc.thin = setting(cfg.thin, sampler, "thin", 1);
  sc.stride = setting(cfg.stride, sampler, "stride", 1);
  sc.seed = seed;
  sc.update_params = sampler.value("update_params", true);
  sc.validate();

  SamplerSetup setup = empirical_setup(obs, grid, K, seed);
  if (doc.contains("hyper")) setup.hyper = io::hyper_from_json(doc.at("hyper"), setup.hyper);
  if (!sc.update_params) {
    if (!model) throw ValidationError("config: update_params = false requires a model");
    setup.initial.params = *model;
  }

  log::info("infer: " + std::to_string(obs.size()) + " observations, K = " + std::to_string(K) + ", " +
            std::to_string(grid.points()) + " grid points, seed " + std::to_string(seed));
  const SamplerResult result = run_sampler(sc, obs, grid, setup);

  fs::create_directories(out);
  OutputGuard guard(out);
  io::write_marginals(out, empirical_marginals(result.store, grid, K));
  guard.add("z_marginal.csv");
  guard.add("y_marginal.csv");
  io::write_params_jsonl(guard.add("params.jsonl"), result.store.records);

  TraceTable table;
  for (const auto& r : result.store.records) {
    table.append(io::record_scalars(json::parse(io::record_to_json(r).dump())), r.mala_accepted, r.sweep_seconds);
  }
  io::write_json(guard.add("diagnostics.json"), io::diagnostics_to_json(compute_diagnostics(table)));

  json run = {{"seed", seed},
              {"samples", sc.num_samples},
              {"burnin", sc.effective_burn_in()},
              {"thin", sc.thin},
              {"stride", sc.stride},
              {"num_modes", K},
              {"grid", {{"T", grid.horizon()}, {"h", grid.step()}}},
              {"hyper", io::hyper_to_json(setup.hyper)}};
  io::write_json(guard.add("run.json"), run);

  if (cfg.store_raw) io::write_raw_samples(guard.add("samples"), result.store, grid);
  if (cfg.dump_filter) write_filter_dump(out, guard, result.final_state, obs, grid);
  guard.commit();
  return kOk;
}

}  // namespace

int cmd_simulate(const RunConfig& cfg) {
  return guarded([&] {
    const json doc = load_config(cfg);
    if (!has_model(doc)) throw ValidationError("simulate: config must contain a model ('rates', 'modes', ...)");
    const TimeGrid grid = grid_from(cfg, doc, std::nullopt);
    const ModelParams params = io::model_from_json(doc);

    std::vector<double> times;
    const json spec = doc.value("observations", json::object());
    if (spec.contains("times")) {
      times = spec.at("times").get<std::vector<double>>();
    } else {
      times = equally_spaced_times(grid, spec.value("count", 20));
    }
    const std::uint64_t seed = setting(cfg.seed, doc.value("sampler", json::object()), "seed", std::uint64_t{0});
    Rng rng(seed);
    const auto data = simulate_model(params, grid, times, rng);

    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    OutputGuard guard(out);
    io::write_mode_path(guard.add("truth_z.csv"), data.z, grid);
    io::write_diffusion_path(guard.add("truth_y.csv"), data.y, grid);
    io::write_observations(guard.add("obs.csv"), data.obs);
    guard.commit();
    for (const char* name : {"truth_z.csv", "truth_y.csv", "obs.csv"}) std::cout << (out / name).string() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_infer(const RunConfig& cfg) {
  return guarded([&] {
    const json doc = load_config(cfg);
    const std::uint64_t seed = setting(cfg.seed, doc.value("sampler", json::object()), "seed", std::uint64_t{0});
    if (cfg.chains < 1) throw ValidationError("--chains must be >= 1");
    if (cfg.chains == 1) return infer_chain(cfg, doc, cfg.out_dir, seed);

    std::vector<int> codes(static_cast<std::size_t>(cfg.chains), kOk);
    std::vector<std::thread> threads;
    const Rng root(seed);
    for (int c = 0; c < cfg.chains; ++c) {
      threads.emplace_back([&, c] {
        const fs::path out = cfg.out_dir + "_chain" + std::to_string(c + 1);
        const std::uint64_t chain_seed = root.derive(static_cast<std::uint64_t>(c)).seed();
        codes[static_cast<std::size_t>(c)] = guarded([&] { return infer_chain(cfg, doc, out, chain_seed); });
      });
    }
    for (auto& t : threads) t.join();
    for (int code : codes)
      if (code != kOk) return code;
    for (int c = 0; c < cfg.chains; ++c) std::cout << cfg.out_dir << "_chain" << c + 1 << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_diagnose(const RunConfig& cfg) {
  return guarded([&] {
    const fs::path dir(cfg.out_dir);
    const fs::path params = dir / "params.jsonl";
    if (!fs::exists(params)) throw IoError("store not found: " + params.string());
    const TraceTable table = io::read_params_jsonl(params);
    if (table.size() == 0) throw ValidationError("empty store: " + params.string() + " has no records");
    io::write_json(dir / "diagnostics.json", io::diagnostics_to_json(compute_diagnostics(table)));
    std::cout << (dir / "diagnostics.json").string() << '\n';
    return static_cast<int>(kOk);
  });
}

int run_cli(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Gibbs sampling for continuous-time switching linear dynamical systems", "ssde"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", cfg.config_path, "Model and sampler configuration (JSON)");
    sub->add_option("--out", cfg.out_dir, "Output directory");
    sub->add_option("--seed", cfg.seed, "Random seed");
  };
  auto* simulate = app.add_subcommand("simulate", "Simulate truth paths and observations");
  add_common(simulate);
  simulate->add_option("--horizon", cfg.horizon, "Time horizon T");
  simulate->add_option("--step", cfg.step, "Grid step h");

  auto* infer = app.add_subcommand("infer", "Run the Gibbs sampler on observations");
  add_common(infer);
  infer->add_option("--data", cfg.data_path, "Observation CSV (t,x1..xn)");
  infer->add_option("--horizon", cfg.horizon, "Time horizon T");
  infer->add_option("--step", cfg.step, "Grid step h");
  infer->add_option("--samples", cfg.samples, "Number of Gibbs sweeps");
  infer->add_option("--burnin", cfg.burn_in, "Burn-in sweeps (default 10% of samples)");
  infer->add_option("--thin", cfg.thin, "Thinning interval");
  infer->add_option("--chains", cfg.chains, "Independent chains run concurrently");
  infer->add_option("--stride", cfg.stride, "Keep every stride-th grid point of y draws");
  infer->add_flag("--dump-filter", cfg.dump_filter, "Write information and KS filter CSVs for the final state");
  infer->add_flag("--store-raw", cfg.store_raw, "Write retained raw draws to samples/");

  auto* diagnose = app.add_subcommand("diagnose", "Recompute diagnostics.json from a sample store");
  diagnose->add_option("--out", cfg.out_dir, "Store directory");
  diagnose->add_option("store", cfg.out_dir, "Store directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(e.what());
    return kUsage;
  }

  if (simulate->parsed()) return cmd_simulate(cfg);
  if (infer->parsed()) return cmd_infer(cfg);
  return cmd_diagnose(cfg);
}

}  // namespace ssde::cli
