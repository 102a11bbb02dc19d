// Command-line front end: simulate, fit, mdi, asympt, experiment, density,
// analyze.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbss/asymptotics.hpp"
#include "sbss/error.hpp"
#include "sbss/harness.hpp"
#include "sbss/io.hpp"
#include "sbss/metrics.hpp"
#include "sbss/parallel.hpp"
#include "sbss/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sbss;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
};

void write_json(const std::string& path, const json& j) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << j.dump(2) << '\n';
}

json manifest(const std::string& command, const Globals& g, double seconds) {
  return {{"command", command},
          {"version", kVersion},
          {"threads", g.threads},
          {"timings", {{"total_seconds", seconds}}}};
}

std::vector<KernelSet> kernel_sets_from(const std::vector<std::string>& specs) {
  std::vector<KernelSet> out;
  for (const auto& s : specs) {
    // Set names are CSV fields, so the kernels are joined with '+'.
    std::string name = s;
    std::replace(name.begin(), name.end(), ',', '+');
    name.erase(std::remove(name.begin(), name.end(), ' '), name.end());
    out.push_back({name, parse_kernel_list(s)});
  }
  return out;
}

std::string prefix_or(const Globals& g, const std::string& fallback) { return g.out.empty() ? fallback : g.out; }

LocationSet design_from_spec(const std::string& spec, Rng& rng) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
  auto num = [&](std::size_t i) { return std::stod(parts.at(i)); };
  const std::string& type = parts.at(0);
  if (type == "nested" && parts.size() == 3) return gen_nested_squares(std::stoi(parts[1]), std::stoi(parts[2]), rng);
  if (type == "diamond" && parts.size() == 2) return gen_diamond_grid(std::stoi(parts[1]));
  if (type == "rectangle" && parts.size() == 2) return gen_rectangle_grid(std::stoi(parts[1]));
  if (type == "uniform" && parts.size() == 6) {
    Vector lo(2), hi(2);
    lo << num(2), num(4);
    hi << num(3), num(5);
    return gen_uniform_rect(std::stol(parts[1]), lo, hi, rng);
  }
  if (type == "csv" && parts.size() >= 2) return read_locations_csv(spec.substr(4));
  throw InvalidArgument("bad design spec '" + spec + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial blind source separation toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output prefix or directory");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate mixed latent Matern fields");
  std::string sim_design = "nested:200:1", sim_latent = "sim1", sim_mixing = "identity";
  sim->add_option("--design", sim_design,
                  "nested:base:layers | diamond:m | rectangle:m | uniform:n:xlo:xhi:ylo:yhi | csv:path");
  sim->add_option("--latent", sim_latent, "sim1 | sim2[:phi] | sim3 | matern:k:phi,...");
  sim->add_option("--mixing", sim_mixing, "identity | random | path to a matrix CSV");

  // fit
  auto* fitc = app.add_subcommand("fit", "Estimate the unmixing matrix");
  std::string fit_data, fit_kernels;
  bool fit_centered = false, fit_trace = false;
  int fit_dim = 0;
  fitc->add_option("--data", fit_data, "Sample CSV x1..xd,v1..vp")->required();
  fitc->add_option("--kernels", fit_kernels, "Comma-separated kernel specs")->required();
  fitc->add_flag("--centered", fit_centered, "Subtract column means first");
  fitc->add_flag("--trace", fit_trace, "Write the per-sweep criterion trace");
  fitc->add_option("--dim", fit_dim, "Number of coordinate columns (default: x-prefixed headers)");

  // mdi
  auto* mdic = app.add_subcommand("mdi", "Minimum distance index");
  std::string mdi_gamma, mdi_omega;
  Index mdi_n = 0;
  mdic->add_option("--gamma", mdi_gamma, "Unmixing matrix CSV")->required();
  mdic->add_option("--omega", mdi_omega, "Mixing matrix CSV")->required();
  mdic->add_option("--n", mdi_n, "Sample size, to also report n(p-1)MDI^2");

  // asympt
  auto* asy = app.add_subcommand("asympt", "Limiting distribution of n(p-1)MDI^2");
  std::string asy_locs, asy_latent = "sim1";
  std::vector<std::string> asy_kernels;
  bool asy_full = false;
  asy->add_option("--locations", asy_locs, "Locations CSV x1..xd")->required();
  asy->add_option("--latent", asy_latent, "Latent spec");
  asy->add_option("--kernels", asy_kernels, "Kernel set (repeat for several sets)")->required();
  asy->add_flag("--full", asy_full, "Also write the covariance matrix of vect(Gamma)");

  // experiment / density
  auto* exp = app.add_subcommand("experiment", "Replicated simulation study");
  auto* den = app.add_subcommand("density", "Empirical vs limiting n(p-1)MDI^2 samples");
  std::string cfg_path, cfg_preset;
  int cfg_reps = 0;
  std::vector<Index> cfg_sizes;
  Index draws = 100000;
  for (auto* sub : {exp, den}) {
    sub->add_option("--config", cfg_path, "JSON config file");
    sub->add_option("--preset", cfg_preset, "sim1 | sim2 | sim3-uniform | sim3-skew");
    sub->add_option("--replications", cfg_reps, "Override the replication count");
    sub->add_option("--sizes", cfg_sizes, "Override the sample sizes")->delimiter(',');
  }
  den->add_option("--draws", draws, "Limit draws per cell");

  // analyze
  auto* ana = app.add_subcommand("analyze", "Fit several kernel sets to a data file");
  std::string ana_data;
  std::vector<std::string> ana_kernels;
  std::string ana_ref;
  bool ana_uncentered = false;
  ana->add_option("--data", ana_data, "Sample CSV")->required();
  ana->add_option("--kernels", ana_kernels, "Kernel set (repeat for several sets)")->required();
  ana->add_option("--reference", ana_ref, "Reference scores CSV aligned by row");
  ana->add_flag("--uncentered", ana_uncentered, "Do not subtract column means");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) g.seed = seed_value;

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

  try {
    set_thread_count(g.threads);

    if (*sim) {
      const std::uint64_t seed = g.seed.value_or(1);
      Rng design_rng = substream(seed, {1});
      const LocationSet locs = design_from_spec(sim_design, design_rng);
      const LatentSpec spec = LatentSpec::parse(sim_latent);
      Matrix omega;
      if (sim_mixing == "identity") {
        omega = Matrix::Identity(spec.p(), spec.p());
      } else if (sim_mixing == "random") {
        Rng mix_rng = substream(seed, {4});
        omega = random_mixing(spec.p(), mix_rng);
      } else {
        omega = read_matrix_csv(sim_mixing);
      }
      const LatentSimulator simulator(locs, spec);
      Rng rng = substream(seed, {2});
      const FieldSample z = simulator.draw(rng);
      const FieldSample x = mix(z, omega);
      const std::string prefix = prefix_or(g, "sample");
      write_field_sample_csv(prefix + ".csv", x);
      write_field_sample_csv(prefix + ".latent.csv", z);
      write_matrix_csv(prefix + ".mixing.csv", omega);
      json meta = manifest("simulate", g, elapsed());
      meta["seed"] = seed;
      meta["design"] = sim_design;
      meta["latent"] = spec.spec();
      meta["jitter"] = simulator.jitter();
      write_json(prefix + ".meta.json", meta);
      std::cout << "wrote " << prefix << ".csv (" << x.size() << " rows)\n";
    } else if (*fitc) {
      const FieldSample sample = read_field_sample_csv(fit_data, fit_dim);
      const std::vector<Kernel> kernels = parse_kernel_list(fit_kernels);
      const SbssFit result = fit(sample, kernels, fit_centered);
      const std::string prefix = prefix_or(g, "fit");
      write_fit(prefix, result);
      if (fit_trace) {
        const auto& tr = result.unmixing.criterion_trace;
        Matrix t(static_cast<Index>(tr.size()), 2);
        for (std::size_t i = 0; i < tr.size(); ++i) t(i, 0) = static_cast<double>(i), t(i, 1) = tr[i];
        write_csv_file(prefix + ".trace.csv", {"sweep", "criterion"}, t);
      }
      json meta = manifest("fit", g, elapsed());
      meta["data"] = fit_data;
      meta["kernels"] = kernel_list_spec(kernels);
      meta["centered"] = fit_centered;
      meta["criterion"] = result.unmixing.criterion;
      meta["sweeps"] = result.unmixing.sweeps;
      meta["converged"] = result.unmixing.status == SolverStatus::Converged;
      meta["ties"] = result.unmixing.ties;
      write_json(prefix + ".meta.json", meta);
      if (result.unmixing.status != SolverStatus::Converged)
        std::cerr << "warning: joint diagonalization stopped at the sweep limit\n";
      std::cout << "criterion," << format_double(result.unmixing.criterion) << '\n';
    } else if (*mdic) {
      const Matrix gamma = read_matrix_csv(mdi_gamma);
      const Matrix omega = read_matrix_csv(mdi_omega);
      const MdiValue v = mdi(gamma, omega);
      std::cout << "mdi," << format_double(v.value) << '\n';
      std::cout << "assignment";
      for (Index a : v.assignment) std::cout << ',' << a + 1;
      std::cout << '\n';
      if (mdi_n > 0) std::cout << "nmdi2," << format_double(nmdi_from_mdi(v.value, mdi_n, gamma.rows())) << '\n';
    } else if (*asy) {
      const LocationSet locs = read_locations_csv(asy_locs);
      const LatentSpec spec = LatentSpec::parse(asy_latent);
      const AsymptoticWorkspace ws(locs, spec, Matrix::Identity(spec.p(), spec.p()));
      std::cout << "kernel_set,expected_nmdi2,deltas\n";
      const auto sets = kernel_sets_from(asy_kernels);
      for (std::size_t s = 0; s < sets.size(); ++s) {
        std::cout << '"' << sets[s].name << "\",";
        try {
          const LimitSpectrum spec_s = limit_spectrum(ws, sets[s].kernels);
          std::cout << format_double(spec_s.expected_nmdi) << ',';
          for (Index i = 0; i < spec_s.deltas.size(); ++i)
            std::cout << (i ? ";" : "") << format_double(spec_s.deltas(i));
          std::cout << '\n';
          if (asy_full && !g.out.empty()) {
            const Matrix fk = fk_matrix_unmixed(ws, sets[s].kernels);
            write_matrix_csv(g.out + ".set" + std::to_string(s + 1) + ".fk.csv", fk);
          }
        } catch (const EigGapTooSmall& e) {
          std::cout << "NA,\n";
          std::cerr << "set " << sets[s].name << ": " << e.what() << '\n';
        }
      }
    } else if (*exp || *den) {
      ExperimentConfig cfg;
      if (!cfg_path.empty()) cfg = ExperimentConfig::load(cfg_path);
      else if (!cfg_preset.empty()) cfg = ExperimentConfig::preset(cfg_preset);
      else throw InvalidArgument("give --config or --preset");
      if (g.seed) cfg.seed = *g.seed;
      if (cfg_reps > 0) cfg.replications = cfg_reps;
      if (!cfg_sizes.empty()) cfg.sample_sizes = cfg_sizes;
      if (!g.out.empty()) cfg.outputs = g.out;
      cfg.validate();

      const ExperimentReport report = run_experiment(cfg);
      const fs::path dir(cfg.outputs);
      fs::create_directories(dir);
      write_report_csv((dir / "report.csv").string(), report);
      write_replications_csv((dir / "replications.csv").string(), cfg, report);
      {
        std::ofstream f(dir / "config.json");
        f << cfg.to_json() << '\n';
      }
      json meta = manifest(*exp ? "experiment" : "density", g, 0.0);
      meta["config_hash"] = cfg.hash();
      meta["seed"] = cfg.seed;
      meta["failures"] = report.failure_messages;
      meta["timings"]["experiment_seconds"] = report.wall_seconds;
      if (*den) {
        const auto pairs = run_density_comparison(cfg, draws, &report);
        for (const auto& pr : pairs)
          write_density_csv((dir / ("density_n" + std::to_string(pr.n) + "_" + safe_name(pr.kernel_set) + ".csv"))
                                .string(),
                            pr);
        meta["draws"] = draws;
      }
      meta["timings"]["total_seconds"] = elapsed();
      write_json((dir / "manifest.json").string(), meta);
      std::ifstream in(dir / "report.csv");
      std::cout << in.rdbuf();
    } else if (*ana) {
      AnalysisConfig cfg;
      cfg.data_csv = ana_data;
      cfg.kernel_sets = kernel_sets_from(ana_kernels);
      if (!ana_ref.empty()) cfg.reference_csv = ana_ref;
      cfg.outputs = prefix_or(g, "analysis");
      cfg.centered = !ana_uncentered;
      const AnalysisResult result = run_data_analysis(cfg);
      write_analysis(cfg, result);
      json meta = manifest("analyze", g, elapsed());
      meta["data"] = ana_data;
      json names = json::array();
      for (std::size_t s = 0; s < result.names.size(); ++s)
        names.push_back({{"kernels", result.names[s]}, {"files", safe_name(result.names[s])}});
      meta["kernel_sets"] = names;
      write_json((fs::path(cfg.outputs) / "manifest.json").string(), meta);
      std::cout << "wrote " << result.fits.size() << " fits to " << cfg.outputs << '\n';
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
