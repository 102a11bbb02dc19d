#include "sbss/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbss/error.hpp"
#include "sbss/io.hpp"
#include "sbss/local_cov.hpp"
#include "sbss/metrics.hpp"
#include "sbss/parallel.hpp"

namespace sbss {

using nlohmann::json;

namespace {

// Substream keys.
constexpr std::uint64_t kDesignKey = 1;
constexpr std::uint64_t kReplicationKey = 2;
constexpr std::uint64_t kLimitKey = 3;
constexpr std::uint64_t kMixingKey = 4;

const char* design_name(DesignConfig::Type t) {
  switch (t) {
    case DesignConfig::Type::NestedSquares: return "nested_squares";
    case DesignConfig::Type::Diamond: return "diamond";
    case DesignConfig::Type::Rectangle: return "rectangle";
    case DesignConfig::Type::Uniform: return "uniform";
    case DesignConfig::Type::WeightedRegion: return "weighted_region";
    case DesignConfig::Type::Csv: return "csv";
  }
  return "";
}

DesignConfig::Type design_type(const std::string& s) {
  for (auto t : {DesignConfig::Type::NestedSquares, DesignConfig::Type::Diamond, DesignConfig::Type::Rectangle,
                 DesignConfig::Type::Uniform, DesignConfig::Type::WeightedRegion, DesignConfig::Type::Csv})
    if (s == design_name(t)) return t;
  throw InvalidArgument("unknown design type '" + s + "'");
}

// Stand-in region for the map-based designs, in kilometres.
std::vector<std::array<double, 2>> standin_region() {
  return {{0, 0},       {250, -20},  {420, 120},  {520, 520}, {430, 780},
          {330, 1050}, {220, 1120}, {180, 900},  {40, 650},  {-20, 300}};
}

std::vector<KernelSet> sets_from_specs(const std::vector<std::pair<std::string, std::string>>& specs) {
  std::vector<KernelSet> out;
  for (const auto& [name, spec] : specs) out.push_back({name, parse_kernel_list(spec)});
  return out;
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::ofstream open_file(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  latent.validate();
  solver.validate();
  if (replications < 1) throw InvalidArgument("replications must be at least 1");
  if (sample_sizes.empty()) throw InvalidArgument("no sample sizes given");
  if (kernel_sets.empty()) throw InvalidArgument("no kernel sets given");
  for (const auto& s : kernel_sets) {
    if (s.name.empty() || s.name.find_first_of(",\"\n\r") != std::string::npos)
      throw InvalidArgument("kernel set names must be nonempty and free of commas, quotes and newlines");
    if (s.kernels.empty()) throw InvalidArgument("kernel set '" + s.name + "' is empty");
    for (const auto& k : s.kernels)
      if (k.is_identity()) throw InvalidArgument("kernel set '" + s.name + "' lists the implicit identity kernel");
  }
  for (std::size_t a = 0; a < kernel_sets.size(); ++a)
    for (std::size_t b = a + 1; b < kernel_sets.size(); ++b)
      if (kernel_sets[a].name == kernel_sets[b].name)
        throw InvalidArgument("duplicate kernel set name '" + kernel_sets[a].name + "'");

  const int p = latent.p();
  if (mixing.type == MixingConfig::Type::Matrix) {
    if (mixing.matrix.rows() != p || mixing.matrix.cols() != p)
      throw InvalidArgument("mixing matrix does not match the number of latent components");
    require_invertible(mixing.matrix);
  }

  const auto& d = design;
  for (Index n : sample_sizes) {
    if (n <= p) throw InvalidArgument("sample sizes must exceed the number of variables");
    switch (d.type) {
      case DesignConfig::Type::NestedSquares: {
        if (d.base < 1 || d.layers < 1) throw InvalidArgument("nested squares need base >= 1 and layers >= 1");
        bool ok = false;
        for (int j = 0; j < d.layers; ++j) ok = ok || n == (static_cast<Index>(d.base) << j);
        if (!ok)
          throw InvalidArgument("sample size " + std::to_string(n) +
                                " is not a nested-square prefix of the design");
        break;
      }
      case DesignConfig::Type::Diamond:
        if (n != 2 * static_cast<Index>(d.radius) * d.radius + 2 * d.radius + 1)
          throw InvalidArgument("sample size must equal the diamond grid size");
        break;
      case DesignConfig::Type::Rectangle:
        if (n != (2 * static_cast<Index>(d.radius) + 1) * (d.radius + 1))
          throw InvalidArgument("sample size must equal the rectangle grid size");
        break;
      case DesignConfig::Type::Uniform:
      case DesignConfig::Type::WeightedRegion:
        if (n != d.n) throw InvalidArgument("sample size must equal the design size");
        break;
      case DesignConfig::Type::Csv:
        break;
    }
  }
  if (d.type == DesignConfig::Type::Uniform &&
      (d.lower.empty() || d.lower.size() != d.upper.size()))
    throw InvalidArgument("uniform design needs lower and upper bounds of equal dimension");
  if (d.type == DesignConfig::Type::WeightedRegion) {
    if (d.density != "uniform" && d.density != "west_skew")
      throw InvalidArgument("unknown density '" + d.density + "'");
    if (!(d.skew_scale > 0.0)) throw InvalidArgument("skew scale must be positive");
  }
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
  ExperimentConfig cfg;
  if (name == "sim1") {
    cfg.design.type = DesignConfig::Type::NestedSquares;
    cfg.design.base = 200;
    cfg.design.layers = 5;
    cfg.latent = LatentSpec::sim1();
    cfg.kernel_sets = sets_from_specs({{"B(1)", "ball:1"}, {"R(1 2)", "ring:1:2"}, {"B(1)+R(1 2)", "ball:1,ring:1:2"}});
    cfg.sample_sizes = {200, 400, 800, 1600, 3200};
    cfg.replications = 2000;
  } else if (name == "sim2") {
    cfg.design.type = DesignConfig::Type::Diamond;
    cfg.design.radius = 30;
    cfg.latent = LatentSpec::sim2(1.0);
    cfg.kernel_sets = sets_from_specs({{"B(1)", "ball:1"},
                                       {"B(3)", "ball:3"},
                                       {"B(5)", "ball:5"},
                                       {"R(0 1)", "ring:0:1"},
                                       {"R(2 3)", "ring:2:3"},
                                       {"R(4 5)", "ring:4:5"},
                                       {"B(1)+B(3)+B(5)", "ball:1,ball:3,ball:5"},
                                       {"R(0 1)+R(2 3)+R(4 5)", "ring:0:1,ring:2:3,ring:4:5"}});
    cfg.sample_sizes = {1861};
    cfg.replications = 200;
  } else if (name == "sim3-uniform" || name == "sim3-skew") {
    cfg.design.type = DesignConfig::Type::WeightedRegion;
    cfg.design.n = 1000;
    cfg.design.polygon = standin_region();
    cfg.design.density = name == "sim3-skew" ? "west_skew" : "uniform";
    cfg.design.skew_scale = 100.0;
    cfg.latent = LatentSpec::sim3();
    std::vector<std::pair<std::string, std::string>> specs;
    for (const char* r : {"10", "20", "30", "100"}) specs.push_back({std::string("B(") + r + ")", std::string("ball:") + r});
    for (const char* r : {"10", "20", "30", "100"}) specs.push_back({std::string("R(") + r + ")", std::string("ring:") + r});
    for (const char* r : {"10", "20", "30", "100"}) specs.push_back({std::string("G(") + r + ")", std::string("gauss:") + r});
    specs.push_back({"B-joint", "ball:10,ball:20,ball:30,ball:100"});
    specs.push_back({"R-joint", "ring:10,ring:20,ring:30,ring:100"});
    specs.push_back({"G-joint", "gauss:10,gauss:20,gauss:30,gauss:100"});
    cfg.kernel_sets = sets_from_specs(specs);
    cfg.sample_sizes = {1000};
    cfg.replications = 2000;
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  cfg.outputs = name;
  return cfg;
}

std::string ExperimentConfig::to_json() const {
  json j;
  json d;
  d["type"] = design_name(design.type);
  switch (design.type) {
    case DesignConfig::Type::NestedSquares:
      d["base"] = design.base;
      d["layers"] = design.layers;
      break;
    case DesignConfig::Type::Diamond:
    case DesignConfig::Type::Rectangle:
      d["radius"] = design.radius;
      break;
    case DesignConfig::Type::Uniform:
      d["n"] = design.n;
      d["lower"] = design.lower;
      d["upper"] = design.upper;
      break;
    case DesignConfig::Type::WeightedRegion:
      d["n"] = design.n;
      d["polygon"] = design.polygon;
      d["density"] = design.density;
      d["skew_scale"] = design.skew_scale;
      break;
    case DesignConfig::Type::Csv:
      d["path"] = design.path;
      break;
  }
  j["design"] = d;

  json lat = json::array();
  for (const auto& c : latent.components) lat.push_back({{"kappa", c.kappa}, {"phi", c.phi}});
  j["latent"] = lat;

  switch (mixing.type) {
    case MixingConfig::Type::Identity:
      j["mixing"] = "identity";
      break;
    case MixingConfig::Type::Matrix: {
      json rows = json::array();
      for (Index r = 0; r < mixing.matrix.rows(); ++r) {
        std::vector<double> row(mixing.matrix.cols());
        for (Index c = 0; c < mixing.matrix.cols(); ++c) row[c] = mixing.matrix(r, c);
        rows.push_back(row);
      }
      j["mixing"] = {{"type", "matrix"}, {"matrix", rows}};
      break;
    }
    case MixingConfig::Type::Random:
      j["mixing"] = {{"type", "random"}, {"seed", mixing.seed}};
      break;
  }

  json sets = json::array();
  for (const auto& s : kernel_sets) sets.push_back({{"name", s.name}, {"kernels", kernel_list_spec(s.kernels)}});
  j["kernel_sets"] = sets;
  j["replications"] = replications;
  j["sample_sizes"] = sample_sizes;
  j["seed"] = seed;
  j["centered"] = centered;
  j["outputs"] = outputs;
  j["solver"] = {{"max_sweeps", solver.max_sweeps}, {"tol", solver.tol},
                 {"rotation_threshold", solver.rotation_threshold}};
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config is not valid JSON: ") + e.what(), 0);
  }
  ExperimentConfig cfg;
  try {
    if (j.contains("preset")) cfg = preset(j.at("preset").get<std::string>());
    if (j.contains("design")) {
      const json& d = j.at("design");
      DesignConfig dc;
      dc.type = design_type(d.at("type").get<std::string>());
      dc.base = d.value("base", dc.base);
      dc.layers = d.value("layers", dc.layers);
      dc.radius = d.value("radius", dc.radius);
      dc.n = d.value("n", dc.n);
      dc.lower = d.value("lower", dc.lower);
      dc.upper = d.value("upper", dc.upper);
      if (d.contains("polygon")) dc.polygon = d.at("polygon").get<std::vector<std::array<double, 2>>>();
      else if (dc.type == DesignConfig::Type::WeightedRegion) dc.polygon = standin_region();
      dc.density = d.value("density", dc.density);
      dc.skew_scale = d.value("skew_scale", dc.skew_scale);
      dc.path = d.value("path", dc.path);
      cfg.design = dc;
    }
    if (j.contains("latent")) {
      const json& l = j.at("latent");
      if (l.is_string()) {
        cfg.latent = LatentSpec::parse(l.get<std::string>());
      } else {
        LatentSpec spec;
        for (const auto& c : l) spec.components.push_back({c.at("kappa").get<double>(), c.at("phi").get<double>()});
        cfg.latent = spec;
      }
    }
    if (j.contains("mixing")) {
      const json& m = j.at("mixing");
      const std::string type = m.is_string() ? m.get<std::string>() : m.at("type").get<std::string>();
      if (type == "identity") {
        cfg.mixing = {};
      } else if (type == "matrix") {
        const auto rows = m.at("matrix").get<std::vector<std::vector<double>>>();
        Matrix mat(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (static_cast<Index>(rows[r].size()) != mat.cols()) throw InvalidArgument("ragged mixing matrix");
          for (std::size_t c = 0; c < rows[r].size(); ++c) mat(r, c) = rows[r][c];
        }
        cfg.mixing = {MixingConfig::Type::Matrix, mat, 0};
      } else if (type == "random") {
        cfg.mixing = {MixingConfig::Type::Random, Matrix(), m.value("seed", std::uint64_t{0})};
      } else {
        throw InvalidArgument("unknown mixing type '" + type + "'");
      }
    }
    if (j.contains("kernel_sets")) {
      cfg.kernel_sets.clear();
      for (const auto& s : j.at("kernel_sets")) {
        const json& k = s.at("kernels");
        std::vector<Kernel> ks;
        if (k.is_string()) {
          ks = parse_kernel_list(k.get<std::string>());
        } else {
          for (const auto& item : k) ks.push_back(Kernel::parse(item.get<std::string>()));
        }
        cfg.kernel_sets.push_back({s.at("name").get<std::string>(), ks});
      }
    }
    cfg.replications = j.value("replications", cfg.replications);
    if (j.contains("sample_sizes")) cfg.sample_sizes = j.at("sample_sizes").get<std::vector<Index>>();
    cfg.seed = j.value("seed", cfg.seed);
    cfg.centered = j.value("centered", cfg.centered);
    cfg.outputs = j.value("outputs", cfg.outputs);
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      cfg.solver.max_sweeps = s.value("max_sweeps", cfg.solver.max_sweeps);
      cfg.solver.tol = s.value("tol", cfg.solver.tol);
      cfg.solver.rotation_threshold = s.value("rotation_threshold", cfg.solver.rotation_threshold);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad config: ") + e.what(), 0);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LocationSet build_design(const ExperimentConfig& cfg) {
  const auto& d = cfg.design;
  Rng rng = substream(cfg.seed, {kDesignKey});
  switch (d.type) {
    case DesignConfig::Type::NestedSquares:
      return gen_nested_squares(d.base, d.layers, rng);
    case DesignConfig::Type::Diamond:
      return gen_diamond_grid(d.radius);
    case DesignConfig::Type::Rectangle:
      return gen_rectangle_grid(d.radius);
    case DesignConfig::Type::Uniform: {
      Vector lo = Eigen::Map<const Vector>(d.lower.data(), static_cast<Index>(d.lower.size()));
      Vector hi = Eigen::Map<const Vector>(d.upper.data(), static_cast<Index>(d.upper.size()));
      return gen_uniform_rect(d.n, lo, hi, rng);
    }
    case DesignConfig::Type::WeightedRegion: {
      const Polygon region(d.polygon);
      if (d.density == "uniform")
        return gen_weighted_region(d.n, region, [](double, double) { return 1.0; }, 1.0, rng);
      const double x0 = region.lower()[0];
      const double scale = d.skew_scale;
      return gen_weighted_region(d.n, region, [x0, scale](double x, double) { return std::exp(-(x - x0) / scale); },
                                 1.0, rng);
    }
    case DesignConfig::Type::Csv:
      return read_locations_csv(d.path);
  }
  throw InvalidArgument("unknown design");
}

LocationSet design_locations(const ExperimentConfig& cfg, const LocationSet& design, Index n) {
  if (cfg.design.type == DesignConfig::Type::NestedSquares) return design.head(n);
  if (n != design.size()) throw InvalidArgument("sample size must equal the design size");
  return design;
}

Matrix build_mixing(const ExperimentConfig& cfg) {
  const int p = cfg.latent.p();
  switch (cfg.mixing.type) {
    case MixingConfig::Type::Identity:
      return Matrix::Identity(p, p);
    case MixingConfig::Type::Matrix:
      return cfg.mixing.matrix;
    case MixingConfig::Type::Random: {
      Rng rng = substream(cfg.mixing.seed, {kMixingKey});
      return random_mixing(p, rng);
    }
  }
  throw InvalidArgument("unknown mixing");
}

std::optional<double> expected_nmdi(const LocationSet& locations, const LatentSpec& latent,
                                    const std::vector<Kernel>& kernels) {
  const AsymptoticWorkspace ws(locations, latent, Matrix::Identity(latent.p(), latent.p()));
  try {
    return limit_spectrum(ws, kernels).expected_nmdi;
  } catch (const EigGapTooSmall&) {
    return std::nullopt;
  }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const LocationSet design = build_design(cfg);
  const Matrix omega = build_mixing(cfg);
  const Index p = cfg.latent.p();

  // Every distinct kernel once, after the identity anchor.
  std::vector<Kernel> all{Kernel::identity()};
  std::vector<std::vector<std::size_t>> set_index;
  for (const auto& s : cfg.kernel_sets) {
    std::vector<std::size_t> idx;
    for (const auto& k : s.kernels) {
      auto it = std::find(all.begin(), all.end(), k);
      if (it == all.end()) it = all.insert(all.end(), k);
      idx.push_back(static_cast<std::size_t>(it - all.begin()));
    }
    set_index.push_back(std::move(idx));
  }

  const std::size_t nsets = cfg.kernel_sets.size();
  const std::size_t reps = static_cast<std::size_t>(cfg.replications);
  ExperimentReport report;
  report.values.resize(cfg.sample_sizes.size());

  for (std::size_t si = 0; si < cfg.sample_sizes.size(); ++si) {
    const Index n = cfg.sample_sizes[si];
    const LocationSet locs = design_locations(cfg, design, n);
    const LatentSimulator sim(locs, cfg.latent);
    const ScatterOperator op(locs, all);

    std::vector<std::vector<std::optional<double>>> by_rep(reps);
    std::vector<std::vector<std::string>> messages(reps);
    parallel_for(reps, [&](std::size_t r) {
      auto& out = by_rep[r];
      out.assign(nsets, std::nullopt);
      try {
        Rng rng = substream(cfg.seed, {kReplicationKey, si, r});
        const Matrix x = sim.draw_values(rng) * omega.transpose();
        const auto covs = op.apply(x, cfg.centered);
        for (std::size_t s = 0; s < nsets; ++s) {
          try {
            std::vector<Matrix> ms;
            for (std::size_t k : set_index[s]) ms.push_back(covs[k].matrix);
            const UnmixingResult u = unmix(covs[0].matrix, ms, cfg.solver);
            out[s] = nmdi(u.gamma, omega, n);
          } catch (const Error& e) {
            messages[r].push_back("n=" + std::to_string(n) + " replication " + std::to_string(r) + " set " +
                                  cfg.kernel_sets[s].name + ": " + e.what());
          }
        }
      } catch (const Error& e) {
        messages[r].push_back("n=" + std::to_string(n) + " replication " + std::to_string(r) + ": " + e.what());
      }
    });

    const AsymptoticWorkspace ws(locs, cfg.latent, Matrix::Identity(p, p));
    auto& table = report.values[si];
    table.assign(nsets, std::vector<std::optional<double>>(reps));
    for (std::size_t s = 0; s < nsets; ++s) {
      ReportRow row;
      row.n = n;
      row.kernel_set = cfg.kernel_sets[s].name;
      double sum = 0.0;
      for (std::size_t r = 0; r < reps; ++r) {
        table[s][r] = by_rep[r][s];
        if (by_rep[r][s]) {
          ++row.replications;
          sum += *by_rep[r][s];
        } else {
          ++row.failures;
        }
      }
      if (row.replications > 0) {
        row.mean_nmdi2 = sum / static_cast<double>(row.replications);
        double ss = 0.0;
        for (std::size_t r = 0; r < reps; ++r)
          if (by_rep[r][s]) ss += (*by_rep[r][s] - row.mean_nmdi2) * (*by_rep[r][s] - row.mean_nmdi2);
        row.se_nmdi2 = row.replications > 1
                           ? std::sqrt(ss / static_cast<double>(row.replications - 1) /
                                       static_cast<double>(row.replications))
                           : std::nan("");
      } else {
        row.mean_nmdi2 = std::nan("");
        row.se_nmdi2 = std::nan("");
      }
      std::vector<Kernel> ks;
      for (std::size_t k : set_index[s]) ks.push_back(all[k]);
      try {
        row.asymptotic = limit_spectrum(ws, ks).expected_nmdi;
      } catch (const EigGapTooSmall&) {
        row.asymptotic.reset();
      }
      report.rows.push_back(row);
    }
    for (const auto& m : messages) report.failure_messages.insert(report.failure_messages.end(), m.begin(), m.end());
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report_csv(const std::string& path, const ExperimentReport& report) {
  auto out = open_file(path);
  out << "n,kernel_set,replications,failures,mean_nmdi2,se_nmdi2,asymptotic_nmdi2\n";
  auto num = [](double v) { return std::isfinite(v) ? format_double(v) : std::string("NA"); };
  for (const auto& r : report.rows)
    out << r.n << ',' << r.kernel_set << ',' << r.replications << ',' << r.failures << ',' << num(r.mean_nmdi2)
        << ',' << num(r.se_nmdi2) << ',' << format_optional(r.asymptotic) << '\n';
}

void write_replications_csv(const std::string& path, const ExperimentConfig& cfg,
                            const ExperimentReport& report) {
  auto out = open_file(path);
  out << "n,kernel_set,replication,nmdi2\n";
  for (std::size_t si = 0; si < report.values.size(); ++si)
    for (std::size_t s = 0; s < report.values[si].size(); ++s)
      for (std::size_t r = 0; r < report.values[si][s].size(); ++r)
        out << cfg.sample_sizes[si] << ',' << cfg.kernel_sets[s].name << ',' << r << ','
            << format_optional(report.values[si][s][r]) << '\n';
}

std::vector<DensityPair> run_density_comparison(const ExperimentConfig& cfg, Index draws,
                                                const ExperimentReport* report) {
  if (draws < 1) throw InvalidArgument("need at least one limit draw");
  ExperimentReport own;
  if (!report) {
    own = run_experiment(cfg);
    report = &own;
  }
  const LocationSet design = build_design(cfg);
  const Index p = cfg.latent.p();
  std::vector<DensityPair> out;
  for (std::size_t si = 0; si < cfg.sample_sizes.size(); ++si) {
    const Index n = cfg.sample_sizes[si];
    const AsymptoticWorkspace ws(design_locations(cfg, design, n), cfg.latent, Matrix::Identity(p, p));
    for (std::size_t s = 0; s < cfg.kernel_sets.size(); ++s) {
      DensityPair pair;
      pair.n = n;
      pair.kernel_set = cfg.kernel_sets[s].name;
      std::vector<double> emp;
      for (const auto& v : report->values.at(si).at(s))
        if (v) emp.push_back(*v);
      pair.empirical = Eigen::Map<Vector>(emp.data(), static_cast<Index>(emp.size()));
      try {
        const LimitSpectrum spec = limit_spectrum(ws, cfg.kernel_sets[s].kernels);
        Rng rng = substream(cfg.seed, {kLimitKey, si, s});
        pair.limit = sample_limit_nmdi(spec, draws, rng);
      } catch (const EigGapTooSmall&) {
        pair.limit.resize(0);
      }
      out.push_back(std::move(pair));
    }
  }
  return out;
}

void write_density_csv(const std::string& path, const DensityPair& pair) {
  auto out = open_file(path);
  out << "empirical,limit\n";
  const Index rows = std::max(pair.empirical.size(), pair.limit.size());
  for (Index i = 0; i < rows; ++i) {
    if (i < pair.empirical.size()) out << format_double(pair.empirical(i));
    out << ',';
    if (i < pair.limit.size()) out << format_double(pair.limit(i));
    out << '\n';
  }
}

double ks_statistic(const Vector& a, const Vector& b) {
  if (a.size() == 0 || b.size() == 0) throw InvalidArgument("samples must be nonempty");
  std::vector<double> x(a.data(), a.data() + a.size()), y(b.data(), b.data() + b.size());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
  }
  return d;
}

std::string safe_name(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out.empty() ? "set" : out;
}

void write_fit(const std::string& prefix, const SbssFit& fit) {
  const Index p = fit.unmixing.gamma.rows();
  write_csv_file(prefix + ".gamma.csv", numbered_header("c", p), fit.unmixing.gamma);
  Matrix lam(static_cast<Index>(fit.unmixing.lambdas.size()), p);
  for (std::size_t l = 0; l < fit.unmixing.lambdas.size(); ++l) lam.row(l) = fit.unmixing.lambdas[l].transpose();
  write_csv_file(prefix + ".lambda.csv", numbered_header("c", p), lam);
  write_csv_file(prefix + ".scores.csv", numbered_header("z", p), fit.scores);
}

AnalysisResult run_data_analysis(const AnalysisConfig& cfg) {
  if (cfg.kernel_sets.empty()) throw InvalidArgument("no kernel sets given");
  const FieldSample sample = read_field_sample_csv(cfg.data_csv);
  AnalysisResult out;
  std::optional<CsvTable> reference;
  if (cfg.reference_csv) {
    reference = read_csv_file(*cfg.reference_csv);
    // Coordinate columns (x-prefixed, as in sample files) are not scores.
    Index coords = 0;
    while (coords < static_cast<Index>(reference->header.size()) && !reference->header[coords].empty() &&
           reference->header[coords][0] == 'x')
      ++coords;
    if (coords == static_cast<Index>(reference->header.size()))
      throw InvalidArgument("reference file has no score columns");
    if (coords > 0) {
      reference->header.erase(reference->header.begin(), reference->header.begin() + coords);
      reference->data = Matrix(reference->data.rightCols(reference->data.cols() - coords));
    }
    if (reference->data.rows() != sample.size())
      throw InvalidArgument("reference scores must have one row per observation");
    out.reference_header = reference->header;
    out.correlations = Matrix(static_cast<Index>(cfg.kernel_sets.size()), reference->data.cols());
  }
  for (std::size_t s = 0; s < cfg.kernel_sets.size(); ++s) {
    out.names.push_back(cfg.kernel_sets[s].name);
    out.fits.push_back(fit(sample, cfg.kernel_sets[s].kernels, cfg.centered, cfg.solver));
    if (reference) {
      const CorrelationMatch m = max_abs_correlations(out.fits.back().scores, reference->data);
      out.correlations->row(static_cast<Index>(s)) = m.values.transpose();
      out.matches.push_back(m.match);
    }
  }
  return out;
}

namespace {

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + '"';
}

}  // namespace

void write_analysis(const AnalysisConfig& cfg, const AnalysisResult& result) {
  std::filesystem::create_directories(cfg.outputs);
  for (std::size_t s = 0; s < result.fits.size(); ++s)
    write_fit((std::filesystem::path(cfg.outputs) / safe_name(result.names[s])).string(), result.fits[s]);
  if (result.correlations) {
    auto out = open_file((std::filesystem::path(cfg.outputs) / "correlations.csv").string());
    out << "kernel_set";
    for (const auto& h : result.reference_header) out << ',' << h;
    out << '\n';
    for (std::size_t s = 0; s < result.names.size(); ++s) {
      out << csv_field(result.names[s]);
      for (Index c = 0; c < result.correlations->cols(); ++c)
        out << ',' << format_double((*result.correlations)(static_cast<Index>(s), c));
      out << '\n';
    }
  }
}

}  // namespace sbss
