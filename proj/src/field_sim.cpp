#include "sbss/field_sim.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sbss/error.hpp"
#include "sbss/io.hpp"
#include "sbss/parallel.hpp"

namespace sbss {

void MaternParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa) || !(phi > 0.0) || !std::isfinite(phi))
    throw InvalidArgument("Matern parameters must be finite and positive");
}

double matern(double h, const MaternParams& params) {
  if (h == 0.0) return 1.0;
  if (!(h > 0.0)) throw InvalidArgument("Matern lag must be nonnegative");
  const double x = h / params.phi;
  const double k = std::cyl_bessel_k(params.kappa, x);
  if (k == 0.0) return 0.0;
  // Log domain: x^kappa and K_kappa(x) over/underflow separately for large kappa.
  const double log_rho = (1.0 - params.kappa) * std::log(2.0) - std::lgamma(params.kappa) +
                         params.kappa * std::log(x) + std::log(k);
  return std::min(1.0, std::exp(log_rho));
}

void LatentSpec::validate() const {
  if (components.empty()) throw InvalidArgument("latent spec needs at least one component");
  for (const auto& c : components) c.validate();
}

LatentSpec LatentSpec::sim1() { return {{{6.0, 1.2}, {1.0, 1.5}, {0.25, 1.0}}}; }

LatentSpec LatentSpec::sim2(double phi) { return {{{2.0, phi}, {1.0, phi}, {0.25, phi}}}; }

LatentSpec LatentSpec::sim3() { return {{{6.0, 20.0}, {1.0, 20.0}, {0.25, 20.0}}}; }

LatentSpec LatentSpec::parse(std::string_view text) {
  if (text == "sim1") return sim1();
  if (text == "sim2") return sim2();
  if (text == "sim3") return sim3();
  if (text.starts_with("sim2:")) return sim2(std::stod(std::string(text.substr(5))));

  LatentSpec spec;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item(text.substr(start, comma - start));
    double kappa = 0.0, phi = 0.0;
    char tail = 0;
    if (std::sscanf(item.c_str(), "matern:%lf:%lf%c", &kappa, &phi, &tail) != 2)
      throw InvalidArgument("bad latent component '" + item + "'");
    spec.components.push_back({kappa, phi});
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  spec.validate();
  return spec;
}

std::string LatentSpec::spec() const {
  std::string out;
  for (const auto& c : components) {
    if (!out.empty()) out += ',';
    out += "matern:" + format_double(c.kappa) + ":" + format_double(c.phi);
  }
  return out;
}

Matrix correlation_matrix(const Matrix& distances, const MaternParams& params) {
  const Index n = distances.rows();
  Matrix c(n, n);
  for (Index j = 0; j < n; ++j) {
    c(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      const double v = matern(distances(i, j), params);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

LatentSimulator::LatentSimulator(LocationSet locations, LatentSpec spec)
    : locations_(std::move(locations)), spec_(std::move(spec)) {
  spec_.validate();
  const Matrix dist = distance_matrix(locations_);
  const auto p = static_cast<std::size_t>(spec_.p());
  factors_.resize(p);
  jitter_.assign(p, 0.0);

  parallel_for(p, [&](std::size_t k) {
    const Matrix corr = correlation_matrix(dist, spec_.components[k]);
    double jitter = 0.0;
    for (int attempt = 0;; ++attempt) {
      Matrix a = corr;
      a.diagonal().array() += jitter;
      Eigen::LLT<Matrix> llt(a);
      if (llt.info() == Eigen::Success) {
        factors_[k] = llt.matrixL();
        jitter_[k] = jitter;
        return;
      }
      if (jitter >= kMaxJitter)
        throw NotPositiveDefinite("latent component " + std::to_string(k) +
                                      ": Cholesky failed with maximal jitter",
                                  static_cast<int>(k));
      jitter = std::min(kMaxJitter, 1e-12 * std::ldexp(1.0, attempt));
    }
  });
}

Matrix LatentSimulator::draw_values(Rng& rng) const {
  const Index n = locations_.size();
  const int p = spec_.p();
  std::vector<std::uint64_t> seeds(p);
  for (auto& s : seeds) s = rng();

  Matrix z(n, p);
  for (int k = 0; k < p; ++k) {
    Rng sub(seeds[k]);
    std::normal_distribution<double> normal;
    Vector eps(n);
    for (Index i = 0; i < n; ++i) eps(i) = normal(sub);
    z.col(k).noalias() = factors_[k].triangularView<Eigen::Lower>() * eps;
  }
  return z;
}

FieldSample LatentSimulator::draw(Rng& rng) const { return FieldSample(locations_, draw_values(rng)); }

FieldSample simulate_latent(const LocationSet& locations, const LatentSpec& spec, Rng& rng) {
  return LatentSimulator(locations, spec).draw(rng);
}

void require_invertible(const Matrix& omega) {
  if (omega.rows() != omega.cols() || omega.rows() == 0)
    throw InvalidArgument("mixing matrix must be square and nonempty");
  if (!omega.allFinite()) throw InvalidArgument("mixing matrix must be finite");
  Eigen::JacobiSVD<Matrix> svd(omega);
  const Vector& sv = svd.singularValues();
  if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) throw SingularMatrix("mixing matrix is singular");
}

FieldSample mix(const FieldSample& latent, const Matrix& omega) {
  require_invertible(omega);
  if (omega.cols() != latent.variables())
    throw InvalidArgument("mixing matrix does not match the number of latent fields");
  return FieldSample(latent.locations(), latent.values() * omega.transpose());
}

Matrix random_mixing(int p, Rng& rng, double max_condition) {
  std::normal_distribution<double> normal;
  while (true) {
    Matrix omega(p, p);
    for (Index j = 0; j < p; ++j)
      for (Index i = 0; i < p; ++i) omega(i, j) = normal(rng);
    Eigen::JacobiSVD<Matrix> svd(omega);
    const Vector& sv = svd.singularValues();
    if (sv(p - 1) > 0.0 && sv(0) / sv(p - 1) < max_condition) return omega;
  }
}

}  // namespace sbss
