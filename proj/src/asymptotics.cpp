#include "sbss/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sbss/diagonalizer.hpp"
#include "sbss/error.hpp"
#include "sbss/parallel.hpp"

namespace sbss {

namespace {

// tau(f, g)_{m m'} = tr(K_m F K_m' G) for every ordered kernel pair.
struct TraceTables {
  std::size_t kernels = 0;
  std::vector<Matrix> tau;  // index f * kernels + g

  const Matrix& at(std::size_t f, std::size_t g) const { return tau[f * kernels + g]; }
};

TraceTables trace_tables(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels) {
  const std::size_t nk = kernels.size();
  const int p = ws.p();
  std::vector<SparseWeights> weights(nk);
  for (std::size_t f = 0; f < nk; ++f) weights[f] = sparse_weights(kernels[f], ws.distances());

  std::vector<Matrix> products(nk * p);
  parallel_for(products.size(), [&](std::size_t idx) {
    const std::size_t f = idx / p;
    const int m = static_cast<int>(idx % p);
    products[idx] = ws.correlation(m) * weights[f];
  });

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t f = 0; f < nk; ++f)
    for (std::size_t g = f; g < nk; ++g) pairs.emplace_back(f, g);

  TraceTables out;
  out.kernels = nk;
  out.tau.resize(nk * nk);
  parallel_for(pairs.size(), [&](std::size_t k) {
    const auto [f, g] = pairs[k];
    Matrix t(p, p);
    for (int m = 0; m < p; ++m)
      for (int mm = 0; mm < p; ++mm)
        t(m, mm) = products[f * p + m].cwiseProduct(products[g * p + mm].transpose()).sum();
    out.tau[f * nk + g] = t;
  });
  for (const auto& [f, g] : pairs)
    if (f != g) out.tau[g * nk + f] = out.tau[f * nk + g].transpose();
  return out;
}

// Sigma block from traces when R = sum_m K_m kron (omega_m omega_m^T).
Matrix sigma_from_traces(const Matrix& tau, const Matrix& omega, Index n) {
  const Index p = omega.rows();
  Matrix out(p * p, p * p);
  for (Index s = 0; s < p; ++s)
    for (Index t = 0; t < p; ++t)
      for (Index u = 0; u < p; ++u)
        for (Index v = 0; v < p; ++v) {
          const Index ab[2][2] = {{s, t}, {t, s}};
          const Index cd[2][2] = {{u, v}, {v, u}};
          double total = 0.0;
          for (Index m = 0; m < p; ++m)
            for (Index mm = 0; mm < p; ++mm) {
              double w = 0.0;
              for (const auto& x : ab)
                for (const auto& y : cd)
                  w += omega(y[1], m) * omega(x[0], m) * omega(x[1], mm) * omega(y[0], mm);
              total += tau(m, mm) * w;
            }
          out(s * p + t, u * p + v) = 2.0 / static_cast<double>(n) * 0.25 * total;
        }
  return out;
}

Matrix assemble_blocks(const TraceTables& tables, const Matrix& omega, Index n) {
  const std::size_t nk = tables.kernels;
  const Index q = omega.rows() * omega.rows();
  Matrix out(q * static_cast<Index>(nk), q * static_cast<Index>(nk));
  for (std::size_t f = 0; f < nk; ++f)
    for (std::size_t g = f; g < nk; ++g) {
      Matrix block = sigma_from_traces(tables.at(f, g), omega, n);
      if (f == g) block = 0.5 * (block + block.transpose()).eval();
      out.block(f * q, g * q, q, q) = block;
      if (f != g) out.block(g * q, f * q, q, q) = block.transpose();
    }
  return out;
}

Matrix dense_blocks(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels, bool use_r_z) {
  const Index n = ws.n();
  const Index p = ws.p();
  const Index q = p * p;
  const Index np = n * p;
  const Matrix r = use_r_z ? ws.r_z() : ws.r();
  const std::size_t nk = kernels.size();

  // R T(f)_st for every kernel and position.
  std::vector<Matrix> rt(nk * q);
  for (std::size_t f = 0; f < nk; ++f) {
    const Matrix w = weight_matrix(kernels[f], ws.distances());
    for (Index s = 0; s < p; ++s)
      for (Index t = 0; t < p; ++t) {
        Matrix e = Matrix::Zero(p, p);
        e(s, t) += 0.5;
        e(t, s) += 0.5;
        Matrix tm(np, np);
        for (Index i = 0; i < n; ++i)
          for (Index j = 0; j < n; ++j) tm.block(i * p, j * p, p, p) = w(i, j) * e;
        rt[f * q + s * p + t] = r * tm;
      }
  }

  Matrix out(q * static_cast<Index>(nk), q * static_cast<Index>(nk));
  for (std::size_t f = 0; f < nk; ++f)
    for (std::size_t g = 0; g < nk; ++g)
      for (Index a = 0; a < q; ++a)
        for (Index b = 0; b < q; ++b)
          out(f * q + a, g * q + b) =
              2.0 / static_cast<double>(n) * (rt[f * q + a] * rt[g * q + b]).trace();
  return out;
}

TraceTables permuted(const TraceTables& tables, const std::vector<int>& order) {
  TraceTables out = tables;
  const int p = static_cast<int>(order.size());
  for (auto& t : out.tau) {
    Matrix src = t;
    for (int r = 0; r < p; ++r)
      for (int rr = 0; rr < p; ++rr) t(r, rr) = src(order[r], order[rr]);
  }
  return out;
}

// M_{Omega^-1}: vect(Delta Omega^-1) = M vect(Delta) for row vectorization.
Matrix right_multiplier(const Matrix& omega_inv) {
  const Index p = omega_inv.rows();
  Matrix m = Matrix::Zero(p * p, p * p);
  for (Index i = 0; i < p; ++i)
    for (Index ja = 0; ja < p; ++ja)
      for (Index jb = 0; jb < p; ++jb) m(i * p + ja, i * p + jb) = omega_inv(jb, ja);
  return m;
}

Matrix symmetric_part(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void check_kernel_list(const std::vector<Kernel>& kernels) {
  if (kernels.empty()) throw InvalidArgument("kernel list is empty");
  for (const auto& k : kernels)
    if (k.is_identity()) throw InvalidArgument("the identity kernel is implicit and cannot be listed");
}

Matrix fk_core(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels) {
  check_kernel_list(kernels);
  const Index p = ws.p();
  const Index q = p * p;
  const Index k = static_cast<Index>(kernels.size());

  std::vector<Matrix> ds;
  for (const auto& f : kernels) ds.push_back(ws.population_diagonal(f).asDiagonal());
  const auto ident = identifiability_check(ds, kMinEigGap);
  if (!ident.ok)
    throw EigGapTooSmall("population diagonals of components " + std::to_string(ident.offending->first) +
                         " and " + std::to_string(ident.offending->second) +
                         " are not separated by any kernel");

  Matrix g = Matrix::Zero(q, (k + 1) * q);
  for (Index a = 0; a < q; ++a) {
    const Index i = a / p;
    const Index j = a % p;
    if (i == j) {
      g(a, a) = -0.5;
      continue;
    }
    double a0 = 0.0, b = 0.0;
    for (Index l = 0; l < k; ++l) {
      const double diff = ds[l](i, i) - ds[l](j, j);
      a0 -= diff * ds[l](i, i);
      b += diff * diff;
    }
    g(a, a) = a0 / b;
    for (Index l = 0; l < k; ++l) g(a, (l + 1) * q + a) = (ds[l](i, i) - ds[l](j, j)) / b;
  }

  std::vector<Kernel> all{Kernel::identity()};
  all.insert(all.end(), kernels.begin(), kernels.end());
  const Matrix v = assemble_blocks(trace_tables(ws, all), Matrix::Identity(p, p), ws.n());
  return symmetric_part(g * v * g.transpose());
}

}  // namespace

AsymptoticWorkspace::AsymptoticWorkspace(LocationSet locations, LatentSpec latent, Matrix omega)
    : locations_(std::move(locations)), latent_(std::move(latent)), omega_(std::move(omega)) {
  latent_.validate();
  if (omega_.rows() != latent_.p() || omega_.cols() != latent_.p())
    throw InvalidArgument("mixing matrix does not match the number of latent components");
  require_invertible(omega_);
  distances_ = distance_matrix(locations_);
  correlations_.resize(static_cast<std::size_t>(latent_.p()));
  parallel_for(correlations_.size(), [&](std::size_t m) {
    correlations_[m] = correlation_matrix(distances_, latent_.components[m]);
  });
}

Matrix AsymptoticWorkspace::r_z() const {
  const Index n = this->n();
  const Index p = this->p();
  Matrix out = Matrix::Zero(n * p, n * p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index m = 0; m < p; ++m) out(i * p + m, j * p + m) = correlations_[m](i, j);
  return out;
}

Matrix AsymptoticWorkspace::r() const {
  const Index n = this->n();
  const Index p = this->p();
  Matrix big = Matrix::Zero(n * p, n * p);
  for (Index i = 0; i < n; ++i) big.block(i * p, i * p, p, p) = omega_;
  return symmetric_part(big * r_z() * big.transpose());
}

Vector AsymptoticWorkspace::population_diagonal(const Kernel& f) const {
  const SparseWeights w = sparse_weights(f, distances_);
  Vector c(p());
  for (int m = 0; m < p(); ++m) {
    double total = 0.0;
    for (Index i = 0; i < w.outerSize(); ++i)
      for (SparseWeights::InnerIterator it(w, i); it; ++it) total += it.value() * correlations_[m](i, it.col());
    c(m) = total / static_cast<double>(n());
  }
  return c;
}

Matrix sigma_blocks(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels, bool use_r_z,
                    TraceMethod method) {
  if (kernels.empty()) throw InvalidArgument("kernel list is empty");
  if (method == TraceMethod::Dense) return dense_blocks(ws, kernels, use_r_z);
  const Matrix omega = use_r_z ? Matrix(Matrix::Identity(ws.p(), ws.p())) : ws.omega();
  return assemble_blocks(trace_tables(ws, kernels), omega, ws.n());
}

Matrix sigma_pair(const AsymptoticWorkspace& ws, const Kernel& f, const Kernel& g, bool use_r_z,
                  TraceMethod method) {
  const Index q = static_cast<Index>(ws.p()) * ws.p();
  if (f == g) return sigma_blocks(ws, {f}, use_r_z, method);
  return sigma_blocks(ws, {f, g}, use_r_z, method).block(0, q, q, q);
}

Matrix v_matrix(const AsymptoticWorkspace& ws, const Kernel& f, const Kernel& g, TraceMethod method) {
  return sigma_blocks(ws, {f, g}, false, method);
}

Matrix v_matrix(const AsymptoticWorkspace& ws, const Kernel& f, TraceMethod method) {
  return v_matrix(ws, f, Kernel::identity(), method);
}

F1Result f1_matrix(const AsymptoticWorkspace& ws, const Kernel& f) {
  check_kernel_list({f});
  const Index p = ws.p();
  const Index q = p * p;
  const Vector raw = ws.population_diagonal(f);

  F1Result out;
  out.order.resize(static_cast<std::size_t>(p));
  std::iota(out.order.begin(), out.order.end(), 0);
  std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) { return raw(a) > raw(b); });
  out.lambdas.resize(p);
  for (Index r = 0; r < p; ++r) out.lambdas(r) = raw(out.order[r]);
  for (Index r = 1; r < p; ++r)
    if (out.lambdas(r - 1) - out.lambdas(r) < kMinEigGap)
      throw EigGapTooSmall("population eigenvalues " + std::to_string(r - 1) + " and " + std::to_string(r) +
                           " are too close");

  const Vector& lam = out.lambdas;
  Matrix g = Matrix::Zero(q + p, 2 * q);
  for (Index a = 0; a < q; ++a) {
    const Index i = a / p;
    const Index j = a % p;
    if (i == j) {
      g(a, a) = -0.5;
    } else {
      g(a, a) = -lam(i) / (lam(i) - lam(j));
      g(a, q + a) = 1.0 / (lam(i) - lam(j));
    }
  }
  for (Index i = 0; i < p; ++i) {
    g(q + i, i * (p + 1)) = -lam(i);
    g(q + i, q + i * (p + 1)) = 1.0;
  }

  const TraceTables tables = permuted(trace_tables(ws, {Kernel::identity(), f}), out.order);
  const Matrix v = assemble_blocks(tables, Matrix::Identity(p, p), ws.n());

  const Matrix omega_inv = ws.omega().inverse();
  Matrix sorted_inv(p, p);
  for (Index r = 0; r < p; ++r) sorted_inv.row(r) = omega_inv.row(out.order[r]);
  Matrix mbar = Matrix::Zero(q + p, q + p);
  mbar.topLeftCorner(q, q) = right_multiplier(sorted_inv);
  mbar.bottomRightCorner(p, p).setIdentity();

  const Matrix mg = mbar * g;
  out.f1 = symmetric_part(mg * v * mg.transpose());
  return out;
}

Matrix fk_matrix(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels) {
  const Matrix m = right_multiplier(ws.omega().inverse());
  return symmetric_part(m * fk_core(ws, kernels) * m.transpose());
}

Matrix fk_matrix_unmixed(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels) {
  return fk_core(ws, kernels);
}

LimitSpectrum mdi_limit_spectrum(const Matrix& sigma) {
  const Index q = sigma.rows();
  const Index p = static_cast<Index>(std::llround(std::sqrt(static_cast<double>(q))));
  if (sigma.cols() != q || p * p != q) throw InvalidArgument("limit spectrum needs a p^2 x p^2 matrix");
  if (!sigma.allFinite()) throw InvalidArgument("limit spectrum input is not finite");
  const double scale = std::max(sigma.cwiseAbs().maxCoeff(), 1e-300);
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidArgument("limit spectrum input is not symmetric");

  LimitSpectrum out;
  std::vector<Index> off;
  for (Index a = 0; a < q; ++a)
    if (a / p != a % p) off.push_back(a);
  const Index m = static_cast<Index>(off.size());
  out.deltas = Vector::Zero(m);
  if (m == 0) return out;

  Matrix sub(m, m);
  for (Index a = 0; a < m; ++a)
    for (Index b = 0; b < m; ++b) sub(a, b) = 0.5 * (sigma(off[a], off[b]) + sigma(off[b], off[a]));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sub, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  Vector ev = eig.eigenvalues().reverse();
  const double top = std::max(ev(0), 0.0);
  for (Index a = 0; a < m; ++a)
    if (!(ev(a) >= 1e-10 * top) || ev(a) <= 0.0) ev(a) = 0.0;
  std::sort(ev.data(), ev.data() + m, std::greater<double>());
  out.deltas = ev;
  out.expected_nmdi = ev.sum();
  return out;
}

LimitSpectrum limit_spectrum(const AsymptoticWorkspace& ws, const std::vector<Kernel>& kernels) {
  return mdi_limit_spectrum(fk_matrix_unmixed(ws, kernels));
}

Vector sample_limit_nmdi(const LimitSpectrum& spectrum, Index draws, Rng& rng) {
  if (draws < 1) throw InvalidArgument("need at least one draw");
  std::normal_distribution<double> normal;
  Vector out(draws);
  for (Index d = 0; d < draws; ++d) {
    double total = 0.0;
    for (Index i = 0; i < spectrum.deltas.size(); ++i) {
      const double z = normal(rng);
      total += spectrum.deltas(i) * z * z;
    }
    out(d) = total;
  }
  return out;
}

KernelSelection select_kernels(const AsymptoticWorkspace& ws,
                               const std::vector<std::vector<Kernel>>& candidates) {
  if (candidates.empty()) throw InvalidArgument("no candidate kernel sets");
  KernelSelection out;
  std::optional<double> best;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    try {
      LimitSpectrum s = limit_spectrum(ws, candidates[c]);
      if (!best || s.expected_nmdi < *best) {
        best = s.expected_nmdi;
        out.best = c;
      }
      out.spectra.emplace_back(std::move(s));
    } catch (const EigGapTooSmall&) {
      out.spectra.emplace_back(std::nullopt);
    }
  }
  if (!best) throw EigGapTooSmall("no candidate kernel set is identifiable");
  return out;
}

}  // namespace sbss
