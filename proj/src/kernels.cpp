#include "sbss/kernels.hpp"

#include <charconv>
#include <cmath>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "sbss/error.hpp"
#include "sbss/io.hpp"

namespace sbss {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

bool valid_radius(double r) { return std::isfinite(r) && r >= 0.0; }

double parse_number(std::string_view text, std::string_view spec) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size())
    throw InvalidArgument("bad kernel spec '" + std::string(spec) + "'");
  return v;
}

}  // namespace

Kernel::Kernel(Variant v) : v_(v) {
  std::visit(Overloaded{
                 [](const kernel::Identity&) {},
                 [](const kernel::Ball& b) {
                   if (!valid_radius(b.radius)) throw InvalidArgument("ball radius must be >= 0");
                 },
                 [](const kernel::Ring& r) {
                   if (!valid_radius(r.inner) || !valid_radius(r.outer) || r.inner > r.outer)
                     throw InvalidArgument("ring radii must satisfy 0 <= h1 <= h2");
                 },
                 [](const kernel::Gauss& g) {
                   if (!(g.radius > 0.0) || !std::isfinite(g.radius))
                     throw InvalidArgument("gaussian kernel radius must be > 0");
                 },
             },
             v_);
}

Kernel Kernel::parse(std::string_view spec) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto colon = spec.find(':', start);
    parts.push_back(spec.substr(start, colon - start));
    if (colon == std::string_view::npos) break;
    start = colon + 1;
  }
  const auto& name = parts.front();
  if ((name == "id" || name == "identity") && parts.size() == 1) return identity();
  if (name == "ball" && parts.size() == 2) return ball(parse_number(parts[1], spec));
  if (name == "ring" && parts.size() == 3)
    return ring(parse_number(parts[1], spec), parse_number(parts[2], spec));
  if (name == "ring" && parts.size() == 2) {
    const double outer = parse_number(parts[1], spec);
    return ring(std::max(0.0, outer - 10.0), outer);
  }
  if (name == "gauss" && parts.size() == 2) return gauss(parse_number(parts[1], spec));
  throw InvalidArgument("unknown kernel spec '" + std::string(spec) + "'");
}

std::vector<Kernel> parse_kernel_list(std::string_view specs) {
  std::vector<Kernel> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = specs.find(',', start);
    std::string_view item = specs.substr(start, comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw InvalidArgument("empty entry in kernel list '" + std::string(specs) + "'");
    out.push_back(Kernel::parse(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string kernel_list_spec(const std::vector<Kernel>& kernels) {
  std::string out;
  for (const auto& k : kernels) {
    if (!out.empty()) out += ',';
    out += k.spec();
  }
  return out;
}

double normal_quantile_095() {
  static const double q = boost::math::quantile(boost::math::normal_distribution<double>(), 0.95);
  return q;
}

double Kernel::operator()(double distance) const {
  return std::visit(Overloaded{
                        [&](const kernel::Identity&) { return distance == 0.0 ? 1.0 : 0.0; },
                        [&](const kernel::Ball& b) { return distance <= b.radius ? 1.0 : 0.0; },
                        [&](const kernel::Ring& r) {
                          return r.inner <= distance && distance <= r.outer ? 1.0 : 0.0;
                        },
                        [&](const kernel::Gauss& g) {
                          const double z = normal_quantile_095() * distance / g.radius;
                          return std::exp(-0.5 * z * z);
                        },
                    },
                    v_);
}

std::string Kernel::spec() const {
  return std::visit(Overloaded{
                        [](const kernel::Identity&) { return std::string("id"); },
                        [](const kernel::Ball& b) { return "ball:" + format_double(b.radius); },
                        [](const kernel::Ring& r) {
                          return "ring:" + format_double(r.inner) + ":" + format_double(r.outer);
                        },
                        [](const kernel::Gauss& g) { return "gauss:" + format_double(g.radius); },
                    },
                    v_);
}

double eval(const Kernel& k, double distance) {
  if (!(distance >= 0.0)) throw InvalidArgument("kernel distance must be nonnegative");
  return k(distance);
}

Matrix weight_matrix(const Kernel& k, const Matrix& distances) {
  const Index n = distances.rows();
  // f0 weights the diagonal of the double sum only, even for repeated points.
  if (k.is_identity()) return Matrix::Identity(n, n);
  Matrix w(n, n);
  for (Index j = 0; j < n; ++j) {
    w(j, j) = k(distances(j, j));
    for (Index i = j + 1; i < n; ++i) {
      const double v = k(distances(i, j));
      w(i, j) = v;
      w(j, i) = v;
    }
  }
  return w;
}

Matrix weight_matrix(const Kernel& k, const LocationSet& locations) {
  return weight_matrix(k, distance_matrix(locations));
}

SparseWeights sparse_weights(const Kernel& k, const Matrix& distances) {
  const Index n = distances.rows();
  std::vector<Eigen::Triplet<double>> entries;
  if (k.is_identity()) {
    for (Index i = 0; i < n; ++i) entries.emplace_back(i, i, 1.0);
  } else {
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        // distances is symmetric, read it column-wise.
        const double v = k(distances(j, i));
        if (v != 0.0) entries.emplace_back(i, j, v);
      }
  }
  SparseWeights w(n, n);
  w.setFromTriplets(entries.begin(), entries.end());
  w.makeCompressed();
  return w;
}

}  // namespace sbss
