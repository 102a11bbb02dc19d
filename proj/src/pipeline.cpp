#include "sbss/pipeline.hpp"

#include "sbss/error.hpp"

namespace sbss {

namespace {

void check_kernels(const std::vector<Kernel>& kernels) {
  if (kernels.empty()) throw InvalidArgument("at least one kernel is required");
  for (const auto& k : kernels)
    if (k.is_identity()) throw InvalidArgument("the identity kernel is the implicit anchor and cannot be listed");
}

}  // namespace

UnmixingResult unmix(const Matrix& m0, const std::vector<Matrix>& ms, const JointDiagConfig& cfg) {
  if (ms.empty()) throw InvalidArgument("at least one kernel is required");
  return ms.size() == 1 ? pair_diagonalize(m0, ms[0]) : joint_diagonalize(m0, ms, cfg);
}

SbssFit fit(const ScatterOperator& op, const Matrix& values, bool centered,
            const JointDiagConfig& cfg) {
  const auto& all = op.kernels();
  if (all.empty() || !all.front().is_identity())
    throw InvalidArgument("scatter operator must start with the identity kernel");
  std::vector<Kernel> kernels(all.begin() + 1, all.end());
  check_kernels(kernels);
  const Index n = values.rows();
  const Index p = values.cols();
  if (n <= p) throw InvalidArgument("need more observations than variables");

  const auto covs = op.apply(values, centered);
  std::vector<Matrix> ms;
  for (std::size_t l = 1; l < covs.size(); ++l) ms.push_back(covs[l].matrix);

  SbssFit out;
  out.unmixing = unmix(covs[0].matrix, ms, cfg);
  out.kernels = std::move(kernels);
  out.centered = centered;
  out.column_means = centered ? Vector(values.colwise().mean().transpose()) : Vector::Zero(p);
  out.scores = transform(out, values);
  return out;
}

SbssFit fit(const FieldSample& sample, const std::vector<Kernel>& kernels, bool centered,
            const JointDiagConfig& cfg) {
  check_kernels(kernels);
  std::vector<Kernel> all{Kernel::identity()};
  all.insert(all.end(), kernels.begin(), kernels.end());
  return fit(ScatterOperator(sample.locations(), std::move(all)), sample.values(), centered, cfg);
}

Matrix transform(const SbssFit& fit, const Matrix& values) {
  if (values.cols() != fit.unmixing.gamma.cols())
    throw InvalidArgument("sample has the wrong number of variables");
  return (values.rowwise() - fit.column_means.transpose()) * fit.unmixing.gamma.transpose();
}

Matrix transform(const SbssFit& fit, const FieldSample& sample) { return transform(fit, sample.values()); }

}  // namespace sbss
