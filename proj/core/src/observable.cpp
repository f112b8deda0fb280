#include "hcw/observable.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hcw/error.hpp"

namespace hcw {

double Gaussian::value(std::span<const double> z) const {
  double r2 = 0.0;
  for (Eigen::Index i = 0; i < center.size(); ++i) {
    const double dz = z[static_cast<std::size_t>(i)] - center(i);
    r2 += dz * dz;
  }
  return amplitude * std::exp(-r2 / (2.0 * width * width));
}

Eigen::VectorXd Gaussian::gradient(std::span<const double> z) const {
  const double f = value(z);
  Eigen::VectorXd g(center.size());
  for (Eigen::Index i = 0; i < center.size(); ++i)
    g(i) = -f * (z[static_cast<std::size_t>(i)] - center(i)) / (width * width);
  return g;
}

Eigen::MatrixXd Gaussian::hessian(std::span<const double> z) const {
  const double f = value(z);
  const double w2 = width * width;
  const Eigen::Index d = center.size();
  Eigen::VectorXd dz(d);
  for (Eigen::Index i = 0; i < d; ++i) dz(i) = z[static_cast<std::size_t>(i)] - center(i);
  return f * (dz * dz.transpose() / (w2 * w2) - Eigen::MatrixXd::Identity(d, d) / w2);
}

double Observable::operator()(std::span<const double> z, int label) const {
  if (label == kAbsorbedLabel) return absorbed_value;
  return components[static_cast<std::size_t>(label)](z);
}

Eigen::VectorXd Observable::label_values() const {
  if (!label_only) raise(ErrorKind::InvalidArgument, "observable " + id + " depends on position");
  Eigen::VectorXd v(static_cast<Eigen::Index>(components.size()) + 1);
  for (std::size_t k = 0; k < components.size(); ++k)
    v(static_cast<Eigen::Index>(k)) = components[k](std::span<const double>{});
  v(v.size() - 1) = absorbed_value;
  return v;
}

Observable gaussian_observable(const Gaussian& g, std::size_t num_astral, double astral_scale,
                               double absorbed_value) {
  Observable obs;
  obs.id = "gaussian";
  obs.components.push_back([g](std::span<const double> z) { return g.value(z); });
  for (std::size_t j = 0; j < num_astral; ++j)
    obs.components.push_back(
        [g, astral_scale](std::span<const double> z) { return astral_scale * g.value(z); });
  obs.absorbed_value = absorbed_value;
  obs.sup_norm = std::max({std::abs(g.amplitude), std::abs(astral_scale * g.amplitude),
                           std::abs(absorbed_value)});
  return obs;
}

Observable constant_observable(double value, std::size_t num_astral) {
  Observable obs;
  obs.id = "constant";
  for (std::size_t k = 0; k <= num_astral; ++k)
    obs.components.push_back([value](std::span<const double>) { return value; });
  obs.absorbed_value = value;
  obs.label_only = true;
  obs.sup_norm = std::abs(value);
  return obs;
}

Observable label_indicator(int label, std::size_t num_astral) {
  if (label != kAbsorbedLabel && (label < 0 || static_cast<std::size_t>(label) > num_astral))
    raise(ErrorKind::InvalidArgument, "label out of range");
  Observable obs;
  obs.id = label == kAbsorbedLabel ? "label_absorbed" : "label_" + std::to_string(label);
  for (std::size_t k = 0; k <= num_astral; ++k) {
    const double v = static_cast<int>(k) == label ? 1.0 : 0.0;
    obs.components.push_back([v](std::span<const double>) { return v; });
  }
  obs.absorbed_value = label == kAbsorbedLabel ? 1.0 : 0.0;
  obs.label_only = true;
  obs.sup_norm = 1.0;
  return obs;
}

}  // namespace hcw
