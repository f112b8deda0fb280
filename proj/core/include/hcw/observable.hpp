#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hcw {

/// Label of the absorbing state in every label-valued quantity.
inline constexpr int kAbsorbedLabel = -1;

/// Isotropic Gaussian bump amplitude * exp(-|z - center|^2 / (2 width^2)).
struct Gaussian {
  Eigen::VectorXd center;
  double width = 1.0;
  double amplitude = 1.0;

  double value(std::span<const double> z) const;
  Eigen::VectorXd gradient(std::span<const double> z) const;
  Eigen::MatrixXd hessian(std::span<const double> z) const;
};

/// Test function F = (f_0, ..., f_M; F(absorbed)) on the extended state space.
struct Observable {
  using Component = std::function<double(std::span<const double>)>;

  std::string id;
  std::vector<Component> components;  // f_k, k = 0..M
  double absorbed_value = 0.0;
  /// True when every f_k is constant, so T(t)F only needs the label chain.
  bool label_only = false;
  double sup_norm = 1.0;

  double operator()(std::span<const double> z, int label) const;
  /// Values (f_0(z), ..., f_M(z), F(absorbed)) if label_only; z is ignored.
  Eigen::VectorXd label_values() const;
};

/// f_0 = g, f_j = astral_scale * g for all astral labels, F(absorbed) given.
Observable gaussian_observable(const Gaussian& g, std::size_t num_astral,
                               double astral_scale = 1.0, double absorbed_value = 0.0);
Observable constant_observable(double value, std::size_t num_astral);
/// Indicator of one label (kAbsorbedLabel for the absorbing state).
Observable label_indicator(int label, std::size_t num_astral);

}  // namespace hcw
