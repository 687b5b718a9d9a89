#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asdqn/replay.hpp"
#include "asdqn/rng.hpp"

namespace asdqn {

/// Weights and biases of a fully connected network. Layer l maps
/// dims[l] -> dims[l+1]; its weight matrix is (dims[l+1] x dims[l]).
template <typename Scalar>
struct BasicParamSet {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;
    Vector bias;
  };

  std::vector<int> dims;
  std::vector<Layer> layers;

  BasicParamSet() = default;

  /// Zero parameters with the given layer widths.
  explicit BasicParamSet(std::vector<int> layer_dims) : dims(std::move(layer_dims)) {
    if (dims.size() < 2) throw std::invalid_argument("ParamSet: need at least input and output dims");
    for (int d : dims) {
      if (d < 1) throw std::invalid_argument("ParamSet: every layer dim must be >= 1");
    }
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      layers.push_back({Matrix::Zero(dims[l + 1], dims[l]), Vector::Zero(dims[l + 1])});
    }
  }

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& layer : layers) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
    return n;
  }

  /// Flat view in serialization order: per layer, weights row-major then bias.
  Scalar& flat(std::size_t i) {
    for (auto& layer : layers) {
      const auto w = static_cast<std::size_t>(layer.weight.size());
      if (i < w) return layer.weight.data()[i];
      i -= w;
      const auto b = static_cast<std::size_t>(layer.bias.size());
      if (i < b) return layer.bias.data()[i];
      i -= b;
    }
    throw std::out_of_range("ParamSet: flat index out of range");
  }
  Scalar flat(std::size_t i) const { return const_cast<BasicParamSet&>(*this).flat(i); }

  bool same_shape(const BasicParamSet& other) const { return dims == other.dims; }

  bool all_finite() const {
    for (const auto& layer : layers) {
      if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
  }

  template <typename Other>
  BasicParamSet<Other> cast() const {
    BasicParamSet<Other> out;
    out.dims = dims;
    for (const auto& layer : layers) {
      out.layers.push_back({layer.weight.template cast<Other>(), layer.bias.template cast<Other>()});
    }
    return out;
  }

  friend bool operator==(const BasicParamSet& a, const BasicParamSet& b) {
    if (a.dims != b.dims) return false;
    for (std::size_t l = 0; l < a.layers.size(); ++l) {
      if (a.layers[l].weight != b.layers[l].weight || a.layers[l].bias != b.layers[l].bias) return false;
    }
    return true;
  }
};

using ParamSet = BasicParamSet<double>;
using Matrix = ParamSet::Matrix;

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
inline ParamSet init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
  ParamSet p(layer_dims);
  Rng rng(seed);
  for (auto& layer : p.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = scale * (2.0 * uniform01(rng) - 1.0);
    }
  }
  return p;
}

inline ParamSet clone_params(const ParamSet& src) { return src; }

template <typename Scalar>
using BatchMatrix = typename BasicParamSet<Scalar>::Matrix;

/// Rows are samples. Hidden layers apply max(0, x); the output layer is linear.
template <typename Scalar>
BatchMatrix<Scalar> forward(const BasicParamSet<Scalar>& params, const BatchMatrix<Scalar>& obs_batch) {
  if (obs_batch.cols() != params.input_dim()) throw std::invalid_argument("forward: input width mismatch");
  BatchMatrix<Scalar> act = obs_batch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    BatchMatrix<Scalar> z = act * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < params.layers.size()) z = z.cwiseMax(Scalar(0));
    act = std::move(z);
  }
  return act;
}

/// One-hot rows for the given state ids.
template <typename Scalar = double>
BatchMatrix<Scalar> encode_states(std::span<const int> states, int num_states) {
  BatchMatrix<Scalar> x = BatchMatrix<Scalar>::Zero(static_cast<Eigen::Index>(states.size()), num_states);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i] < 0 || states[i] >= num_states) throw std::out_of_range("encode_states: state out of range");
    x(static_cast<Eigen::Index>(i), states[i]) = Scalar(1);
  }
  return x;
}

/// Regression targets y_j: r_j for terminal transitions, otherwise
/// r_j + gamma * max_a' Q(s'_j, a'; target_params).
template <typename Scalar>
std::vector<Scalar> regression_targets(const BasicParamSet<Scalar>& target_params, const Batch& batch,
                                       Scalar gamma) {
  std::vector<int> next(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) next[j] = batch[j].s_next;
  const auto q_next = forward(target_params, encode_states<Scalar>(next, target_params.input_dim()));
  std::vector<Scalar> y(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Scalar r = static_cast<Scalar>(batch[j].r);
    y[j] = batch[j].terminal ? r : r + gamma * q_next.row(static_cast<Eigen::Index>(j)).maxCoeff();
  }
  return y;
}

template <typename Scalar>
struct BasicLossAndGrad {
  Scalar loss{};
  BasicParamSet<Scalar> grads;
};

using LossAndGrad = BasicLossAndGrad<double>;

namespace detail {

template <typename Scalar>
void check_batch(const BasicParamSet<Scalar>& params, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  for (const auto& t : batch) {
    if (t.a < 0 || t.a >= params.output_dim()) throw std::out_of_range("loss: action out of range");
    if (t.s < 0 || t.s >= params.input_dim() || t.s_next < 0 || t.s_next >= params.input_dim()) {
      throw std::out_of_range("loss: state out of range");
    }
  }
}

}  // namespace detail

/// Mean squared error (1/B) sum_j (y_j - Q(s_j, a_j))^2 for fixed targets y.
template <typename Scalar>
Scalar loss_with_targets(const BasicParamSet<Scalar>& params, const Batch& batch, const std::vector<Scalar>& y) {
  std::vector<int> states(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) states[j] = batch[j].s;
  const auto q = forward(params, encode_states<Scalar>(states, params.input_dim()));
  Scalar total(0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const Scalar e = q(static_cast<Eigen::Index>(j), batch[j].a) - y[j];
    total += e * e;
  }
  return total / static_cast<Scalar>(batch.size());
}

/// Loss and its exact gradient for fixed targets y. Only Q(s_j, a_j)
/// receives error signal; ReLU derivative at exactly zero is taken as 0.
template <typename Scalar>
BasicLossAndGrad<Scalar> loss_and_grad_with_targets(const BasicParamSet<Scalar>& params, const Batch& batch,
                                                    const std::vector<Scalar>& y) {
  using M = BatchMatrix<Scalar>;
  const std::size_t L = params.layers.size();
  std::vector<int> states(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) states[j] = batch[j].s;

  // activations[0] is the input; pre[l] is layer l's pre-activation.
  std::vector<M> activations{encode_states<Scalar>(states, params.input_dim())};
  std::vector<M> pre;
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = params.layers[l];
    M z = activations.back() * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    pre.push_back(z);
    activations.push_back(l + 1 < L ? M(z.cwiseMax(Scalar(0))) : z);
  }

  const auto B = static_cast<Eigen::Index>(batch.size());
  const Scalar inv_b = Scalar(1) / static_cast<Scalar>(B);
  BasicLossAndGrad<Scalar> out{Scalar(0), BasicParamSet<Scalar>(params.dims)};
  M delta = M::Zero(B, params.output_dim());
  for (Eigen::Index j = 0; j < B; ++j) {
    const int a = batch[static_cast<std::size_t>(j)].a;
    const Scalar e = activations.back()(j, a) - y[static_cast<std::size_t>(j)];
    out.loss += e * e;
    delta(j, a) = Scalar(2) * e * inv_b;
  }
  out.loss *= inv_b;

  for (std::size_t l = L; l-- > 0;) {
    out.grads.layers[l].weight = delta.transpose() * activations[l];
    out.grads.layers[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      M back = delta * params.layers[l].weight;
      delta = back.cwiseProduct(M((pre[l - 1].array() > Scalar(0)).template cast<Scalar>()));
    }
  }
  return out;
}

/// DQN loss (mean over the batch) and gradients w.r.t. the online params.
/// Targets are computed from target_params and treated as constants.
template <typename Scalar>
BasicLossAndGrad<Scalar> loss_and_grad(const BasicParamSet<Scalar>& params, const BasicParamSet<Scalar>& target_params,
                                       const Batch& batch, Scalar gamma) {
  if (!params.same_shape(target_params)) throw std::invalid_argument("loss_and_grad: target shape mismatch");
  detail::check_batch(params, batch);
  return loss_and_grad_with_targets(params, batch, regression_targets(target_params, batch, gamma));
}

template <typename Scalar>
Scalar loss(const BasicParamSet<Scalar>& params, const BasicParamSet<Scalar>& target_params, const Batch& batch,
            Scalar gamma) {
  if (!params.same_shape(target_params)) throw std::invalid_argument("loss: target shape mismatch");
  detail::check_batch(params, batch);
  return loss_with_targets(params, batch, regression_targets(target_params, batch, gamma));
}

namespace detail {

/// Forward pass cache for finite differences: inputs[l] feeds layer l,
/// pre[l] is layer l's pre-activation.
template <typename Scalar>
struct ForwardCache {
  std::vector<BatchMatrix<Scalar>> inputs;
  std::vector<BatchMatrix<Scalar>> pre;
};

template <typename Scalar>
ForwardCache<Scalar> forward_cache(const BasicParamSet<Scalar>& params, const Batch& batch) {
  std::vector<int> states(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) states[j] = batch[j].s;
  ForwardCache<Scalar> c;
  c.inputs.push_back(encode_states<Scalar>(states, params.input_dim()));
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    BatchMatrix<Scalar> z = c.inputs.back() * params.layers[l].weight.transpose();
    z.rowwise() += params.layers[l].bias.transpose();
    if (l + 1 < params.layers.size()) c.inputs.push_back(z.cwiseMax(Scalar(0)));
    c.pre.push_back(std::move(z));
  }
  return c;
}

/// L(up) - L(down), where up and down add +dz and -dz to column `unit` of
/// layer `layer`'s pre-activation. Both passes are carried as a midpoint and
/// a difference so the subtraction never cancels two O(1) losses. Sets
/// `*crossed` when a hidden pre-activation of either pass changes sign
/// relative to the cache.
template <typename Scalar>
Scalar shifted_loss_difference(const BasicParamSet<Scalar>& params, const ForwardCache<Scalar>& cache,
                               std::size_t layer, Eigen::Index unit,
                               const typename BasicParamSet<Scalar>::Vector& dz, const Batch& batch,
                               const std::vector<Scalar>& y, bool* crossed = nullptr) {
  using M = BatchMatrix<Scalar>;
  const std::size_t L = params.layers.size();
  M mid = cache.pre[layer];
  M diff = M::Zero(mid.rows(), mid.cols());
  diff.col(unit) = Scalar(2) * dz;
  for (std::size_t l = layer; l + 1 < L; ++l) {
    M act_mid(mid.rows(), mid.cols());
    M act_diff(mid.rows(), mid.cols());
    for (Eigen::Index j = 0; j < mid.rows(); ++j) {
      for (Eigen::Index i = 0; i < mid.cols(); ++i) {
        const Scalar up = mid(j, i) + diff(j, i) / 2;
        const Scalar down = mid(j, i) - diff(j, i) / 2;
        const bool on = cache.pre[l](j, i) > 0;
        if (crossed && ((up > 0) != on || (down > 0) != on)) *crossed = true;
        if (up > 0 && down > 0) {
          act_mid(j, i) = mid(j, i);
          act_diff(j, i) = diff(j, i);
        } else if (up <= 0 && down <= 0) {
          act_mid(j, i) = 0;
          act_diff(j, i) = 0;
        } else {
          const Scalar a_up = std::max(up, Scalar(0));
          const Scalar a_down = std::max(down, Scalar(0));
          act_mid(j, i) = (a_up + a_down) / 2;
          act_diff(j, i) = a_up - a_down;
        }
      }
    }
    const auto& next = params.layers[l + 1];
    mid = act_mid * next.weight.transpose();
    mid.rowwise() += next.bias.transpose();
    diff = act_diff * next.weight.transpose();
  }
  // (q_up - y)^2 - (q_down - y)^2 = diff * (2 mid - 2 y)
  Scalar total(0);
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto r = static_cast<Eigen::Index>(j);
    total += diff(r, batch[j].a) * Scalar(2) * (mid(r, batch[j].a) - y[j]);
  }
  return total / static_cast<Scalar>(batch.size());
}

}  // namespace detail

struct GradCheckReport {
  /// Max over every parameter.
  double max_rel_error = 0.0;
  /// Max over parameters whose +-h steps leave every ReLU on its side.
  double max_rel_error_smooth = 0.0;
  /// Parameters whose steps cross a kink.
  std::size_t kink_crossings = 0;
};

/// Relative disagreement between `grads` and central differences of the
/// loss, |g - n| / max(1e-12, |g| + |n|), per parameter.
/// The differences are taken in extended precision and without subtracting
/// whole losses: near-zero partials of an O(1) loss are otherwise buried
/// under rounding of order eps/h.
inline GradCheckReport grad_check_report(const ParamSet& params, const ParamSet& target_params, const Batch& batch,
                                         double gamma, double h, const ParamSet& grads) {
  using Wide = long double;
  using WideVector = BasicParamSet<Wide>::Vector;
  if (!(h > 0.0)) throw std::invalid_argument("grad_check: h must be positive");
  if (!grads.same_shape(params)) throw std::invalid_argument("grad_check: gradient shape mismatch");
  detail::check_batch(params, batch);
  const auto wide = params.cast<Wide>();
  const auto y = regression_targets(target_params.cast<Wide>(), batch, static_cast<Wide>(gamma));
  const auto cache = detail::forward_cache(wide, batch);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Wide step = h;

  GradCheckReport report;
  std::size_t flat = 0;
  // dz: derivative of the unit's pre-activation w.r.t. the parameter, per sample.
  auto check = [&](std::size_t layer, Eigen::Index unit, const WideVector& dz) {
    bool crossed = false;
    const Wide delta =
        detail::shifted_loss_difference(wide, cache, layer, unit, WideVector(step * dz), batch, y, &crossed);
    const auto numeric = static_cast<double>(delta / (2 * step));
    const double analytic = grads.flat(flat++);
    const double rel = std::abs(analytic - numeric) / std::max(1e-12, std::abs(analytic) + std::abs(numeric));
    report.max_rel_error = std::max(report.max_rel_error, rel);
    if (crossed) {
      ++report.kink_crossings;
    } else {
      report.max_rel_error_smooth = std::max(report.max_rel_error_smooth, rel);
    }
  };
  const WideVector ones = WideVector::Ones(B);
  for (std::size_t l = 0; l < wide.layers.size(); ++l) {
    const auto& w = wide.layers[l].weight;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index k = 0; k < w.cols(); ++k) check(l, i, cache.inputs[l].col(k));
    }
    for (Eigen::Index i = 0; i < w.rows(); ++i) check(l, i, ones);
  }
  return report;
}

inline double grad_check_against(const ParamSet& params, const ParamSet& target_params, const Batch& batch,
                                 double gamma, double h, const ParamSet& grads) {
  return grad_check_report(params, target_params, batch, gamma, h, grads).max_rel_error;
}

/// Max over every parameter of the relative error against central differences.
inline double grad_check(const ParamSet& params, const ParamSet& target_params, const Batch& batch, double gamma,
                         double h) {
  const auto analytic = loss_and_grad(params, target_params, batch, gamma);
  return grad_check_against(params, target_params, batch, gamma, h, analytic.grads);
}

}  // namespace asdqn
