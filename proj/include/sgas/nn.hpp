#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

namespace sgas {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kIdentity, kRelu, kLeakyRelu };

inline constexpr double kLeakySlope = 0.2;

/// Affine layer; `bias` is a (out x 1) matrix so every parameter is a Matrix.
struct Dense {
  Matrix weight;
  Matrix bias;
};

/// Fully connected stack. Columns of every activation matrix are samples.
/// Hidden layers use `hidden`; the last layer uses it too only when
/// `activate_output` is set.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> inputs;  // input to layer l
    std::vector<Matrix> pre;     // pre-activation of layer l
  };

  /// State of the input-gradient computation, kept for the second-order
  /// gradient-penalty backward pass.
  struct InputGradCache {
    std::vector<Matrix> delta;  // d output / d pre-activation of layer l
    std::vector<Matrix> slope;  // activation derivative at layer l
  };

  Mlp() = default;
  /// `widths` = {input, hidden..., output}. Fan-in scaled uniform init.
  Mlp(const std::vector<int>& widths, Activation hidden, bool activate_output,
      std::mt19937_64& rng);

  int input_dim() const { return static_cast<int>(layers_.front().weight.cols()); }
  int output_dim() const { return static_cast<int>(layers_.back().weight.rows()); }
  std::vector<int> widths() const;
  Activation hidden_activation() const { return hidden_; }
  bool activates_output() const { return activate_output_; }

  Matrix forward(const Matrix& x, Cache* cache = nullptr) const;

  /// Backpropagates `dy` through a cached forward pass, accumulating parameter
  /// gradients into `grads` (same architecture) when non-null. Returns dx.
  Matrix backward(const Cache& cache, const Matrix& dy, Mlp* grads) const;

  /// Gradient of a scalar-output network with respect to its input, one
  /// column per sample.
  Matrix input_gradient(const Matrix& x, InputGradCache* cache = nullptr) const;

  /// Given V = dLoss/d(input_gradient) per sample, accumulates the loss
  /// gradient with respect to every weight. Piecewise-linear activations make
  /// the bias contribution zero.
  void input_gradient_backward(const InputGradCache& cache, const Matrix& v, Mlp& grads) const;

  Mlp zeros_like() const;
  void set_zero();

  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  std::vector<Dense>& layers() { return layers_; }
  const std::vector<Dense>& layers() const { return layers_; }

  friend bool operator==(const Mlp& a, const Mlp& b);

  /// Reassembles an Mlp from stored layers.
  static Mlp from_layers(std::vector<Dense> layers, Activation hidden, bool activate_output);

 private:
  bool activated(std::size_t layer) const {
    return layer + 1 < layers_.size() || activate_output_;
  }

  std::vector<Dense> layers_;
  Activation hidden_ = Activation::kLeakyRelu;
  bool activate_output_ = false;
};

/// Shared pointwise stack, channel-wise max over each cloud, then a linear
/// projection. Input columns are points; `offsets` delimits clouds
/// (size = clouds + 1).
class PointNetEncoder {
 public:
  struct Cache {
    Mlp::Cache pointwise;
    Mlp::Cache projection;
    Eigen::MatrixXi argmax;  // features x clouds, column index into the points
    Eigen::Index point_count = 0;
  };

  PointNetEncoder() = default;
  /// `pointwise_widths` starts at the input channel count.
  PointNetEncoder(const std::vector<int>& pointwise_widths, int output_dim, std::mt19937_64& rng);

  Matrix forward(const Matrix& points, const std::vector<Eigen::Index>& offsets,
                 Cache* cache = nullptr) const;
  void backward(const Cache& cache, const Matrix& dout, PointNetEncoder* grads) const;

  int input_dim() const { return pointwise_.input_dim(); }
  int output_dim() const { return projection_.output_dim(); }

  Mlp& pointwise() { return pointwise_; }
  const Mlp& pointwise() const { return pointwise_; }
  Mlp& projection() { return projection_; }
  const Mlp& projection() const { return projection_; }

  PointNetEncoder zeros_like() const;
  void set_zero();
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

  friend bool operator==(const PointNetEncoder& a, const PointNetEncoder& b) {
    return a.pointwise_ == b.pointwise_ && a.projection_ == b.projection_;
  }

  static PointNetEncoder from_parts(Mlp pointwise, Mlp projection);

 private:
  Mlp pointwise_;
  Mlp projection_;
};

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);
  std::int64_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

/// Rounds every parameter to the nearest 32-bit float.
void quantize_to_float(const std::vector<Matrix*>& params);

/// Lexicographic (x, y, z) order; used to feed encoders a canonical point
/// order so results do not depend on how points were listed.
std::vector<Eigen::Vector3d> canonical_order(std::vector<Eigen::Vector3d> points);

}  // namespace sgas
