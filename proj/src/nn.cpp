#include "sgas/nn.hpp"

#include <algorithm>
#include <cmath>

#include "sgas/error.hpp"

namespace sgas {

namespace {

void activate(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kRelu: z = z.cwiseMax(0.0); break;
    case Activation::kLeakyRelu:
      z = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
      break;
  }
}

Matrix derivative(Activation act, const Matrix& pre) {
  switch (act) {
    case Activation::kIdentity: return Matrix::Ones(pre.rows(), pre.cols());
    case Activation::kRelu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case Activation::kLeakyRelu:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeakySlope; });
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(const std::vector<int>& widths, Activation hidden, bool activate_output,
         std::mt19937_64& rng)
    : hidden_(hidden), activate_output_(activate_output) {
  require(widths.size() >= 2, "an MLP needs at least input and output widths");
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int in = widths[l], out = widths[l + 1];
    require(in > 0 && out > 0, "MLP widths must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Dense d{Matrix(out, in), Matrix(out, 1)};
    for (Eigen::Index c = 0; c < d.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < d.weight.rows(); ++r) d.weight(r, c) = u(rng);
    for (Eigen::Index r = 0; r < d.bias.rows(); ++r) d.bias(r, 0) = u(rng);
    layers_.push_back(std::move(d));
  }
}

Mlp Mlp::from_layers(std::vector<Dense> layers, Activation hidden, bool activate_output) {
  require(!layers.empty(), "an MLP needs at least one layer");
  for (std::size_t l = 0; l + 1 < layers.size(); ++l)
    require(layers[l + 1].weight.cols() == layers[l].weight.rows(), "MLP layer shapes do not chain");
  Mlp m;
  m.layers_ = std::move(layers);
  m.hidden_ = hidden;
  m.activate_output_ = activate_output;
  return m;
}

std::vector<int> Mlp::widths() const {
  std::vector<int> w{input_dim()};
  for (const auto& l : layers_) w.push_back(static_cast<int>(l.weight.rows()));
  return w;
}

Matrix Mlp::forward(const Matrix& x, Cache* cache) const {
  if (cache) {
    cache->inputs.resize(layers_.size());
    cache->pre.resize(layers_.size());
  }
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias.col(0);
    if (cache) {
      cache->inputs[l] = std::move(h);
      cache->pre[l] = z;
    }
    if (activated(l)) activate(hidden_, z);
    h = std::move(z);
  }
  return h;
}

Matrix Mlp::backward(const Cache& cache, const Matrix& dy, Mlp* grads) const {
  Matrix d = dy;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    if (activated(l)) d = d.cwiseProduct(derivative(hidden_, cache.pre[l]));
    if (grads) {
      grads->layers_[l].weight.noalias() += d * cache.inputs[l].transpose();
      grads->layers_[l].bias.col(0) += d.rowwise().sum();
    }
    d = layers_[l].weight.transpose() * d;
  }
  return d;
}

Matrix Mlp::input_gradient(const Matrix& x, InputGradCache* cache) const {
  require(output_dim() == 1, "input_gradient needs a scalar-output network");
  const std::size_t L = layers_.size();
  std::vector<Matrix> slope(L);
  Matrix h = x;
  for (std::size_t l = 0; l < L; ++l) {
    Matrix z = layers_[l].weight * h;
    z.colwise() += layers_[l].bias.col(0);
    slope[l] = activated(l) ? derivative(hidden_, z) : Matrix::Ones(z.rows(), z.cols());
    if (activated(l)) activate(hidden_, z);
    h = std::move(z);
  }
  std::vector<Matrix> delta(L);
  Matrix r = Matrix::Ones(1, x.cols());
  for (std::size_t l = L; l-- > 0;) {
    delta[l] = slope[l].cwiseProduct(r);
    r = layers_[l].weight.transpose() * delta[l];
  }
  if (cache) {
    cache->delta = std::move(delta);
    cache->slope = std::move(slope);
  }
  return r;
}

void Mlp::input_gradient_backward(const InputGradCache& cache, const Matrix& v, Mlp& grads) const {
  // Reverse of r_l = W_l^T delta_l, delta_l = slope_l .* r_{l+1}, walked from
  // the input side outward.
  Matrix rbar = v;
  const std::size_t L = layers_.size();
  for (std::size_t l = 0; l < L; ++l) {
    grads.layers_[l].weight.noalias() += cache.delta[l] * rbar.transpose();
    if (l + 1 < L) {
      Matrix dbar = layers_[l].weight * rbar;
      rbar = cache.slope[l].cwiseProduct(dbar);
    }
  }
}

Mlp Mlp::zeros_like() const {
  Mlp z = *this;
  z.set_zero();
  return z;
}

void Mlp::set_zero() {
  for (auto& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

std::vector<Matrix*> Mlp::parameters() {
  std::vector<Matrix*> p;
  for (auto& l : layers_) {
    p.push_back(&l.weight);
    p.push_back(&l.bias);
  }
  return p;
}

std::vector<const Matrix*> Mlp::parameters() const {
  std::vector<const Matrix*> p;
  for (const auto& l : layers_) {
    p.push_back(&l.weight);
    p.push_back(&l.bias);
  }
  return p;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.layers_.size() != b.layers_.size() || a.hidden_ != b.hidden_ ||
      a.activate_output_ != b.activate_output_)
    return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols()) return false;
    if (x.weight != y.weight || x.bias != y.bias) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// PointNetEncoder

PointNetEncoder::PointNetEncoder(const std::vector<int>& pointwise_widths, int output_dim,
                                 std::mt19937_64& rng)
    : pointwise_(pointwise_widths, Activation::kRelu, true, rng),
      projection_({pointwise_widths.back(), output_dim}, Activation::kIdentity, false, rng) {}

PointNetEncoder PointNetEncoder::from_parts(Mlp pointwise, Mlp projection) {
  require(pointwise.output_dim() == projection.input_dim(), "encoder parts do not chain");
  PointNetEncoder e;
  e.pointwise_ = std::move(pointwise);
  e.projection_ = std::move(projection);
  return e;
}

Matrix PointNetEncoder::forward(const Matrix& points, const std::vector<Eigen::Index>& offsets,
                                Cache* cache) const {
  require(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == points.cols(),
          "encoder offsets do not cover the point matrix");
  const Matrix features = pointwise_.forward(points, cache ? &cache->pointwise : nullptr);
  const auto clouds = static_cast<Eigen::Index>(offsets.size() - 1);
  Matrix pooled(features.rows(), clouds);
  Eigen::MatrixXi argmax(features.rows(), clouds);
  for (Eigen::Index c = 0; c < clouds; ++c) {
    const Eigen::Index begin = offsets[static_cast<std::size_t>(c)];
    const Eigen::Index end = offsets[static_cast<std::size_t>(c) + 1];
    require(end > begin, "encoder got an empty cloud");
    for (Eigen::Index f = 0; f < features.rows(); ++f) {
      Eigen::Index best = begin;
      double value = features(f, begin);
      for (Eigen::Index k = begin + 1; k < end; ++k) {
        if (features(f, k) > value) {
          value = features(f, k);
          best = k;
        }
      }
      pooled(f, c) = value;
      argmax(f, c) = static_cast<int>(best);
    }
  }
  if (cache) {
    cache->argmax = std::move(argmax);
    cache->point_count = points.cols();
  }
  return projection_.forward(pooled, cache ? &cache->projection : nullptr);
}

void PointNetEncoder::backward(const Cache& cache, const Matrix& dout, PointNetEncoder* grads) const {
  const Matrix dpooled =
      projection_.backward(cache.projection, dout, grads ? &grads->projection_ : nullptr);
  Matrix dfeatures = Matrix::Zero(dpooled.rows(), cache.point_count);
  for (Eigen::Index c = 0; c < dpooled.cols(); ++c)
    for (Eigen::Index f = 0; f < dpooled.rows(); ++f) dfeatures(f, cache.argmax(f, c)) += dpooled(f, c);
  pointwise_.backward(cache.pointwise, dfeatures, grads ? &grads->pointwise_ : nullptr);
}

PointNetEncoder PointNetEncoder::zeros_like() const {
  PointNetEncoder z = *this;
  z.set_zero();
  return z;
}

void PointNetEncoder::set_zero() {
  pointwise_.set_zero();
  projection_.set_zero();
}

std::vector<Matrix*> PointNetEncoder::parameters() {
  auto p = pointwise_.parameters();
  for (auto* m : projection_.parameters()) p.push_back(m);
  return p;
}

std::vector<const Matrix*> PointNetEncoder::parameters() const {
  auto p = pointwise_.parameters();
  for (const auto* m : projection_.parameters()) p.push_back(m);
  return p;
}

// ---------------------------------------------------------------------------
// Adam

void Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  require(params.size() == grads.size(), "Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.push_back(Matrix::Zero(p->rows(), p->cols()));
      v_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  }
  require(m_.size() == params.size(), "Adam: parameter set changed between steps");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseAbs2();
    params[i]->array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void quantize_to_float(const std::vector<Matrix*>& params) {
  for (auto* p : params)
    *p = p->unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
}

std::vector<Eigen::Vector3d> canonical_order(std::vector<Eigen::Vector3d> points) {
  std::sort(points.begin(), points.end(), [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    if (a.x() != b.x()) return a.x() < b.x();
    if (a.y() != b.y()) return a.y() < b.y();
    return a.z() < b.z();
  });
  return points;
}

}  // namespace sgas
