#include "sgas/codec.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "sgas/assignment.hpp"
#include "sgas/error.hpp"

namespace sgas {

bool is_absent_code(const LatentCode& code) { return (code.array() == 0.0).all(); }

void to_json(nlohmann::json& j, const CodecConfig& c) {
  j = {{"encoder_widths", c.encoder_widths},
       {"decoder_hidden", c.decoder_hidden},
       {"latent_dim", c.latent_dim},
       {"points_per_part", c.points_per_part}};
}

void from_json(const nlohmann::json& j, CodecConfig& c) {
  c.encoder_widths = j.value("encoder_widths", c.encoder_widths);
  c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.points_per_part = j.value("points_per_part", c.points_per_part);
}

void to_json(nlohmann::json& j, const PretrainConfig& c) {
  j = {{"epochs", c.epochs}, {"batch", c.batch}, {"lr", c.lr}, {"seed", c.seed},
       {"code_scale", c.code_scale}};
}

void from_json(const nlohmann::json& j, PretrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.seed = j.value("seed", c.seed);
  c.code_scale = j.value("code_scale", c.code_scale);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> with_input(int input, const std::vector<int>& rest) {
  std::vector<int> w{input};
  w.insert(w.end(), rest.begin(), rest.end());
  return w;
}

// 3 x (total points) matrix of canonically ordered parts plus offsets.
Matrix stack_parts(const std::vector<const PointCloud*>& parts, std::vector<Eigen::Index>& offsets) {
  Eigen::Index total = 0;
  offsets.assign(1, 0);
  for (const auto* p : parts) {
    total += static_cast<Eigen::Index>(p->size());
    offsets.push_back(total);
  }
  Matrix x(3, total);
  Eigen::Index col = 0;
  for (const auto* p : parts)
    for (const auto& v : canonical_order(p->points)) x.col(col++) = v;
  return x;
}

PointCloud to_cloud(const Eigen::Ref<const Vector>& flat) {
  PointCloud out;
  const Eigen::Index n = flat.size() / 3;
  out.points.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) out.points.emplace_back(flat(3 * k), flat(3 * k + 1), flat(3 * k + 2));
  return out;
}

}  // namespace

PartCodec::PartCodec(const CodecConfig& config, int part_index, std::mt19937_64& rng)
    : encoder_(with_input(3, config.encoder_widths), config.latent_dim, rng),
      decoder_([&] {
        auto w = with_input(config.latent_dim, config.decoder_hidden);
        w.push_back(3 * config.points_per_part);
        return w;
      }(), Activation::kRelu, false, rng),
      part_index_(part_index),
      points_per_part_(config.points_per_part) {}

PartCodec PartCodec::from_parts(PointNetEncoder encoder, Mlp decoder, int part_index,
                                int points_per_part, bool frozen) {
  require(decoder.input_dim() == encoder.output_dim(), "codec encoder/decoder latent mismatch");
  require(decoder.output_dim() == 3 * points_per_part, "codec decoder output size mismatch");
  PartCodec c;
  c.encoder_ = std::move(encoder);
  c.decoder_ = std::move(decoder);
  c.part_index_ = part_index;
  c.points_per_part_ = points_per_part;
  c.frozen_ = frozen;
  return c;
}

Matrix PartCodec::encode_batch(const std::vector<const PointCloud*>& parts,
                               PointNetEncoder::Cache* cache) const {
  for (const auto* p : parts) {
    require(p != nullptr, "encode_batch got an absent part");
    require(static_cast<int>(p->size()) == points_per_part_,
            "part has " + std::to_string(p->size()) + " points, codec expects " +
                std::to_string(points_per_part_));
  }
  std::vector<Eigen::Index> offsets;
  const Matrix x = stack_parts(parts, offsets);
  return encoder_.forward(x, offsets, cache);
}

LatentCode PartCodec::encode(const std::optional<PointCloud>& part) const {
  if (!part) return LatentCode::Zero(latent_dim());
  return encode_batch({&*part}).col(0);
}

PointCloud PartCodec::decode(const LatentCode& code) const {
  require(code.size() == latent_dim(), "latent code has the wrong dimension");
  require(code.allFinite(), "latent code is not finite");
  if (is_absent_code(code))
    fail(ErrorCode::kContractViolation, "decode called with the reserved absent code");
  return to_cloud(decoder_.forward(code).col(0));
}

std::vector<Matrix*> PartCodec::parameters() {
  auto p = encoder_.parameters();
  for (auto* m : decoder_.parameters()) p.push_back(m);
  return p;
}

std::vector<const Matrix*> PartCodec::parameters() const {
  auto p = encoder_.parameters();
  for (const auto* m : decoder_.parameters()) p.push_back(m);
  return p;
}

PartCodec PartCodec::zeros_like() const {
  PartCodec z = *this;
  z.encoder_.set_zero();
  z.decoder_.set_zero();
  return z;
}

void PartCodec::rescale_latent(double factor) {
  require(factor > 0.0 && std::isfinite(factor), "latent rescale factor must be positive");
  auto& proj = encoder_.projection().layers().back();
  proj.weight *= factor;
  proj.bias *= factor;
  decoder_.layers().front().weight /= factor;
}

// ---------------------------------------------------------------------------
// training

double reconstruction_loss(const PartCodec& codec, const std::vector<const PointCloud*>& parts,
                           const std::vector<Assignment>* fixed, PartCodec* grads,
                           std::vector<Assignment>* used) {
  require(!parts.empty(), "reconstruction loss of an empty batch");
  PointNetEncoder::Cache enc_cache;
  Mlp::Cache dec_cache;
  const Matrix codes = codec.encode_batch(parts, grads ? &enc_cache : nullptr);
  const Matrix out = codec.decoder().forward(codes, grads ? &dec_cache : nullptr);

  const auto batch = static_cast<Eigen::Index>(parts.size());
  const Eigen::Index n = codec.points_per_part();
  const double scale = 1.0 / static_cast<double>(n * batch);
  Matrix dout = Matrix::Zero(out.rows(), out.cols());
  if (used) used->clear();
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const PointCloud& target = *parts[static_cast<std::size_t>(b)];
    CostMatrix cost(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 y = out.col(b).segment<3>(3 * i);
      for (Eigen::Index j = 0; j < n; ++j) cost(i, j) = (y - target.points[static_cast<std::size_t>(j)]).norm();
    }
    Assignment match = fixed ? (*fixed)[static_cast<std::size_t>(b)] : auction_assignment(cost, 1e-3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(match[static_cast<std::size_t>(i)]);
      const double d = cost(i, static_cast<Eigen::Index>(j));
      total += d;
      if (grads && d > 0.0)
        dout.col(b).segment<3>(3 * i) = (out.col(b).segment<3>(3 * i) - target.points[j]) * (scale / d);
    }
    if (used) used->push_back(std::move(match));
  }
  if (grads) {
    const Matrix dcodes = codec.decoder().backward(dec_cache, dout, &grads->decoder());
    codec.encoder().backward(enc_cache, dcodes, &grads->encoder());
  }
  return total * scale;
}

PartCodec pretrain_codec(const std::vector<PointCloud>& dataset, int part_index,
                         const CodecConfig& codec_config, const PretrainConfig& config,
                         PretrainReport* report) {
  require(!dataset.empty(), "part dataset " + std::to_string(part_index) + " is empty");
  require(config.epochs >= 1 && config.batch >= 1 && config.lr > 0.0, "invalid pretraining config");
  std::mt19937_64 rng(config.seed * 1000003ULL + static_cast<std::uint64_t>(part_index));
  PartCodec codec(codec_config, part_index, rng);
  PartCodec grads = codec.zeros_like();
  Adam adam(config.lr, 0.9, 0.999);

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch), dataset.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      std::vector<const PointCloud*> parts;
      for (std::size_t k = start; k < std::min(order.size(), start + batch); ++k)
        parts.push_back(&dataset[order[k]]);
      grads.encoder().set_zero();
      grads.decoder().set_zero();
      const double loss = reconstruction_loss(codec, parts, nullptr, &grads);
      if (!std::isfinite(loss)) {
        std::ostringstream snap;
        snap << "part=" << part_index << " epoch=" << epoch << " loss=" << loss;
        throw TrainingError(epoch, snap.str(),
                            "codec " + std::to_string(part_index) + " diverged at epoch " +
                                std::to_string(epoch));
      }
      adam.step(codec.parameters(), std::as_const(grads).parameters());
      epoch_loss += loss;
      ++steps;
    }
    if (report) report->epoch_loss.push_back(epoch_loss / steps);
  }

  if (config.code_scale > 0.0) {
    std::vector<const PointCloud*> all;
    for (const auto& p : dataset) all.push_back(&p);
    const double mean_abs = codec.encode_batch(all).cwiseAbs().mean();
    if (mean_abs > 0.0) codec.rescale_latent(config.code_scale / mean_abs);
  }
  quantize_to_float(codec.parameters());
  codec.freeze();
  return codec;
}

std::vector<PartCodec> pretrain_codecs(const std::vector<std::vector<PointCloud>>& part_datasets,
                                       const CodecConfig& codec_config,
                                       const PretrainConfig& config,
                                       std::vector<PretrainReport>* reports) {
  std::vector<PartCodec> codecs;
  if (reports) reports->assign(part_datasets.size(), {});
  for (std::size_t i = 0; i < part_datasets.size(); ++i)
    codecs.push_back(pretrain_codec(part_datasets[i], static_cast<int>(i), codec_config, config,
                                    reports ? &(*reports)[i] : nullptr));
  return codecs;
}

}  // namespace sgas
