#include "sgas/gan.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <ostream>
#include <sstream>

namespace sgas {

void to_json(nlohmann::json& j, const GanConfig& c) {
  j = {{"n", c.n},
       {"latent_dim", c.latent_dim},
       {"condition_widths", c.condition_widths},
       {"condition_points_per_part", c.condition_points_per_part},
       {"generator_hidden", c.generator_hidden},
       {"critic_hidden", c.critic_hidden},
       {"pruned", c.pruned}};
}

void from_json(const nlohmann::json& j, GanConfig& c) {
  c.n = j.value("n", c.n);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.condition_widths = j.value("condition_widths", c.condition_widths);
  c.condition_points_per_part = j.value("condition_points_per_part", c.condition_points_per_part);
  c.generator_hidden = j.value("generator_hidden", c.generator_hidden);
  c.critic_hidden = j.value("critic_hidden", c.critic_hidden);
  c.pruned = j.value("pruned", c.pruned);
}

void TrainConfig::validate() const {
  require(lr > 0.0 && adam_beta1 > 0.0 && adam_beta2 > 0.0, "learning rate and Adam betas must be positive");
  require(epochs >= 1 && batch >= 1, "epochs and batch must be positive");
  require(n_critic >= 1, "n_critic must be at least 1");
  require(lambda_gp >= 0.0 && alpha >= 0.0 && beta >= 0.0, "loss weights must be non-negative");
  require(tau >= 0.0, "tau must be non-negative");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},           {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2},
       {"epochs", c.epochs},   {"batch", c.batch},           {"n_critic", c.n_critic},
       {"lambda_gp", c.lambda_gp}, {"alpha", c.alpha},       {"beta", c.beta},
       {"tau", c.tau},         {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.n_critic = j.value("n_critic", c.n_critic);
  c.lambda_gp = j.value("lambda_gp", c.lambda_gp);
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.tau = j.value("tau", c.tau);
  c.seed = j.value("seed", c.seed);
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch},
       {"L_G", r.generator_loss},
       {"L_Fp", r.part_critic_loss},
       {"L_F", r.global_critic_loss},
       {"w_gap", r.wasserstein_gap},
       {"critic_updates", r.critic_updates},
       {"generator_updates", r.generator_updates},
       {"seconds", r.seconds}};
}

// ---------------------------------------------------------------------------
// parameters

namespace {

std::vector<int> stack_widths(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

template <typename P>
void append(std::vector<P>& dst, const std::vector<P>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

}  // namespace

GanParameters::GanParameters(const GanConfig& cfg, std::mt19937_64& rng) : config(cfg) {
  require(cfg.n >= 1 && cfg.latent_dim >= 1, "GAN needs n >= 1 and a positive latent size");
  require(cfg.condition_points_per_part >= 1, "condition_points_per_part must be positive");
  if (!cfg.pruned) {
    std::vector<int> pw{3 + cfg.n};
    append(pw, cfg.condition_widths);
    condition.emplace(pw, 2 * cfg.latent_dim, rng);
  }
  for (int i = 0; i < cfg.n; ++i)
    generators.emplace_back(stack_widths(cfg.latent_dim, cfg.generator_hidden, cfg.latent_dim),
                            Activation::kLeakyRelu, false, rng);
  for (int i = 0; i < cfg.n; ++i)
    part_critics.emplace_back(stack_widths(cfg.latent_dim, cfg.critic_hidden, 1),
                              Activation::kLeakyRelu, false, rng);
  global_critic = Mlp(stack_widths(cfg.n * cfg.latent_dim, cfg.critic_hidden, 1),
                      Activation::kLeakyRelu, false, rng);
}

GanParameters GanParameters::zeros_like() const {
  GanParameters z = *this;
  z.set_zero();
  return z;
}

void GanParameters::set_zero() {
  if (condition) condition->set_zero();
  for (auto& g : generators) g.set_zero();
  for (auto& f : part_critics) f.set_zero();
  global_critic.set_zero();
}

std::vector<Matrix*> GanParameters::generator_side() {
  std::vector<Matrix*> p;
  if (condition) append(p, condition->parameters());
  for (auto& g : generators) append(p, g.parameters());
  return p;
}

std::vector<const Matrix*> GanParameters::generator_side() const {
  std::vector<const Matrix*> p;
  if (condition) append(p, condition->parameters());
  for (const auto& g : generators) append(p, g.parameters());
  return p;
}

std::vector<Matrix*> GanParameters::critic_side() {
  std::vector<Matrix*> p;
  for (auto& f : part_critics) append(p, f.parameters());
  append(p, global_critic.parameters());
  return p;
}

std::vector<const Matrix*> GanParameters::critic_side() const {
  std::vector<const Matrix*> p;
  for (const auto& f : part_critics) append(p, f.parameters());
  append(p, global_critic.parameters());
  return p;
}

std::vector<Matrix*> GanParameters::all() {
  auto p = generator_side();
  append(p, critic_side());
  return p;
}

std::vector<const Matrix*> GanParameters::all() const {
  auto p = generator_side();
  append(p, critic_side());
  return p;
}

// ---------------------------------------------------------------------------
// inference pieces

Matrix condition_input(const std::vector<const PartSet*>& unedited, const GanConfig& config,
                       std::vector<Eigen::Index>& offsets) {
  const int n = config.n;
  const auto per_part = static_cast<std::size_t>(config.condition_points_per_part);
  std::vector<std::vector<Vec3>> reduced;
  std::vector<int> slot;
  offsets.assign(1, 0);
  for (const auto* ps : unedited) {
    require(ps->n() == n, "unedited part set has the wrong arity");
    require(ps->present_count() >= 1, "condition needs at least one unedited part");
    Eigen::Index count = 0;
    for (int i = 0; i < n; ++i) {
      if (!ps->present(i)) continue;
      auto pts = canonical_order(ps->part(i).points);
      if (pts.size() > per_part) {
        std::vector<Vec3> kept;
        kept.reserve(per_part);
        for (std::size_t k = 0; k < per_part; ++k) kept.push_back(pts[k * pts.size() / per_part]);
        pts = std::move(kept);
      }
      count += static_cast<Eigen::Index>(pts.size());
      reduced.push_back(std::move(pts));
      slot.push_back(i);
    }
    offsets.push_back(offsets.back() + count);
  }
  Matrix x = Matrix::Zero(3 + n, offsets.back());
  Eigen::Index col = 0;
  for (std::size_t r = 0; r < reduced.size(); ++r) {
    for (const auto& p : reduced[r]) {
      x.block<3, 1>(0, col) = p;
      x(3 + slot[r], col) = 1.0;
      ++col;
    }
  }
  return x;
}

namespace {

struct ConditionForward {
  Matrix mu, sigma;
  PointNetEncoder::Cache cache;
};

ConditionForward run_condition(const GanParameters& params, const std::vector<const PartSet*>& unedited,
                               bool keep_cache) {
  require(params.condition.has_value(), "pruned checkpoints have no condition encoder");
  std::vector<Eigen::Index> offsets;
  const Matrix x = condition_input(unedited, params.config, offsets);
  ConditionForward out;
  const Matrix raw = params.condition->forward(x, offsets, keep_cache ? &out.cache : nullptr);
  const int L = params.config.latent_dim;
  out.mu = raw.topRows(L);
  out.sigma = (0.5 * raw.bottomRows(L).array()).exp().matrix();
  return out;
}

std::vector<const PartSet*> pointers(const std::vector<PartSet>& sets) {
  std::vector<const PartSet*> p;
  p.reserve(sets.size());
  for (const auto& s : sets) p.push_back(&s);
  return p;
}

void check_finite(double value, const std::string& what) {
  if (!std::isfinite(value)) {
    std::ostringstream snap;
    snap << what << "=" << value;
    throw TrainingError(-1, snap.str(), what + " is not finite");
  }
}

}  // namespace

ConditionedDistribution condition(const GanParameters& params, const PartSet& unedited) {
  auto fwd = run_condition(params, {&unedited}, false);
  return {fwd.mu.col(0), fwd.sigma.col(0)};
}

Vector sample_noise(const ConditionedDistribution& dist, const Vector& epsilon) {
  require(epsilon.size() == dist.mu.size() && dist.sigma.size() == dist.mu.size(),
          "noise dimension mismatch");
  require(epsilon.allFinite(), "epsilon must be finite");
  return dist.mu + dist.sigma.cwiseProduct(epsilon);
}

std::vector<LatentCode> generate_features(const GanParameters& params, const Vector& z) {
  require(z.size() == params.config.latent_dim, "z has the wrong dimension");
  require(z.allFinite(), "z must be finite");
  std::vector<LatentCode> codes;
  for (const auto& g : params.generators) codes.push_back(g.forward(z).col(0));
  return codes;
}

std::vector<Matrix> generate_batch(const GanParameters& params, const Matrix& z) {
  std::vector<Matrix> codes;
  for (const auto& g : params.generators) codes.push_back(g.forward(z));
  return codes;
}

Matrix conditioned_noise(const GanParameters& params, const std::vector<PartSet>& unedited,
                         const Matrix& epsilon) {
  if (params.config.pruned) return epsilon;
  require(static_cast<Eigen::Index>(unedited.size()) == epsilon.cols(),
          "one epsilon column per unedited input");
  auto fwd = run_condition(params, pointers(unedited), false);
  return fwd.mu + fwd.sigma.cwiseProduct(epsilon);
}

std::vector<LatentCode> apply_part_mask(const std::vector<LatentCode>& generated,
                                        const std::vector<LatentCode>& encoded_unedited,
                                        const EditMask& mask) {
  require(generated.size() == encoded_unedited.size() && generated.size() == mask.size(),
          "part mask lengths disagree");
  std::vector<LatentCode> out;
  out.reserve(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out.push_back(mask[i] ? generated[i] : encoded_unedited[i]);
  return out;
}

Matrix assemble_features(const std::vector<Matrix>& generated, const Matrix& unedited_codes,
                         const std::vector<EditMask>& masks) {
  const auto n = static_cast<Eigen::Index>(generated.size());
  const Eigen::Index L = generated.front().rows();
  const Eigen::Index B = generated.front().cols();
  Matrix out(n * L, B);
  for (Eigen::Index i = 0; i < n; ++i) out.middleRows(i * L, L) = generated[static_cast<std::size_t>(i)];
  for (std::size_t b = 0; b < masks.size(); ++b)
    for (Eigen::Index i = 0; i < n; ++i)
      if (!masks[b][static_cast<std::size_t>(i)])
        out.block(i * L, static_cast<Eigen::Index>(b), L, 1) =
            unedited_codes.block(i * L, static_cast<Eigen::Index>(b), L, 1);
  return out;
}

// ---------------------------------------------------------------------------
// losses

double gradient_penalty(const Mlp& critic, const Matrix& real, const Matrix& fake, const Vector& u,
                        Mlp* grads, double scale) {
  require(real.rows() == fake.rows() && real.cols() == fake.cols(),
          "gradient penalty inputs differ in shape");
  require(u.size() == real.cols(), "one interpolation draw per sample");
  const Matrix xhat = real * u.asDiagonal() + fake * (1.0 - u.array()).matrix().asDiagonal();
  Mlp::InputGradCache cache;
  const Matrix g = critic.input_gradient(xhat, grads ? &cache : nullptr);
  const Eigen::RowVectorXd norms = g.colwise().norm();
  const double penalty = (norms.array() - 1.0).square().mean();
  if (grads) {
    const double b = static_cast<double>(real.cols());
    Matrix v(g.rows(), g.cols());
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      const double nrm = norms(c);
      v.col(c) = nrm > 0.0 ? Vector(g.col(c) * (2.0 * (nrm - 1.0) / nrm * scale / b))
                           : Vector::Zero(g.rows());
    }
    critic.input_gradient_backward(cache, v, *grads);
  }
  return penalty;
}

double generator_loss_from_scores(const std::vector<Vector>& part_scores,
                                  const Vector& global_scores, double alpha, double beta) {
  require(!part_scores.empty(), "generator loss needs at least one part");
  double part = 0.0;
  for (const auto& s : part_scores) part += s.mean();
  return -alpha * part / static_cast<double>(part_scores.size()) - beta * global_scores.mean();
}

double part_critic_loss_from_scores(const Vector& fake_scores, const Vector& real_scores,
                                    double mean_penalty, double lambda_gp) {
  return fake_scores.mean() - real_scores.mean() + lambda_gp * mean_penalty;
}

double global_critic_loss_from_scores(const Vector& fake_scores, const Vector& real_scores,
                                      double mean_penalty, double lambda_gp) {
  return fake_scores.mean() - real_scores.mean() + lambda_gp * mean_penalty;
}

double generator_loss(const GanParameters& params, const std::vector<PartSet>& unedited,
                      const Matrix& epsilon, const TrainConfig& config, GanParameters* grads) {
  const GanConfig& gc = params.config;
  const Eigen::Index L = gc.latent_dim, B = epsilon.cols();
  require(B >= 1, "generator loss needs a non-empty batch");
  require(epsilon.rows() == L, "epsilon has the wrong latent size");

  ConditionForward cond;
  Matrix z;
  if (gc.pruned) {
    z = epsilon;
  } else {
    require(static_cast<Eigen::Index>(unedited.size()) == B, "one unedited input per epsilon column");
    cond = run_condition(params, pointers(unedited), grads != nullptr);
    z = cond.mu + cond.sigma.cwiseProduct(epsilon);
  }

  const auto n = static_cast<std::size_t>(gc.n);
  std::vector<Mlp::Cache> gen_cache(n), part_cache(n);
  std::vector<Matrix> codes(n);
  std::vector<Vector> part_scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    codes[i] = params.generators[i].forward(z, &gen_cache[i]);
    part_scores[i] = params.part_critics[i].forward(codes[i], &part_cache[i]).row(0).transpose();
  }
  Matrix joined(static_cast<Eigen::Index>(n) * L, B);
  for (std::size_t i = 0; i < n; ++i) joined.middleRows(static_cast<Eigen::Index>(i) * L, L) = codes[i];
  Mlp::Cache global_cache;
  const Vector global_scores = params.global_critic.forward(joined, &global_cache).row(0).transpose();

  const double loss = generator_loss_from_scores(part_scores, global_scores, config.alpha, config.beta);
  check_finite(loss, "L_G");
  if (!grads) return loss;

  const Matrix dglobal = Matrix::Constant(1, B, -config.beta / static_cast<double>(B));
  const Matrix djoined = params.global_critic.backward(global_cache, dglobal, nullptr);
  const Matrix dpart = Matrix::Constant(1, B, -config.alpha / static_cast<double>(n * B));
  Matrix dz = Matrix::Zero(L, B);
  for (std::size_t i = 0; i < n; ++i) {
    Matrix dcode = params.part_critics[i].backward(part_cache[i], dpart, nullptr);
    dcode += djoined.middleRows(static_cast<Eigen::Index>(i) * L, L);
    dz += params.generators[i].backward(gen_cache[i], dcode, &grads->generators[i]);
  }
  if (!gc.pruned) {
    Matrix draw(2 * L, B);
    draw.topRows(L) = dz;
    draw.bottomRows(L) = 0.5 * dz.cwiseProduct(epsilon).cwiseProduct(cond.sigma);
    params.condition->backward(cond.cache, draw, &*grads->condition);
  }
  return loss;
}

double part_critic_loss(const GanParameters& params, const std::vector<Matrix>& real,
                        const std::vector<Matrix>& fake, const Matrix& u, const TrainConfig& config,
                        GanParameters* grads, std::vector<double>* gaps) {
  const auto n = static_cast<std::size_t>(params.config.n);
  require(real.size() == n && fake.size() == n, "part critic loss needs one batch per slot");
  require(u.rows() == static_cast<Eigen::Index>(n), "one row of interpolation draws per slot");
  if (gaps) gaps->assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Mlp& critic = params.part_critics[i];
    Mlp::Cache fake_cache, real_cache;
    const Vector fake_scores = critic.forward(fake[i], &fake_cache).row(0).transpose();
    const Vector real_scores = critic.forward(real[i], &real_cache).row(0).transpose();
    Mlp* g = grads ? &grads->part_critics[i] : nullptr;
    const double scale = config.lambda_gp / static_cast<double>(n);
    const double penalty = gradient_penalty(critic, real[i], fake[i],
                                            u.row(static_cast<Eigen::Index>(i)).transpose(), g, scale);
    total += part_critic_loss_from_scores(fake_scores, real_scores, penalty, config.lambda_gp);
    if (gaps) (*gaps)[i] = std::abs(real_scores.mean() - fake_scores.mean());
    if (g) {
      const double nf = static_cast<double>(fake[i].cols()), nr = static_cast<double>(real[i].cols());
      critic.backward(fake_cache, Matrix::Constant(1, fake[i].cols(), 1.0 / (n * nf)), g);
      critic.backward(real_cache, Matrix::Constant(1, real[i].cols(), -1.0 / (n * nr)), g);
    }
  }
  const double loss = total / static_cast<double>(n);
  check_finite(loss, "L_Fp");
  return loss;
}

double global_critic_loss(const GanParameters& params, const Matrix& real,
                          const Matrix& unedited_codes, const std::vector<EditMask>& masks,
                          const std::vector<Matrix>& fake, const Vector& u,
                          const TrainConfig& config, GanParameters* grads) {
  const Eigen::Index L = params.config.latent_dim;
  const auto n = static_cast<std::size_t>(params.config.n);
  const Eigen::Index B = real.cols();
  require(fake.size() == n, "global critic loss needs one generated batch per slot");
  require(masks.empty() || static_cast<Eigen::Index>(masks.size()) == B, "one mask per batch item");
  for (std::size_t b = 0; b < masks.size(); ++b) {
    require(masks[b].size() == n, "mask length must equal n");
    for (std::size_t i = 0; i < n; ++i) {
      if (masks[b][i]) continue;
      const auto block = unedited_codes.block(static_cast<Eigen::Index>(i) * L, static_cast<Eigen::Index>(b), L, 1);
      require(!(block.array() == 0.0).all(),
              "mask keeps slot " + std::to_string(i) + " but the unedited part is absent");
    }
  }
  const Matrix fake_in = assemble_features(fake, unedited_codes, masks);
  Mlp::Cache fake_cache, real_cache;
  const Mlp& critic = params.global_critic;
  const Vector fake_scores = critic.forward(fake_in, &fake_cache).row(0).transpose();
  const Vector real_scores = critic.forward(real, &real_cache).row(0).transpose();
  Mlp* g = grads ? &grads->global_critic : nullptr;
  const double penalty = gradient_penalty(critic, real, fake_in, u, g, config.lambda_gp);
  const double loss = global_critic_loss_from_scores(fake_scores, real_scores, penalty, config.lambda_gp);
  check_finite(loss, "L_F");
  if (g) {
    critic.backward(fake_cache, Matrix::Constant(1, fake_in.cols(), 1.0 / fake_in.cols()), g);
    critic.backward(real_cache, Matrix::Constant(1, B, -1.0 / B), g);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// training

Vector encode_part_set(const std::vector<PartCodec>& codecs, const PartSet& parts) {
  require(static_cast<int>(codecs.size()) == parts.n(), "one codec per slot");
  const Eigen::Index L = codecs.front().latent_dim();
  Vector out(static_cast<Eigen::Index>(codecs.size()) * L);
  for (std::size_t i = 0; i < codecs.size(); ++i)
    out.segment(static_cast<Eigen::Index>(i) * L, L) = codecs[i].encode(parts.parts[i]);
  return out;
}

namespace {

Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = normal(rng);
  return m;
}

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = uni(rng);
  return m;
}

struct Conditioning {
  std::vector<PartSet> unedited;
  std::vector<EditMask> masks;
  Matrix unedited_codes;
};

// Random part dropout over a batch; in pruned mode nothing is kept.
Conditioning drop_parts(const std::vector<PartSet>& shapes, const Matrix& real_codes,
                        const std::vector<std::size_t>& batch, const GanConfig& gc, std::mt19937_64& rng) {
  Conditioning c;
  const Eigen::Index L = gc.latent_dim;
  c.unedited_codes = Matrix::Zero(gc.n * L, static_cast<Eigen::Index>(batch.size()));
  if (gc.pruned) return c;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const PartSet& full = shapes[batch[b]];
    DropoutResult d;
    if (full.present_count() >= 2) {
      d = random_part_dropout(full, rng);
    } else {
      d.unedited = full;
      d.mask.assign(static_cast<std::size_t>(full.n()), false);
      for (int i = 0; i < full.n(); ++i) d.mask[static_cast<std::size_t>(i)] = !full.present(i);
    }
    for (int i = 0; i < gc.n; ++i)
      if (!d.mask[static_cast<std::size_t>(i)])
        c.unedited_codes.block(i * L, static_cast<Eigen::Index>(b), L, 1) =
            real_codes.block(i * L, static_cast<Eigen::Index>(batch[b]), L, 1);
    c.unedited.push_back(std::move(d.unedited));
    c.masks.push_back(std::move(d.mask));
  }
  return c;
}

}  // namespace

TrainResult train_gan(const std::vector<PartSet>& shapes, const std::vector<PartCodec>& codecs,
                      const GanConfig& gc, const TrainConfig& config, std::ostream* log_stream) {
  config.validate();
  require(!shapes.empty(), "training needs at least one shape");
  require(static_cast<int>(codecs.size()) == gc.n, "one codec per slot");
  for (const auto& c : codecs) {
    require(c.frozen(), "codecs must be frozen before GAN training");
    require(c.latent_dim() == gc.latent_dim, "codec latent size differs from the GAN's");
  }

  const Eigen::Index L = gc.latent_dim;
  const auto N = shapes.size();
  Matrix real_codes(gc.n * L, static_cast<Eigen::Index>(N));
  std::vector<std::vector<std::size_t>> slot_pool(static_cast<std::size_t>(gc.n));
  for (std::size_t s = 0; s < N; ++s) {
    shapes[s].validate(gc.n, codecs.front().points_per_part());
    real_codes.col(static_cast<Eigen::Index>(s)) = encode_part_set(codecs, shapes[s]);
    for (int i = 0; i < gc.n; ++i)
      if (shapes[s].present(i)) slot_pool[static_cast<std::size_t>(i)].push_back(s);
  }
  for (int i = 0; i < gc.n; ++i)
    require(!slot_pool[static_cast<std::size_t>(i)].empty(),
            "no training shape has part " + std::to_string(i));

  std::mt19937_64 rng(config.seed);
  TrainResult result{GanParameters(gc, rng), {}};
  GanParameters& params = result.params;
  GanParameters grads = params.zeros_like();
  Adam critic_opt(config.lr, config.adam_beta1, config.adam_beta2);
  Adam generator_opt(config.lr, config.adam_beta1, config.adam_beta2);

  const auto B = std::min<std::size_t>(static_cast<std::size_t>(config.batch), N);
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((N + B - 1) / B);
  std::int64_t total_critic = steps_per_epoch * config.epochs;
  total_critic = (total_critic + config.n_critic - 1) / config.n_critic * config.n_critic;

  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::uniform_int_distribution<std::size_t> any_shape(0, N - 1);

  struct Accum {
    double lg = 0, lfp = 0, lf = 0, gap = 0;
    int critic_steps = 0, gen_steps = 0;
  } acc;
  double last_lg = 0.0;
  const auto start = std::chrono::steady_clock::now();
  int current_epoch = 0;

  auto flush_epoch = [&](int epoch) {
    EpochRecord r;
    r.epoch = epoch;
    r.generator_loss = acc.gen_steps ? acc.lg / acc.gen_steps : last_lg;
    r.part_critic_loss = acc.critic_steps ? acc.lfp / acc.critic_steps : 0.0;
    r.global_critic_loss = acc.critic_steps ? acc.lf / acc.critic_steps : 0.0;
    r.wasserstein_gap = acc.critic_steps ? acc.gap / acc.critic_steps : 0.0;
    r.critic_updates = acc.critic_steps;
    r.generator_updates = acc.gen_steps;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (acc.gen_steps) last_lg = r.generator_loss;
    result.log.epochs.push_back(r);
    if (log_stream) *log_stream << nlohmann::json(r).dump() << '\n' << std::flush;
    acc = {};
  };

  auto fail_at = [&](std::int64_t step, const TrainingError& e) -> TrainingError {
    return TrainingError(step, e.snapshot(),
                         std::string("training diverged at step ") + std::to_string(step) + ": " + e.what());
  };

  for (std::int64_t step = 0; step < total_critic; ++step) {
    const int epoch = static_cast<int>(std::min<std::int64_t>(step / steps_per_epoch, config.epochs - 1));
    if (epoch != current_epoch) {
      flush_epoch(current_epoch);
      current_epoch = epoch;
    }
    const std::int64_t in_epoch = step % steps_per_epoch;
    if (in_epoch == 0) std::shuffle(order.begin(), order.end(), rng);

    // ---- critic update
    std::vector<std::size_t> batch(B);
    for (std::size_t k = 0; k < B; ++k) batch[k] = order[(static_cast<std::size_t>(in_epoch) * B + k) % N];
    Conditioning cond = drop_parts(shapes, real_codes, batch, gc, rng);
    const Matrix eps = normal_matrix(L, static_cast<Eigen::Index>(B), rng);
    std::vector<Matrix> real_parts(static_cast<std::size_t>(gc.n));
    for (int i = 0; i < gc.n; ++i) {
      const auto& pool = slot_pool[static_cast<std::size_t>(i)];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      Matrix& m = real_parts[static_cast<std::size_t>(i)];
      m.resize(L, static_cast<Eigen::Index>(B));
      for (std::size_t k = 0; k < B; ++k)
        m.col(static_cast<Eigen::Index>(k)) = real_codes.block(i * L, static_cast<Eigen::Index>(pool[pick(rng)]), L, 1);
    }
    const Matrix u_part = uniform_matrix(gc.n, static_cast<Eigen::Index>(B), rng);
    const Vector u_global = uniform_matrix(static_cast<Eigen::Index>(B), 1, rng).col(0);
    Matrix real_full(gc.n * L, static_cast<Eigen::Index>(B));
    for (std::size_t k = 0; k < B; ++k) real_full.col(static_cast<Eigen::Index>(k)) = real_codes.col(static_cast<Eigen::Index>(batch[k]));

    try {
      const Matrix z = conditioned_noise(params, cond.unedited, eps);
      const std::vector<Matrix> fake = generate_batch(params, z);
      grads.set_zero();
      std::vector<double> gaps;
      const double lfp = part_critic_loss(params, real_parts, fake, u_part, config, &grads, &gaps);
      const double lf = global_critic_loss(params, real_full, cond.unedited_codes, cond.masks, fake,
                                           u_global, config, &grads);
      critic_opt.step(params.critic_side(), std::as_const(grads).critic_side());
      ++result.log.critic_updates;
      result.log.schedule += 'C';
      acc.lfp += lfp;
      acc.lf += lf;
      acc.gap += std::accumulate(gaps.begin(), gaps.end(), 0.0) / static_cast<double>(gaps.size());
      ++acc.critic_steps;
    } catch (const TrainingError& e) {
      throw fail_at(step, e);
    }

    // ---- generator + condition encoder update
    if ((step + 1) % config.n_critic == 0) {
      std::vector<std::size_t> gen_batch(B);
      for (auto& idx : gen_batch) idx = any_shape(rng);
      Conditioning gcond = drop_parts(shapes, real_codes, gen_batch, gc, rng);
      const Matrix geps = normal_matrix(L, static_cast<Eigen::Index>(B), rng);
      try {
        grads.set_zero();
        const double lg = generator_loss(params, gcond.unedited, geps, config, &grads);
        generator_opt.step(params.generator_side(), std::as_const(grads).generator_side());
        ++result.log.generator_updates;
        result.log.schedule += 'G';
        acc.lg += lg;
        ++acc.gen_steps;
      } catch (const TrainingError& e) {
        throw fail_at(step, e);
      }
    }
  }
  flush_epoch(current_epoch);
  quantize_to_float(params.all());
  return result;
}

}  // namespace sgas
