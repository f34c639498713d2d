#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sgas/codec.hpp"
#include "sgas/error.hpp"
#include "sgas/nn.hpp"
#include "sgas/segmentation.hpp"

namespace sgas {

struct GanConfig {
  int n = 4;
  int latent_dim = 128;
  std::vector<int> condition_widths = {64, 128, 128};
  /// Each unedited part is reduced to this many points (canonical order,
  /// uniform stride) before entering the condition encoder.
  int condition_points_per_part = 32;
  std::vector<int> generator_hidden = {256, 512};
  std::vector<int> critic_hidden = {256, 512};
  bool pruned = false;

  friend bool operator==(const GanConfig&, const GanConfig&) = default;
};

void to_json(nlohmann::json& j, const GanConfig& c);
void from_json(const nlohmann::json& j, GanConfig& c);

struct TrainConfig {
  double lr = 0.0005;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.99;
  int epochs = 300;
  int batch = 64;
  int n_critic = 5;
  double lambda_gp = 10.0;
  double alpha = 1.0;
  double beta = 1.0;
  double tau = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct ConditionedDistribution {
  Vector mu;
  Vector sigma;
};

/// Trainable networks: condition encoder E (absent in pruned mode), part
/// generators G_i, part critics F_i and the global critic F.
class GanParameters {
 public:
  GanParameters() = default;
  GanParameters(const GanConfig& config, std::mt19937_64& rng);

  GanConfig config;
  std::optional<PointNetEncoder> condition;
  std::vector<Mlp> generators;
  std::vector<Mlp> part_critics;
  Mlp global_critic;

  GanParameters zeros_like() const;
  void set_zero();

  std::vector<Matrix*> generator_side();  // E then G_i
  std::vector<const Matrix*> generator_side() const;
  std::vector<Matrix*> critic_side();  // F_i then F
  std::vector<const Matrix*> critic_side() const;
  std::vector<Matrix*> all();
  std::vector<const Matrix*> all() const;

  friend bool operator==(const GanParameters&, const GanParameters&) = default;
};

/// Condition-encoder input for a batch: xyz plus a one-hot slot channel per
/// point; `offsets` delimits batch items.
Matrix condition_input(const std::vector<const PartSet*>& unedited, const GanConfig& config,
                       std::vector<Eigen::Index>& offsets);

ConditionedDistribution condition(const GanParameters& params, const PartSet& unedited);

/// sigma = exp(raw / 2).
inline Vector positive_map(const Vector& raw) { return (0.5 * raw.array()).exp().matrix(); }

/// z = mu + sigma * epsilon.
Vector sample_noise(const ConditionedDistribution& dist, const Vector& epsilon);

std::vector<LatentCode> generate_features(const GanParameters& params, const Vector& z);

/// Slot i takes generated[i] where mask[i] is set, encoded_unedited[i]
/// otherwise.
std::vector<LatentCode> apply_part_mask(const std::vector<LatentCode>& generated,
                                        const std::vector<LatentCode>& encoded_unedited,
                                        const EditMask& mask);

/// Stacks per-slot code matrices (latent x batch) into (n*latent x batch),
/// substituting `unedited_codes` rows where the mask keeps the input.
/// `masks` may be empty (no substitution).
Matrix assemble_features(const std::vector<Matrix>& generated, const Matrix& unedited_codes,
                         const std::vector<EditMask>& masks);

/// Mean over samples of (|grad_x critic(x_hat)| - 1)^2 with
/// x_hat = u * real + (1 - u) * fake. Works for any critic exposing
/// `input_gradient(const Matrix&)`.
template <typename Critic>
double gradient_penalty(const Critic& critic, const Matrix& real, const Matrix& fake,
                        const Vector& u) {
  require(real.rows() == fake.rows() && real.cols() == fake.cols(),
          "gradient penalty inputs differ in shape");
  require(u.size() == real.cols(), "one interpolation draw per sample");
  const Matrix xhat = real * u.asDiagonal() + fake * (1.0 - u.array()).matrix().asDiagonal();
  const Matrix g = critic.input_gradient(xhat);
  return (g.colwise().norm().array() - 1.0).square().mean();
}

/// Mlp gradient penalty; accumulates `scale` times its parameter gradient
/// into `grads` when non-null.
double gradient_penalty(const Mlp& critic, const Matrix& real, const Matrix& fake, const Vector& u,
                        Mlp* grads, double scale);

double generator_loss_from_scores(const std::vector<Vector>& part_scores,
                                  const Vector& global_scores, double alpha, double beta);

/// Generator objective: -alpha * mean_i mean F_i(G_i(z)) - beta * mean F(G(z))
/// over the unmasked generated union. `epsilon` is latent x batch. In pruned
/// mode `unedited` is ignored and z = epsilon. Gradients go to E and G_i.
double generator_loss(const GanParameters& params, const std::vector<PartSet>& unedited,
                      const Matrix& epsilon, const TrainConfig& config,
                      GanParameters* grads = nullptr);

/// Per-slot critic objective averaged over slots. `real[i]` and `fake[i]`
/// are latent x batch codes; `u` is n x batch. `gaps` receives
/// |mean F_i(real) - mean F_i(fake)| per slot.
double part_critic_loss(const GanParameters& params, const std::vector<Matrix>& real,
                        const std::vector<Matrix>& fake, const Matrix& u, const TrainConfig& config,
                        GanParameters* grads = nullptr, std::vector<double>* gaps = nullptr);

double part_critic_loss_from_scores(const Vector& fake_scores, const Vector& real_scores,
                                    double mean_penalty, double lambda_gp);

/// Global critic objective with the Part Mask applied on the fake side.
/// `real` and `unedited_codes` are (n*latent x batch); kept slots must have a
/// non-zero unedited code.
double global_critic_loss(const GanParameters& params, const Matrix& real,
                          const Matrix& unedited_codes, const std::vector<EditMask>& masks,
                          const std::vector<Matrix>& fake, const Vector& u,
                          const TrainConfig& config, GanParameters* grads = nullptr);

double global_critic_loss_from_scores(const Vector& fake_scores, const Vector& real_scores,
                                      double mean_penalty, double lambda_gp);

/// z for a batch (latent x batch): conditioned on `unedited` or, in pruned
/// mode, epsilon itself.
Matrix conditioned_noise(const GanParameters& params, const std::vector<PartSet>& unedited,
                         const Matrix& epsilon);

std::vector<Matrix> generate_batch(const GanParameters& params, const Matrix& z);

struct EpochRecord {
  int epoch = 0;
  double generator_loss = 0.0;
  double part_critic_loss = 0.0;
  double global_critic_loss = 0.0;
  double wasserstein_gap = 0.0;  // mean over slots of |E F_i(real) - E F_i(fake)|
  int critic_updates = 0;
  int generator_updates = 0;
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::int64_t critic_updates = 0;
  std::int64_t generator_updates = 0;
  std::string schedule;  // 'C' per critic update, 'G' per generator update, in order
};

struct TrainResult {
  GanParameters params;
  TrainLog log;
};

/// Alternating WGAN-GP optimization: `n_critic` updates of every critic per
/// update of E and the generators. `shapes` are full part sets; their codes
/// come from the frozen `codecs`. One JSON record per epoch is written to
/// `log_stream` when given.
TrainResult train_gan(const std::vector<PartSet>& shapes, const std::vector<PartCodec>& codecs,
                      const GanConfig& gan_config, const TrainConfig& config,
                      std::ostream* log_stream = nullptr);

/// Codes of every slot stacked into one column (zeros for absent parts).
Vector encode_part_set(const std::vector<PartCodec>& codecs, const PartSet& parts);

}  // namespace sgas
