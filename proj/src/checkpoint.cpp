#include "sgas/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "sgas/ply.hpp"

namespace sgas {

namespace {

constexpr char kMagic[8] = {'S', 'G', 'A', 'S', 'C', 'K', 'P', 'T'};

struct Tensor {
  std::string name;
  const Matrix* value;
};

void add_mlp(std::vector<Tensor>& out, const std::string& prefix, const Mlp& mlp) {
  const auto& layers = mlp.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    out.push_back({prefix + "." + std::to_string(l) + ".weight", &layers[l].weight});
    out.push_back({prefix + "." + std::to_string(l) + ".bias", &layers[l].bias});
  }
}

void add_encoder(std::vector<Tensor>& out, const std::string& prefix, const PointNetEncoder& e) {
  add_mlp(out, prefix + ".pointwise", e.pointwise());
  add_mlp(out, prefix + ".projection", e.projection());
}

std::vector<Tensor> tensors_of(const Checkpoint& c) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < c.codecs.size(); ++i) {
    const std::string p = "codec" + std::to_string(i);
    add_encoder(out, p + ".encoder", c.codecs[i].encoder());
    add_mlp(out, p + ".decoder", c.codecs[i].decoder());
  }
  if (c.gan) {
    const GanParameters& g = *c.gan;
    if (g.condition) add_encoder(out, "condition", *g.condition);
    for (std::size_t i = 0; i < g.generators.size(); ++i)
      add_mlp(out, "generator" + std::to_string(i), g.generators[i]);
    for (std::size_t i = 0; i < g.part_critics.size(); ++i)
      add_mlp(out, "part_critic" + std::to_string(i), g.part_critics[i]);
    add_mlp(out, "global_critic", g.global_critic);
  }
  return out;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) s.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + b])) << (8 * b);
  return v;
}

}  // namespace

const GanParameters& Checkpoint::require_gan() const {
  require(gan.has_value(), "checkpoint has no trained generator");
  return *gan;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto tensors = tensors_of(ckpt);
  nlohmann::json header;
  header["spec"] = ckpt.spec;
  header["codec_config"] = ckpt.codec_config;
  header["train_config"] = ckpt.train_config;
  header["training_seed"] = ckpt.training_seed;
  header["codecs"] = ckpt.codecs.size();
  header["has_gan"] = ckpt.gan.has_value();
  header["pruned"] = ckpt.pruned();
  if (ckpt.gan) header["gan_config"] = ckpt.gan->config;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : tensors)
    list.push_back({{"name", t.name}, {"rows", t.value->rows()}, {"cols", t.value->cols()}});
  header["tensors"] = list;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& t : tensors) {
    const Matrix& m = *t.value;
    for (Eigen::Index k = 0; k < m.size(); ++k) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(m.data()[k])));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    fail(ErrorCode::kCorruptFile, "not a checkpoint file");
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kCheckpointVersion)
    fail(ErrorCode::kVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                          ", expected " + std::to_string(kCheckpointVersion));
  const std::uint32_t header_len = get_u32(bytes, 12);
  if (bytes.size() < 16 + static_cast<std::size_t>(header_len))
    fail(ErrorCode::kCorruptFile, "checkpoint header is truncated");

  Checkpoint c;
  nlohmann::json header;
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> declared;
  bool has_gan = false;
  GanConfig gan_config;
  std::size_t codec_count = 0;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
    c.spec = header.at("spec").get<CategorySpec>();
    c.codec_config = header.at("codec_config").get<CodecConfig>();
    c.train_config = header.at("train_config").get<TrainConfig>();
    c.training_seed = header.at("training_seed").get<std::uint64_t>();
    codec_count = header.at("codecs").get<std::size_t>();
    has_gan = header.at("has_gan").get<bool>();
    if (has_gan) gan_config = header.at("gan_config").get<GanConfig>();
    for (const auto& t : header.at("tensors"))
      declared.push_back({t.at("name").get<std::string>(),
                          {t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>()}});
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptFile, std::string("checkpoint header is malformed: ") + e.what());
  }

  if (codec_count != static_cast<std::size_t>(c.spec.n))
    fail(ErrorCode::kShapeMismatch, "header declares n=" + std::to_string(c.spec.n) + " but " +
                                        std::to_string(codec_count) + " codec blocks");
  if (has_gan && gan_config.n != c.spec.n)
    fail(ErrorCode::kShapeMismatch, "generator arity differs from the category's n");

  // Rebuild the architecture from the configs, then fill it from the payload.
  std::mt19937_64 rng(0);
  try {
    for (int i = 0; i < c.spec.n; ++i) c.codecs.emplace_back(c.codec_config, i, rng);
    if (has_gan) c.gan.emplace(gan_config, rng);
  } catch (const Error& e) {
    fail(ErrorCode::kShapeMismatch, std::string("checkpoint configs are inconsistent: ") + e.what());
  }
  const auto expected = tensors_of(c);
  if (expected.size() != declared.size())
    fail(ErrorCode::kShapeMismatch, "checkpoint holds " + std::to_string(declared.size()) +
                                        " tensors, configs imply " + std::to_string(expected.size()));
  std::size_t need = 16 + header_len;
  for (std::size_t t = 0; t < expected.size(); ++t) {
    const auto& [name, shape] = declared[t];
    if (name != expected[t].name || shape.first != expected[t].value->rows() ||
        shape.second != expected[t].value->cols())
      fail(ErrorCode::kShapeMismatch, "tensor " + name + " does not match the configured network");
    need += 4 * static_cast<std::size_t>(shape.first * shape.second);
  }
  if (bytes.size() != need)
    fail(ErrorCode::kCorruptFile, "checkpoint payload has " + std::to_string(bytes.size()) +
                                      " bytes, expected " + std::to_string(need));

  std::size_t at = 16 + header_len;
  for (const auto& t : expected) {
    Matrix& m = const_cast<Matrix&>(*t.value);
    for (Eigen::Index k = 0; k < m.size(); ++k, at += 4)
      m.data()[k] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, at)));
  }
  for (auto& codec : c.codecs) codec.freeze();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace sgas
