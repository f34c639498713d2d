#include "sgas/editing.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "sgas/ply.hpp"

namespace sgas {

const char* to_string(Provenance p) {
  switch (p) {
    case Provenance::kGenerated: return "GENERATED";
    case Provenance::kPassthrough: return "PASSTHROUGH";
    case Provenance::kFiltered: return "FILTERED";
  }
  return "?";
}

Provenance provenance_from_string(const std::string& s) {
  if (s == "GENERATED") return Provenance::kGenerated;
  if (s == "PASSTHROUGH") return Provenance::kPassthrough;
  if (s == "FILTERED") return Provenance::kFiltered;
  fail(ErrorCode::kInvalidInput, "unknown provenance tag '" + s + "'");
}

void to_json(nlohmann::json& j, const EditOptions& o) {
  j = {{"tau", o.tau},
       {"rule", o.rule == PartSelectRule::kPerSlot ? "per_slot" : "literal_average"},
       {"mode", o.mode == AssemblyMode::kPassthrough ? "passthrough" : "decode_all"}};
}

void from_json(const nlohmann::json& j, EditOptions& o) {
  o.tau = j.value("tau", o.tau);
  const std::string rule = j.value("rule", std::string("per_slot"));
  require(rule == "per_slot" || rule == "literal_average", "unknown part select rule '" + rule + "'");
  o.rule = rule == "per_slot" ? PartSelectRule::kPerSlot : PartSelectRule::kLiteralAverage;
  const std::string mode = j.value("mode", std::string("passthrough"));
  require(mode == "passthrough" || mode == "decode_all", "unknown assembly mode '" + mode + "'");
  o.mode = mode == "passthrough" ? AssemblyMode::kPassthrough : AssemblyMode::kDecodeAll;
}

double select_score(const LatentCode& code) { return code.cwiseAbs().mean(); }

std::vector<bool> part_select(const std::vector<LatentCode>& codes, const EditMask& mask,
                              double tau, PartSelectRule rule) {
  require(tau >= 0.0, "tau must be non-negative");
  require(codes.size() == mask.size() && !codes.empty(), "part select needs one code per slot");
  std::vector<bool> kept(mask.size(), true);
  if (rule == PartSelectRule::kPerSlot) {
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) kept[i] = select_score(codes[i]) > tau;
    return kept;
  }
  LatentCode average = LatentCode::Zero(codes.front().size());
  for (const auto& c : codes) average += c;
  average /= static_cast<double>(codes.size());
  const bool keep_generated = select_score(average) > tau;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) kept[i] = keep_generated;
  return kept;
}

std::vector<int> EditResult::kept_slots() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < provenance.size(); ++i)
    if (provenance[i] != Provenance::kFiltered) out.push_back(static_cast<int>(i));
  return out;
}

nlohmann::json result_metadata(const EditResult& r) {
  nlohmann::json prov = nlohmann::json::array();
  for (auto p : r.provenance) prov.push_back(to_string(p));
  std::vector<int> mask(r.mask.begin(), r.mask.end());
  return {{"mask", mask},
          {"kept_slots", r.kept_slots()},
          {"provenance", prov},
          {"seed", r.seed},
          {"epsilon", std::vector<double>(r.epsilon.data(), r.epsilon.data() + r.epsilon.size())},
          {"z", std::vector<double>(r.z.data(), r.z.data() + r.z.size())}};
}

std::string result_ply(const EditResult& r) {
  std::string prov = "provenance";
  for (auto p : r.provenance) prov += std::string(" ") + to_string(p);
  return to_ply(r.cloud, {prov, "seed " + std::to_string(r.seed)});
}

void write_result(const EditResult& r, const std::filesystem::path& ply_path) {
  write_file(ply_path, result_ply(r));
  auto sidecar = ply_path;
  sidecar.replace_extension(".json");
  write_file(sidecar, result_metadata(r).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// assembly

PointCloud assemble_cloud(const PartSet& parts, const std::vector<Provenance>& provenance,
                          int points_per_shape, std::uint64_t seed) {
  std::vector<Vec3> points;
  std::vector<int> labels;
  std::vector<std::size_t> fixed;
  for (int i = 0; i < parts.n(); ++i) {
    if (!parts.present(i)) continue;
    const bool pass = provenance[static_cast<std::size_t>(i)] == Provenance::kPassthrough;
    for (const auto& p : parts.part(i).points) {
      if (pass) fixed.push_back(points.size());
      points.push_back(p);
      labels.push_back(i);
    }
  }
  require(!points.empty(), "nothing to assemble: every slot was filtered");
  const std::size_t target = std::min(points.size(),
                                      std::max(fixed.size(), static_cast<std::size_t>(points_per_shape)));
  const std::size_t first = static_cast<std::size_t>(seed % points.size());
  const auto idx = farthest_point_indices(points, target, fixed, first);
  std::vector<std::size_t> sorted(idx.begin(), idx.end());
  std::sort(sorted.begin(), sorted.end());
  PointCloud out;
  for (auto k : sorted) {
    out.points.push_back(points[k]);
    out.labels.push_back(labels[k]);
  }
  return out;
}

EditResult assemble(const std::vector<LatentCode>& codes, const EditMask& mask,
                    const std::vector<bool>& kept, const PartSet& unedited,
                    const std::vector<PartCodec>& codecs, int points_per_shape,
                    AssemblyMode mode, std::uint64_t seed) {
  const auto n = mask.size();
  require(codes.size() == n && kept.size() == n && codecs.size() == n &&
              unedited.n() == static_cast<int>(n),
          "assemble: slot counts disagree");
  EditResult r;
  r.codes = codes;
  r.mask = mask;
  r.seed = seed;
  r.source = unedited;
  r.parts = PartSet(static_cast<int>(n));
  r.provenance.assign(n, Provenance::kFiltered);
  for (std::size_t i = 0; i < n; ++i) {
    const int slot = static_cast<int>(i);
    if (!mask[i]) {
      require(unedited.present(slot), "slot " + std::to_string(i) + " is kept but absent in the input");
      r.provenance[i] = Provenance::kPassthrough;
      r.parts.parts[i] = mode == AssemblyMode::kPassthrough ? unedited.part(slot) : codecs[i].decode(codes[i]);
    } else if (kept[i]) {
      r.provenance[i] = Provenance::kGenerated;
      r.parts.parts[i] = codecs[i].decode(codes[i]);
    }
  }
  r.cloud = assemble_cloud(r.parts, r.provenance, points_per_shape, seed);
  return r;
}

// ---------------------------------------------------------------------------
// editing

PartSet unedited_for(const PartSet& shape, const EditMask& mask) {
  require(static_cast<int>(mask.size()) == shape.n(),
          "mask has length " + std::to_string(mask.size()) + ", expected " + std::to_string(shape.n()));
  PartSet out = shape;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) {
      out.parts[i].reset();
    } else {
      require(shape.present(static_cast<int>(i)),
              "mask keeps slot " + std::to_string(i) + " but that part is absent");
    }
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vector draw_epsilon(std::uint64_t seed, int latent_dim) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector e(latent_dim);
  for (int j = 0; j < latent_dim; ++j) e(j) = normal(rng);
  return e;
}

Vector noise_for(const Checkpoint& ckpt, const PartSet& unedited, const Vector& epsilon) {
  const GanParameters& gan = ckpt.require_gan();
  require(epsilon.size() == gan.config.latent_dim, "epsilon has the wrong dimension");
  if (gan.config.pruned) return epsilon;
  return sample_noise(condition(gan, unedited), epsilon);
}

EditResult edit_from_z(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                       const Vector& z, std::uint64_t seed, const EditOptions& options) {
  const GanParameters& gan = ckpt.require_gan();
  const PartSet unedited = unedited_for(shape, mask);
  std::vector<LatentCode> encoded;
  for (int i = 0; i < unedited.n(); ++i)
    encoded.push_back(ckpt.codecs[static_cast<std::size_t>(i)].encode(unedited.parts[static_cast<std::size_t>(i)]));
  const auto codes = apply_part_mask(generate_features(gan, z), encoded, mask);
  const auto kept = part_select(codes, mask, options.tau, options.rule);
  EditResult r = assemble(codes, mask, kept, unedited, ckpt.codecs, ckpt.spec.points_per_shape,
                          options.mode, seed);
  r.z = z;
  return r;
}

EditResult edit_with_epsilon(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                             const Vector& epsilon, std::uint64_t seed, const EditOptions& options) {
  const PartSet unedited = unedited_for(shape, mask);
  EditResult r = edit_from_z(ckpt, shape, mask, noise_for(ckpt, unedited, epsilon), seed, options);
  r.epsilon = epsilon;
  return r;
}

EditResult edit_one(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                    std::uint64_t seed, const EditOptions& options) {
  const Vector eps = draw_epsilon(seed, ckpt.require_gan().config.latent_dim);
  return edit_with_epsilon(ckpt, shape, mask, eps, seed, options);
}

std::vector<EditResult> edit(const Checkpoint& ckpt, const PartSet& shape, const EditMask& mask,
                             int k, std::uint64_t seed, const EditOptions& options) {
  require(k >= 1, "k must be at least 1");
  std::vector<EditResult> out;
  for (int j = 0; j < k; ++j)
    out.push_back(edit_one(ckpt, shape, mask, derive_seed(seed, static_cast<std::uint64_t>(j)), options));
  return out;
}

std::vector<EditResult> reedit(const Checkpoint& ckpt, const EditResult& previous,
                               const EditMask& new_mask, int k, std::uint64_t seed,
                               const EditOptions& options) {
  require(new_mask.size() == previous.provenance.size(),
          "mask has length " + std::to_string(new_mask.size()) + ", expected " +
              std::to_string(previous.provenance.size()));
  for (std::size_t i = 0; i < new_mask.size(); ++i)
    require(new_mask[i] || previous.provenance[i] != Provenance::kFiltered,
            "mask keeps slot " + std::to_string(i) + ", which was filtered in the previous result");
  return edit(ckpt, previous.parts, new_mask, k, seed, options);
}

std::vector<EditResult> interpolate_edit(const Checkpoint& ckpt, const PartSet& shape,
                                         const EditMask& mask, const Vector& eps_s,
                                         const Vector& eps_t, int steps, std::uint64_t seed,
                                         const EditOptions& options) {
  require(steps >= 2, "interpolation needs at least two steps");
  const PartSet unedited = unedited_for(shape, mask);
  const Vector zs = noise_for(ckpt, unedited, eps_s);
  const Vector zt = noise_for(ckpt, unedited, eps_t);
  std::vector<EditResult> out;
  for (int s = 0; s < steps; ++s) {
    const double a = static_cast<double>(s) / static_cast<double>(steps - 1);
    const Vector z = (1.0 - a) * zs + a * zt;
    out.push_back(edit_from_z(ckpt, shape, mask, z, seed, options));
  }
  out.front().epsilon = eps_s;
  out.back().epsilon = eps_t;
  return out;
}

EditResult style_mix(const std::vector<std::pair<const EditResult*, std::vector<int>>>& donors,
                     int points_per_shape) {
  require(!donors.empty(), "style mix needs at least one donor");
  const std::size_t n = donors.front().first->provenance.size();
  std::vector<int> owner(n, -1);
  std::set<int> kept_anywhere;
  for (std::size_t d = 0; d < donors.size(); ++d) {
    const EditResult& r = *donors[d].first;
    require(r.provenance.size() == n, "donors have different part counts");
    for (int s : r.kept_slots()) kept_anywhere.insert(s);
    for (int s : donors[d].second) {
      require(s >= 0 && static_cast<std::size_t>(s) < n, "slot " + std::to_string(s) + " is out of range");
      require(owner[static_cast<std::size_t>(s)] < 0, "slot " + std::to_string(s) + " is assigned twice");
      require(r.provenance[static_cast<std::size_t>(s)] != Provenance::kFiltered,
              "slot " + std::to_string(s) + " was filtered in its donor");
      owner[static_cast<std::size_t>(s)] = static_cast<int>(d);
    }
  }
  for (int s : kept_anywhere)
    require(owner[static_cast<std::size_t>(s)] >= 0, "slot " + std::to_string(s) + " is not assigned");

  const EditResult& first = *donors.front().first;
  EditResult out;
  out.seed = first.seed;
  out.parts = PartSet(static_cast<int>(n));
  out.source = PartSet(static_cast<int>(n));
  out.codes.assign(n, LatentCode::Zero(first.codes.front().size()));
  out.provenance.assign(n, Provenance::kFiltered);
  out.mask.assign(n, true);
  for (std::size_t s = 0; s < n; ++s) {
    if (owner[s] < 0) continue;
    const EditResult& r = *donors[static_cast<std::size_t>(owner[s])].first;
    out.codes[s] = r.codes[s];
    out.provenance[s] = r.provenance[s];
    out.mask[s] = r.mask[s];
    out.parts.parts[s] = r.parts.parts[s];
    if (r.provenance[s] == Provenance::kPassthrough) out.source.parts[s] = r.source.parts[s];
  }
  out.cloud = assemble_cloud(out.parts, out.provenance, points_per_shape, out.seed);
  return out;
}

std::vector<PointCloud> generate_unconditional(const Checkpoint& ckpt, int k, std::uint64_t seed) {
  require(k >= 1, "k must be at least 1");
  const GanParameters& gan = ckpt.require_gan();
  const auto P = static_cast<std::size_t>(ckpt.spec.points_per_shape);
  std::vector<PointCloud> out;
  for (int j = 0; j < k; ++j) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(j));
    const auto codes = generate_features(gan, draw_epsilon(s, gan.config.latent_dim));
    PartSet parts(gan.config.n);
    std::vector<Provenance> prov(codes.size(), Provenance::kGenerated);
    for (std::size_t i = 0; i < codes.size(); ++i) parts.parts[i] = ckpt.codecs[i].decode(codes[i]);
    PointCloud cloud = assemble_cloud(parts, prov, static_cast<int>(P), s);
    for (std::size_t c = 0; cloud.size() < P; ++c) {
      cloud.points.push_back(cloud.points[c]);
      cloud.labels.push_back(cloud.labels[c]);
    }
    out.push_back(std::move(cloud));
  }
  return out;
}

}  // namespace sgas
