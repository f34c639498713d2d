#include <doctest.h>

#include "sgas/editing.hpp"
#include "sgas/ply.hpp"
#include "support.hpp"

using namespace sgas;

namespace {

struct Fixture {
  Checkpoint ckpt = testing::tiny_checkpoint(3, 16, 8);
  std::mt19937_64 rng{11};
  PartSet shape = testing::blob_parts(3, 16, rng);
};

PointCloud passthrough_union(const EditResult& r) {
  PointCloud c;
  for (int i = 0; i < r.source.n(); ++i)
    if (r.source.present(i)) c.points.insert(c.points.end(), r.source.part(i).points.begin(), r.source.part(i).points.end());
  return c;
}

bool sorted_equal(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  return canonical_order(a) == canonical_order(b);
}

}  // namespace

TEST_CASE("part select") {
  const LatentCode zero = LatentCode::Zero(4);
  LatentCode big(4), small(4);
  big << 1.0, -1.0, 1.0, -1.0;
  small << 0.1, -0.1, 0.1, 0.1;
  CHECK(select_score(big) == 1.0);
  for (double tau : {1e-12, 0.05, 0.5, 2.0}) {
    const auto kept = part_select({zero, big, zero}, {true, true, false}, tau);
    CHECK_FALSE(kept[0]);
    CHECK(kept[1] == (tau < 1.0));
    CHECK(kept[2]);
  }
  CHECK(EditOptions{}.tau == 0.5);
  CHECK(part_select({small, big}, {true, true}, 0.5) == std::vector<bool>{false, true});
  // average of the codes decides every generated slot
  CHECK(part_select({small, big}, {true, true}, 0.5, PartSelectRule::kLiteralAverage) ==
        std::vector<bool>{true, true});
  CHECK(part_select({zero, small}, {true, false}, 0.01, PartSelectRule::kLiteralAverage) ==
        std::vector<bool>{true, true});
  CHECK(part_select({zero, small}, {true, false}, 0.5, PartSelectRule::kLiteralAverage) ==
        std::vector<bool>{false, true});
  CHECK_THROWS_AS(part_select({big}, {true, false}, 0.5), Error);
  CHECK_THROWS_AS(part_select({big}, {true}, -1.0), Error);
}

TEST_CASE("edit options json") {
  EditOptions o;
  o.tau = 0.25;
  o.rule = PartSelectRule::kLiteralAverage;
  o.mode = AssemblyMode::kDecodeAll;
  const EditOptions back = nlohmann::json(o).get<EditOptions>();
  CHECK(back.tau == 0.25);
  CHECK(back.rule == PartSelectRule::kLiteralAverage);
  CHECK(back.mode == AssemblyMode::kDecodeAll);
  CHECK_THROWS_AS(nlohmann::json({{"mode", "nope"}}).get<EditOptions>(), Error);
}

TEST_CASE("passthrough edits keep the input") {
  Fixture f;
  const EditMask mask{true, false, false};
  const auto results = edit(f.ckpt, f.shape, mask, 4, 7);
  REQUIRE(results.size() == 4);
  for (const auto& r : results) {
    CHECK(unidirectional_hausdorff(passthrough_union(r), r.cloud) == 0.0);
    CHECK(r.provenance[1] == Provenance::kPassthrough);
    CHECK(r.provenance[2] == Provenance::kPassthrough);
    CHECK(r.parts.part(1) == f.shape.part(1));
    CHECK(r.codes[1] == f.ckpt.codecs[1].encode(f.shape.part(1)));
    CHECK(r.cloud.size() == 48);
    CHECK(r.cloud.has_labels());
  }
  CHECK(results[0].z != results[1].z);
  CHECK(results[0].seed == derive_seed(7, 0));
  const auto again = edit(f.ckpt, f.shape, mask, 4, 7);
  for (std::size_t j = 0; j < 4; ++j) CHECK(again[j].cloud == results[j].cloud);
  const auto single = edit_one(f.ckpt, f.shape, mask, derive_seed(7, 2));
  CHECK(single.cloud == results[2].cloud);
  CHECK(single.epsilon == draw_epsilon(derive_seed(7, 2), 8));
}

TEST_CASE("decode-all reconstructs passthrough slots") {
  Fixture f;
  EditOptions o;
  o.mode = AssemblyMode::kDecodeAll;
  const auto r = edit_one(f.ckpt, f.shape, {true, false, false}, 3, o);
  CHECK(r.provenance[1] == Provenance::kPassthrough);
  CHECK(r.parts.part(1) == f.ckpt.codecs[1].decode(f.ckpt.codecs[1].encode(f.shape.part(1))));
  CHECK(unidirectional_hausdorff(f.shape.part(1), r.cloud) > 0.0);
}

TEST_CASE("filtered slots") {
  Fixture f;
  EditOptions o;
  o.tau = 1e9;
  const auto r = edit_one(f.ckpt, f.shape, {true, true, false}, 5, o);
  CHECK(r.provenance[0] == Provenance::kFiltered);
  CHECK(r.provenance[1] == Provenance::kFiltered);
  CHECK_FALSE(r.parts.present(0));
  CHECK(r.kept_slots() == std::vector<int>{2});
  CHECK(sorted_equal(r.cloud.points, f.shape.part(2).points));
  CHECK_THROWS_AS(reedit(f.ckpt, r, {false, false, true}, 1, 1), Error);
  CHECK_THROWS_AS(reedit(f.ckpt, r, {true, true, true}, 1, 1), Error);
  const auto again = reedit(f.ckpt, r, {true, true, false}, 1, 1);
  CHECK(again.front().parts.part(2) == f.shape.part(2));
}

TEST_CASE("mask validation") {
  Fixture f;
  CHECK_THROWS_AS(edit(f.ckpt, f.shape, {true, false}, 1, 0), Error);
  CHECK_THROWS_AS(edit(f.ckpt, f.shape, {true, true, true}, 0, 0), Error);
  PartSet partial = f.shape;
  partial.parts[2].reset();
  CHECK_THROWS_AS(edit(f.ckpt, partial, {true, false, false}, 1, 0), Error);
  CHECK(unedited_for(partial, {true, false, true}).present_count() == 1);
  // mask-true slots in the input are ignored
  const auto a = edit_one(f.ckpt, f.shape, {true, false, false}, 9);
  const auto b = edit_one(f.ckpt, unedited_for(f.shape, {true, false, false}), {true, false, false}, 9);
  CHECK(a.cloud == b.cloud);
}

TEST_CASE("reedit edits the previous result") {
  Fixture f;
  const auto first = edit_one(f.ckpt, f.shape, {true, false, false}, 1);
  const auto next = reedit(f.ckpt, first, {false, true, false}, 2, 4);
  for (const auto& r : next) {
    CHECK(r.parts.part(0) == first.parts.part(0));
    CHECK(r.parts.part(2) == f.shape.part(2));
  }
  CHECK_THROWS_AS(reedit(f.ckpt, first, {false, true}, 1, 4), Error);
}

TEST_CASE("interpolation") {
  Fixture f;
  const EditMask mask{false, true, false};
  const Vector es = draw_epsilon(1, 8), et = draw_epsilon(2, 8);
  const auto path = interpolate_edit(f.ckpt, f.shape, mask, es, et, 5, 3);
  REQUIRE(path.size() == 5);
  const auto ds = edit_with_epsilon(f.ckpt, f.shape, mask, es, 3);
  const auto dt = edit_with_epsilon(f.ckpt, f.shape, mask, et, 3);
  CHECK(path.front().cloud == ds.cloud);
  CHECK(path.back().cloud == dt.cloud);
  CHECK(path.front().z == ds.z);
  CHECK(path.back().epsilon == et);
  CHECK(path[2].z == 0.5 * (ds.z + dt.z));
  CHECK_THROWS_AS(interpolate_edit(f.ckpt, f.shape, mask, es, et, 1, 3), Error);
}

TEST_CASE("style mix") {
  Fixture f;
  const auto a = edit_one(f.ckpt, f.shape, {true, false, false}, 1);
  const auto b = edit_one(f.ckpt, f.shape, {false, true, true}, 2);
  const auto mixed = style_mix({{&a, {0, 1}}, {&b, {2}}}, 48);
  CHECK(mixed.parts.part(0) == a.parts.part(0));
  CHECK(mixed.parts.part(1) == a.parts.part(1));
  CHECK(mixed.parts.part(2) == b.parts.part(2));
  CHECK(mixed.provenance[1] == Provenance::kPassthrough);
  CHECK(mixed.provenance[2] == Provenance::kGenerated);
  CHECK(mixed.seed == a.seed);
  CHECK(mixed.cloud.size() == 48);
  CHECK_THROWS_AS(style_mix({{&a, {0, 1}}, {&b, {1, 2}}}, 48), Error);
  CHECK_THROWS_AS(style_mix({{&a, {0}}, {&b, {2}}}, 48), Error);
  CHECK_THROWS_AS(style_mix({{&a, {0, 1, 5}}, {&b, {2}}}, 48), Error);
}

TEST_CASE("assembly") {
  std::mt19937_64 rng(12);
  PartSet parts = testing::blob_parts(2, 10, rng);
  const std::vector<Provenance> gen{Provenance::kGenerated, Provenance::kGenerated};
  CHECK(assemble_cloud(parts, gen, 12, 1).size() == 12);
  CHECK(assemble_cloud(parts, gen, 12, 1) == assemble_cloud(parts, gen, 12, 1));
  CHECK(assemble_cloud(parts, gen, 50, 1).size() == 20);
  const std::vector<Provenance> pass{Provenance::kPassthrough, Provenance::kGenerated};
  const auto c = assemble_cloud(parts, pass, 6, 2);
  CHECK(c.size() == 10);
  CHECK(unidirectional_hausdorff(parts.part(0), c) == 0.0);
  CHECK_THROWS_AS(assemble_cloud(PartSet(2), gen, 5, 0), Error);
}

TEST_CASE("result serialization") {
  Fixture f;
  const auto r = edit_one(f.ckpt, f.shape, {true, false, false}, 21);
  const auto meta = result_metadata(r);
  CHECK(meta["provenance"][0] == "GENERATED");
  CHECK(meta["mask"] == nlohmann::json::array({1, 0, 0}));
  CHECK(meta["seed"] == 21);
  CHECK(meta["epsilon"].size() == 8);
  const auto doc = parse_ply(result_ply(r));
  CHECK(doc.comments.front() == "provenance GENERATED PASSTHROUGH PASSTHROUGH");
  CHECK(doc.cloud.labels == r.cloud.labels);
  CHECK(provenance_from_string("FILTERED") == Provenance::kFiltered);
  CHECK_THROWS_AS(provenance_from_string("x"), Error);
}

TEST_CASE("unconditional generation") {
  const auto ckpt = testing::tiny_checkpoint(3, 16, 8, true);
  const auto clouds = generate_unconditional(ckpt, 3, 4);
  REQUIRE(clouds.size() == 3);
  for (const auto& c : clouds) {
    CHECK(c.size() == 48);
    CHECK(c.labels.size() == 48);
  }
  CHECK(generate_unconditional(ckpt, 3, 4)[1] == clouds[1]);
}
