#include <random>

#include "doctest.h"
#include "generators.hpp"
#include "oracles.hpp"
#include "gbdlab/compactness.hpp"
#include "gbdlab/partition.hpp"

using namespace gbd;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat J() {
  Mat W(2, 2);
  W << 0, 1, -1, 0;
  return W;
}

DisplacementField with_facets(const Domain& dom, std::vector<JumpFacet> facets) {
  return DisplacementField(dom, std::vector<double>(dom.cell_count() * 2, 0.0), std::move(facets));
}

std::vector<double> linear(int K, double slope, double offset = 0) {
  std::vector<double> d;
  for (int k = 1; k <= K; ++k) d.push_back(offset + slope * k);
  return d;
}

}  // namespace

TEST_CASE("cube classification by jump density") {
  const Domain dom = Domain::unit_square(1.0 / 32);
  const ScaleClassification none = classify_cubes(with_facets(dom, {}), 0.25, 0.1);
  CHECK(none.bad_cubes().empty());
  CHECK(none.good_cubes().size() == 16);
  const DisplacementField u = with_facets(dom, {gen::full_facet(dom, 0, 0.5, v2(2, 0))});
  const ScaleClassification cls = classify_cubes(u, 0.25, 0.1);
  REQUIRE(cls.bad_cubes().size() == 4);
  for (std::size_t q : cls.bad_cubes()) CHECK(cls.grid.cubes[q].hi()[0] == doctest::Approx(0.5));
  CHECK(cls.bad_volume() == doctest::Approx(0.25));
  CHECK(classify_cubes(u, 0.25, 4.5).bad_cubes().empty());
  CHECK(classify_cubes(with_facets(dom, {gen::full_facet(dom, 0, 0.5, v2(0.5, 0))}), 0.25, 0.1).bad_cubes().empty());
  CHECK_THROWS_AS(classify_cubes(u, 0.25, 0), ParameterError);
}

TEST_CASE("bad volume never exceeds delta over eta times the J1 area") {
  std::mt19937_64 rng(7);
  const Domain dom = Domain::unit_square(1.0 / 64);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<JumpFacet> facets;
    double area = 0;
    const int n = 1 + static_cast<int>(rng() % 6);
    for (int f = 0; f < n; ++f) {
      const int axis = static_cast<int>(rng() % 2);
      const double pos = static_cast<double>(1 + rng() % 63) / 64;
      const double a = static_cast<double>(rng() % 64) / 64;
      const double len = static_cast<double>(1 + rng() % 16) / 64;
      const double b = std::min(1.0, a + len);
      Vec lo(2), hi(2);
      lo[axis] = hi[axis] = pos;
      lo[1 - axis] = a;
      hi[1 - axis] = b;
      const double amp = gen::uniform(rng, 0.5, 3);
      facets.push_back(JumpFacet::axis_aligned(axis, pos, lo, hi, v2(amp, 0)));
      if (amp >= 1) area += b - a;
    }
    const DisplacementField u = with_facets(dom, facets);
    const double eta = gen::uniform(rng, 0.01, 0.5);
    const int level = static_cast<int>(rng() % 3);
    const ScaleClassification cls = classify_cubes(u, 0.5, level, eta);
    CHECK(cls.bad_volume() <= cls.delta / eta * area * (1 + 1e-12));
    CHECK(jump_surface_measure(u, 1) == doctest::Approx(area));
  }
}

TEST_CASE("classification stabilizes along a sequence") {
  const Domain dom = Domain::unit_square(1.0 / 32);
  std::vector<DisplacementField> fixed, rising, flipping;
  for (int k = 1; k <= 10; ++k) {
    fixed.push_back(with_facets(dom, {gen::full_facet(dom, 0, 0.5, v2(1 + k, 0))}));
    rising.push_back(with_facets(dom, {gen::full_facet(dom, 0, 0.5, v2(k / 5.0, 0))}));
    flipping.push_back(with_facets(dom, {gen::full_facet(dom, 0, k % 2 ? 0.5 : 0.25, v2(2, 0))}));
  }
  const auto a = stabilize_classification(fixed, 0.5, 1, 0.1);
  CHECK(a.stable_from == 1);
  CHECK_FALSE(a.unstable);
  CHECK(a.bad_cubes().size() == 4);
  const auto b = stabilize_classification(rising, 0.5, 1, 0.1);
  CHECK(b.stable_from == 5);
  CHECK_FALSE(b.unstable);
  CHECK(b.bad_cubes().size() == 4);
  const auto c = stabilize_classification(flipping, 0.5, 1, 0.1);
  CHECK(c.unstable);
  CHECK(c.bad_cubes().size() == 8);
}

TEST_CASE("unit ball distance") {
  CHECK(unit_ball_distance(RigidMotion::translation(v2(3, 0)), RigidMotion::zero(2)) == doctest::Approx(3));
  CHECK(unit_ball_distance(RigidMotion(5 * J(), v2(0, 0)), RigidMotion::zero(2)) == doctest::Approx(5));
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = trial % 2 ? 3 : 2;
    const RigidMotion a = gen::rigid(rng, d), b = gen::rigid(rng, d);
    const double exact = unit_ball_distance(a, b);
    double sampled = 0;
    for (int s = 0; s < 20000; ++s) {
      const Vec x = gen::unit(rng, d);
      sampled = std::max(sampled, (a(x) - b(x)).norm());
    }
    CHECK(exact >= sampled - 1e-12);
    CHECK(exact <= sampled * 1.02 + 1e-12);
    CHECK(unit_ball_distance(a, b) == doctest::Approx(unit_ball_distance(b, a)));
  }
}

TEST_CASE("pair verdicts") {
  CHECK(classify_pair(std::vector<double>(10, 0.01), 0.1, 1) == PairVerdict::Bounded);
  CHECK(classify_pair(std::vector<double>(10, 5.0), 0.1, 1) == PairVerdict::Bounded);
  CHECK(classify_pair(linear(10, 1, 3), 0.1, 1) == PairVerdict::Diverging);
  CHECK(classify_pair(linear(10, 1), 0.1, 1) == PairVerdict::Diverging);
  CHECK(classify_pair(linear(10, 0.05, 0.2), 0.1, 10) == PairVerdict::Indeterminate);
  std::vector<double> spike = linear(10, 1);
  spike.back() = 2;
  CHECK(classify_pair(spike, 0.1, 1) != PairVerdict::Diverging);
}

TEST_CASE("motion clustering") {
  const int K = 10;
  auto node = [&](const RigidMotion& base, const RigidMotion& rate) {
    std::vector<RigidMotion> m;
    for (int k = 1; k <= K; ++k) m.push_back(base + rate.scaled(k));
    return m;
  };
  const RigidMotion zero = RigidMotion::zero(2);
  const RigidMotion shift = RigidMotion::translation(v2(1, 0));
  const RigidMotion spin(J(), v2(0, 0));
  {
    const Clustering c = cluster_motions({node(zero, zero), node(zero, zero), node(zero, zero)}, 0.01, 1);
    CHECK(c.classes.size() == 1);
  }
  {
    const Clustering c = cluster_motions({node(zero, zero), node(zero, shift), node(zero, zero), node(zero, shift)}, 0.01, 1);
    REQUIRE(c.classes.size() == 2);
    CHECK(c.node_class[0] == c.node_class[2]);
    CHECK(c.node_class[1] == c.node_class[3]);
    REQUIRE(c.class_pairs.size() == 1);
    for (int k = 0; k < K; ++k) CHECK(c.class_pairs[0].distance[static_cast<std::size_t>(k)] == doctest::Approx(k + 1));
  }
  {
    const Clustering c = cluster_motions({node(zero, zero), node(zero, spin)}, 0.01, 1);
    CHECK(c.classes.size() == 2);
  }
  {
    const RigidMotion slow = RigidMotion::translation(v2(0.02, 0));
    CHECK_THROWS_AS(cluster_motions({node(zero, zero), node(zero, slow)}, 0.01, 10), ClusteringAmbiguity);
  }
  {
    const std::vector<std::pair<std::size_t, std::size_t>> forced{{0, 1}};
    CHECK_THROWS_AS(cluster_motions({node(zero, zero), node(zero, shift)}, 0.01, 1, forced), ClusteringAmbiguity);
  }
}

TEST_CASE("partition of a two-piece diverging sequence") {
  const SequenceSpec spec = two_piece_suite(1.0 / 64, 10);
  const auto seq = generate_all(spec);
  const PartitionResult r = build_partition(seq);
  CHECK(r.partition.pieces() == 2);
  CHECK(oracle::best_label_agreement(spec.labels, r.partition.labels()) >= 0.99);
  CHECK(r.partition.perimeter() == doctest::Approx(1.0).epsilon(0.1));
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const Vec left = r.motions[k](v2(0.25, 0.5)), right = r.motions[k](v2(0.75, 0.5));
    CHECK((right - left - v2(static_cast<double>(k + 1), 0)).norm() < 1e-6);
  }
  for (const auto& s : r.report.scales) CHECK(s.bad_volume <= s.bad_volume_bound * (1 + 1e-12));
}

TEST_CASE("partition of a fixed smooth field is a single piece") {
  std::mt19937_64 rng(3);
  const auto f = gen::smooth(rng, 2, 0.1);
  const DisplacementField u = DisplacementField::from_function(Domain::unit_square(1.0 / 64), f, {}, false);
  const std::vector<DisplacementField> seq(6, u);
  const PartitionResult r = build_partition(seq);
  CHECK(r.partition.pieces() == 1);
  CHECK(r.partition.perimeter() == 0);
}

TEST_CASE("partition of three diverging stripes") {
  const SequenceSpec spec = three_stripe_suite(1.0 / 64, 10);
  const PartitionResult r = build_partition(generate_all(spec));
  CHECK(r.partition.pieces() == 3);
  CHECK(oracle::best_label_agreement(spec.labels, r.partition.labels()) >= 0.99);
  CHECK(r.partition.perimeter() == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("partition labels are stable under the master seed") {
  const SequenceSpec spec = rotation_suite(1.0 / 64, 10);
  const auto seq = generate_all(spec);
  PartitionOptions a, b;
  a.seed = 1;
  b.seed = 2;
  const auto la = build_partition(seq, a).partition.labels();
  const auto lb = build_partition(seq, b).partition.labels();
  CHECK(oracle::best_label_agreement(la, lb) >= 0.99);
}

TEST_CASE("divergence along directions") {
  const Domain dom = Domain::unit_square(1.0 / 16);
  std::vector<int> labels(dom.cell_count());
  for (std::size_t c = 0; c < labels.size(); ++c) labels[c] = dom.cell_center(c)[0] > 0.5 ? 2 : 1;
  const CaccioppoliPartition P(dom, labels);
  std::vector<PiecewiseRigidMotion> motions;
  std::vector<PiecewiseRigidMotion> generic;
  Mat W(2, 2);
  W << 0, 0.3, -0.3, 0;
  for (int k = 1; k <= 10; ++k) {
    motions.emplace_back(P, std::vector<RigidMotion>{RigidMotion::zero(2), RigidMotion::translation(v2(k, 0))});
    generic.emplace_back(P, std::vector<RigidMotion>{RigidMotion::zero(2), RigidMotion(k * W, v2(k, 2.0 * k))});
  }
  const std::vector<Vec> xs{v2(0.3, 0.4), v2(0.6, 0.7)};
  const std::vector<Vec> across{v2(1, 0)}, along{v2(0, 1)};
  CHECK(verify_divergence(motions, across, xs, 1).flagged.empty());
  const DivergenceReport flat = verify_divergence(motions, along, xs, 1);
  CHECK(flat.flagged.size() == flat.samples);
  std::mt19937_64 rng(19);
  std::vector<Vec> random;
  for (int i = 0; i < 64; ++i) random.push_back(gen::unit(rng, 2));
  const std::vector<Vec> x1{v2(0.3, 0.4)};
  CHECK(verify_divergence(generic, random, x1, 0.1).passed >= 63);
}
