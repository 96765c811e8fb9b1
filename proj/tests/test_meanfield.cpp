#include "mfpg/diagnostics.hpp"
#include "mfpg/errors.hpp"
#include "mfpg/meanfield.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace mfpg;
using mfpg::test::sup_diff;

namespace {

const FeatureConfig relu_cfg{FeatureKind::relu};
const FeatureConfig tanh_cfg{FeatureKind::tanh};

MdpSpec grid(int n_s, int n_a) { return random_mdp(n_s, n_a, 0.5, 0.2, 1); }

double relu(double z) { return z > 0 ? z : 0.0; }

}  // namespace

TEST_CASE("feature values") {
  CHECK(feature(0.3, 0.9, {1.0, 1.0, 0.0}, relu_cfg) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(feature(0.3, 0.9, {-1.0, -1.0, 0.0}, relu_cfg) == 0.0);
  CHECK(feature(0.0, 0.25, {0.0, 2.0, -0.5}, relu_cfg) == 0.0);
  CHECK(feature(0.5, 0.5, {0.0, 0.0, 0.0}, tanh_cfg) == 0.0);
  CHECK(feature(0.5, 0.5, {1.0, 1.0, 1.0}, tanh_cfg) == doctest::Approx(std::tanh(2.0)).epsilon(1e-15));
  CHECK(feature(0.5, 0.5, {0.0, 0.0, 7.0}, relu_cfg) == 7.0);
  CHECK(feature(0.3, 0.4, {1.0, 1.0, 0.0}, relu_cfg) == doctest::Approx(0.7).epsilon(1e-15));
  for (double s : {0.0, 0.35, 1.0}) {
    for (double a : {0.0, 0.6, 1.0}) {
      CHECK(feature(s, a, {0.0, 0.0, 1.0}, relu_cfg) == 1.0);
      CHECK(feature(s, a, {1.0, 0.0, -2.0}, relu_cfg) == 0.0);
      const InnerWeights g = feature_grad(s, a, {0.0, 0.0, 0.0}, tanh_cfg);
      CHECK((g[0] == s && g[1] == a && g[2] == 1.0));
    }
  }
  const InnerWeights g = feature_grad(0.2, 0.9, {0.0, 0.0, 0.5}, relu_cfg);
  CHECK((g[0] == 0.2 && g[1] == 0.9 && g[2] == 1.0));
  const InnerWeights off = feature_grad(0.2, 0.9, {0.0, 0.0, -1.0}, relu_cfg);
  CHECK((off[0] == 0.0 && off[1] == 0.0 && off[2] == 0.0));
}

TEST_CASE("feature gradients") {
  const InnerWeights g = feature_grad(0.3, 0.9, {1.0, 1.0, 0.0}, relu_cfg);
  CHECK(g[0] == 0.3);
  CHECK(g[1] == 0.9);
  CHECK(g[2] == 1.0);
  const InnerWeights dead = feature_grad(0.3, 0.9, {-1.0, -1.0, 0.0}, relu_cfg);
  CHECK((dead[0] == 0.0 && dead[1] == 0.0 && dead[2] == 0.0));
  // Subgradient 0 at the kink.
  const InnerWeights kink = feature_grad(0.5, 0.5, {0.0, 0.0, 0.0}, relu_cfg);
  CHECK((kink[0] == 0.0 && kink[1] == 0.0 && kink[2] == 0.0));

  // tanh: central differences in each inner coordinate.
  const InnerWeights w{0.7, -1.3, 0.4};
  const InnerWeights gt = feature_grad(0.2, 0.6, w, tanh_cfg);
  const double h = 1e-6;
  for (int k = 0; k < 3; ++k) {
    InnerWeights up = w, dn = w;
    up[k] += h;
    dn[k] -= h;
    const double fd = (feature(0.2, 0.6, up, tanh_cfg) - feature(0.2, 0.6, dn, tanh_cfg)) / (2 * h);
    CHECK(std::abs(gt[k] - fd) < 1e-9);
  }
}

TEST_CASE("energy_field") {
  const MdpSpec mdp = grid(2, 2);
  SUBCASE("zero output weights") {
    Ensemble e = random_ensemble(17, 3, 4.0, relu_cfg);
    for (auto& p : e.particles) p.omega0 = 0.0;
    CHECK(energy_field(e, mdp).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("single constant particle") {
    const Ensemble e{{{2.0, {0.0, 0.0, 1.0}}}, relu_cfg};
    CHECK(sup_diff(energy_field(e, mdp), Matrix::Constant(2, 2, 2.0)) == 0.0);
  }
  SUBCASE("three particles, direct summation") {
    const Ensemble e{{{1.0, {1.0, -1.0, 0.2}}, {-2.0, {0.5, 0.5, -0.3}}, {0.5, {-1.0, 2.0, 0.0}}}, relu_cfg};
    const double c[2] = {0.25, 0.75};
    Matrix expect(2, 2);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double s = c[i], a = c[j];
        expect(i, j) = (1.0 * relu(s - a + 0.2) - 2.0 * relu(0.5 * s + 0.5 * a - 0.3) + 0.5 * relu(-s + 2 * a)) / 3.0;
      }
    }
    CHECK(sup_diff(energy_field(e, mdp), expect) < 1e-15);
  }
  SUBCASE("tanh uses the same convention") {
    const Ensemble e{{{1.5, {0.3, -0.8, 0.1}}, {-0.5, {1.0, 1.0, -1.0}}}, tanh_cfg};
    const MdpSpec m = grid(3, 4);
    const Matrix f = energy_field(e, m);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) {
        const double s = m.state_coord(i), a = m.action_coord(j);
        const double x = (1.5 * std::tanh(0.3 * s - 0.8 * a + 0.1) - 0.5 * std::tanh(s + a - 1.0)) / 2.0;
        CHECK(std::abs(f(i, j) - x) < 1e-15);
      }
    }
  }
  SUBCASE("permutation invariance") {
    for (FeatureKind kind : {FeatureKind::relu, FeatureKind::tanh}) {
      Ensemble e = random_ensemble(1000, 8, 4.0, FeatureConfig{kind});
      const Matrix f = energy_field(e, grid(4, 13));
      std::reverse(e.particles.begin(), e.particles.end());
      CHECK(sup_diff(energy_field(e, grid(4, 13)), f) <= 1e-13);
    }
  }
  SUBCASE("linearity in one output weight") {
    const MdpSpec m = grid(3, 5);
    Ensemble e = random_ensemble(9, 4, 1.0, relu_cfg);
    const Matrix f = energy_field(e, m);
    const Particle p = e.particles[4];
    e.particles[4].omega0 *= 2.0;
    const Matrix g = energy_field(e, m);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 5; ++j) {
        const double contrib = p.omega0 * feature(m.state_coord(i), m.action_coord(j), p.omega_bar, relu_cfg) / 9.0;
        CHECK(std::abs(g(i, j) - f(i, j) - contrib) < 1e-14);
      }
    }
  }
  SUBCASE("empty ensemble") { CHECK_THROWS_AS(energy_field(Ensemble{{}, relu_cfg}, mdp), PreconditionError); }
}

TEST_CASE("softmax_policy") {
  const MdpSpec mdp = grid(1, 2);
  SUBCASE("zero field is uniform") {
    CHECK(sup_diff(softmax_policy(Matrix::Zero(3, 7), grid(3, 7)).density, Matrix::Ones(3, 7)) <= 1e-15);
  }
  SUBCASE("two cells") {
    Matrix f(1, 2);
    f << std::log(2.0), 0.0;
    const PolicyTable pi = softmax_policy(f, mdp);
    CHECK(pi.density(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-15));
    CHECK(pi.density(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  SUBCASE("row shift invariance") {
    const MdpSpec m = grid(4, 9);
    const QTable q = random_q(m, 5, -3, 3);
    Matrix shifted = q.values;
    for (int s = 0; s < 4; ++s) shifted.row(s).array() += 10.0 * (s + 1);
    CHECK(sup_diff(softmax_policy(q.values, m).density, softmax_policy(shifted, m).density) <= 1e-12);
  }
  SUBCASE("large fields stay finite") {
    const MdpSpec m = grid(2, 5);
    const PolicyTable pi = softmax_policy(random_q(m, 6, -800, 800).values, m);
    CHECK(pi.density.allFinite());
    for (int s = 0; s < 2; ++s) CHECK(std::abs(m.action_weight * pi.density.row(s).sum() - 1.0) < 1e-12);
  }
  SUBCASE("shape mismatch") { CHECK_THROWS_AS(softmax_policy(Matrix::Zero(2, 2), mdp), ShapeError); }
}

TEST_CASE("constant-feature particle leaves the policy unchanged") {
  const MdpSpec m = grid(3, 6);
  const Ensemble base = random_ensemble(11, 12, 4.0, relu_cfg);
  Ensemble a = base, b = base;
  a.particles.push_back({0.0, {0.0, 0.0, 1.0}});
  b.particles.push_back({-7.5, {0.0, 0.0, 1.0}});
  CHECK(sup_diff(softmax_policy(energy_field(a, m), m).density, softmax_policy(energy_field(b, m), m).density) <= 1e-12);
}

TEST_CASE("init_ensemble") {
  SUBCASE("deterministic in the seed") {
    CHECK(init_ensemble(50, 7, 4.0, 0.0, relu_cfg) == init_ensemble(50, 7, 4.0, 0.0, relu_cfg));
    CHECK_FALSE(init_ensemble(50, 7, 4.0, 0.0, relu_cfg) == init_ensemble(50, 8, 4.0, 0.0, relu_cfg));
  }
  SUBCASE("sample variance of inner weights") {
    const Ensemble e = init_ensemble(10000, 3, 4.0, 0.0, relu_cfg);
    for (int k = 0; k < 3; ++k) {
      double mean = 0.0;
      for (const auto& p : e.particles) mean += p.omega_bar[k];
      mean /= 10000;
      double var = 0.0;
      for (const auto& p : e.particles) var += (p.omega_bar[k] - mean) * (p.omega_bar[k] - mean);
      var /= 9999;
      CHECK(var >= 3.7);
      CHECK(var <= 4.3);
    }
  }
  SUBCASE("zero output weights give the uniform policy") {
    const MdpSpec m = grid(3, 8);
    const Ensemble e = init_ensemble(40, 1, 4.0, 0.0, relu_cfg);
    for (const auto& p : e.particles) CHECK(p.omega0 == 0.0);
    CHECK(sup_diff(softmax_policy(energy_field(e, m), m).density, Matrix::Ones(3, 8)) == 0.0);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(init_ensemble(0, 1, 4.0, 0.0, relu_cfg), PreconditionError);
    CHECK_THROWS_AS(init_ensemble(5, 1, 0.0, 0.0, relu_cfg), PreconditionError);
  }
}

TEST_CASE("replicate preserves the field") {
  const MdpSpec m = grid(3, 5);
  const Ensemble e = random_ensemble(5, 2, 4.0, relu_cfg);
  const Ensemble r = replicate(e, 4);
  CHECK(r.size() == 20);
  CHECK(sup_diff(energy_field(r, m), energy_field(e, m)) < 1e-14);
}

TEST_CASE("checkpoint round trip") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const FeatureConfig cfg{seed % 2 ? FeatureKind::tanh : FeatureKind::relu};
    const Ensemble e = random_ensemble(1 + static_cast<int>(seed) * 7, seed, 3.0, cfg);
    std::stringstream buf;
    write_checkpoint(buf, e);
    CHECK(read_checkpoint(buf) == e);
  }
  std::istringstream bad_magic("MFPG v0\nN=1 dim=3 feature=relu\n1 2 3 4\n");
  CHECK_THROWS_AS(read_checkpoint(bad_magic), IoError);
  std::istringstream truncated("MFPG-CKPT v1\nN=2 dim=3 feature=relu\n1 2 3 4\n");
  CHECK_THROWS_AS(read_checkpoint(truncated), IoError);
  std::istringstream bad_kind("MFPG-CKPT v1\nN=1 dim=3 feature=sigmoid\n1 2 3 4\n");
  CHECK_THROWS_AS(read_checkpoint(bad_kind), IoError);
}

TEST_CASE("feature kind names") {
  CHECK(parse_feature_kind("relu") == FeatureKind::relu);
  CHECK(parse_feature_kind(to_string(FeatureKind::tanh)) == FeatureKind::tanh);
  CHECK_THROWS_AS(parse_feature_kind("gelu"), ConfigError);
}
