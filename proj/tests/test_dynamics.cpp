#include "mfpg/diagnostics.hpp"
#include "mfpg/dynamics.hpp"
#include "mfpg/errors.hpp"
#include "mfpg/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

using namespace mfpg;
using mfpg::test::sup_diff;

namespace {

const FeatureConfig relu_cfg{FeatureKind::relu};
const FeatureConfig tanh_cfg{FeatureKind::tanh};

// Installs the reward under which `e` represents the soft-optimal policy.
MdpSpec make_optimal_for(MdpSpec mdp, const Ensemble& e) {
  const QTable q_star{mdp.tau * energy_field(e, mdp)};
  mdp.mean_reward = invert_soft_bellman(q_star, mdp);
  return mdp;
}

double ensemble_energy(const Ensemble& e, const MdpSpec& mdp) {
  return energy(softmax_policy(energy_field(e, mdp), mdp), mdp);
}

VelocityField velocity_of(const Ensemble& e, const MdpSpec& mdp) {
  const EnsembleState st = evaluate_ensemble(e, mdp);
  return particle_velocity(e, st.policy, st.evaluation.q, st.rho, mdp);
}

double max_abs(const VelocityField& v) {
  double m = 0.0;
  for (const auto& p : v.per_particle) {
    for (double x : p) m = std::max(m, std::abs(x));
  }
  return m;
}

}  // namespace

TEST_CASE("covariance_row") {
  SUBCASE("constant f") {
    const std::vector<double> f(5, 2.5), g{1, -2, 3, 0.5, 7}, pi{0.5, 1.5, 1.0, 0.2, 1.8};
    CHECK(std::abs(covariance_row(f, g, pi, 0.2)) < 1e-15);
  }
  SUBCASE("variance of +-1") {
    const std::vector<double> f{1.0, -1.0}, pi{1.0, 1.0};
    CHECK(covariance_row(f, f, pi, 0.5) == 1.0);
  }
  SUBCASE("two-pass oracle") {
    const CounterRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = 3 + trial % 11;
      const double w = 1.0 / n;
      std::vector<double> f(n), g(n), pi(n);
      double z = 0.0;
      for (int a = 0; a < n; ++a) {
        f[a] = rng.uniform(1000 * trial + 3 * a, -2, 2);
        g[a] = rng.uniform(1000 * trial + 3 * a + 1, -2, 2);
        pi[a] = rng.uniform(1000 * trial + 3 * a + 2, 0.1, 2.0);
        z += w * pi[a];
      }
      for (double& p : pi) p /= z;
      double ef = 0.0, eg = 0.0;
      for (int a = 0; a < n; ++a) {
        ef += w * pi[a] * f[a];
        eg += w * pi[a] * g[a];
      }
      double cov = 0.0;
      for (int a = 0; a < n; ++a) cov += w * pi[a] * (f[a] - ef) * (g[a] - eg);
      CHECK(std::abs(covariance_row(f, g, pi, w) - cov) <= 1e-14);
    }
  }
}

TEST_CASE("particle_velocity vanishes at the optimum") {
  for (FeatureKind kind : {FeatureKind::relu, FeatureKind::tanh}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const Ensemble e = random_ensemble(6, seed, 2.0, FeatureConfig{kind});
      const MdpSpec mdp = make_optimal_for(random_mdp(4, 5, 0.7, 0.2, seed), e);
      CHECK(max_abs(velocity_of(e, mdp)) <= 1e-10);
    }
  }
}

TEST_CASE("particle_velocity is N times the energy gradient") {
  const double h = 1e-5;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MdpSpec mdp = random_mdp(3, 4, 0.6, 0.3, seed);
    const Ensemble e = random_ensemble(5, seed + 10, 1.0, tanh_cfg);
    const VelocityField v = velocity_of(e, mdp);
    for (std::size_t i = 0; i < e.size(); ++i) {
      for (std::size_t k = 0; k < 4; ++k) {
        Ensemble up = e, dn = e;
        double& xu = k == 0 ? up.particles[i].omega0 : up.particles[i].omega_bar[k - 1];
        double& xd = k == 0 ? dn.particles[i].omega0 : dn.particles[i].omega_bar[k - 1];
        xu += h;
        xd -= h;
        const double fd = 5.0 * (ensemble_energy(up, mdp) - ensemble_energy(dn, mdp)) / (2 * h);
        const double vk = v.per_particle[i][k];
        const double gap = std::abs(vk - fd) / std::max({std::abs(vk), std::abs(fd), 1e-4});
        CHECK_MESSAGE(gap <= 1e-5, "particle " << i << " coordinate " << k << " v=" << vk << " fd=" << fd);
      }
    }
  }
}

TEST_CASE("velocity homogeneity in omega0") {
  const MdpSpec mdp = random_mdp(3, 6, 0.5, 0.2, 4);
  const Ensemble e = random_ensemble(9, 5, 4.0, relu_cfg);
  const EnsembleState st = evaluate_ensemble(e, mdp);
  const kernels::CellWeights cells = transport_weights(st.policy, st.evaluation.q, st.rho, mdp);
  for (FeatureConfig cfg : {relu_cfg, tanh_cfg}) {
    std::vector<Particle> probes(e.particles.begin(), e.particles.end());
    std::vector<Particle> doubled = probes;
    for (auto& p : doubled) p.omega0 *= 2.0;
    const VelocityField a = velocity_in_field(probes, cfg, cells);
    const VelocityField b = velocity_in_field(doubled, cfg, cells);
    for (std::size_t i = 0; i < probes.size(); ++i) {
      CHECK(a.per_particle[i][0] == b.per_particle[i][0]);
      for (std::size_t k = 1; k < 4; ++k) CHECK(std::abs(b.per_particle[i][k] - 2.0 * a.per_particle[i][k]) <= 1e-13);
    }
  }
}

TEST_CASE("constant-feature particle does not move the others") {
  const MdpSpec mdp = random_mdp(4, 5, 0.6, 0.25, 6);
  Ensemble a = random_ensemble(7, 3, 4.0, relu_cfg);
  Ensemble b = a;
  a.particles.push_back({0.0, {0.0, 0.0, 1.0}});
  b.particles.push_back({2.5, {0.0, 0.0, 1.0}});
  const VelocityField va = velocity_of(a, mdp);
  const VelocityField vb = velocity_of(b, mdp);
  for (std::size_t i = 0; i < 7; ++i) {
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(va.per_particle[i][k] - vb.per_particle[i][k]) <= 1e-12);
  }
}

TEST_CASE("particle_velocity shape errors") {
  const MdpSpec mdp = random_mdp(3, 4, 0.5, 0.2, 1);
  const Ensemble e = random_ensemble(4, 1, 1.0, relu_cfg);
  const EnsembleState st = evaluate_ensemble(e, mdp);
  CHECK_THROWS_AS(particle_velocity(e, st.policy, QTable{Matrix::Zero(2, 4)}, st.rho, mdp), ShapeError);
  CHECK_THROWS_AS(particle_velocity(e, st.policy, st.evaluation.q, OccupancyVector{Vector::Ones(5)}, mdp), ShapeError);
}

TEST_CASE("euler_step") {
  const Ensemble e = random_ensemble(6, 2, 1.0, relu_cfg);
  VelocityField v;
  v.per_particle.assign(6, {0.3, -1.0, 2.0, 0.1});
  CHECK(euler_step(e, v, 0.0) == e);

  const Ensemble one{{{1.0, {0.2, 0.3, 0.4}}}, relu_cfg};
  VelocityField unit;
  unit.per_particle = {{1.0, 0.0, 0.0, 0.0}};
  const Ensemble moved = euler_step(one, unit, 0.5);
  CHECK(moved.particles[0].omega0 == 1.5);
  CHECK(moved.particles[0].omega_bar == one.particles[0].omega_bar);

  // Frozen velocity: two steps of beta agree with one of 2 beta.
  const Ensemble two = euler_step(euler_step(e, v, 0.25), v, 0.25);
  const Ensemble big = euler_step(e, v, 0.5);
  for (std::size_t i = 0; i < e.size(); ++i) {
    CHECK(std::abs(two.particles[i].omega0 - big.particles[i].omega0) <= 1e-15);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(two.particles[i].omega_bar[k] - big.particles[i].omega_bar[k]) <= 1e-15);
  }

  CHECK_THROWS_AS(euler_step(e, unit, 0.1), ShapeError);
}

TEST_CASE("train") {
  const MdpSpec mdp = random_mdp(4, 4, 0.5, 0.2, 3);
  const Ensemble e0 = random_ensemble(12, 7, 1.0, relu_cfg);
  const double oracle = energy(soft_value_iteration(mdp, 1e-12, 100000).policy, mdp);

  SUBCASE("zero steps") {
    const TrainResult r = train(mdp, e0, 0, 1e-3, 10, oracle);
    CHECK(r.ensemble == e0);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].step == 0);
    CHECK(r.records[0].error == doctest::Approx(oracle - ensemble_energy(e0, mdp)).epsilon(1e-14));
    CHECK(r.records[0].wall_ms == 0.0);
  }
  SUBCASE("record schedule") {
    const TrainResult r = train(mdp, e0, 25, 1e-3, 10, oracle);
    REQUIRE(r.records.size() == 4);
    CHECK(r.records[0].step == 0);
    CHECK(r.records[1].step == 10);
    CHECK(r.records[2].step == 20);
    CHECK(r.records[3].step == 25);
  }
  SUBCASE("energy ascent") {
    const TrainResult r = train(mdp, e0, 300, 1e-3, 1, oracle);
    for (std::size_t k = 1; k < r.records.size(); ++k) {
      CHECK(r.records[k].energy >= r.records[k - 1].energy - 1e-9 * std::max(1.0, std::abs(r.records[k - 1].energy)));
      CHECK(r.records[k].error >= -1e-9);
    }
    CHECK(r.records.back().error < r.records.front().error);
  }
  SUBCASE("deterministic") {
    const TrainResult a = train(mdp, e0, 40, 1e-3, 5, oracle);
    const TrainResult b = train(mdp, e0, 40, 1e-3, 5, oracle);
    CHECK(a.ensemble == b.ensemble);
    std::ostringstream ca, cb;
    write_records_csv(ca, a.records);
    write_records_csv(cb, b.records);
    CHECK(ca.str() == cb.str());
  }
  SUBCASE("optimal start is a fixed point") {
    const Ensemble t = random_ensemble(5, 21, 4.0, relu_cfg);
    const MdpSpec opt = make_optimal_for(mdp, t);
    const TrainResult r = train(opt, t, 100, 1e-3, 100, 0.0);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(std::abs(r.ensemble.particles[i].omega0 - t.particles[i].omega0) <= 1e-8);
      for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(r.ensemble.particles[i].omega_bar[k] - t.particles[i].omega_bar[k]) <= 1e-8);
    }
  }
  SUBCASE("divergence carries the step") {
    Ensemble bad = e0;
    bad.particles[0].omega0 = std::numeric_limits<double>::infinity();
    try {
      train(mdp, bad, 5, 1e-3, 1, oracle);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& err) {
      CHECK(err.step() == 0);
    }
    try {
      train(mdp, e0, 5, 1e300, 1, oracle);
      FAIL("expected DivergenceError");
    } catch (const DivergenceError& err) {
      CHECK(err.step() >= 1);
    }
  }
  SUBCASE("on_step callback") {
    std::vector<long> seen;
    TrainOptions opts;
    opts.on_step = [&](long step, const Ensemble&) { seen.push_back(step); };
    train(mdp, e0, 3, 1e-3, 1, oracle, opts);
    CHECK(seen == std::vector<long>{1, 2, 3});
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(train(mdp, e0, -1, 1e-3, 1, oracle), PreconditionError);
    CHECK_THROWS_AS(train(mdp, e0, 1, 0.0, 1, oracle), PreconditionError);
    CHECK_THROWS_AS(train(mdp, e0, 1, 1e-3, 0, oracle), PreconditionError);
  }
}

TEST_CASE("records CSV") {
  std::vector<TrainRecord> recs{{0, -1.5, 0.25, 0.5, 0.125, 0.0}};
  std::ostringstream out;
  write_records_csv(out, recs);
  std::istringstream in(out.str());
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "step,energy,error,residual_sup,grad_norm,wall_ms");
  CHECK(row.rfind("0,", 0) == 0);
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("VelocityField summaries") {
  VelocityField v;
  v.per_particle = {{3.0, 4.0, 0.0, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  CHECK(v.rms() == doctest::Approx(std::sqrt(12.5)).epsilon(1e-15));
  CHECK(v.all_finite());
  v.per_particle[1][2] = std::nan("");
  CHECK_FALSE(v.all_finite());
}

TEST_CASE("residual_sup vanishes at the optimum") {
  const Ensemble e = random_ensemble(4, 9, 2.0, relu_cfg);
  const MdpSpec mdp = make_optimal_for(random_mdp(3, 3, 0.8, 0.2, 9), e);
  CHECK(residual_sup(evaluate_ensemble(e, mdp), mdp.tau) <= 1e-10);
}
