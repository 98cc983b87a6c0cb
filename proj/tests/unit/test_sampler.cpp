#include <doctest.h>

#include "hmtm/diagnostics.hpp"
#include "hmtm/postprocess.hpp"
#include "hmtm/sampler.hpp"
#include "hmtm/synth.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace hmtm;

namespace {

CorrectedTensor scenario_data(synth::Scenario sc, std::uint64_t seed) {
  const auto sched = synth::default_schedule(sc, 10, 40);
  return degree_correct(synth::make_block_network_change(sched, {0.5, 0.05}, seed), NullModelKind::PrincipalEigen);
}

HmtmConfig quick(int breaks, std::uint64_t seed) {
  HmtmConfig c;
  c.n_breaks = breaks;
  c.rank = 2;
  c.burnin = 500;
  c.mcmc = 500;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("initialization satisfies the state invariants") {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    const int N = 4 + static_cast<int>(rng.uniform_index(8)), T = 2 + static_cast<int>(rng.uniform_index(10));
    HmtmConfig c;
    c.n_breaks = static_cast<int>(rng.uniform_index(std::min(T / 2, 3)));
    c.rank = 1 + static_cast<int>(rng.uniform_index(3));
    c.with_intercept = rep % 2;
    const CorrectedTensor B = oracle::random_tensor(N, T, 1.0, rng);
    const HmtmState s = initialize_state(B, c);
    CHECK_NOTHROW(s.validate());
    CHECK(s.path.states.front() == 0);
    CHECK(s.path.states.back() == c.n_breaks);
  }
}

TEST_CASE("single regime initialization starts with all layers in regime 1") {
  Rng rng(42);
  const CorrectedTensor B = oracle::random_tensor(6, 4, 1.0, rng);
  const HmtmState s = initialize_state(B, HmtmConfig{});
  CHECK(s.path.states == std::vector<int>(4, 0));
  CHECK(s.path.transition.rows() == 1);
  CHECK(s.path.transition(0, 0) == 1.0);
}

TEST_CASE("noise-free rank-R data is reproduced by the initialization") {
  Rng rng(43);
  const int N = 10, T = 4, R = 2;
  Matrix U(N, R);
  for (int i = 0; i < N; ++i) U.row(i) << rng.normal(), rng.normal();
  // The model only represents orthogonal columns.
  gibbs::orthogonalize_columns(U);
  CorrectedTensor B;
  B.n_nodes = N;
  B.n_layers = T;
  for (int t = 0; t < T; ++t) {
    Vector v(R);
    v << 3.0 + t, -2.0 + 0.5 * t;
    Matrix L = U * v.asDiagonal() * U.transpose();
    L.diagonal().setZero();
    B.layers.push_back(L);
  }
  HmtmConfig c;
  c.rank = R;
  const HmtmState s = initialize_state(B, c);
  double ssr = 0, total = 0;
  for (int t = 0; t < T; ++t) {
    ssr += oracle::naive_ssr(B.layers[t], s.U[0], s.V.row(t).transpose(), 0.0);
    total += B.layers[t].squaredNorm() / 2;
  }
  CHECK(ssr / total < 1e-8);
}

TEST_CASE("a chain is deterministic in its seed") {
  Rng rng(44);
  const CorrectedTensor B = oracle::random_tensor(6, 8, 1.0, rng);
  HmtmConfig c;
  c.n_breaks = 1;
  c.burnin = 30;
  c.mcmc = 20;
  c.seed = 99;
  const McmcTrace a = fit_hmtm(B, c), b = fit_hmtm(B, c);
  REQUIRE(a.n_draws() == b.n_draws());
  CHECK(a.loglayer == b.loglayer);
  CHECK(a.breakpoints == b.breakpoints);
  for (int g = 0; g < a.n_draws(); ++g) CHECK(a.draws[g].U[0] == b.draws[g].U[0]);
  c.seed = 100;
  CHECK(fit_hmtm(B, c).loglayer != a.loglayer);
}

TEST_CASE("thinning stores mcmc / thin draws") {
  Rng rng(45);
  const CorrectedTensor B = oracle::random_tensor(5, 6, 1.0, rng);
  HmtmConfig c;
  c.burnin = 5;
  c.mcmc = 21;
  c.thin = 4;
  const McmcTrace t = fit_hmtm(B, c);
  CHECK(t.n_draws() == 5);
  CHECK(t.loglayer.rows() == 5);
  CHECK(t.loglayer.allFinite());
}

TEST_CASE("fixed blocks are never updated") {
  Rng rng(46);
  const CorrectedTensor B = oracle::random_tensor(5, 6, 1.0, rng);
  const HmtmState truth = oracle::random_state(5, 6, 2, 2, rng);
  HmtmConfig c;
  c.n_breaks = 1;
  c.burnin = 10;
  c.mcmc = 10;
  c.fixed.U = truth.U;
  c.fixed.sigma2 = truth.sigma2;
  c.fixed.states = truth.path.states;
  c.fixed.transition = truth.path.transition;
  const McmcTrace t = fit_hmtm(B, c);
  for (const HmtmState& s : t.draws) {
    CHECK(s.U[0] == truth.U[0]);
    CHECK(s.U[1] == truth.U[1]);
    CHECK(s.sigma2 == truth.sigma2);
    CHECK(s.path.states == truth.path.states);
    CHECK(s.path.transition == truth.path.transition);
  }
}

TEST_CASE("config validation") {
  HmtmConfig c;
  c.rank = 7;
  CHECK_THROWS_AS(c.validate(6, 10), std::invalid_argument);
  c = HmtmConfig{};
  c.n_breaks = 5;
  CHECK_THROWS_AS(c.validate(6, 10), std::invalid_argument);
  c = HmtmConfig{};
  c.thin = 2000;
  CHECK_THROWS_AS(c.validate(6, 10), std::invalid_argument);
  c = HmtmConfig{};
  c.n_breaks = 1;
  c.perturb_weights = {0.3, 0.3};
  CHECK_THROWS_AS(c.validate(6, 10), std::invalid_argument);
  c.perturb_weights = {0.3, 0.7};
  CHECK_NOTHROW(c.validate(6, 10));
  c = HmtmConfig{};
  c.priors.c0 = 0;
  CHECK_THROWS_AS(c.validate(6, 10), std::invalid_argument);
}

TEST_CASE("one regime on any data keeps the path at regime 1") {
  Rng rng(47);
  const CorrectedTensor B = oracle::random_tensor(5, 6, 1.0, rng);
  HmtmConfig c;
  c.burnin = 10;
  c.mcmc = 10;
  for (const HmtmState& s : fit_hmtm(B, c).draws) CHECK(s.path.states == std::vector<int>(6, 0));
}

TEST_CASE("student-t errors and the intercept run and give finite densities") {
  const CorrectedTensor B = scenario_data(synth::Scenario::Split, 5);
  HmtmConfig c = quick(1, 3);
  c.burnin = 100;
  c.mcmc = 100;
  c.error_kind = ErrorKind::StudentT;
  c.with_intercept = true;
  const McmcTrace t = fit_hmtm(B, c);
  CHECK(t.loglayer.allFinite());
  for (const HmtmState& s : t.draws) CHECK((s.gamma.array() > 0).all());
}

TEST_CASE("the joint U update runs") {
  Rng rng(48);
  const CorrectedTensor B = oracle::random_tensor(6, 6, 1.0, rng);
  HmtmConfig c;
  c.u_update = UUpdate::Joint;
  c.anchor_scale = false;
  c.burnin = 20;
  c.mcmc = 20;
  const McmcTrace t = fit_hmtm(B, c);
  CHECK(t.loglayer.allFinite());
  for (const HmtmState& s : t.draws) CHECK_NOTHROW(s.validate());
}

TEST_CASE("split data: two regimes find the planted break") {
  const McmcTrace t = fit_hmtm(scenario_data(synth::Scenario::Split, 1), quick(1, 11));
  const DiagnosticsReport r = make_report(t);
  REQUIRE(r.mode_breaks.size() == 1);
  CHECK(r.mode_breaks[0] == 20);
  REQUIRE(r.average_loss);
  CHECK(*r.average_loss <= 0.1);
}

TEST_CASE("merge-split data: three regimes find both breaks") {
  const McmcTrace t = fit_hmtm(scenario_data(synth::Scenario::MergeSplit, 2), quick(2, 12));
  const DiagnosticsReport r = make_report(t);
  REQUIRE(r.mode_breaks.size() == 2);
  CHECK(std::abs(r.mode_breaks[0] - 10) <= 1);
  CHECK(std::abs(r.mode_breaks[1] - 30) <= 1);
}

TEST_CASE("homophilous blocks give a large positive generation rule") {
  const auto sched = synth::default_schedule(synth::Scenario::Constant, 10, 20);
  const NetworkTensor Y = synth::make_block_network_change(sched, {0.5, 0.05}, 6);
  HmtmConfig c = quick(0, 13);
  c.burnin = 200;
  c.mcmc = 200;
  const auto summaries = summarize_regimes(fit_hmtm(degree_correct(Y, NullModelKind::PrincipalEigen), c));
  CHECK(summaries[0].v_regime_avg(0) > 3.0);
}
