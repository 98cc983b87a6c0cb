#include <doctest.h>

#include "hmtm/diagnostics.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace hmtm;

namespace {

// Trace whose draws carry the given paths; other blocks are placeholders.
McmcTrace trace_of_paths(const std::vector<std::vector<int>>& paths, int M) {
  McmcTrace tr;
  tr.config.n_breaks = M - 1;
  tr.n_layers = static_cast<int>(paths.front().size());
  tr.n_nodes = 3;
  const int G = static_cast<int>(paths.size());
  tr.loglayer = Matrix::Constant(G, tr.n_layers, -1.0);
  tr.breakpoints.resize(G, M - 1);
  for (int g = 0; g < G; ++g) {
    HmtmState s;
    s.path.states = paths[g];
    tr.draws.push_back(s);
    const auto bp = s.path.breakpoints(M);
    for (int k = 0; k + 1 < M; ++k) tr.breakpoints(g, k) = bp[k];
  }
  return tr;
}

std::vector<int> path_with_breaks(int T, std::vector<int> breaks) {
  std::vector<int> s(T, 0);
  for (int t = 0; t < T; ++t)
    for (int b : breaks)
      if (t + 1 > b) ++s[t];
  return s;
}

}  // namespace

TEST_CASE("WAIC with identical draws has no penalty") {
  Matrix ll(4, 3);
  ll << -1, -2, -3, -1, -2, -3, -1, -2, -3, -1, -2, -3;
  CHECK(waic_penalty(ll) == 0.0);
  CHECK(waic(ll) == doctest::Approx(12.0));
}

TEST_CASE("WAIC on two draws of one layer") {
  Matrix ll(2, 1);
  ll << std::log(1.0), std::log(3.0);
  const double l3 = std::log(3.0);
  CHECK(waic_penalty(ll) == doctest::Approx(l3 * l3 / 2));
  CHECK(waic(ll) == doctest::Approx(-2 * (std::log(2.0) - l3 * l3 / 2)));
  CHECK_THROWS_AS(waic(Matrix::Zero(1, 3)), std::invalid_argument);
}

TEST_CASE("average loss examples") {
  Eigen::MatrixXi same(3, 2);
  same << 10, 30, 10, 30, 10, 30;
  CHECK(*average_loss(same) == 0.0);
  Eigen::MatrixXi two(2, 1);
  two << 20, 22;
  CHECK(*average_loss(two) == doctest::Approx(1.0));
  CHECK(!average_loss(Eigen::MatrixXi(5, 0)).has_value());
}

TEST_CASE("regime change probability") {
  const auto stable = trace_of_paths(std::vector<std::vector<int>>(5, path_with_breaks(40, {20})), 2);
  const Vector p = regime_change_prob(stable);
  CHECK(p(0) == 0.0);
  CHECK(p(20) == 1.0);  // layer 21 opens regime 2
  CHECK(p.sum() == 1.0);
  const auto mixed =
      trace_of_paths({path_with_breaks(12, {3, 8}), path_with_breaks(12, {4, 8}), path_with_breaks(12, {4, 9})}, 3);
  const Vector q = regime_change_prob(mixed);
  CHECK(q.sum() == doctest::Approx(2.0));
  CHECK(q(4) == doctest::Approx(2.0 / 3));
}

TEST_CASE("break summaries and the posterior mode path") {
  const auto tr =
      trace_of_paths({path_with_breaks(10, {4}), path_with_breaks(10, {4}), path_with_breaks(10, {6})}, 2);
  const auto bs = breakpoint_summary(tr);
  CHECK(bs[0].mean == doctest::Approx(14.0 / 3));
  CHECK(bs[0].sd == doctest::Approx(std::sqrt((2 * 4.0 / 9 + 16.0 / 9) / 2)));
  CHECK(posterior_mode_states(tr) == path_with_breaks(10, {4}));
  CHECK_FALSE(singleton_flag(tr));
  const auto single = trace_of_paths({path_with_breaks(6, {5}), path_with_breaks(6, {5})}, 2);
  CHECK(singleton_flag(single));
}

TEST_CASE("repair_path makes any vote sequence a valid path") {
  CHECK(repair_path({0, 0, 2, 2, 1, 2}, 3) == std::vector<int>{0, 0, 1, 2, 2, 2});
  CHECK(repair_path({1, 1, 1, 0, 0}, 3) == std::vector<int>{0, 1, 1, 1, 2});
  CHECK(repair_path({0, 0, 0}, 1) == std::vector<int>{0, 0, 0});
  Rng rng(61);
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 1 + static_cast<int>(rng.uniform_index(25));
    const int M = 1 + static_cast<int>(rng.uniform_index(std::min(T, 5)));
    std::vector<int> v(T);
    for (int& x : v) x = static_cast<int>(rng.uniform_index(M));
    const auto out = repair_path(v, M);
    REQUIRE(is_valid_path(out, M));
    if (is_valid_path(v, M)) CHECK(out == v);
  }
}

TEST_CASE("comparison ranks by WAIC and notes disagreements") {
  DiagnosticsReport m0, m1, m3;
  m0.n_breaks = 0;
  m0.waic = 100;
  m0.neg2_log_marginal = 90;
  m1.n_breaks = 1;
  m1.waic = 105;
  m1.neg2_log_marginal = 85;
  m3.n_breaks = 3;
  m3.waic = 120;
  m3.neg2_log_marginal = 95;
  m3.singleton_flag = true;
  const ModelComparison c = compare_models({m3, m1, m0});
  CHECK(c.verdict_breaks == 0);
  CHECK(c.ranked[0].n_breaks == 0);
  CHECK(c.ranked[1].n_breaks == 1);
  CHECK(c.ranked[2].n_breaks == 3);
  REQUIRE(c.marglik_best_breaks);
  CHECK(*c.marglik_best_breaks == 1);
  CHECK(c.criteria_disagree);
  bool disagree_note = false, singleton_note = false;
  for (const auto& n : c.notes) {
    disagree_note = disagree_note || n == "-2logML favors M1 while WAIC selects M0";
    singleton_note = singleton_note || n == "M3 has a singleton regime";
  }
  CHECK(disagree_note);
  CHECK(singleton_note);
  const std::string text = format_comparison(c);
  CHECK(text.find("WAIC") != std::string::npos);
  CHECK(text.find("verdict: M0") != std::string::npos);
}

TEST_CASE("a single report ranks as itself") {
  DiagnosticsReport r;
  r.n_breaks = 2;
  r.waic = 7;
  const ModelComparison c = compare_models({r});
  CHECK(c.verdict_breaks == 2);
  CHECK(c.ranked.size() == 1);
  CHECK_FALSE(c.criteria_disagree);
  CHECK_THROWS(compare_models({}));
}

TEST_CASE("report JSON round trip") {
  DiagnosticsReport r;
  r.n_breaks = 1;
  r.waic = 13016.25;
  r.neg2_log_marginal = 12990.5;
  r.average_loss = 0.0;
  r.regime_change_prob = Vector::Zero(4);
  r.regime_change_prob(2) = 1.0;
  r.breakpoint_summary = {{2.0, 0.0}};
  r.mode_breaks = {2};
  r.warnings = {"w"};
  const DiagnosticsReport back = report_from_json(to_json(r));
  CHECK(back.n_breaks == 1);
  CHECK(back.waic == r.waic);
  CHECK(*back.neg2_log_marginal == *r.neg2_log_marginal);
  CHECK_FALSE(back.neg2_log_lik_at_means.has_value());
  CHECK(*back.average_loss == 0.0);
  CHECK(back.regime_change_prob == r.regime_change_prob);
  CHECK(back.mode_breaks == r.mode_breaks);
  CHECK(back.warnings == r.warnings);
}
