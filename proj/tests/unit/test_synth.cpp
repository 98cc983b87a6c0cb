#include <doctest.h>

#include "hmtm/synth.hpp"

#include <cmath>
#include <set>

using namespace hmtm;
using namespace hmtm::synth;

namespace {

int n_groups(const std::vector<int>& labels) { return static_cast<int>(std::set<int>(labels.begin(), labels.end()).size()); }

std::vector<int> group_sizes(const std::vector<int>& labels) {
  std::vector<int> sizes(n_groups(labels), 0);
  for (int l : labels) ++sizes[l];
  std::sort(sizes.begin(), sizes.end());
  return sizes;
}

}  // namespace

TEST_CASE("default schedules") {
  const BlockSchedule split = default_schedule(Scenario::Split, 10, 40);
  CHECK(split.break_times == std::vector<int>{20});
  CHECK(n_groups(split.memberships[0]) == 2);
  CHECK(n_groups(split.memberships[1]) == 3);
  CHECK(group_sizes(split.memberships[0]) == std::vector<int>{10, 20});
  CHECK(group_sizes(split.memberships[1]) == std::vector<int>{10, 10, 10});

  CHECK(default_schedule(Scenario::Constant, 10, 40).break_times.empty());

  const BlockSchedule ms = default_schedule(Scenario::MergeSplit, 10, 40);
  CHECK(ms.break_times == std::vector<int>{10, 30});
  REQUIRE(ms.n_regimes() == 3);
  CHECK(n_groups(ms.memberships[0]) == 3);
  CHECK(n_groups(ms.memberships[1]) == 2);
  CHECK(n_groups(ms.memberships[2]) == 3);

  const BlockSchedule sm = default_schedule(Scenario::SplitMerge, 10, 40);
  CHECK(sm.break_times == std::vector<int>{10, 30});
  CHECK(n_groups(sm.memberships[1]) == 3);

  const BlockSchedule merge = default_schedule(Scenario::Merge, 10, 40);
  CHECK(merge.break_times == std::vector<int>{20});
  CHECK(n_groups(merge.memberships[0]) == 3);
  CHECK(n_groups(merge.memberships[1]) == 2);
}

TEST_CASE("regime_of_layer follows the break times") {
  const BlockSchedule split = default_schedule(Scenario::Split, 10, 40);
  CHECK(split.regime_of_layer(19) == 0);  // layer 20
  CHECK(split.regime_of_layer(20) == 1);  // layer 21
}

TEST_CASE("split scenario tensor shape and planted structure") {
  const BlockSchedule sched = default_schedule(Scenario::Split, 10, 40);
  const NetworkTensor Y = make_block_network_change(sched, {0.5, 0.05}, 1);
  CHECK(Y.n_nodes == 30);
  CHECK(Y.n_layers == 40);
  CHECK_NOTHROW(Y.validate());
  // Within/between densities by regime.
  for (int m = 0; m < 2; ++m) {
    double in = 0, n_in = 0, out = 0, n_out = 0;
    for (int t = 0; t < 40; ++t) {
      if (sched.regime_of_layer(t) != m) continue;
      for (int i = 0; i < 30; ++i)
        for (int j = i + 1; j < 30; ++j) {
          const bool same = sched.memberships[m][i] == sched.memberships[m][j];
          (same ? in : out) += Y.layers[t](i, j);
          (same ? n_in : n_out) += 1;
        }
    }
    CHECK(std::abs(in / n_in - 0.5) < 3 * std::sqrt(0.25 / n_in));
    CHECK(std::abs(out / n_out - 0.05) < 3 * std::sqrt(0.0475 / n_out));
  }
}

TEST_CASE("equal probabilities leave no structure") {
  const BlockSchedule sched = default_schedule(Scenario::Split, 10, 40);
  const NetworkTensor Y = make_block_network_change(sched, {0.3, 0.3}, 4);
  double in = 0, n_in = 0, out = 0, n_out = 0;
  for (int t = 0; t < 40; ++t) {
    const int m = sched.regime_of_layer(t);
    for (int i = 0; i < 30; ++i)
      for (int j = i + 1; j < 30; ++j) {
        const bool same = sched.memberships[m][i] == sched.memberships[m][j];
        (same ? in : out) += Y.layers[t](i, j);
        (same ? n_in : n_out) += 1;
      }
  }
  const double p1 = in / n_in, p2 = out / n_out, p = (in + out) / (n_in + n_out);
  const double z = (p1 - p2) / std::sqrt(p * (1 - p) * (1 / n_in + 1 / n_out));
  CHECK(std::abs(z) <= 3.0);
}

TEST_CASE("generator is deterministic in the seed") {
  const BlockSchedule sched = default_schedule(Scenario::MergeSplit, 6, 12);
  const NetworkTensor a = make_block_network_change(sched, {0.5, 0.05}, 77);
  const NetworkTensor b = make_block_network_change(sched, {0.5, 0.05}, 77);
  const NetworkTensor c = make_block_network_change(sched, {0.5, 0.05}, 78);
  bool differs = false;
  for (int t = 0; t < 12; ++t) {
    CHECK(a.layers[t] == b.layers[t]);
    differs = differs || a.layers[t] != c.layers[t];
  }
  CHECK(differs);
}

TEST_CASE("edge probabilities are validated") {
  CHECK_THROWS(EdgeProbabilities{1.5, 0.1}.validate());
  CHECK_THROWS(EdgeProbabilities{0.5, -0.1}.validate());
  CHECK(EdgeProbabilities{0.2, 0.5}.dissortative());
}

TEST_CASE("homophily / heterophily pair") {
  const NetworkTensor Y = make_homophily_heterophily_pair(3);
  CHECK(Y.n_nodes == 30);
  CHECK(Y.n_layers == 2);
  const std::vector<int> labels = homophily_heterophily_labels();
  CHECK(group_sizes(labels) == std::vector<int>{10, 10, 10});
}

TEST_CASE("scenario names") {
  for (Scenario s : {Scenario::Constant, Scenario::Split, Scenario::Merge, Scenario::MergeSplit, Scenario::SplitMerge})
    CHECK(scenario_from_string(to_string(s)) == s);
  CHECK_THROWS(scenario_from_string("bogus"));
}
