#include "hmtm/synth.hpp"

#include "hmtm/rng.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hmtm::synth {

namespace {

// Blocks as (first node, size) in node order.
using Blocks = std::vector<std::pair<int, int>>;

std::vector<int> labels_of(const Blocks& blocks, int n_nodes) {
  std::vector<int> out(n_nodes, -1);
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (int k = 0; k < blocks[b].second; ++k) out[blocks[b].first + k] = static_cast<int>(b);
  return out;
}

Blocks split_largest(Blocks blocks) {
  auto it = std::max_element(blocks.begin(), blocks.end(),
                             [](const auto& a, const auto& b) { return a.second < b.second; });
  if (it->second < 2 || it->second % 2 != 0) throw std::invalid_argument("cannot split block into equal halves");
  const int half = it->second / 2;
  const std::pair<int, int> second{it->first + half, half};
  it->second = half;
  blocks.insert(it + 1, second);
  return blocks;
}

Blocks merge_smallest(Blocks blocks) {
  if (blocks.size() < 2) throw std::invalid_argument("cannot merge a single block");
  // Two smallest blocks, preferring later blocks on ties; merged blocks must be adjacent.
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (blocks[a].second != blocks[b].second) return blocks[a].second < blocks[b].second;
    return a > b;
  });
  std::size_t a = std::min(order[0], order[1]), b = std::max(order[0], order[1]);
  if (b != a + 1) throw std::invalid_argument("smallest blocks are not adjacent; cannot merge contiguously");
  blocks[a].second += blocks[b].second;
  blocks.erase(blocks.begin() + static_cast<long>(b));
  return blocks;
}

// Two-group structure {n, 2n} and three-group structure {n, n, n}.
Blocks two_groups(int n) { return {{0, n}, {n, 2 * n}}; }
Blocks three_groups(int n) { return {{0, n}, {n, n}, {2 * n, n}}; }

bool same_partition_up_to_one_move(const std::vector<int>& a, const std::vector<int>& b) {
  // Consecutive regimes differ by one split or one merge: the coarser labeling
  // is a function of the finer one and block counts differ by exactly one.
  const int ka = *std::max_element(a.begin(), a.end()) + 1;
  const int kb = *std::max_element(b.begin(), b.end()) + 1;
  if (std::abs(ka - kb) != 1) return false;
  const auto& fine = ka > kb ? a : b;
  const auto& coarse = ka > kb ? b : a;
  std::map<int, int> f;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    auto [it, inserted] = f.emplace(fine[i], coarse[i]);
    if (!inserted && it->second != coarse[i]) return false;
  }
  return true;
}

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Constant: return "constant";
    case Scenario::Split: return "split";
    case Scenario::Merge: return "merge";
    case Scenario::MergeSplit: return "merge-split";
    case Scenario::SplitMerge: return "split-merge";
  }
  return "constant";
}

Scenario scenario_from_string(const std::string& name) {
  if (name == "constant") return Scenario::Constant;
  if (name == "split") return Scenario::Split;
  if (name == "merge") return Scenario::Merge;
  if (name == "merge-split" || name == "mergesplit") return Scenario::MergeSplit;
  if (name == "split-merge" || name == "splitmerge") return Scenario::SplitMerge;
  throw std::invalid_argument("unknown scenario '" + name + "' (constant|split|merge|merge-split|split-merge)");
}

int BlockSchedule::regime_of_layer(int t) const {
  int regime = 0;
  for (int b : break_times)
    if (t + 1 > b) ++regime;
  return regime;
}

void BlockSchedule::validate() const {
  if (base_block_size < 2) throw std::invalid_argument("block size n must be >= 2");
  if (n_layers < 1) throw std::invalid_argument("T must be positive");
  std::size_t expected = 0;
  switch (scenario) {
    case Scenario::Constant: expected = 0; break;
    case Scenario::Split:
    case Scenario::Merge: expected = 1; break;
    case Scenario::MergeSplit:
    case Scenario::SplitMerge: expected = 2; break;
  }
  if (break_times.size() != expected)
    throw std::invalid_argument("scenario " + to_string(scenario) + " needs " + std::to_string(expected) + " breaks");
  for (std::size_t k = 0; k < break_times.size(); ++k) {
    if (break_times[k] < 1 || break_times[k] > n_layers - 1)
      throw std::invalid_argument("break time out of [1, T-1]");
    if (k > 0 && break_times[k] <= break_times[k - 1])
      throw std::invalid_argument("break times must be strictly increasing");
  }
  if (memberships.size() != break_times.size() + 1)
    throw std::invalid_argument("need one membership vector per regime");
  for (const auto& m : memberships)
    if (static_cast<int>(m.size()) != n_nodes()) throw std::invalid_argument("membership length must be 3n");
  for (std::size_t k = 1; k < memberships.size(); ++k)
    if (!same_partition_up_to_one_move(memberships[k - 1], memberships[k]))
      throw std::invalid_argument("consecutive regimes must differ by one split or one merge");
}

void EdgeProbabilities::validate() const {
  if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
    throw std::invalid_argument("edge probabilities must lie in [0, 1]");
}

BlockSchedule default_schedule(Scenario scenario, int n, int n_layers) {
  if (n < 2) throw std::invalid_argument("block size n must be >= 2");
  if (n % 2 != 0 && scenario != Scenario::Constant)
    throw std::invalid_argument("split/merge scenarios need an even block size");
  BlockSchedule s;
  s.scenario = scenario;
  s.base_block_size = n;
  s.n_layers = n_layers;
  const int N = 3 * n;
  Blocks start;
  std::vector<bool> splits;  // true = split, false = merge, one per break
  switch (scenario) {
    case Scenario::Constant: start = two_groups(n); break;
    case Scenario::Split: start = two_groups(n); splits = {true}; break;
    case Scenario::Merge: start = three_groups(n); splits = {false}; break;
    case Scenario::MergeSplit: start = three_groups(n); splits = {false, true}; break;
    case Scenario::SplitMerge: start = two_groups(n); splits = {true, false}; break;
  }
  const int needed = splits.size() == 2 ? 4 : (splits.size() == 1 ? 2 : 1);
  if (n_layers < std::max(needed, 4))
    throw std::invalid_argument("T = " + std::to_string(n_layers) + " is too short for scenario " + to_string(scenario));
  if (splits.size() == 1) s.break_times = {n_layers / 2};
  if (splits.size() == 2) s.break_times = {n_layers / 4, (3 * n_layers) / 4};
  Blocks blocks = start;
  s.memberships.push_back(labels_of(blocks, N));
  for (bool split : splits) {
    blocks = split ? split_largest(blocks) : merge_smallest(blocks);
    s.memberships.push_back(labels_of(blocks, N));
  }
  s.validate();
  return s;
}

namespace {

void fill_layer(Matrix& layer, const std::vector<int>& membership, const EdgeProbabilities& p, Rng& rng) {
  const int N = static_cast<int>(membership.size());
  for (int i = 0; i < N; ++i) {
    for (int j = i + 1; j < N; ++j) {
      const double prob = membership[i] == membership[j] ? p.p_in : p.p_out;
      const double y = rng.bernoulli(prob) ? 1.0 : 0.0;
      layer(i, j) = y;
      layer(j, i) = y;
    }
  }
}

}  // namespace

NetworkTensor make_block_network_change(const BlockSchedule& schedule, const EdgeProbabilities& probs,
                                        std::uint64_t seed) {
  schedule.validate();
  probs.validate();
  NetworkTensor out(schedule.n_nodes(), schedule.n_layers);
  Rng rng(seed);
  for (int t = 0; t < schedule.n_layers; ++t)
    fill_layer(out.layers[t], schedule.memberships[schedule.regime_of_layer(t)], probs, rng);
  return out;
}

NetworkTensor make_layered_block_network(const std::vector<int>& membership,
                                         const std::vector<EdgeProbabilities>& per_layer, std::uint64_t seed) {
  if (membership.empty() || per_layer.empty()) throw std::invalid_argument("empty membership or layer list");
  NetworkTensor out(static_cast<int>(membership.size()), static_cast<int>(per_layer.size()));
  Rng rng(seed);
  for (std::size_t t = 0; t < per_layer.size(); ++t) {
    per_layer[t].validate();
    fill_layer(out.layers[t], membership, per_layer[t], rng);
  }
  return out;
}

std::vector<int> homophily_heterophily_labels() {
  std::vector<int> labels(30);
  for (int i = 0; i < 30; ++i) labels[i] = i / 10;
  return labels;
}

NetworkTensor make_homophily_heterophily_pair(std::uint64_t seed) {
  return make_layered_block_network(homophily_heterophily_labels(), {{0.5, 0.2}, {0.2, 0.5}}, seed);
}

}  // namespace hmtm::synth
