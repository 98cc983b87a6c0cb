#pragma once

#include "hmtm/net_tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hmtm::synth {

enum class Scenario { Constant, Split, Merge, MergeSplit, SplitMerge };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

// Planted block memberships over time. Nodes are N = 3n; every regime is a
// partition of the nodes into contiguous blocks.
struct BlockSchedule {
  Scenario scenario = Scenario::Constant;
  int base_block_size = 10;  // n
  int n_layers = 40;         // T
  // 1-based layer indices after which membership changes.
  std::vector<int> break_times;
  // One 0-based block-label vector of length N per regime.
  std::vector<std::vector<int>> memberships;

  int n_nodes() const { return 3 * base_block_size; }
  int n_regimes() const { return static_cast<int>(memberships.size()); }
  // 0-based regime of 0-based layer t.
  int regime_of_layer(int t) const;
  void validate() const;
};

struct EdgeProbabilities {
  double p_in = 0.5;
  double p_out = 0.05;

  void validate() const;
  // p_out > p_in is allowed but no longer the assortative rule.
  bool dissortative() const { return p_out > p_in; }
};

// Breaks at floor(T/2) for one-break scenarios and at floor(T/4), floor(3T/4)
// for two-break scenarios. Split divides the largest block into two equal
// halves; merge joins the two smallest blocks (the later ones on ties).
BlockSchedule default_schedule(Scenario scenario, int n, int n_layers);

// Binary planted-partition tensor: each dyad of layer t is Bernoulli(p_in)
// when both nodes share a block in the regime active at t, else Bernoulli(p_out).
NetworkTensor make_block_network_change(const BlockSchedule& schedule, const EdgeProbabilities& probs,
                                        std::uint64_t seed);

// Same generator with a fixed membership and per-layer probabilities.
NetworkTensor make_layered_block_network(const std::vector<int>& membership,
                                         const std::vector<EdgeProbabilities>& per_layer, std::uint64_t seed);

// The two-layer 30-node example: three blocks of 10, layer 1 homophilous
// (0.5 within / 0.2 between) and layer 2 heterophilous (0.2 / 0.5).
NetworkTensor make_homophily_heterophily_pair(std::uint64_t seed);
std::vector<int> homophily_heterophily_labels();

}  // namespace hmtm::synth
