#pragma once

#include "hmtm/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hmtm {

struct RegimeSummary {
  int regime_id = 1;             // 1-based
  Matrix U_mean;                 // N x R, identification applied
  Vector v_regime_avg;           // R, in the same column order as U_mean
  std::pair<int, int> layer_range{1, 1};  // 1-based, inclusive
  std::vector<int> column_order;  // column r of U_mean is sampler column column_order[r]
  Matrix positions;              // rotation-aligned posterior mean, the clustering input
  std::optional<std::vector<int>> cluster_labels;  // 1..k
};

// Reporting convention for one regime: columns ordered by descending |v_bar_r|
// (stable on ties), each column's sign flipped so its largest-magnitude entry
// is positive. Flipping a column of U leaves U diag(v) U' unchanged, so v
// is only permuted. Returns the column order used. Applying it twice is a no-op.
std::vector<int> apply_identification(Matrix& U, Vector& v_bar);

// Posterior-mode path defines the regimes. Draws are sign-aligned column by
// column to the first stored draw before averaging U_m.
std::vector<RegimeSummary> summarize_regimes(const McmcTrace& trace);

// Generalized Procrustes mean of the U_m draws: each draw is rotated onto the
// running mean until the mean settles. Inter-node distances of every draw are
// preserved, so this is the stable input for clustering when U_m is only
// identified up to rotation (e.g. equal-magnitude generation rules).
Matrix procrustes_positions(const McmcTrace& trace, int m);

struct KMeansResult {
  std::vector<int> labels;               // 1..k, numbered by first appearance
  double objective = 0.0;                // within-cluster sum of squares
  std::vector<double> restart_objectives;
  std::vector<double> objective_path;    // winning restart, one entry per Lloyd pass
};

// k-means++ seeding and Lloyd iterations, `restarts` times; keeps the run with
// the smallest within-cluster sum of squares (first on ties). Deterministic in
// `seed`. Throws if k exceeds the number of distinct rows.
KMeansResult kmeans(const Matrix& X, int k, int restarts, std::uint64_t seed);
std::vector<int> kmeans_blocks(const Matrix& U_mean, int k, int restarts, std::uint64_t seed);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

// One CSV per regime, `latent_regime_<m>.csv`, columns node,label,dim_1..dim_R,cluster.
// Returns the written paths.
std::vector<std::filesystem::path> export_latent(const std::vector<RegimeSummary>& summaries,
                                                 const std::vector<std::string>& node_labels,
                                                 const std::filesystem::path& dir);

// Columns t,regime,v_1..v_R,v_1_lo,v_1_hi,...: posterior means and 2.5% / 97.5%
// quantiles of v_t, in the column order of the posterior-mode regime of t.
void export_rules(const McmcTrace& trace, const std::filesystem::path& file);

struct LatentTable {
  std::vector<int> node;
  std::vector<std::string> label;
  Matrix dims;
  std::vector<int> cluster;  // 0 when not clustered
};
LatentTable read_latent_csv(const std::filesystem::path& file);

struct RulesTable {
  std::vector<int> t;
  std::vector<int> regime;
  Matrix mean, lo, hi;  // T x R
};
RulesTable read_rules_csv(const std::filesystem::path& file);

}  // namespace hmtm
