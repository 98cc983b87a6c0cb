#pragma once

#include "hmtm/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hmtm {

// Deviance-scale WAIC from a G x T matrix of per-layer log densities:
// -2 * (sum_t log mean_g exp(l_gt) - sum_t var_g(l_gt)), variance with G - 1.
double waic(const Matrix& loglayer);
double waic(const McmcTrace& trace);
// The variance penalty alone (>= 0).
double waic_penalty(const Matrix& loglayer);

// Mean over breaks of the mean squared deviation of sampled break times from
// their simulation mean. Empty for a model without breaks.
std::optional<double> average_loss(const Eigen::MatrixXi& breakpoints);
std::optional<double> average_loss(const McmcTrace& trace);

// Entry t is the share of draws with S_t != S_{t-1}; entry 0 is 0.
Vector regime_change_prob(const McmcTrace& trace);

struct BreakSummary {
  double mean = 0.0;
  double sd = 0.0;
};
std::vector<BreakSummary> breakpoint_summary(const McmcTrace& trace);

// Per-layer majority vote over draws (ties to the lower regime), then made
// forward-moving by advancing as late as feasible. 0-based regimes.
std::vector<int> posterior_mode_states(const McmcTrace& trace);
std::vector<int> repair_path(const std::vector<int>& votes, int n_regimes);

// Any regime of the posterior-mode path occupies a single layer.
bool singleton_flag(const McmcTrace& trace);

struct DiagnosticsReport {
  int n_breaks = 0;
  double waic = 0.0;
  std::optional<double> neg2_log_marginal;
  std::optional<double> neg2_log_lik_at_means;
  std::optional<double> average_loss;
  Vector regime_change_prob;
  std::vector<BreakSummary> breakpoint_summary;
  std::vector<int> mode_breaks;  // 1-based last layer of each regime but the last
  bool singleton_flag = false;
  std::vector<std::string> warnings;
};

struct MarginalLikelihood;
DiagnosticsReport make_report(const McmcTrace& trace, const MarginalLikelihood* marginal = nullptr);

struct ModelComparison {
  std::vector<DiagnosticsReport> ranked;  // ascending WAIC
  int verdict_breaks = 0;                 // WAIC-minimal model
  std::optional<int> marglik_best_breaks;
  bool criteria_disagree = false;
  std::vector<std::string> notes;
};

ModelComparison compare_models(std::vector<DiagnosticsReport> reports);

nlohmann::json to_json(const DiagnosticsReport& report);
DiagnosticsReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelComparison& comparison);
// Aligned plain-text table followed by the verdict and notes.
std::string format_comparison(const ModelComparison& comparison);

}  // namespace hmtm
