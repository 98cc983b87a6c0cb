#pragma once

#include "hmtm/marginal.hpp"
#include "hmtm/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hmtm::io {

// Trace file schema (JSON):
//   format       "hmtm-trace"
//   rng          generator tag
//   config       sampler configuration incl. priors and fixed blocks
//   n_nodes, n_layers
//   source       {path, correction, node_labels}: where the data came from
//   data         the corrected tensor the chain was fitted to
//   draws        [{U, mu_u, psi_u, V, mu_v, psi_v, sigma2, beta, gamma, states, transition}]
//                matrices row-major and flat; states 1-based
//   loglayer     G rows of T per-layer log densities
//   breakpoints  G rows of M-1 1-based breaks
//   marginal     optional marginal-likelihood estimate
struct TraceFile {
  McmcTrace trace;
  CorrectedTensor data;
  std::string source_path;
  std::vector<std::string> node_labels;  // may be empty
  std::optional<MarginalLikelihood> marginal;
};

nlohmann::json config_to_json(const HmtmConfig& config);
HmtmConfig config_from_json(const nlohmann::json& j);

nlohmann::json state_to_json(const HmtmState& state);
HmtmState state_from_json(const nlohmann::json& j, int n_nodes, int n_layers, int rank, int n_regimes);

nlohmann::json trace_to_json(const TraceFile& file);
TraceFile trace_from_json(const nlohmann::json& j);

void write_trace(const std::filesystem::path& path, const TraceFile& file);
TraceFile read_trace(const std::filesystem::path& path);

}  // namespace hmtm::io
