#pragma once

#include "hmtm/net_tensor.hpp"

#include <json.hpp>

#include <filesystem>
#include <istream>
#include <optional>
#include <vector>

namespace hmtm::io {

struct EdgeList {
  std::vector<Edge> edges;
  int max_node = -1;   // largest node index seen
  int max_layer = -1;  // largest layer index seen
};

// Reads `i,j,t,value` rows: CSV (optional header line) or whitespace-delimited.
// A missing value column means weight 1.
EdgeList parse_edge_list(std::istream& in);
EdgeList read_edge_list(const std::filesystem::path& path);

// Tensor dump: {n_nodes, n_layers, layers: [[row-major N*N], ...], node_labels?}.
nlohmann::json tensor_to_json(const NetworkTensor& tensor);
NetworkTensor tensor_from_json(const nlohmann::json& j);

// Corrected dump adds {"null_model": {kind, lambda?, vectors, total_m?}}.
nlohmann::json corrected_to_json(const CorrectedTensor& tensor);
CorrectedTensor corrected_from_json(const nlohmann::json& j);

nlohmann::json read_json(const std::filesystem::path& path);
// Writes with a trailing newline; throws std::runtime_error with the path on failure.
void write_json(const std::filesystem::path& path, const nlohmann::json& j, int indent = -1);

// Loads `.json` tensor dumps or edge lists (`.csv`, `.txt`, anything else).
// When dims are not given they are inferred from the largest indices.
NetworkTensor load_network(const std::filesystem::path& path, std::optional<int> n_nodes = std::nullopt,
                           std::optional<int> n_layers = std::nullopt);

// If `path` is a corrected dump it is returned as is; otherwise the raw tensor
// is loaded and corrected with `kind`.
CorrectedTensor load_corrected(const std::filesystem::path& path, NullModelKind kind);

}  // namespace hmtm::io
