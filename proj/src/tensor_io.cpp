#include "hmtm/tensor_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hmtm::io {

namespace {

bool looks_numeric(const std::string& token) {
  if (token.empty()) return false;
  char* end = nullptr;
  std::strtod(token.c_str(), &end);
  return end != nullptr && *end == '\0';
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  if (line.find(',') != std::string::npos) {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) out.push_back(field);
  }
  return out;
}

int parse_index(const std::string& token, std::size_t line_no) {
  std::size_t pos = 0;
  long value = 0;
  try {
    value = std::stol(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != token.size())
    throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": bad index '" + token + "'");
  return static_cast<int>(value);
}

Matrix layer_from_json(const nlohmann::json& layer, int n) {
  Matrix out(n, n);
  if (layer.size() == static_cast<std::size_t>(n) * n && !layer.front().is_array()) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out(i, j) = layer[static_cast<std::size_t>(i) * n + j].get<double>();
  } else if (layer.size() == static_cast<std::size_t>(n) && layer.front().is_array()) {
    for (int i = 0; i < n; ++i) {
      if (layer[i].size() != static_cast<std::size_t>(n)) throw std::invalid_argument("tensor JSON: ragged layer row");
      for (int j = 0; j < n; ++j) out(i, j) = layer[i][j].get<double>();
    }
  } else {
    throw std::invalid_argument("tensor JSON: layer does not have N*N entries");
  }
  return out;
}

nlohmann::json layer_to_json(const Matrix& m) {
  nlohmann::json flat = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

nlohmann::json vector_to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

EdgeList parse_edge_list(std::istream& in) {
  EdgeList out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (first) {
      first = false;
      if (!fields.empty() && !looks_numeric(fields[0])) continue;  // header
    }
    if (fields.size() < 3 || fields.size() > 4)
      throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": expected i,j,t[,value]");
    Edge e;
    e.i = parse_index(fields[0], line_no);
    e.j = parse_index(fields[1], line_no);
    e.t = parse_index(fields[2], line_no);
    if (fields.size() == 4) {
      if (!looks_numeric(fields[3]))
        throw std::invalid_argument("edge list line " + std::to_string(line_no) + ": bad value '" + fields[3] + "'");
      e.value = std::strtod(fields[3].c_str(), nullptr);
    }
    out.max_node = std::max({out.max_node, e.i, e.j});
    out.max_layer = std::max(out.max_layer, e.t);
    out.edges.push_back(e);
  }
  return out;
}

EdgeList read_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());
  return parse_edge_list(in);
}

nlohmann::json tensor_to_json(const NetworkTensor& tensor) {
  nlohmann::json j;
  j["n_nodes"] = tensor.n_nodes;
  j["n_layers"] = tensor.n_layers;
  j["layers"] = nlohmann::json::array();
  for (const Matrix& layer : tensor.layers) j["layers"].push_back(layer_to_json(layer));
  if (!tensor.node_labels.empty()) j["node_labels"] = tensor.node_labels;
  return j;
}

NetworkTensor tensor_from_json(const nlohmann::json& j) {
  NetworkTensor out(j.at("n_nodes").get<int>(), j.at("n_layers").get<int>());
  const auto& layers = j.at("layers");
  if (layers.size() != static_cast<std::size_t>(out.n_layers))
    throw std::invalid_argument("tensor JSON: layers length differs from n_layers");
  for (int t = 0; t < out.n_layers; ++t) out.layers[t] = layer_from_json(layers[t], out.n_nodes);
  if (j.contains("node_labels")) out.node_labels = j["node_labels"].get<std::vector<std::string>>();
  out.validate();
  return out;
}

nlohmann::json corrected_to_json(const CorrectedTensor& tensor) {
  nlohmann::json j;
  j["n_nodes"] = tensor.n_nodes;
  j["n_layers"] = tensor.n_layers;
  j["layers"] = nlohmann::json::array();
  for (const Matrix& layer : tensor.layers) j["layers"].push_back(layer_to_json(layer));
  nlohmann::json nm;
  nm["kind"] = to_string(tensor.null_model.kind);
  nm["vectors"] = nlohmann::json::array();
  for (const Vector& v : tensor.null_model.vectors) nm["vectors"].push_back(vector_to_json(v));
  if (!tensor.null_model.lambda.empty()) nm["lambda"] = tensor.null_model.lambda;
  if (!tensor.null_model.total_m.empty()) nm["total_m"] = tensor.null_model.total_m;
  j["null_model"] = nm;
  return j;
}

CorrectedTensor corrected_from_json(const nlohmann::json& j) {
  CorrectedTensor out;
  out.n_nodes = j.at("n_nodes").get<int>();
  out.n_layers = j.at("n_layers").get<int>();
  const auto& layers = j.at("layers");
  if (layers.size() != static_cast<std::size_t>(out.n_layers))
    throw std::invalid_argument("tensor JSON: layers length differs from n_layers");
  for (const auto& layer : layers) {
    out.layers.push_back(layer_from_json(layer, out.n_nodes));
    if (!is_symmetric_layer(out.layers.back()))
      throw std::invalid_argument("corrected tensor JSON: layer is not symmetric with zero diagonal");
  }
  const auto& nm = j.at("null_model");
  out.null_model.kind = null_model_from_string(nm.at("kind").get<std::string>());
  if (nm.contains("vectors"))
    for (const auto& v : nm["vectors"]) out.null_model.vectors.push_back(vector_from_json(v));
  if (nm.contains("lambda")) out.null_model.lambda = nm["lambda"].get<std::vector<double>>();
  if (nm.contains("total_m")) out.null_model.total_m = nm["total_m"].get<std::vector<double>>();
  return out;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(indent) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

NetworkTensor load_network(const std::filesystem::path& path, std::optional<int> n_nodes,
                           std::optional<int> n_layers) {
  if (path.extension() == ".json") return tensor_from_json(read_json(path));
  const EdgeList list = read_edge_list(path);
  return load_tensor(list.edges, n_nodes.value_or(list.max_node + 1), n_layers.value_or(list.max_layer + 1));
}

CorrectedTensor load_corrected(const std::filesystem::path& path, NullModelKind kind) {
  if (path.extension() == ".json") {
    const auto j = read_json(path);
    if (j.contains("null_model")) return corrected_from_json(j);
    return degree_correct(tensor_from_json(j), kind);
  }
  return degree_correct(load_network(path), kind);
}

}  // namespace hmtm::io
