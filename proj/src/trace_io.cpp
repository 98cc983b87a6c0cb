#include "hmtm/trace_io.hpp"

#include "hmtm/rng.hpp"
#include "hmtm/tensor_io.hpp"

#include <stdexcept>

namespace hmtm::io {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "hmtm-trace";

json flat(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

Matrix unflat(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (j.size() != static_cast<std::size_t>(rows * cols))
    throw std::invalid_argument(std::string("trace: ") + what + " has the wrong number of entries");
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < cols; ++c) out(i, c) = j[static_cast<std::size_t>(i * cols + c)].get<double>();
  return out;
}

json vec(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector unvec(const json& j, Eigen::Index n, const char* what) {
  const auto values = j.get<std::vector<double>>();
  if (values.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument(std::string("trace: ") + what + " has the wrong length");
  return Eigen::Map<const Vector>(values.data(), n);
}

json vecs(const std::vector<Vector>& vs) {
  json out = json::array();
  for (const Vector& v : vs) out.push_back(vec(v));
  return out;
}

std::vector<Vector> unvecs(const json& j, Eigen::Index n, const char* what) {
  std::vector<Vector> out;
  for (const json& v : j) out.push_back(unvec(v, n, what));
  return out;
}

json mats(const std::vector<Matrix>& ms) {
  json out = json::array();
  for (const Matrix& m : ms) out.push_back(flat(m));
  return out;
}

std::vector<Matrix> unmats(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  std::vector<Matrix> out;
  for (const json& m : j) out.push_back(unflat(m, rows, cols, what));
  return out;
}

std::vector<int> one_based(const std::vector<int>& s) {
  std::vector<int> out(s);
  for (int& x : out) ++x;
  return out;
}

std::vector<int> zero_based(const json& j) {
  std::vector<int> out = j.get<std::vector<int>>();
  for (int& x : out) --x;
  return out;
}

json priors_to_json(const Priors& p) {
  return json{{"u0", p.u0},       {"u1", p.u1},       {"v0", p.v0},         {"v1", p.v1},
              {"c0", p.c0},       {"d0", p.d0},       {"a0", p.a0},         {"b0", p.b0},
              {"nu0", p.nu0},     {"nu1", p.nu1},     {"mu0_u", vec(p.mu0_u)}, {"mu0_v", vec(p.mu0_v)},
              {"beta_mean", p.beta_mean}, {"beta_var", p.beta_var}};
}

Priors priors_from_json(const json& j) {
  Priors p;
  p.u0 = j.value("u0", p.u0);
  p.u1 = j.value("u1", p.u1);
  p.v0 = j.value("v0", p.v0);
  p.v1 = j.value("v1", p.v1);
  p.c0 = j.value("c0", p.c0);
  p.d0 = j.value("d0", p.d0);
  p.a0 = j.value("a0", p.a0);
  p.b0 = j.value("b0", p.b0);
  p.nu0 = j.value("nu0", p.nu0);
  p.nu1 = j.value("nu1", p.nu1);
  if (j.contains("mu0_u")) p.mu0_u = unvec(j["mu0_u"], static_cast<Eigen::Index>(j["mu0_u"].size()), "mu0_u");
  if (j.contains("mu0_v")) p.mu0_v = unvec(j["mu0_v"], static_cast<Eigen::Index>(j["mu0_v"].size()), "mu0_v");
  p.beta_mean = j.value("beta_mean", p.beta_mean);
  p.beta_var = j.value("beta_var", p.beta_var);
  return p;
}

// Fixed blocks keep their own shapes so they can be read without the data.
json fixed_to_json(const FixedBlocks& f) {
  json out = json::object();
  auto shaped = [](const Matrix& m) { return json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", flat(m)}}; };
  if (f.U) {
    json a = json::array();
    for (const Matrix& m : *f.U) a.push_back(shaped(m));
    out["U"] = a;
  }
  if (f.V) out["V"] = shaped(*f.V);
  if (f.mu_u) out["mu_u"] = vecs(*f.mu_u);
  if (f.psi_u) out["psi_u"] = vecs(*f.psi_u);
  if (f.mu_v) out["mu_v"] = vecs(*f.mu_v);
  if (f.psi_v) out["psi_v"] = vecs(*f.psi_v);
  if (f.sigma2) out["sigma2"] = *f.sigma2;
  if (f.beta) out["beta"] = *f.beta;
  if (f.gamma) out["gamma"] = vec(*f.gamma);
  if (f.states) out["states"] = one_based(*f.states);
  if (f.transition) out["transition"] = shaped(*f.transition);
  return out;
}

FixedBlocks fixed_from_json(const json& j) {
  FixedBlocks f;
  auto shaped = [](const json& m) {
    return unflat(m.at("values"), m.at("rows").get<Eigen::Index>(), m.at("cols").get<Eigen::Index>(), "fixed block");
  };
  auto any_vecs = [](const json& a) {
    std::vector<Vector> out;
    for (const json& v : a) out.push_back(unvec(v, static_cast<Eigen::Index>(v.size()), "fixed block"));
    return out;
  };
  if (j.contains("U")) {
    f.U.emplace();
    for (const json& m : j["U"]) f.U->push_back(shaped(m));
  }
  if (j.contains("V")) f.V = shaped(j["V"]);
  if (j.contains("mu_u")) f.mu_u = any_vecs(j["mu_u"]);
  if (j.contains("psi_u")) f.psi_u = any_vecs(j["psi_u"]);
  if (j.contains("mu_v")) f.mu_v = any_vecs(j["mu_v"]);
  if (j.contains("psi_v")) f.psi_v = any_vecs(j["psi_v"]);
  if (j.contains("sigma2")) f.sigma2 = j["sigma2"].get<std::vector<double>>();
  if (j.contains("beta")) f.beta = j["beta"].get<double>();
  if (j.contains("gamma")) f.gamma = unvec(j["gamma"], static_cast<Eigen::Index>(j["gamma"].size()), "gamma");
  if (j.contains("states")) f.states = zero_based(j["states"]);
  if (j.contains("transition")) f.transition = shaped(j["transition"]);
  return f;
}

}  // namespace

json config_to_json(const HmtmConfig& c) {
  return json{{"n_breaks", c.n_breaks},
              {"rank", c.rank},
              {"burnin", c.burnin},
              {"mcmc", c.mcmc},
              {"thin", c.thin},
              {"priors", priors_to_json(c.priors)},
              {"error", to_string(c.error_kind)},
              {"intercept", c.with_intercept},
              {"u_update", to_string(c.u_update)},
              {"anchor_scale", c.anchor_scale},
              {"perturb_weights", c.perturb_weights},
              {"seed", c.seed},
              {"fixed", fixed_to_json(c.fixed)}};
}

HmtmConfig config_from_json(const json& j) {
  HmtmConfig c;
  c.n_breaks = j.at("n_breaks").get<int>();
  c.rank = j.at("rank").get<int>();
  c.burnin = j.value("burnin", c.burnin);
  c.mcmc = j.value("mcmc", c.mcmc);
  c.thin = j.value("thin", c.thin);
  if (j.contains("priors")) c.priors = priors_from_json(j["priors"]);
  if (j.contains("error")) c.error_kind = error_kind_from_string(j["error"].get<std::string>());
  c.with_intercept = j.value("intercept", false);
  if (j.contains("u_update")) c.u_update = u_update_from_string(j["u_update"].get<std::string>());
  c.anchor_scale = j.value("anchor_scale", c.anchor_scale);
  if (j.contains("perturb_weights")) c.perturb_weights = j["perturb_weights"].get<std::vector<double>>();
  c.seed = j.value("seed", c.seed);
  if (j.contains("fixed")) c.fixed = fixed_from_json(j["fixed"]);
  return c;
}

json state_to_json(const HmtmState& s) {
  return json{{"U", mats(s.U)},
              {"mu_u", vecs(s.mu_u)},
              {"psi_u", vecs(s.psi_u)},
              {"V", flat(s.V)},
              {"mu_v", vecs(s.mu_v)},
              {"psi_v", vecs(s.psi_v)},
              {"sigma2", s.sigma2},
              {"beta", s.beta},
              {"gamma", vec(s.gamma)},
              {"states", one_based(s.path.states)},
              {"transition", flat(s.path.transition)}};
}

HmtmState state_from_json(const json& j, int N, int T, int R, int M) {
  HmtmState s;
  s.U = unmats(j.at("U"), N, R, "U");
  s.mu_u = unvecs(j.at("mu_u"), R, "mu_u");
  s.psi_u = unvecs(j.at("psi_u"), R, "psi_u");
  s.V = unflat(j.at("V"), T, R, "V");
  s.mu_v = unvecs(j.at("mu_v"), R, "mu_v");
  s.psi_v = unvecs(j.at("psi_v"), R, "psi_v");
  s.sigma2 = j.at("sigma2").get<std::vector<double>>();
  s.beta = j.at("beta").get<double>();
  s.gamma = unvec(j.at("gamma"), T, "gamma");
  s.path.states = zero_based(j.at("states"));
  s.path.transition = unflat(j.at("transition"), M, M, "transition");
  if (static_cast<int>(s.U.size()) != M || static_cast<int>(s.sigma2.size()) != M ||
      static_cast<int>(s.mu_u.size()) != M || static_cast<int>(s.psi_u.size()) != M ||
      static_cast<int>(s.mu_v.size()) != M || static_cast<int>(s.psi_v.size()) != M)
    throw std::invalid_argument("trace: draw has the wrong number of regimes");
  if (static_cast<int>(s.path.states.size()) != T) throw std::invalid_argument("trace: states has the wrong length");
  return s;
}

json trace_to_json(const TraceFile& f) {
  const McmcTrace& t = f.trace;
  json draws = json::array();
  for (const HmtmState& s : t.draws) draws.push_back(state_to_json(s));
  json loglayer = json::array();
  for (Eigen::Index g = 0; g < t.loglayer.rows(); ++g) loglayer.push_back(vec(t.loglayer.row(g).transpose()));
  json breaks = json::array();
  for (Eigen::Index g = 0; g < t.breakpoints.rows(); ++g) {
    std::vector<int> row(t.breakpoints.cols());
    for (Eigen::Index k = 0; k < t.breakpoints.cols(); ++k) row[k] = t.breakpoints(g, k);
    breaks.push_back(row);
  }
  json out{{"format", kFormat},
           {"rng", std::string(Rng::kAlgorithm)},
           {"config", config_to_json(t.config)},
           {"n_nodes", t.n_nodes},
           {"n_layers", t.n_layers},
           {"source",
            {{"path", f.source_path}, {"correction", to_string(f.data.null_model.kind)}, {"node_labels", f.node_labels}}},
           {"data", corrected_to_json(f.data)},
           {"draws", draws},
           {"loglayer", loglayer},
           {"breakpoints", breaks}};
  if (f.marginal) out["marginal"] = to_json(*f.marginal);
  return out;
}

TraceFile trace_from_json(const json& j) {
  if (j.value("format", std::string()) != kFormat) throw std::invalid_argument("not an hmtm trace file");
  TraceFile f;
  McmcTrace& t = f.trace;
  t.config = config_from_json(j.at("config"));
  t.n_nodes = j.at("n_nodes").get<int>();
  t.n_layers = j.at("n_layers").get<int>();
  const int M = t.config.n_regimes(), R = t.config.rank, T = t.n_layers;
  for (const json& d : j.at("draws")) t.draws.push_back(state_from_json(d, t.n_nodes, T, R, M));
  const auto G = static_cast<Eigen::Index>(t.draws.size());
  const json& ll = j.at("loglayer");
  const json& bp = j.at("breakpoints");
  if (ll.size() != static_cast<std::size_t>(G) || bp.size() != static_cast<std::size_t>(G))
    throw std::invalid_argument("trace: loglayer / breakpoints rows differ from the number of draws");
  t.loglayer.resize(G, T);
  t.breakpoints.resize(G, M - 1);
  for (Eigen::Index g = 0; g < G; ++g) {
    t.loglayer.row(g) = unvec(ll[g], T, "loglayer row").transpose();
    const auto row = bp[g].get<std::vector<int>>();
    if (row.size() != static_cast<std::size_t>(M - 1)) throw std::invalid_argument("trace: breakpoint row length");
    for (int k = 0; k + 1 < M; ++k) t.breakpoints(g, k) = row[k];
  }
  f.data = corrected_from_json(j.at("data"));
  if (f.data.n_nodes != t.n_nodes || f.data.n_layers != T) throw std::invalid_argument("trace: data dims differ");
  if (j.contains("source")) {
    f.source_path = j["source"].value("path", std::string());
    if (j["source"].contains("node_labels"))
      f.node_labels = j["source"]["node_labels"].get<std::vector<std::string>>();
  }
  if (j.contains("marginal")) f.marginal = marginal_from_json(j["marginal"]);
  return f;
}

void write_trace(const std::filesystem::path& path, const TraceFile& file) { write_json(path, trace_to_json(file)); }

TraceFile read_trace(const std::filesystem::path& path) {
  try {
    return trace_from_json(read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed trace " + path.string() + ": " + e.what());
  }
}

}  // namespace hmtm::io
