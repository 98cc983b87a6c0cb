#include "hmtm/diagnostics.hpp"

#include "hmtm/distributions.hpp"
#include "hmtm/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace hmtm {

double waic_penalty(const Matrix& loglayer) {
  const Eigen::Index G = loglayer.rows();
  if (G < 2) throw std::invalid_argument("waic needs at least 2 draws");
  double penalty = 0.0;
  for (Eigen::Index t = 0; t < loglayer.cols(); ++t) {
    const double mean = loglayer.col(t).mean();
    penalty += (loglayer.col(t).array() - mean).square().sum() / static_cast<double>(G - 1);
  }
  return penalty;
}

double waic(const Matrix& loglayer) {
  const double penalty = waic_penalty(loglayer);
  double lppd = 0.0;
  std::vector<double> col(loglayer.rows());
  for (Eigen::Index t = 0; t < loglayer.cols(); ++t) {
    for (Eigen::Index g = 0; g < loglayer.rows(); ++g) col[g] = loglayer(g, t);
    lppd += dist::log_mean_exp(col);
  }
  const double w = -2.0 * (lppd - penalty);
  if (!std::isfinite(w)) throw std::runtime_error("waic is not finite");
  return w;
}

double waic(const McmcTrace& trace) { return waic(trace.loglayer); }

std::optional<double> average_loss(const Eigen::MatrixXi& bp) {
  if (bp.cols() == 0 || bp.rows() == 0) return std::nullopt;
  const Matrix x = bp.cast<double>();
  double loss = 0.0;
  for (Eigen::Index m = 0; m < x.cols(); ++m) {
    const double mean = x.col(m).mean();
    loss += (x.col(m).array() - mean).square().mean();
  }
  return loss / static_cast<double>(x.cols());
}

std::optional<double> average_loss(const McmcTrace& trace) { return average_loss(trace.breakpoints); }

Vector regime_change_prob(const McmcTrace& trace) {
  Vector out = Vector::Zero(trace.n_layers);
  if (trace.draws.empty()) return out;
  for (const HmtmState& s : trace.draws)
    for (int t = 1; t < trace.n_layers; ++t)
      if (s.path.states[t] != s.path.states[t - 1]) out(t) += 1.0;
  return out / static_cast<double>(trace.draws.size());
}

std::vector<BreakSummary> breakpoint_summary(const McmcTrace& trace) {
  std::vector<BreakSummary> out(trace.breakpoints.cols());
  const Eigen::Index G = trace.breakpoints.rows();
  for (Eigen::Index m = 0; m < trace.breakpoints.cols(); ++m) {
    const Vector x = trace.breakpoints.col(m).cast<double>();
    out[m].mean = x.mean();
    out[m].sd = G > 1 ? std::sqrt((x.array() - out[m].mean).square().sum() / static_cast<double>(G - 1)) : 0.0;
  }
  return out;
}

std::vector<int> repair_path(const std::vector<int>& votes, int M) {
  const int T = static_cast<int>(votes.size());
  std::vector<int> out(T);
  if (T < M) throw std::invalid_argument("fewer layers than regimes");
  for (int t = 1; t < T; ++t) {
    const int lo = std::max(out[t - 1], M - 1 - (T - 1 - t));  // still able to reach M
    out[t] = std::clamp(votes[t], lo, out[t - 1] + 1);
  }
  return out;
}

std::vector<int> posterior_mode_states(const McmcTrace& trace) {
  const int M = trace.config.n_regimes();
  const int T = trace.n_layers;
  std::vector<int> votes(T, 0);
  for (int t = 0; t < T; ++t) {
    std::vector<int> count(M, 0);
    for (const HmtmState& s : trace.draws) ++count[s.path.states[t]];
    votes[t] = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
  }
  return repair_path(votes, M);
}

bool singleton_flag(const McmcTrace& trace) {
  const int M = trace.config.n_regimes();
  const std::vector<int> mode = posterior_mode_states(trace);
  std::vector<int> len(M, 0);
  for (int s : mode) ++len[s];
  return std::find(len.begin(), len.end(), 1) != len.end();
}

DiagnosticsReport make_report(const McmcTrace& trace, const MarginalLikelihood* marginal) {
  DiagnosticsReport r;
  r.n_breaks = trace.config.n_breaks;
  r.waic = waic(trace);
  r.average_loss = average_loss(trace);
  r.regime_change_prob = regime_change_prob(trace);
  r.breakpoint_summary = breakpoint_summary(trace);
  RegimePath mode;
  mode.states = posterior_mode_states(trace);
  r.mode_breaks = mode.breakpoints(trace.config.n_regimes());
  r.singleton_flag = singleton_flag(trace);
  if (marginal) {
    r.neg2_log_marginal = marginal->neg2_log_marginal();
    r.neg2_log_lik_at_means = marginal->neg2_log_likelihood();
    r.warnings = marginal->warnings;
  }
  return r;
}

ModelComparison compare_models(std::vector<DiagnosticsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("compare_models needs at least one report");
  ModelComparison c;
  std::stable_sort(reports.begin(), reports.end(),
                   [](const DiagnosticsReport& a, const DiagnosticsReport& b) { return a.waic < b.waic; });
  c.ranked = std::move(reports);
  c.verdict_breaks = c.ranked.front().n_breaks;

  const DiagnosticsReport* ml_best = nullptr;
  for (const auto& r : c.ranked)
    if (r.neg2_log_marginal && (!ml_best || *r.neg2_log_marginal < *ml_best->neg2_log_marginal)) ml_best = &r;
  if (ml_best) {
    c.marglik_best_breaks = ml_best->n_breaks;
    c.criteria_disagree = ml_best->n_breaks != c.verdict_breaks;
    if (c.criteria_disagree) {
      c.notes.push_back("-2logML favors M" + std::to_string(ml_best->n_breaks) + " while WAIC selects M" +
                        std::to_string(c.verdict_breaks));
      if (ml_best->singleton_flag)
        c.notes.push_back("M" + std::to_string(ml_best->n_breaks) +
                          " has a singleton regime; its likelihood-based criteria are inflated and can be ignored");
    }
  }
  for (const auto& r : c.ranked)
    if (r.singleton_flag && (!ml_best || r.n_breaks != ml_best->n_breaks || !c.criteria_disagree))
      c.notes.push_back("M" + std::to_string(r.n_breaks) + " has a singleton regime");
  return c;
}

namespace {

nlohmann::json opt(const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); }

std::optional<double> opt_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string fmt(const std::optional<double>& x, int precision) {
  if (!x) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *x;
  return os.str();
}

}  // namespace

nlohmann::json to_json(const DiagnosticsReport& r) {
  nlohmann::json j;
  j["model"] = "M" + std::to_string(r.n_breaks);
  j["n_breaks"] = r.n_breaks;
  j["waic"] = r.waic;
  j["neg2_log_marginal"] = opt(r.neg2_log_marginal);
  j["neg2_log_lik_at_means"] = opt(r.neg2_log_lik_at_means);
  j["average_loss"] = opt(r.average_loss);
  j["regime_change_prob"] = std::vector<double>(r.regime_change_prob.data(),
                                                r.regime_change_prob.data() + r.regime_change_prob.size());
  nlohmann::json bs = nlohmann::json::array();
  for (const auto& b : r.breakpoint_summary) bs.push_back({{"mean", b.mean}, {"sd", b.sd}});
  j["breakpoint_summary"] = bs;
  j["mode_breaks"] = r.mode_breaks;
  j["singleton_flag"] = r.singleton_flag;
  j["warnings"] = r.warnings;
  return j;
}

DiagnosticsReport report_from_json(const nlohmann::json& j) {
  DiagnosticsReport r;
  r.n_breaks = j.at("n_breaks").get<int>();
  r.waic = j.at("waic").get<double>();
  r.neg2_log_marginal = opt_from(j, "neg2_log_marginal");
  r.neg2_log_lik_at_means = opt_from(j, "neg2_log_lik_at_means");
  r.average_loss = opt_from(j, "average_loss");
  const auto p = j.at("regime_change_prob").get<std::vector<double>>();
  r.regime_change_prob = Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()));
  for (const auto& b : j.at("breakpoint_summary")) r.breakpoint_summary.push_back({b.at("mean"), b.at("sd")});
  r.mode_breaks = j.at("mode_breaks").get<std::vector<int>>();
  r.singleton_flag = j.at("singleton_flag").get<bool>();
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

nlohmann::json to_json(const ModelComparison& c) {
  nlohmann::json j;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& r : c.ranked) table.push_back(to_json(r));
  j["ranking"] = table;
  j["verdict"] = "M" + std::to_string(c.verdict_breaks);
  j["verdict_breaks"] = c.verdict_breaks;
  j["marglik_best_breaks"] = c.marglik_best_breaks ? nlohmann::json(*c.marglik_best_breaks) : nlohmann::json(nullptr);
  j["criteria_disagree"] = c.criteria_disagree;
  j["notes"] = c.notes;
  return j;
}

std::string format_comparison(const ModelComparison& c) {
  std::ostringstream os;
  os << std::left << std::setw(7) << "model" << std::right << std::setw(14) << "WAIC" << std::setw(14) << "-2logML"
     << std::setw(14) << "-2logLik" << std::setw(10) << "avg.loss" << std::setw(11) << "singleton"
     << "  breaks\n";
  for (const auto& r : c.ranked) {
    std::string breaks;
    for (std::size_t k = 0; k < r.mode_breaks.size(); ++k)
      breaks += (k ? "," : "") + std::to_string(r.mode_breaks[k]);
    os << std::left << std::setw(7) << ("M" + std::to_string(r.n_breaks)) << std::right << std::setw(14)
       << fmt(r.waic, 2) << std::setw(14) << fmt(r.neg2_log_marginal, 2) << std::setw(14)
       << fmt(r.neg2_log_lik_at_means, 2) << std::setw(10) << fmt(r.average_loss, 2) << std::setw(11)
       << (r.singleton_flag ? "yes" : "no") << "  " << (breaks.empty() ? "-" : breaks) << "\n";
  }
  os << "verdict: M" << c.verdict_breaks << " (minimal WAIC)\n";
  for (const auto& n : c.notes) os << "note: " << n << "\n";
  for (const auto& r : c.ranked)
    for (const auto& w : r.warnings) os << "warning (M" << r.n_breaks << "): " << w << "\n";
  return os.str();
}

}  // namespace hmtm
