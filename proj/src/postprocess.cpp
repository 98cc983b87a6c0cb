#include "hmtm/postprocess.hpp"

#include "hmtm/diagnostics.hpp"
#include "hmtm/rng.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hmtm {

namespace fs = std::filesystem;

std::vector<int> apply_identification(Matrix& U, Vector& v_bar) {
  const auto R = static_cast<int>(U.cols());
  std::vector<int> order(R);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return std::abs(v_bar(a)) > std::abs(v_bar(b)); });
  Matrix U2(U.rows(), R);
  Vector v2(R);
  for (int r = 0; r < R; ++r) {
    U2.col(r) = U.col(order[r]);
    v2(r) = v_bar(order[r]);
    Eigen::Index arg = 0;
    U2.col(r).cwiseAbs().maxCoeff(&arg);
    if (U2(arg, r) < 0.0) U2.col(r) = -U2.col(r);
  }
  U = std::move(U2);
  v_bar = std::move(v2);
  return order;
}

Matrix procrustes_positions(const McmcTrace& trace, int m) {
  if (trace.draws.empty()) throw std::invalid_argument("procrustes_positions: empty trace");
  Matrix ref = trace.draws.front().U[m];
  Matrix mean;
  for (int pass = 0; pass < 50; ++pass) {
    mean = Matrix::Zero(ref.rows(), ref.cols());
    for (const HmtmState& s : trace.draws) {
      Eigen::JacobiSVD<Matrix> svd(s.U[m].transpose() * ref, Eigen::ComputeFullU | Eigen::ComputeFullV);
      mean.noalias() += s.U[m] * (svd.matrixU() * svd.matrixV().transpose());
    }
    mean /= static_cast<double>(trace.draws.size());
    const double change = (mean - ref).norm();
    ref = mean;
    if (change <= 1e-12 * std::max(1.0, mean.norm())) break;
  }
  return mean;
}

std::vector<RegimeSummary> summarize_regimes(const McmcTrace& trace) {
  if (trace.draws.empty()) throw std::invalid_argument("summarize_regimes: empty trace");
  const int M = trace.config.n_regimes();
  const std::vector<int> mode = posterior_mode_states(trace);
  const double G = static_cast<double>(trace.draws.size());
  std::vector<RegimeSummary> out(M);
  for (int m = 0; m < M; ++m) {
    const Matrix& ref = trace.draws.front().U[m];
    Matrix U = Matrix::Zero(ref.rows(), ref.cols());
    for (const HmtmState& s : trace.draws) {
      Matrix aligned = s.U[m];
      for (Eigen::Index r = 0; r < aligned.cols(); ++r)
        if (aligned.col(r).dot(ref.col(r)) < 0.0) aligned.col(r) = -aligned.col(r);
      U += aligned;
    }
    U /= G;

    const std::vector<int> idx = layers_in_regime(mode, m);
    Vector v = Vector::Zero(ref.cols());
    for (const HmtmState& s : trace.draws)
      for (int t : idx) v += s.V.row(t).transpose();
    v /= G * static_cast<double>(idx.size());

    RegimeSummary& r = out[m];
    r.regime_id = m + 1;
    r.column_order = apply_identification(U, v);
    r.U_mean = std::move(U);
    r.positions = procrustes_positions(trace, m);
    r.v_regime_avg = std::move(v);
    r.layer_range = {idx.front() + 1, idx.back() + 1};
  }
  return out;
}

namespace {

// Squared distance summed in sorted order, so the value does not depend on
// the order of the coordinates.
double sq_dist(const Matrix& X, Eigen::Index i, const Matrix& C, Eigen::Index c) {
  const Eigen::Index R = X.cols();
  double buf[16];
  std::vector<double> heap;
  double* d = buf;
  if (R > 16) {
    heap.resize(R);
    d = heap.data();
  }
  for (Eigen::Index r = 0; r < R; ++r) {
    const double e = X(i, r) - C(c, r);
    d[r] = e * e;
  }
  std::sort(d, d + R);
  double s = 0.0;
  for (Eigen::Index r = 0; r < R; ++r) s += d[r];
  return s;
}

int distinct_rows(const Matrix& X) {
  std::set<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::vector<double> row(X.cols());
    for (Eigen::Index r = 0; r < X.cols(); ++r) row[r] = X(i, r);
    rows.insert(std::move(row));
  }
  return static_cast<int>(rows.size());
}

struct Run {
  std::vector<int> assign;
  double objective = 0.0;
  std::vector<double> path;
};

Run lloyd(const Matrix& X, int k, Rng& rng) {
  const Eigen::Index N = X.rows(), R = X.cols();
  Matrix C(k, R);
  // k-means++ seeding
  C.row(0) = X.row(static_cast<Eigen::Index>(rng.uniform_index(N)));
  std::vector<double> d2(N, std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < N; ++i) d2[i] = std::min(d2[i], sq_dist(X, i, C, c - 1));
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    Eigen::Index pick = 0;
    if (total > 0.0) {
      pick = static_cast<Eigen::Index>(rng.categorical(d2));
    } else {
      pick = static_cast<Eigen::Index>(rng.uniform_index(N));
    }
    C.row(c) = X.row(pick);
  }

  Run run;
  run.assign.assign(N, -1);
  for (int iter = 0; iter < 1000; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < N; ++i) {
      int best = 0;
      double bd = sq_dist(X, i, C, 0);
      for (int c = 1; c < k; ++c) {
        const double d = sq_dist(X, i, C, c);
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (run.assign[i] != best) changed = true;
      run.assign[i] = best;
    }
    // empty clusters take the point farthest from its centroid
    std::vector<int> count(k, 0);
    for (int a : run.assign) ++count[a];
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) continue;
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < N; ++i) {
        if (count[run.assign[i]] <= 1) continue;
        const double d = sq_dist(X, i, C, run.assign[i]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      --count[run.assign[far]];
      run.assign[far] = c;
      count[c] = 1;
      changed = true;
    }
    C.setZero();
    for (Eigen::Index i = 0; i < N; ++i) C.row(run.assign[i]) += X.row(i);
    for (int c = 0; c < k; ++c) C.row(c) /= static_cast<double>(count[c]);
    double after = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) after += sq_dist(X, i, C, run.assign[i]);
    run.path.push_back(after);
    run.objective = after;
    if (!changed) break;
  }
  return run;
}

std::vector<int> relabel_by_first_appearance(const std::vector<int>& a) {
  std::map<int, int> map;
  std::vector<int> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto it = map.emplace(a[i], static_cast<int>(map.size()) + 1).first;
    out[i] = it->second;
  }
  return out;
}

}  // namespace

KMeansResult kmeans(const Matrix& X, int k, int restarts, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  if (k > X.rows()) throw std::invalid_argument("kmeans: k exceeds the number of rows");
  const int distinct = distinct_rows(X);
  if (k > distinct)
    throw std::invalid_argument("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(distinct) +
                                " distinct rows");
  KMeansResult best;
  best.objective = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(r));
    Run run = lloyd(X, k, rng);
    best.restart_objectives.push_back(run.objective);
    if (run.objective < best.objective) {
      best.objective = run.objective;
      best.labels = relabel_by_first_appearance(run.assign);
      best.objective_path = std::move(run.path);
    }
  }
  return best;
}

std::vector<int> kmeans_blocks(const Matrix& U_mean, int k, int restarts, std::uint64_t seed) {
  return kmeans(U_mean, k, restarts, seed).labels;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("adjusted_rand_index: label vectors differ in length");
  const double n = static_cast<double>(a.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ra, rb;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1.0;
    ra[a[i]] += 1.0;
    rb[b[i]] += 1.0;
  }
  auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double sj = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [key, v] : joint) sj += c2(v);
  for (const auto& [key, v] : ra) sa += c2(v);
  for (const auto& [key, v] : rb) sb += c2(v);
  const double expected = n > 1 ? sa * sb / c2(n) : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return sj == expected ? 1.0 : 0.0;
  return (sj - expected) / (max_index - expected);
}

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(file.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + file.parent_path().string() + ": " + ec.message());
  }
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open " + file.string() + " for writing");
  return os;
}

std::vector<std::vector<std::string>> read_rows(const fs::path& file, std::vector<std::string>& header) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(file.string() + ": empty file");
  header = split_csv(line);
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv(line));
    if (rows.back().size() != header.size())
      throw std::runtime_error(file.string() + ": row " + std::to_string(rows.size()) + " has wrong column count");
  }
  return rows;
}

double quantile(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

std::vector<fs::path> export_latent(const std::vector<RegimeSummary>& summaries,
                                    const std::vector<std::string>& labels, const fs::path& dir) {
  std::vector<fs::path> written;
  for (const RegimeSummary& s : summaries) {
    const fs::path file = dir / ("latent_regime_" + std::to_string(s.regime_id) + ".csv");
    std::ofstream os = open_out(file);
    os << "node,label";
    for (Eigen::Index r = 0; r < s.U_mean.cols(); ++r) os << ",dim_" << r + 1;
    os << ",cluster\n";
    for (Eigen::Index i = 0; i < s.U_mean.rows(); ++i) {
      const std::string label = i < static_cast<Eigen::Index>(labels.size()) ? labels[i] : std::to_string(i + 1);
      os << i + 1 << "," << quote(label);
      for (Eigen::Index r = 0; r < s.U_mean.cols(); ++r) os << "," << num(s.U_mean(i, r));
      os << "," << (s.cluster_labels ? std::to_string((*s.cluster_labels)[i]) : std::string());
      os << "\n";
    }
    if (!os) throw std::runtime_error("write failed: " + file.string());
    written.push_back(file);
  }
  return written;
}

void export_rules(const McmcTrace& trace, const fs::path& file) {
  const std::vector<RegimeSummary> summaries = summarize_regimes(trace);
  const std::vector<int> mode = posterior_mode_states(trace);
  const int R = trace.config.rank;
  std::ofstream os = open_out(file);
  os << "t,regime";
  for (int r = 0; r < R; ++r) os << ",v_" << r + 1;
  for (int r = 0; r < R; ++r) os << ",v_" << r + 1 << "_lo,v_" << r + 1 << "_hi";
  os << "\n";
  for (int t = 0; t < trace.n_layers; ++t) {
    const std::vector<int>& order = summaries[mode[t]].column_order;
    std::vector<double> mean(R), lo(R), hi(R);
    for (int r = 0; r < R; ++r) {
      std::vector<double> x;
      x.reserve(trace.draws.size());
      for (const HmtmState& s : trace.draws) x.push_back(s.V(t, order[r]));
      mean[r] = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
      lo[r] = quantile(x, 0.025);
      hi[r] = quantile(x, 0.975);
    }
    os << t + 1 << "," << mode[t] + 1;
    for (int r = 0; r < R; ++r) os << "," << num(mean[r]);
    for (int r = 0; r < R; ++r) os << "," << num(lo[r]) << "," << num(hi[r]);
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + file.string());
}

LatentTable read_latent_csv(const fs::path& file) {
  std::vector<std::string> header;
  const auto rows = read_rows(file, header);
  if (header.size() < 4 || header[0] != "node" || header[1] != "label" || header.back() != "cluster")
    throw std::runtime_error(file.string() + ": not a latent-position export");
  const auto R = static_cast<Eigen::Index>(header.size() - 3);
  LatentTable t;
  t.dims.resize(static_cast<Eigen::Index>(rows.size()), R);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.node.push_back(std::stoi(rows[i][0]));
    t.label.push_back(rows[i][1]);
    for (Eigen::Index r = 0; r < R; ++r) t.dims(static_cast<Eigen::Index>(i), r) = std::stod(rows[i][2 + r]);
    t.cluster.push_back(rows[i].back().empty() ? 0 : std::stoi(rows[i].back()));
  }
  return t;
}

RulesTable read_rules_csv(const fs::path& file) {
  std::vector<std::string> header;
  const auto rows = read_rows(file, header);
  if (header.size() < 5 || header[0] != "t" || header[1] != "regime" || (header.size() - 2) % 3 != 0)
    throw std::runtime_error(file.string() + ": not a generation-rule export");
  const auto R = static_cast<Eigen::Index>((header.size() - 2) / 3);
  const auto T = static_cast<Eigen::Index>(rows.size());
  RulesTable t;
  t.mean.resize(T, R);
  t.lo.resize(T, R);
  t.hi.resize(T, R);
  for (Eigen::Index i = 0; i < T; ++i) {
    const auto& row = rows[i];
    t.t.push_back(std::stoi(row[0]));
    t.regime.push_back(std::stoi(row[1]));
    for (Eigen::Index r = 0; r < R; ++r) {
      t.mean(i, r) = std::stod(row[2 + r]);
      t.lo(i, r) = std::stod(row[2 + R + 2 * r]);
      t.hi(i, r) = std::stod(row[3 + R + 2 * r]);
    }
  }
  return t;
}

}  // namespace hmtm
