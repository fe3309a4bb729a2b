#include "plasticnet/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <string_view>

namespace fs = std::filesystem;

namespace plasticnet {

namespace {

std::string fmt_double(double v, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// non-finite doubles are not valid JSON numbers; keep them as strings
Json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double num_from(const Json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw param_error("bad numeric value '" + s + "'");
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

double get_num(const Json& j, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : num_from(*it);
}
int get_int(const Json& j, const char* key, int fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<int>();
}
bool get_bool(const Json& j, const char* key, bool fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<bool>();
}
uint64_t get_u64(const Json& j, const char* key, uint64_t fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<uint64_t>();
}
std::string get_str(const Json& j, const char* key, const std::string& fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<std::string>();
}

Json vec_to_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
Vec vec_from_json(const Json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = num_from(a[static_cast<size_t>(i)]);
  return v;
}
Json ivec_to_json(const IVec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}
IVec ivec_from_json(const Json& a) {
  IVec v(static_cast<Eigen::Index>(a.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = a[static_cast<size_t>(i)].get<int>();
  return v;
}
Json mat_to_json(const Mat& m) {  // column-major flat
  Json a = Json::array();
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(m(r, c));
  return a;
}
Mat mat_from_json(const Json& a, Eigen::Index rows, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw param_error("matrix payload has wrong length");
  Mat m(rows, cols);
  size_t i = 0;
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = num_from(a[i++]);
  return m;
}

Json dist_to_json(const DistSpec& d) {
  const char* kind = d.kind == DistSpec::Kind::constant  ? "constant"
                     : d.kind == DistSpec::Kind::uniform ? "uniform"
                                                         : "normal";
  return Json{{"kind", kind}, {"a", d.a}, {"b", d.b}};
}
DistSpec dist_from_json(const Json& j, DistSpec base) {
  const std::string kind = get_str(j, "kind", "");
  if (kind == "constant")
    base.kind = DistSpec::Kind::constant;
  else if (kind == "uniform")
    base.kind = DistSpec::Kind::uniform;
  else if (kind == "normal")
    base.kind = DistSpec::Kind::normal;
  else if (!kind.empty())
    throw param_error("unknown distribution kind '" + kind + "'");
  base.a = get_num(j, "a", base.a);
  base.b = get_num(j, "b", base.b);
  return base;
}

Json rule_to_json(const LearningRuleParams& r) {
  return Json{{"kind", rule_kind_name(r.kind)},
              {"a_plus", r.a_plus},
              {"tau_plus", r.tau_plus},
              {"a_minus", r.a_minus},
              {"tau_minus", r.tau_minus},
              {"w_max", r.w_max},
              {"w_min", r.w_min},
              {"noise_std", r.noise_std}};
}
LearningRuleParams rule_from_json(const Json& j, LearningRuleParams base) {
  const std::string kind = get_str(j, "kind", "");
  if (!kind.empty()) base.kind = rule_kind_from_name(kind);
  base.a_plus = get_num(j, "a_plus", base.a_plus);
  base.tau_plus = get_num(j, "tau_plus", base.tau_plus);
  base.a_minus = get_num(j, "a_minus", base.a_minus);
  base.tau_minus = get_num(j, "tau_minus", base.tau_minus);
  base.w_max = get_num(j, "w_max", base.w_max);
  base.w_min = get_num(j, "w_min", base.w_min);
  base.noise_std = get_num(j, "noise_std", base.noise_std);
  return base;
}

Json gamma_to_json(const GammaPrior& g) { return Json{{"shape", g.shape}, {"rate", g.rate}}; }
GammaPrior gamma_from_json(const Json& j, GammaPrior base) {
  base.shape = get_num(j, "shape", base.shape);
  base.rate = get_num(j, "rate", base.rate);
  return base;
}

// rows of doubles; the header line is skipped when it does not parse
std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw param_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.c_str();
    bool ok = true;
    while (*p) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) {
        ok = false;
        break;
      }
      row.push_back(v);
      p = end;
      if (*p == ',')
        ++p;
      else if (*p != '\0') {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw param_error("unparseable row in " + path + ": " + line);
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw param_error("cannot write " + path);
  return out;
}

}  // namespace

std::string rule_kind_name(RuleKind kind) {
  switch (kind) {
    case RuleKind::static_rule: return "static";
    case RuleKind::additive: return "additive";
    case RuleKind::additive_bounded: return "additive_bounded";
    case RuleKind::multiplicative: return "multiplicative";
  }
  throw param_error("unknown rule kind");
}

RuleKind rule_kind_from_name(const std::string& name) {
  if (name == "static") return RuleKind::static_rule;
  if (name == "additive") return RuleKind::additive;
  if (name == "additive_bounded") return RuleKind::additive_bounded;
  if (name == "multiplicative") return RuleKind::multiplicative;
  throw param_error("unknown rule '" + name +
                    "' (expected static|additive|additive_bounded|multiplicative)");
}

std::string link_name(LinkKind link) {
  return link == LinkKind::exp_link ? "exp" : "softplus";
}

LinkKind link_from_name(const std::string& name) {
  if (name == "exp") return LinkKind::exp_link;
  if (name == "softplus") return LinkKind::softplus;
  throw param_error("unknown link '" + name + "' (expected exp|softplus)");
}

void ensure_dir(const std::string& path) {
  if (path.empty()) throw param_error("empty directory path");
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec && !fs::is_directory(path))
    throw param_error("cannot create directory " + path + ": " + ec.message());
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void write_text_file(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw param_error("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw param_error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return text;
}

Json read_json_file(const std::string& path) {
  try {
    return Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw param_error(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

void write_spikes_csv(const std::string& path, const SpikeData& spikes) {
  auto out = open_out(path);
  out << "neuron_id,time_s\n";
  char buf[64];
  for (int n = 0; n < spikes.n_neurons; ++n)
    for (double t : spikes.events[static_cast<size_t>(n)]) {
      std::snprintf(buf, sizeof(buf), "%d,%.6f\n", n, t);
      out << buf;
    }
  if (!out) throw param_error("write failed for " + path);
}

std::vector<std::vector<double>> read_spike_events_csv(const std::string& path,
                                                       int n_neurons_hint) {
  const auto rows = read_numeric_csv(path);
  int n = std::max(n_neurons_hint, 0);
  for (const auto& r : rows) {
    if (r.size() < 2) throw param_error("bad spike row in " + path);
    const int id = static_cast<int>(std::llround(r[0]));
    if (id < 0) throw param_error("negative neuron id in " + path);
    n = std::max(n, id + 1);
  }
  std::vector<std::vector<double>> events(static_cast<size_t>(n));
  for (const auto& r : rows)
    events[static_cast<size_t>(std::llround(r[0]))].push_back(r[1]);
  for (auto& e : events) std::sort(e.begin(), e.end());
  return events;
}

void write_weights_csv(const std::string& path, const Mat& weights, int n_neurons) {
  if (weights.rows() != static_cast<Eigen::Index>(n_neurons) * n_neurons)
    throw param_error("weights matrix does not match the neuron count");
  auto out = open_out(path);
  out << "edge,coarse_index,value\n";
  char buf[96];
  for (int pre = 0; pre < n_neurons; ++pre)
    for (int post = 0; post < n_neurons; ++post) {
      if (pre == post) continue;
      const int e = pair_index(pre, post, n_neurons);
      for (Eigen::Index k = 0; k < weights.cols(); ++k) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.17g\n", e, static_cast<long long>(k),
                      weights(e, k));
        out << buf;
      }
    }
  if (!out) throw param_error("write failed for " + path);
}

Mat read_weights_csv(const std::string& path, int n_neurons) {
  const auto rows = read_numeric_csv(path);
  Eigen::Index n_steps = 1;
  for (const auto& r : rows) {
    if (r.size() < 3) throw param_error("bad weight row in " + path);
    n_steps = std::max<Eigen::Index>(n_steps, std::llround(r[1]) + 1);
  }
  Mat w = Mat::Zero(static_cast<Eigen::Index>(n_neurons) * n_neurons, n_steps);
  for (const auto& r : rows) {
    const auto e = static_cast<Eigen::Index>(std::llround(r[0]));
    const auto k = static_cast<Eigen::Index>(std::llround(r[1]));
    if (e < 0 || e >= w.rows() || k < 0) throw param_error("weight index out of range in " + path);
    w(e, k) = r[2];
  }
  return w;
}

void write_adjacency_csv(const std::string& path, const IMat& adjacency) {
  auto out = open_out(path);
  out << "pre,post,value\n";
  char buf[64];
  for (Eigen::Index pre = 0; pre < adjacency.rows(); ++pre)
    for (Eigen::Index post = 0; post < adjacency.cols(); ++post) {
      std::snprintf(buf, sizeof(buf), "%lld,%lld,%d\n", static_cast<long long>(pre),
                    static_cast<long long>(post), adjacency(pre, post));
      out << buf;
    }
  if (!out) throw param_error("write failed for " + path);
}

IMat read_adjacency_csv(const std::string& path) {
  const auto rows = read_numeric_csv(path);
  Eigen::Index n = 0;
  for (const auto& r : rows) {
    if (r.size() < 3) throw param_error("bad adjacency row in " + path);
    n = std::max<Eigen::Index>(n, std::max(std::llround(r[0]), std::llround(r[1])) + 1);
  }
  if (n == 0) throw param_error("empty adjacency file " + path);
  IMat a = IMat::Zero(n, n);
  for (const auto& r : rows)
    a(static_cast<Eigen::Index>(std::llround(r[0])), static_cast<Eigen::Index>(std::llround(r[1]))) =
        static_cast<int>(std::llround(r[2]));
  return a;
}

void write_scores_csv(const std::string& path, const Mat& scores) {
  if (scores.rows() != scores.cols()) throw param_error("scores matrix must be square");
  auto out = open_out(path);
  out << "pre,post,score\n";
  char buf[96];
  for (Eigen::Index pre = 0; pre < scores.rows(); ++pre)
    for (Eigen::Index post = 0; post < scores.cols(); ++post) {
      if (pre == post) continue;
      std::snprintf(buf, sizeof(buf), "%lld,%lld,%.17g\n", static_cast<long long>(pre),
                    static_cast<long long>(post), scores(pre, post));
      out << buf;
    }
  if (!out) throw param_error("write failed for " + path);
}

Mat read_scores_csv(const std::string& path) {
  const auto rows = read_numeric_csv(path);
  Eigen::Index n = 0;
  for (const auto& r : rows) {
    if (r.size() < 3) throw param_error("bad score row in " + path);
    n = std::max<Eigen::Index>(n, std::max(std::llround(r[0]), std::llround(r[1])) + 1);
  }
  if (n == 0) throw param_error("empty scores file " + path);
  Mat s = Mat::Zero(n, n);
  for (const auto& r : rows)
    s(static_cast<Eigen::Index>(std::llround(r[0])), static_cast<Eigen::Index>(std::llround(r[1]))) =
        r[2];
  return s;
}

void write_roc_csv(const std::string& path, const RocResult& roc) {
  auto out = open_out(path);
  out << "threshold,fpr,tpr\n";
  for (Eigen::Index i = 0; i < roc.threshold.size(); ++i)
    out << fmt_double(roc.threshold[i]) << ',' << fmt_double(roc.fpr[i]) << ','
        << fmt_double(roc.tpr[i]) << '\n';
  if (!out) throw param_error("write failed for " + path);
}

void write_rule_curve_csv(const std::string& path, const LearningRuleParams& rule,
                          double lag_max_s, int n_points) {
  if (n_points < 2 || lag_max_s <= 0) throw param_error("bad rule-curve grid");
  auto out = open_out(path);
  out << "lag_s,l_plus,l_minus\n";
  for (int i = 0; i < n_points; ++i) {
    const double lag = lag_max_s * i / (n_points - 1);
    const double lp = rule.a_plus * std::exp(-lag / rule.tau_plus);
    const double lm = rule.a_minus * std::exp(-lag / rule.tau_minus);
    out << fmt_double(lag, "%.9g") << ',' << fmt_double(lp, "%.9g") << ','
        << fmt_double(lm, "%.9g") << '\n';
  }
  if (!out) throw param_error("write failed for " + path);
}

Json chain_record_to_json(const ChainRecord& record) {
  const auto n = record.adjacency.rows();
  Json j;
  j["iteration"] = record.iteration;
  j["log_posterior"] = jnum(record.log_posterior);
  j["link"] = link_name(record.link);
  j["n_neurons"] = static_cast<int>(n);
  j["n_steps"] = static_cast<int>(record.weights.cols());
  j["n_basis"] = static_cast<int>(record.theta_raw.rows());
  j["hmc_divergences"] = record.hmc_divergences;
  j["hmc"] = Json{{"mu", record.hmc.mu},         {"log_eps", record.hmc.log_eps},
                  {"log_eps_bar", record.hmc.log_eps_bar}, {"h_bar", record.hmc.h_bar},
                  {"t", record.hmc.t},           {"frozen", record.hmc.frozen}};
  j["rule"] = rule_to_json(record.rule);
  Json adj = Json::array();
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) adj.push_back(record.adjacency(r, c));
  j["adjacency"] = std::move(adj);
  // only present off-diagonal synapses carry a trajectory; the rest are zero
  Json edges = Json::array();
  for (Eigen::Index pre = 0; pre < n; ++pre)
    for (Eigen::Index post = 0; post < n; ++post) {
      if (pre == post || record.adjacency(pre, post) == 0) continue;
      const auto e = pre * n + post;
      Json w = Json::array();
      for (Eigen::Index k = 0; k < record.weights.cols(); ++k) w.push_back(record.weights(e, k));
      edges.push_back(Json{{"edge", static_cast<int>(e)}, {"w", std::move(w)}});
    }
  j["edges"] = std::move(edges);
  j["bias"] = vec_to_json(record.bias);
  j["self_weight"] = vec_to_json(record.self_weight);
  j["self_edge"] = ivec_to_json(record.self_edge);
  j["theta_raw"] = mat_to_json(record.theta_raw);
  j["stim_rows"] = static_cast<int>(record.stim_coeffs.rows());
  j["stim_cols"] = static_cast<int>(record.stim_coeffs.cols());
  if (record.stim_coeffs.size() > 0) j["stim_coeffs"] = mat_to_json(record.stim_coeffs);
  return j;
}

ChainRecord chain_record_from_json(const Json& j) {
  ChainRecord r;
  const int n = j.at("n_neurons").get<int>();
  const int n_steps = j.at("n_steps").get<int>();
  const int n_basis = j.at("n_basis").get<int>();
  if (n < 1 || n_steps < 1 || n_basis < 1) throw param_error("bad chain record dimensions");
  r.iteration = j.at("iteration").get<int>();
  r.log_posterior = num_from(j.at("log_posterior"));
  r.link = link_from_name(j.at("link").get<std::string>());
  r.hmc_divergences = j.at("hmc_divergences").get<long long>();
  const Json& h = j.at("hmc");
  r.hmc.mu = num_from(h.at("mu"));
  r.hmc.log_eps = num_from(h.at("log_eps"));
  r.hmc.log_eps_bar = num_from(h.at("log_eps_bar"));
  r.hmc.h_bar = num_from(h.at("h_bar"));
  r.hmc.t = h.at("t").get<int>();
  r.hmc.frozen = h.at("frozen").get<bool>();
  r.rule = rule_from_json(j.at("rule"), LearningRuleParams{});
  const Json& adj = j.at("adjacency");
  if (static_cast<int>(adj.size()) != n * n) throw param_error("adjacency payload has wrong length");
  r.adjacency.resize(n, n);
  {
    size_t i = 0;
    for (int row = 0; row < n; ++row)
      for (int col = 0; col < n; ++col) r.adjacency(row, col) = adj[i++].get<int>();
  }
  r.weights = Mat::Zero(static_cast<Eigen::Index>(n) * n, n_steps);
  for (const Json& edge : j.at("edges")) {
    const int e = edge.at("edge").get<int>();
    if (e < 0 || e >= n * n) throw param_error("edge index out of range in chain record");
    const Json& w = edge.at("w");
    if (static_cast<int>(w.size()) != n_steps) throw param_error("trajectory has wrong length");
    for (int k = 0; k < n_steps; ++k) r.weights(e, k) = num_from(w[static_cast<size_t>(k)]);
  }
  r.bias = vec_from_json(j.at("bias"));
  r.self_weight = vec_from_json(j.at("self_weight"));
  r.self_edge = ivec_from_json(j.at("self_edge"));
  if (r.bias.size() != n || r.self_weight.size() != n || r.self_edge.size() != n)
    throw param_error("per-neuron payload has wrong length");
  r.theta_raw = mat_from_json(j.at("theta_raw"), n_basis, static_cast<Eigen::Index>(n) * n);
  const int sr = get_int(j, "stim_rows", 0), sc = get_int(j, "stim_cols", 0);
  r.stim_coeffs = (sr > 0 && sc > 0) ? mat_from_json(j.at("stim_coeffs"), sr, sc) : Mat(sr, sc);
  return r;
}

void append_chain_record(const std::string& path, const ChainRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw param_error("cannot append to " + path);
  out << chain_record_to_json(record).dump() << '\n';
  if (!out) throw param_error("write failed for " + path);
}

PosteriorChain read_chain(const std::string& path, long long* valid_bytes) {
  const std::string content = read_text_file(path);
  PosteriorChain chain;
  long long valid = 0;
  size_t start = 0;
  while (start < content.size()) {
    const size_t nl = content.find('\n', start);
    const bool has_nl = nl != std::string::npos;
    const size_t stop = has_nl ? nl : content.size();
    std::string_view line(content.data() + start, stop - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (!line.empty()) {
      try {
        chain.push_back(chain_record_from_json(Json::parse(line.begin(), line.end())));
      } catch (const std::exception&) {
        break;  // torn or corrupt tail: everything before it stands
      }
    }
    valid = static_cast<long long>(has_nl ? stop + 1 : stop);
    start = has_nl ? nl + 1 : content.size();
  }
  if (valid_bytes) *valid_bytes = valid;
  return chain;
}

void truncate_file(const std::string& path, long long size) {
  std::error_code ec;
  fs::resize_file(path, static_cast<uintmax_t>(std::max<long long>(size, 0)), ec);
  if (ec) throw param_error("cannot truncate " + path + ": " + ec.message());
}

Json sim_config_to_json(const SimConfig& cfg) {
  Json j;
  j["n_neurons"] = cfg.n_neurons;
  j["duration_s"] = cfg.grid.duration_s;
  j["fine_dt_s"] = cfg.grid.fine_dt_s;
  j["coarse_dt_s"] = cfg.grid.coarse_dt_s;
  j["sparsity"] = cfg.sparsity;
  j["rule"] = rule_to_json(cfg.rule);
  j["bias_mean_hz"] = cfg.bias_mean_hz;
  j["bias_std_hz"] = cfg.bias_std_hz;
  j["init_weight"] = dist_to_json(cfg.init_weight);
  j["self_weight"] = dist_to_json(cfg.self_weight);
  j["n_basis"] = cfg.n_basis;
  j["lag_max_s"] = cfg.lag_max_s;
  j["link"] = link_name(cfg.link);
  j["seed"] = cfg.seed;
  if (cfg.fixed_adjacency) {
    Json a = Json::array();
    for (Eigen::Index r = 0; r < cfg.fixed_adjacency->rows(); ++r) {
      Json row = Json::array();
      for (Eigen::Index c = 0; c < cfg.fixed_adjacency->cols(); ++c)
        row.push_back((*cfg.fixed_adjacency)(r, c));
      a.push_back(std::move(row));
    }
    j["fixed_adjacency"] = std::move(a);
  }
  return j;
}

SimConfig sim_config_from_json(const Json& j) {
  SimConfig cfg;
  if (j.contains("preset")) cfg = make_paper_experiment(j.at("preset").get<std::string>());
  cfg.n_neurons = get_int(j, "n_neurons", cfg.n_neurons);
  cfg.grid = TimeGrid(get_num(j, "duration_s", cfg.grid.duration_s),
                      get_num(j, "fine_dt_s", cfg.grid.fine_dt_s),
                      get_num(j, "coarse_dt_s", cfg.grid.coarse_dt_s));
  cfg.sparsity = get_num(j, "sparsity", cfg.sparsity);
  if (j.contains("rule")) cfg.rule = rule_from_json(j.at("rule"), cfg.rule);
  cfg.bias_mean_hz = get_num(j, "bias_mean_hz", cfg.bias_mean_hz);
  cfg.bias_std_hz = get_num(j, "bias_std_hz", cfg.bias_std_hz);
  if (j.contains("init_weight")) cfg.init_weight = dist_from_json(j.at("init_weight"), cfg.init_weight);
  if (j.contains("self_weight")) cfg.self_weight = dist_from_json(j.at("self_weight"), cfg.self_weight);
  cfg.n_basis = get_int(j, "n_basis", cfg.n_basis);
  cfg.lag_max_s = get_num(j, "lag_max_s", cfg.lag_max_s);
  cfg.link = link_from_name(get_str(j, "link", link_name(cfg.link)));
  cfg.seed = get_u64(j, "seed", cfg.seed);
  if (j.contains("fixed_adjacency")) {
    const Json& a = j.at("fixed_adjacency");
    const auto n = static_cast<Eigen::Index>(a.size());
    IMat m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Json& row = a[static_cast<size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != n)
        throw param_error("fixed_adjacency must be square");
      for (Eigen::Index c = 0; c < n; ++c) m(r, c) = row[static_cast<size_t>(c)].get<int>();
    }
    cfg.fixed_adjacency = std::move(m);
  }
  return cfg;
}

Json priors_to_json(const PriorSpec& p) {
  Json j;
  j["a_plus"] = gamma_to_json(p.a_plus);
  j["a_minus"] = gamma_to_json(p.a_minus);
  j["tau_plus"] = gamma_to_json(p.tau_plus);
  j["tau_minus"] = gamma_to_json(p.tau_minus);
  j["w_max"] = gamma_to_json(p.w_max);
  j["w_min_neg"] = gamma_to_json(p.w_min_neg);
  j["self_weight_mean"] = p.self_weight_mean;
  j["self_weight_sd"] = p.self_weight_sd;
  j["self_edge_prob"] = p.self_edge_prob;
  j["sparsity"] = p.sparsity;
  j["dirichlet_alpha"] = p.dirichlet_alpha;
  j["init_weight"] = dist_to_json(p.init_weight);
  j["bias_mean"] = jnum(p.bias_mean);
  j["bias_sd"] = p.bias_sd;
  j["stim_coeff_sd"] = p.stim_coeff_sd;
  return j;
}

PriorSpec priors_from_json(const Json& j, PriorSpec base) {
  if (j.contains("a_plus")) base.a_plus = gamma_from_json(j.at("a_plus"), base.a_plus);
  if (j.contains("a_minus")) base.a_minus = gamma_from_json(j.at("a_minus"), base.a_minus);
  if (j.contains("tau_plus")) base.tau_plus = gamma_from_json(j.at("tau_plus"), base.tau_plus);
  if (j.contains("tau_minus")) base.tau_minus = gamma_from_json(j.at("tau_minus"), base.tau_minus);
  if (j.contains("w_max")) base.w_max = gamma_from_json(j.at("w_max"), base.w_max);
  if (j.contains("w_min_neg")) base.w_min_neg = gamma_from_json(j.at("w_min_neg"), base.w_min_neg);
  base.self_weight_mean = get_num(j, "self_weight_mean", base.self_weight_mean);
  base.self_weight_sd = get_num(j, "self_weight_sd", base.self_weight_sd);
  base.self_edge_prob = get_num(j, "self_edge_prob", base.self_edge_prob);
  base.sparsity = get_num(j, "sparsity", base.sparsity);
  base.dirichlet_alpha = get_num(j, "dirichlet_alpha", base.dirichlet_alpha);
  if (j.contains("init_weight")) base.init_weight = dist_from_json(j.at("init_weight"), base.init_weight);
  base.bias_mean = get_num(j, "bias_mean", base.bias_mean);
  base.bias_sd = get_num(j, "bias_sd", base.bias_sd);
  base.stim_coeff_sd = get_num(j, "stim_coeff_sd", base.stim_coeff_sd);
  return base;
}

Json infer_job_to_json(const InferJob& job) {
  Json j;
  j["rule"] = rule_kind_name(job.options.rule);
  j["link"] = link_name(job.options.link);
  j["particles"] = job.options.n_particles;
  j["sweeps"] = job.options.total_sweeps;
  j["seed"] = job.options.seed;
  j["hmc_adapt_frac"] = job.options.hmc_adapt_frac;
  j["hmc_leapfrog"] = job.options.hmc_leapfrog;
  j["hmc_step0"] = job.options.hmc_step0;
  j["hmc_target_accept"] = job.options.hmc_target_accept;
  if (job.options.noise_std) j["noise_std"] = *job.options.noise_std;
  if (job.options.flat_likelihood) j["flat_likelihood"] = true;
  j["train_end_s"] = job.train_end_s;
  j["duration_s"] = job.duration_s;
  j["fine_dt_s"] = job.fine_dt_s;
  j["coarse_dt_s"] = job.coarse_dt_s;
  j["n_neurons"] = job.n_neurons;
  j["n_basis"] = job.n_basis;
  j["lag_max_s"] = job.lag_max_s;
  j["burn_in_frac"] = job.burn_in_frac;
  j["thin"] = job.thin;
  j["priors"] = priors_to_json(job.priors);
  // threads and resume are execution details, deliberately not part of the
  // recorded configuration: outputs must not depend on them
  return j;
}

InferJob infer_job_from_json(const Json& j, InferJob base) {
  base.options.rule = rule_kind_from_name(get_str(j, "rule", rule_kind_name(base.options.rule)));
  base.options.link = link_from_name(get_str(j, "link", link_name(base.options.link)));
  base.options.n_particles = get_int(j, "particles", base.options.n_particles);
  base.options.total_sweeps = get_int(j, "sweeps", base.options.total_sweeps);
  base.options.seed = get_u64(j, "seed", base.options.seed);
  base.options.hmc_adapt_frac = get_num(j, "hmc_adapt_frac", base.options.hmc_adapt_frac);
  base.options.hmc_leapfrog = get_int(j, "hmc_leapfrog", base.options.hmc_leapfrog);
  base.options.hmc_step0 = get_num(j, "hmc_step0", base.options.hmc_step0);
  base.options.hmc_target_accept = get_num(j, "hmc_target_accept", base.options.hmc_target_accept);
  if (j.contains("noise_std") && !j.at("noise_std").is_null())
    base.options.noise_std = num_from(j.at("noise_std"));
  base.options.flat_likelihood = get_bool(j, "flat_likelihood", base.options.flat_likelihood);
  base.train_end_s = get_num(j, "train_end_s", base.train_end_s);
  base.duration_s = get_num(j, "duration_s", base.duration_s);
  base.fine_dt_s = get_num(j, "fine_dt_s", base.fine_dt_s);
  base.coarse_dt_s = get_num(j, "coarse_dt_s", base.coarse_dt_s);
  base.n_neurons = get_int(j, "n_neurons", base.n_neurons);
  base.n_basis = get_int(j, "n_basis", base.n_basis);
  base.lag_max_s = get_num(j, "lag_max_s", base.lag_max_s);
  base.burn_in_frac = get_num(j, "burn_in_frac", base.burn_in_frac);
  base.thin = get_int(j, "thin", base.thin);
  if (j.contains("priors")) base.priors = priors_from_json(j.at("priors"), base.priors);
  return base;
}

Json baseline_job_to_json(const BaselineJob& job) {
  Json j;
  j["method"] = job.method;
  j["lambda"] = job.lambda;
  j["lambda_grid"] = job.lambda_grid;
  j["max_lag_s"] = job.max_lag_s;
  j["bin_s"] = job.bin_s;
  j["train_end_s"] = job.train_end_s;
  j["duration_s"] = job.duration_s;
  j["fine_dt_s"] = job.fine_dt_s;
  j["coarse_dt_s"] = job.coarse_dt_s;
  j["n_neurons"] = job.n_neurons;
  j["n_basis"] = job.n_basis;
  j["lag_max_s"] = job.lag_max_s;
  return j;
}

BaselineJob baseline_job_from_json(const Json& j, BaselineJob base) {
  base.method = get_str(j, "method", base.method);
  base.lambda = get_num(j, "lambda", base.lambda);
  if (j.contains("lambda_grid")) base.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
  base.max_lag_s = get_num(j, "max_lag_s", base.max_lag_s);
  base.bin_s = get_num(j, "bin_s", base.bin_s);
  base.train_end_s = get_num(j, "train_end_s", base.train_end_s);
  base.duration_s = get_num(j, "duration_s", base.duration_s);
  base.fine_dt_s = get_num(j, "fine_dt_s", base.fine_dt_s);
  base.coarse_dt_s = get_num(j, "coarse_dt_s", base.coarse_dt_s);
  base.n_neurons = get_int(j, "n_neurons", base.n_neurons);
  base.n_basis = get_int(j, "n_basis", base.n_basis);
  base.lag_max_s = get_num(j, "lag_max_s", base.lag_max_s);
  return base;
}

Json evaluate_job_to_json(const EvaluateJob& job) {
  Json j;
  j["chain"] = job.chain_path;
  j["scores"] = job.scores_path;
  j["data"] = job.data_path;
  j["truth_adjacency"] = job.truth_adjacency_path;
  j["truth_weights"] = job.truth_weights_path;
  j["train_end_s"] = job.train_end_s;
  j["burn_in_frac"] = job.burn_in_frac;
  j["duration_s"] = job.duration_s;
  j["fine_dt_s"] = job.fine_dt_s;
  j["coarse_dt_s"] = job.coarse_dt_s;
  j["n_neurons"] = job.n_neurons;
  j["n_basis"] = job.n_basis;
  j["lag_max_s"] = job.lag_max_s;
  return j;
}

EvaluateJob evaluate_job_from_json(const Json& j, EvaluateJob base) {
  base.chain_path = get_str(j, "chain", base.chain_path);
  base.scores_path = get_str(j, "scores", base.scores_path);
  base.data_path = get_str(j, "data", base.data_path);
  base.truth_adjacency_path = get_str(j, "truth_adjacency", base.truth_adjacency_path);
  base.truth_weights_path = get_str(j, "truth_weights", base.truth_weights_path);
  base.train_end_s = get_num(j, "train_end_s", base.train_end_s);
  base.burn_in_frac = get_num(j, "burn_in_frac", base.burn_in_frac);
  base.duration_s = get_num(j, "duration_s", base.duration_s);
  base.fine_dt_s = get_num(j, "fine_dt_s", base.fine_dt_s);
  base.coarse_dt_s = get_num(j, "coarse_dt_s", base.coarse_dt_s);
  base.n_neurons = get_int(j, "n_neurons", base.n_neurons);
  base.n_basis = get_int(j, "n_basis", base.n_basis);
  base.lag_max_s = get_num(j, "lag_max_s", base.lag_max_s);
  return base;
}

Dataset load_dataset(const std::string& data_path, double duration_s, double fine_dt_s,
                     double coarse_dt_s, int n_neurons) {
  std::string spikes_path = data_path, config_path;
  if (fs::is_directory(data_path)) {
    spikes_path = path_join(data_path, "spikes.csv");
    config_path = path_join(data_path, "config.json");
  } else {
    config_path = path_join(fs::path(data_path).parent_path().string(), "config.json");
  }
  if (!file_exists(spikes_path)) throw param_error("no spike file at " + spikes_path);
  if (file_exists(config_path)) {
    const Json cfg = read_json_file(config_path);
    if (duration_s <= 0) duration_s = get_num(cfg, "duration_s", -1.0);
    if (fine_dt_s <= 0) fine_dt_s = get_num(cfg, "fine_dt_s", -1.0);
    if (coarse_dt_s <= 0) coarse_dt_s = get_num(cfg, "coarse_dt_s", -1.0);
    if (n_neurons < 0) n_neurons = get_int(cfg, "n_neurons", -1);
  }
  if (fine_dt_s <= 0) fine_dt_s = 1e-3;
  if (coarse_dt_s <= 0) coarse_dt_s = 1.0;

  auto events = read_spike_events_csv(spikes_path, n_neurons);
  n_neurons = std::max(n_neurons, static_cast<int>(events.size()));
  if (n_neurons <= 0) throw param_error("dataset at " + data_path + " has no neurons");
  events.resize(static_cast<size_t>(n_neurons));

  double max_t = 0.0;
  for (const auto& e : events)
    if (!e.empty()) max_t = std::max(max_t, e.back());
  if (duration_s <= 0) duration_s = (std::floor(max_t / coarse_dt_s) + 1.0) * coarse_dt_s;
  for (auto& e : events)
    for (auto& t : e) {
      if (t < 0.0) throw param_error("negative spike time in " + spikes_path);
      if (t >= duration_s) {
        // written times carry 6 decimals, so a spike at the very end of the
        // recording can round onto the boundary; anything further out is a
        // real mismatch
        if (t >= duration_s + 1e-6)
          throw param_error("spike time " + fmt_double(t) + " beyond duration in " + spikes_path);
        t = duration_s - 1e-9;
      }
    }
  TimeGrid grid(duration_s, fine_dt_s, coarse_dt_s);
  return Dataset{SpikeData::from_events(std::move(events), grid), grid};
}

void cmd_simulate(const SimConfig& config, const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  Rng net_rng = make_substream(config.seed, 0, 0, 0);
  const SampledNetwork sampled = sample_network(config, net_rng);
  Rng sim_rng = make_substream(config.seed, 0, 1, 0);
  const SimResult result = simulate(config, sampled.net, sampled.glm, sim_rng);

  write_spikes_csv(path_join(out_dir, "spikes.csv"), result.spikes);
  write_weights_csv(path_join(out_dir, "truth_weights.csv"), result.weights, config.n_neurons);
  write_adjacency_csv(path_join(out_dir, "truth_adjacency.csv"), sampled.net.adjacency);
  write_json_file(path_join(out_dir, "config.json"), sim_config_to_json(config));

  const double total = static_cast<double>(result.spikes.total_count());
  std::cerr << "simulate: " << total << " spikes ("
            << fmt_double(total / (config.grid.duration_s * config.n_neurons), "%.2f")
            << " Hz/neuron) over " << config.grid.duration_s << " s -> " << out_dir << "\n";
}

namespace {

Json infer_summary(const PosteriorChain& chain, const InferJob& job, const GibbsEngine& engine,
                   const Dataset& data, const BasisSet& basis) {
  Json s;
  s["sweeps_completed"] = chain.back().iteration;
  s["records"] = chain.size();
  s["burn_in_frac"] = job.burn_in_frac;
  s["log_posterior_last"] = jnum(chain.back().log_posterior);
  s["hmc_divergences"] = engine.hmc_divergences();
  s["hmc_step_size"] = engine.hmc_step_size();

  const Mat prob = posterior_edge_probability(chain, job.burn_in_frac);
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < prob.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < prob.cols(); ++c) row.push_back(prob(r, c));
    rows.push_back(std::move(row));
  }
  s["edge_probability"] = std::move(rows);
  s["self_edge_frequency"] = vec_to_json(prob.diagonal());

  const auto [start, stop] = burn_in_range(chain.size(), job.burn_in_frac);
  const auto retained = static_cast<double>(stop - start);
  Vec bias = Vec::Zero(chain[start].bias.size());
  Vec self_w = Vec::Zero(chain[start].self_weight.size());
  for (size_t r = start; r < stop; ++r) {
    bias += chain[r].bias;
    self_w += chain[r].self_weight;
  }
  s["bias_posterior_mean"] = vec_to_json(bias / retained);
  s["self_weight_posterior_mean"] = vec_to_json(self_w / retained);

  if (rule_is_stdp(job.options.rule)) {
    double ap = 0, tp = 0, am = 0, tm = 0, wmax = 0, wmin = 0;
    for (size_t r = start; r < stop; ++r) {
      ap += chain[r].rule.a_plus;
      tp += chain[r].rule.tau_plus;
      am += chain[r].rule.a_minus;
      tm += chain[r].rule.tau_minus;
      wmax += chain[r].rule.w_max;
      wmin += chain[r].rule.w_min;
    }
    Json rp;
    rp["a_plus"] = ap / retained;
    rp["tau_plus"] = tp / retained;
    rp["a_minus"] = am / retained;
    rp["tau_minus"] = tm / retained;
    if (rule_is_bounded(job.options.rule)) {
      rp["w_max"] = wmax / retained;
      rp["w_min"] = wmin / retained;
    }
    rp["noise_std"] = engine.state().rule.noise_std;
    s["rule_posterior_mean"] = std::move(rp);
  }

  if (job.train_end_s > 0 && job.train_end_s < data.grid.duration_s - 1e-12) {
    const PredictiveLL pll =
        predictive_ll(chain, job.train_end_s, data.spikes, data.grid, basis, job.burn_in_frac);
    s["predictive_ll"] = Json{{"mean", jnum(pll.mean)}, {"sd", pll.sd}, {"n", pll.n}};
  }
  return s;
}

}  // namespace

void cmd_infer(const std::string& data_path, const InferJob& job, const std::string& out_dir) {
  ensure_dir(out_dir);
  const Dataset data =
      load_dataset(data_path, job.duration_s, job.fine_dt_s, job.coarse_dt_s, job.n_neurons);

  GibbsOptions opt = job.options;
  opt.k_begin = 0;
  opt.k_end = -1;
  if (job.train_end_s > 0) {
    const double steps = job.train_end_s / data.grid.coarse_dt_s;
    const int k_train = static_cast<int>(std::llround(steps));
    if (std::abs(steps - k_train) > 1e-9 || k_train < 1 || k_train > data.grid.n_coarse)
      throw param_error("train_end_s must be a whole number of coarse steps inside the duration");
    opt.k_end = k_train;
  }

  const BasisSet basis = build_cosine_basis(job.n_basis, job.lag_max_s, data.grid);

  Json cfg = infer_job_to_json(job);
  cfg["data_path"] = data_path;
  write_json_file(path_join(out_dir, "config.json"), cfg);

  const std::string chain_path = path_join(out_dir, "chain.jsonl");
  GibbsEngine engine(data.spikes, data.grid, basis, job.priors, opt);

  PosteriorChain chain;
  int done = 0;
  if (job.resume && file_exists(chain_path)) {
    long long valid = 0;
    chain = read_chain(chain_path, &valid);
    truncate_file(chain_path, valid);
    if (!chain.empty()) {
      engine.restore(chain.back());
      done = chain.back().iteration;
      std::cerr << "infer: resuming after sweep " << done << "\n";
    }
  }
  if (chain.empty()) {
    std::ofstream(chain_path, std::ios::binary | std::ios::trunc).close();
    ChainRecord rec = engine.snapshot();
    append_chain_record(chain_path, rec);
    chain.push_back(std::move(rec));
  }

  const int total = opt.total_sweeps;
  const int thin = std::max(job.thin, 1);
  int at = done;
  try {
    for (int s = done + 1; s <= total; ++s) {
      at = s;
      engine.sweep();
      if (s % thin == 0 || s == total) {
        ChainRecord rec = engine.snapshot();
        append_chain_record(chain_path, rec);
        chain.push_back(std::move(rec));
      }
      if (s == 1 || s == total || s % 25 == 0)
        std::cerr << "infer: sweep " << s << "/" << total
                  << " log_post=" << fmt_double(engine.state().log_posterior, "%.4f")
                  << " eps=" << fmt_double(engine.hmc_step_size(), "%.3g")
                  << " div=" << engine.hmc_divergences() << "\n";
    }
  } catch (const std::exception& err) {
    std::cerr << "infer: failed during sweep " << at << ": " << err.what()
              << " (partial chain kept at " << chain_path << ")\n";
    throw;
  }

  write_json_file(path_join(out_dir, "summary.json"),
                  infer_summary(chain, job, engine, data, basis));
  std::cerr << "infer: " << chain.size() << " records -> " << chain_path << "\n";
}

void cmd_baseline(const std::string& data_path, const BaselineJob& job,
                  const std::string& out_dir) {
  ensure_dir(out_dir);
  const Dataset data =
      load_dataset(data_path, job.duration_s, job.fine_dt_s, job.coarse_dt_s, job.n_neurons);

  Json cfg = baseline_job_to_json(job);
  cfg["data_path"] = data_path;
  write_json_file(path_join(out_dir, "config.json"), cfg);

  int k_end = -1;
  if (job.train_end_s > 0) {
    const double steps = job.train_end_s / data.grid.coarse_dt_s;
    k_end = static_cast<int>(std::llround(steps));
    if (std::abs(steps - k_end) > 1e-9 || k_end < 1 || k_end > data.grid.n_coarse)
      throw param_error("train_end_s must be a whole number of coarse steps inside the duration");
  }

  Mat scores;
  if (job.method == "xcorr") {
    const SpikeData* spikes = &data.spikes;
    SpikeData truncated;
    if (job.train_end_s > 0) {
      auto events = data.spikes.events;
      for (auto& e : events)
        e.erase(std::lower_bound(e.begin(), e.end(), job.train_end_s), e.end());
      truncated = SpikeData::from_events(std::move(events), data.grid);
      spikes = &truncated;
    }
    scores = xcorr_scores(*spikes, job.max_lag_s, job.bin_s);
  } else if (job.method == "map_glasso") {
    const BasisSet basis = build_cosine_basis(job.n_basis, job.lag_max_s, data.grid);
    const FilteredFeatures feats = precompute_features(data.spikes, nullptr, basis, data.grid);
    MapFitOptions mopt;
    mopt.k_end = k_end;
    double lambda = job.lambda;
    if (lambda < 0)
      lambda = select_map_lambda(data.spikes, feats, data.grid, job.lambda_grid, 0.2, mopt);
    const MapFit fit = fit_map_glasso(data.spikes, feats, lambda, data.grid, mopt);
    scores = fit.edge_scores;
    Json detail;
    detail["lambda"] = fit.lambda;
    detail["lambda_selected"] = job.lambda < 0;
    detail["objective"] = jnum(fit.objective);
    detail["converged"] = fit.converged;
    detail["n_iters"] = fit.n_iters;
    detail["bias"] = vec_to_json(fit.bias);
    write_json_file(path_join(out_dir, "map_fit.json"), detail);
    if (!fit.converged)
      std::cerr << "baseline: map_glasso stopped after " << fit.n_iters
                << " iterations without reaching tolerance; scores written anyway\n";
  } else {
    throw param_error("unknown baseline method '" + job.method + "' (expected xcorr|map_glasso)");
  }

  write_scores_csv(path_join(out_dir, "scores.csv"), scores);
  std::cerr << "baseline: " << job.method << " scores for " << scores.rows() << " neurons -> "
            << out_dir << "\n";
}

void cmd_evaluate(const EvaluateJob& job, const std::string& out_dir) {
  if (job.chain_path.empty() && job.scores_path.empty())
    throw param_error("evaluate needs a chain or a score file");
  ensure_dir(out_dir);
  write_json_file(path_join(out_dir, "config.json"), evaluate_job_to_json(job));

  Json report;
  report["burn_in_frac"] = job.burn_in_frac;
  PosteriorChain chain;
  Mat scores;
  int n_neurons = job.n_neurons;

  if (!job.chain_path.empty()) {
    chain = read_chain(job.chain_path);
    if (chain.empty()) throw param_error("no usable records in " + job.chain_path);
    scores = posterior_edge_probability(chain, job.burn_in_frac);
    n_neurons = static_cast<int>(scores.rows());
    report["records"] = chain.size();
    write_weights_csv(path_join(out_dir, "weights_mean.csv"),
                      posterior_mean_weights(chain, job.burn_in_frac), n_neurons);
    if (rule_is_stdp(chain.back().rule.kind)) {
      const auto [start, stop] = burn_in_range(chain.size(), job.burn_in_frac);
      LearningRuleParams mean_rule = chain.back().rule;
      double ap = 0, tp = 0, am = 0, tm = 0;
      for (size_t r = start; r < stop; ++r) {
        ap += chain[r].rule.a_plus;
        tp += chain[r].rule.tau_plus;
        am += chain[r].rule.a_minus;
        tm += chain[r].rule.tau_minus;
      }
      const auto m = static_cast<double>(stop - start);
      mean_rule.a_plus = ap / m;
      mean_rule.tau_plus = tp / m;
      mean_rule.a_minus = am / m;
      mean_rule.tau_minus = tm / m;
      write_rule_curve_csv(path_join(out_dir, "rule_curve.csv"), mean_rule, job.lag_max_s);
    }
  } else {
    scores = read_scores_csv(job.scores_path);
    n_neurons = static_cast<int>(scores.rows());
  }

  if (!job.truth_adjacency_path.empty()) {
    const IMat truth = read_adjacency_csv(job.truth_adjacency_path);
    if (truth.rows() != n_neurons)
      throw param_error("truth adjacency does not match the score matrix");
    const RocResult roc = edge_roc(scores, truth);
    report["auc"] = roc.auc;
    write_roc_csv(path_join(out_dir, "roc.csv"), roc);
  }

  if (!job.truth_weights_path.empty() && !chain.empty()) {
    const Mat truth_w = read_weights_csv(job.truth_weights_path, n_neurons);
    const Mat est = posterior_mean_weights(chain, job.burn_in_frac);
    const Eigen::Index k = std::min(truth_w.cols(), est.cols());
    const Vec rmse = trajectory_error(est.leftCols(k), truth_w.leftCols(k));
    Json per = Json::array();
    for (int pre = 0; pre < n_neurons; ++pre)
      for (int post = 0; post < n_neurons; ++post) {
        if (pre == post) continue;
        per.push_back(Json{{"pre", pre},
                           {"post", post},
                           {"rmse", jnum(rmse[pair_index(pre, post, n_neurons)])}});
      }
    report["weight_rmse"] = std::move(per);
  }

  if (!chain.empty() && !job.data_path.empty() && job.train_end_s > 0) {
    const Dataset data =
        load_dataset(job.data_path, job.duration_s, job.fine_dt_s, job.coarse_dt_s, n_neurons);
    if (job.train_end_s < data.grid.duration_s - 1e-12) {
      const BasisSet basis = build_cosine_basis(job.n_basis, job.lag_max_s, data.grid);
      const PredictiveLL pll =
          predictive_ll(chain, job.train_end_s, data.spikes, data.grid, basis, job.burn_in_frac);
      report["predictive_ll"] = Json{{"mean", jnum(pll.mean)}, {"sd", pll.sd}, {"n", pll.n}};
    }
  }

  write_json_file(path_join(out_dir, "report.json"), report);
  std::cerr << "evaluate: report -> " << path_join(out_dir, "report.json") << "\n";
}

}  // namespace plasticnet
