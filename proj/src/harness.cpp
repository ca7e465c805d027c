#include "bilevel/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <omp.h>

#include "json.hpp"

#include "bilevel/rng.hpp"

namespace bilevel {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw std::invalid_argument("config key '" + key + "': cannot parse value '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) bad_value(key, value);
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  bad_value(key, value);
}

std::vector<KernelId> parse_kernel_list(const std::string& key, const std::string& value) {
  std::vector<KernelId> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      if (item.size() == 1) item = "rho" + item;
      out.push_back(parse_kernel_id(item));
    } catch (const std::invalid_argument&) {
      bad_value(key, value);
    }
  }
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto integer = [](int ExperimentConfig::*field) {
      return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_number<int>(k, v);
      };
    };
    auto real = [](double ExperimentConfig::*field) {
      return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.*field = parse_number<double>(k, v);
      };
    };
    auto outer_real = [](double OuterConfig::*field) {
      return [field](ExperimentConfig& c, const std::string& k, const std::string& v) {
        c.outer.*field = parse_number<double>(k, v);
      };
    };
    t["n"] = integer(&ExperimentConfig::n);
    t["m1"] = integer(&ExperimentConfig::m1);
    t["m2"] = integer(&ExperimentConfig::m2);
    t["num_instances"] = integer(&ExperimentConfig::num_instances);
    t["jobs"] = integer(&ExperimentConfig::jobs);
    t["p"] = real(&ExperimentConfig::p);
    t["a"] = real(&ExperimentConfig::a);
    t["noise"] = real(&ExperimentConfig::noise);
    t["w0"] = real(&ExperimentConfig::w0);
    t["seed"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.seed = parse_number<std::uint64_t>(k, v);
    };
    t["penalty"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      try {
        c.penalty = parse_penalty_id(v);
      } catch (const std::invalid_argument&) {
        bad_value(k, v);
      }
    };
    t["kernels"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.kernels = parse_kernel_list(k, v);
    };
    t["ridge"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.ridge = parse_bool(k, v);
    };
    t["timing"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      if (v == "wall") c.timing = true;
      else if (v == "off") c.timing = false;
      else c.timing = parse_bool(k, v);
    };
    t["output"] = [](ExperimentConfig& c, const std::string&, const std::string& v) {
      c.output = v;
    };
    t["mu0"] = outer_real(&OuterConfig::mu0);
    t["beta1"] = outer_real(&OuterConfig::beta1);
    t["eps_hat0"] = outer_real(&OuterConfig::eps_hat0);
    t["beta2"] = outer_real(&OuterConfig::beta2);
    t["sbkkt_tol"] = outer_real(&OuterConfig::sbkkt_tol);
    t["mu_floor"] = outer_real(&OuterConfig::mu_floor);
    t["zero_tol"] = outer_real(&OuterConfig::zero_tol);
    t["lambda0"] = outer_real(&OuterConfig::lambda0);
    t["eta0"] = outer_real(&OuterConfig::eta0);
    t["max_outer"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.outer.max_outer = parse_number<int>(k, v);
    };
    t["inner_max_iter"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.outer.inner.max_iter = parse_number<int>(k, v);
    };
    t["exact_curvature"] = [](ExperimentConfig& c, const std::string& k, const std::string& v) {
      c.outer.inner.exact_curvature = parse_bool(k, v);
    };
    return t;
  }();
  return table;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

// nlohmann writes NaN as null; keep that explicit.
nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

RunRecord run_one(const ExperimentConfig& config, const ElasticNetInstance& inst, KernelId kernel,
                  int index) {
  RunRecord rec;
  rec.kernel = kernel;
  rec.instance = index;
  rec.seed = inst.seed;
  const RegSpec spec(config.p, Penalty(config.penalty, config.a), make_smooth_abs(kernel));
  const ElasticNetProblem problem = make_elastic_net(inst, spec, config.ridge);
  const Eigen::VectorXd w0 = Eigen::VectorXd::Constant(config.n, config.w0);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    OuterResult res = run_algorithm1(problem, config.outer, w0);
    rec.obj = res.upper_obj;
    rec.sbkkt = res.sbkkt.norm;
    rec.mu_end = res.mu_end;
    rec.sparsity_pct = sparsity_pct(res.iterate.w, config.outer.zero_tol);
    rec.outer_iters = res.outer_iters;
    rec.success = res.success;
    rec.termination = res.termination;
    rec.lambda.assign(res.iterate.lambda.data(), res.iterate.lambda.data() + res.iterate.lambda.size());
    rec.history = std::move(res.history);
  } catch (const NonFiniteError& e) {
    rec.error = e.what();
    rec.success = false;
  }
  const auto t1 = std::chrono::steady_clock::now();
  rec.time_s = config.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
  return rec;
}

void write_svg(const std::filesystem::path& path, const SmootherCurves& c,
               const std::vector<double>& base, const std::vector<std::vector<double>>& curves,
               const std::string& title) {
  constexpr double W = 640, H = 480, pad = 40;
  double ymax = 0.0;
  for (double v : base) ymax = std::max(ymax, v);
  for (const auto& cv : curves) for (double v : cv) ymax = std::max(ymax, v);
  ymax *= 1.05;
  auto px = [&](double x) { return pad + (x + 2.0) / 4.0 * (W - 2 * pad); };
  auto py = [&](double y) { return H - pad - y / ymax * (H - 2 * pad); };
  static const char* colors[] = {"#000000", "#1f77b4", "#ff7f0e", "#2ca02c",
                                 "#d62728", "#9467bd", "#8c564b"};

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
  os << "<line x1=\"" << pad << "\" y1=\"" << py(0) << "\" x2=\"" << W - pad << "\" y2=\"" << py(0)
     << "\" stroke=\"#999\"/>\n";
  auto polyline = [&](const std::vector<double>& y, const char* color, const std::string& label,
                      int slot) {
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
    for (std::size_t i = 0; i < c.x.size(); ++i) os << px(c.x[i]) << ',' << py(y[i]) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - pad - 60 << "\" y=\"" << pad + 14 * slot << "\" font-size=\"11\" fill=\""
       << color << "\">" << label << "</text>\n";
  };
  polyline(base, colors[0], "|x|", 0);
  for (std::size_t i = 0; i < curves.size(); ++i) {
    polyline(curves[i], colors[i + 1], "phi" + std::to_string(i + 1), static_cast<int>(i) + 1);
  }
  os << "</svg>\n";
}

void write_curves_csv(const std::filesystem::path& path, const SmootherCurves& c,
                      const std::vector<double>& base, const std::vector<std::vector<double>>& curves,
                      const std::string& base_name, const std::string& suffix) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "x," << base_name;
  for (std::size_t i = 0; i < curves.size(); ++i) os << ",phi" << i + 1 << suffix;
  os << '\n';
  char buf[64];
  for (std::size_t k = 0; k < c.x.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", c.x[k], base[k]);
    os << buf;
    for (const auto& cv : curves) {
      std::snprintf(buf, sizeof buf, ",%.17g", cv[k]);
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "' " + why);
  };
  if (n < 1) fail("n", "must be >= 1");
  if (m1 < 1) fail("m1", "must be >= 1");
  if (m2 < 1) fail("m2", "must be >= 1");
  if (num_instances < 1) fail("num_instances", "must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) fail("p", "must lie in (0, 1]");
  if (!(a > 0.0)) fail("a", "must be positive");
  if (kernels.empty()) fail("kernels", "must name at least one kernel");
  if (!(noise >= 0.0)) fail("noise", "must be nonnegative");
  if (jobs < 0) fail("jobs", "must be >= 0");
  outer.validate();
}

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  it->second(config, key, value);
}

ExperimentConfig parse_config(std::istream& is) {
  ExperimentConfig config;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_setting(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  return parse_config(is);
}

KernelSummary summarize(KernelId kernel, const std::vector<RunRecord>& runs) {
  KernelSummary s;
  s.kernel = kernel;
  std::vector<double> obj, sb, mu, sp, t, ite;
  for (const auto& r : runs) {
    if (r.kernel != kernel) continue;
    ++s.runs;
    if (!r.success) continue;
    ++s.successes;
    obj.push_back(r.obj);
    sb.push_back(r.sbkkt);
    mu.push_back(r.mu_end);
    sp.push_back(r.sparsity_pct);
    t.push_back(r.time_s);
    ite.push_back(r.outer_iters);
  }
  s.success_pct = s.runs ? 100.0 * s.successes / s.runs : 0.0;
  s.obj = mean(obj);
  s.sbkkt = mean(sb);
  s.mu_end = mean(mu);
  s.sparsity = mean(sp);
  s.time_s = mean(t);
  s.ite = mean(ite);
  s.obj_median = median(obj);
  s.sbkkt_median = median(sb);
  s.mu_end_median = median(mu);
  s.sparsity_median = median(sp);
  s.time_median = median(t);
  s.ite_median = median(ite);
  return s;
}

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  RunReport report;
  report.config = config;

  std::vector<ElasticNetInstance> instances(config.num_instances);
  for (int i = 0; i < config.num_instances; ++i) {
    instances[i] = gen_synthetic(config.n, config.m1, config.m2, config.noise,
                                 derive_seed(config.seed, static_cast<std::uint64_t>(i)));
  }

  const int nk = static_cast<int>(config.kernels.size());
  const int total = nk * config.num_instances;
  report.runs.resize(total);
  const int threads = config.jobs > 0 ? config.jobs : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (int job = 0; job < total; ++job) {
    const int k = job / config.num_instances;
    const int i = job % config.num_instances;
    report.runs[job] = run_one(config, instances[i], config.kernels[k], i);
  }

  for (KernelId id : config.kernels) report.summaries.push_back(summarize(id, report.runs));
  return report;
}

void write_results_csv(const RunReport& report, std::ostream& os) {
  os << "i,obj,sbkkt,mu_end,sparsity,ave_time_s,ite,success_pct\n";
  char buf[256];
  for (const auto& s : report.summaries) {
    std::snprintf(buf, sizeof buf, "%d,%.6e,%.6e,%.6e,%.2f,%.3f,%.1f,%.1f\n", kernel_index(s.kernel),
                  s.obj, s.sbkkt, s.mu_end, s.sparsity, s.time_s, s.ite, s.success_pct);
    os << buf;
  }
}

std::string results_csv(const RunReport& report) {
  std::ostringstream os;
  write_results_csv(report, os);
  return os.str();
}

void write_report_json(const RunReport& report, std::ostream& os) {
  using nlohmann::json;
  const auto& c = report.config;
  json j;
  std::vector<int> kernels;
  for (KernelId id : c.kernels) kernels.push_back(kernel_index(id));
  j["config"] = {{"n", c.n},
                 {"m1", c.m1},
                 {"m2", c.m2},
                 {"num_instances", c.num_instances},
                 {"p", c.p},
                 {"penalty", std::string(to_string(c.penalty))},
                 {"a", c.a},
                 {"kernels", kernels},
                 {"seed", c.seed},
                 {"noise", c.noise},
                 {"ridge", c.ridge},
                 {"w0", c.w0},
                 {"mu0", c.outer.mu0},
                 {"beta1", c.outer.beta1},
                 {"eps_hat0", c.outer.eps_hat0},
                 {"beta2", c.outer.beta2},
                 {"sbkkt_tol", c.outer.sbkkt_tol},
                 {"mu_floor", c.outer.mu_floor},
                 {"zero_tol", c.outer.zero_tol},
                 {"max_outer", c.outer.max_outer},
                 {"lambda0", c.outer.lambda0},
                 {"eta0", c.outer.eta0},
                 {"inner_max_iter", c.outer.inner.max_iter},
                 {"exact_curvature", c.outer.inner.exact_curvature},
                 {"timing", c.timing ? "wall" : "off"}};

  json summaries = json::array();
  for (const auto& s : report.summaries) {
    summaries.push_back({{"i", kernel_index(s.kernel)},
                         {"runs", s.runs},
                         {"successes", s.successes},
                         {"success_pct", s.success_pct},
                         {"mean", {{"obj", num(s.obj)}, {"sbkkt", num(s.sbkkt)}, {"mu_end", num(s.mu_end)},
                                   {"sparsity", num(s.sparsity)}, {"time_s", num(s.time_s)},
                                   {"ite", num(s.ite)}}},
                         {"median", {{"obj", num(s.obj_median)}, {"sbkkt", num(s.sbkkt_median)},
                                     {"mu_end", num(s.mu_end_median)},
                                     {"sparsity", num(s.sparsity_median)},
                                     {"time_s", num(s.time_median)}, {"ite", num(s.ite_median)}}}});
  }
  j["summaries"] = summaries;

  json runs = json::array();
  for (const auto& r : report.runs) {
    json hist = json::array();
    for (const auto& h : r.history) {
      hist.push_back({{"k", h.k},
                      {"mu", h.mu},
                      {"eps_hat", h.eps_hat},
                      {"inner_iters", h.inner_iters},
                      {"inner_status", std::string(to_string(h.inner_status))},
                      {"inner_residual", num(h.inner_residual)},
                      {"sbkkt", num(h.sbkkt)},
                      {"sparsity", h.sparsity_pct},
                      {"obj", num(h.upper_obj)},
                      {"lambda1", num(h.lambda1)}});
    }
    json run = {{"i", kernel_index(r.kernel)},
                {"instance", r.instance},
                {"seed", r.seed},
                {"obj", num(r.obj)},
                {"sbkkt", num(r.sbkkt)},
                {"mu_end", r.mu_end},
                {"sparsity", r.sparsity_pct},
                {"time_s", r.time_s},
                {"ite", r.outer_iters},
                {"success", r.success},
                {"termination", std::string(to_string(r.termination))},
                {"lambda", r.lambda},
                {"history", hist}};
    if (!r.error.empty()) run["error"] = r.error;
    runs.push_back(std::move(run));
  }
  j["runs"] = runs;
  os << j.dump(1) << '\n';
}

void write_outputs(const RunReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream os(dir / "results.csv");
    if (!os) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
    write_results_csv(report, os);
  }
  std::ofstream os(dir / "report.json");
  if (!os) throw std::runtime_error("cannot write " + (dir / "report.json").string());
  write_report_json(report, os);
}

SmootherCurves sample_smoothers(double mu, double p) {
  if (!(mu > 0.0)) throw std::invalid_argument("plot: mu must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("plot: p must lie in (0, 1]");
  constexpr int kPoints = 401;
  SmootherCurves c;
  c.mu = mu;
  c.p = p;
  c.phi.assign(kAllKernels.size(), {});
  c.phi_p.assign(kAllKernels.size(), {});
  std::vector<SmoothAbs> smoothers;
  for (KernelId id : kAllKernels) smoothers.push_back(make_smooth_abs(id));
  for (int k = 0; k < kPoints; ++k) {
    const double x = -2.0 + 4.0 * k / (kPoints - 1);
    c.x.push_back(x);
    c.abs.push_back(std::abs(x));
    c.abs_p.push_back(std::pow(std::abs(x), p));
    for (std::size_t i = 0; i < smoothers.size(); ++i) {
      const double v = smoothers[i].phi(mu, x);
      c.phi[i].push_back(v);
      c.phi_p[i].push_back(p == 1.0 ? v : std::pow(v, p));
    }
  }
  return c;
}

std::vector<std::filesystem::path> plot_smoothers(double mu, double p,
                                                  const std::filesystem::path& dir, bool svg) {
  const SmootherCurves c = sample_smoothers(mu, p);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  written.push_back(dir / "curves_phi.csv");
  write_curves_csv(written.back(), c, c.abs, c.phi, "abs", "");
  written.push_back(dir / "curves_phi_p.csv");
  write_curves_csv(written.back(), c, c.abs_p, c.phi_p, "abs_p", "_p");
  if (svg) {
    char title[96];
    std::snprintf(title, sizeof title, "|x| and phi_i(mu, x), mu = %g", mu);
    written.push_back(dir / "curves_phi.svg");
    write_svg(written.back(), c, c.abs, c.phi, title);
    std::snprintf(title, sizeof title, "|x|^p and phi_i(mu, x)^p, mu = %g, p = %g", mu, p);
    written.push_back(dir / "curves_phi_p.svg");
    write_svg(written.back(), c, c.abs_p, c.phi_p, title);
  }
  return written;
}

}  // namespace bilevel
