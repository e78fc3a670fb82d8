#include "mtlab/runner.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mtlab/curves.hpp"
#include "mtlab/error.hpp"
#include "mtlab/measures.hpp"

namespace mtlab::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

/// Output directory that remembers what it wrote, for the manifest.
class Outputs {
public:
  explicit Outputs(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) fail("ConfigError", "cannot create output directory " + root_.string() + ": " + ec.message());
  }

  void text(const std::string& name, const std::string& content) {
    const fs::path p = root_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) fail("IOError", "cannot write " + p.string());
    files_.push_back(name);
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  const fs::path& root() const noexcept { return root_; }
  const std::vector<std::string>& files() const noexcept { return files_; }

private:
  fs::path root_;
  std::vector<std::string> files_;
};

std::string word_string(const std::vector<std::int8_t>& w) {
  std::string s;
  for (auto c : w) s += c > 0 ? '+' : '-';
  return s;
}

std::string chain_word(const std::vector<coords::InverseBranch>& chain) {
  std::string s;
  for (std::size_t i = 0; i < chain.size(); ++i) s += (i ? "." : "") + word_string(chain[i].word());
  return s;
}

// ---------------------------------------------------------------- commands

void find_param(const Setup& s, Outputs& out) {
  auto cert = [](const mt::MTCertificate& c) {
    json j = mt::to_json(c);
    j["postcritical"] = mt::postcritical_set(c).points;
    return j;
  };
  out.json_file("certificates.json", {{"a", cert(s.a)}, {"b", cert(s.b)}});
}

void build_coords(const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  const auto& model = *s.model;
  std::vector<int> levels;
  for (int n = 0; n <= cfg.coords.levels; ++n) levels.push_back(n);
  json summary = model.summary(levels);

  std::ostringstream csv;
  csv << "level,index,lo,hi\n";
  json checks = json::array();
  std::optional<coords::MarkovPartition> prev;
  for (int n : levels) {
    const auto part = coords::markov_partition(model, n);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const auto e = part.element(i);
      csv << n << ',' << i << ',' << num(e.lo) << ',' << num(e.hi) << '\n';
    }
    if (prev) {
      const auto c = coords::check_markov(model, *prev, part);
      checks.push_back({{"level", n},
                        {"nested", c.nested},
                        {"markov", c.markov},
                        {"worst_nesting", c.worst_nesting},
                        {"worst_markov", c.worst_markov}});
    }
    prev = part;
  }
  summary["markov_checks"] = checks;
  const auto ex = mt::check_topological_exactness(model, 64);
  summary["topologically_exact"] = ex.exact;
  summary["covering_time"] = ex.covering_time;
  out.json_file("coords_model.json", summary);
  out.text("coords_partitions.csv", csv.str());

  const auto d = coords::distortion_report(model, cfg.coords.distortion_level,
                                           cfg.coords.distortion_samples, cfg.run.seed);
  out.json_file("coords_distortion.json", {{"level", d.level},
                                           {"samples", d.ratio.size()},
                                           {"C_d", d.c_d},
                                           {"worst_upper", d.worst_upper},
                                           {"worst_lower", d.worst_lower}});
}

void lyapunov(const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  const auto& sys = *s.system;
  const auto res = skew::lyapunov_exponents(sys, cfg.lyapunov.orbits, cfg.lyapunov.steps,
                                            cfg.lyapunov.burn_in, cfg.run.seed, cfg.run.workers);
  std::ostringstream csv;
  csv << "id,theta0,y0,lambda_theta,lambda_y,inv_norm_average\n";
  std::size_t positive = 0;
  for (const auto& o : res.orbits) {
    csv << o.id << ',' << num(o.theta0) << ',' << num(o.y0) << ',' << num(o.lambda_theta) << ','
        << num(o.lambda_y) << ',' << num(o.inv_norm_average) << '\n';
    positive += o.lambda_y > 0.0;
  }
  auto stats = [](const skew::SampleStats& st) {
    return json{{"mean", st.mean}, {"std", st.std}, {"min", st.min}, {"max", st.max}};
  };
  json summary{{"orbits", res.orbits.size()},
               {"steps", cfg.lyapunov.steps},
               {"lambda_theta", stats(res.theta)},
               {"lambda_y", stats(res.y)},
               {"inv_norm_average", stats(res.inv_norm)},
               {"positive_lambda_y", positive},
               {"log_lambda_g", std::log(s.model->lambda_g())}};
  if (s.constants) {
    summary["constants"] = skew::to_json(*s.constants);
    summary["vertical_bound"] = measures::to_json(measures::vertical_exponent_vs_bound(sys, res, *s.constants));
  }
  out.text("lyapunov_orbits.csv", csv.str());
  out.json_file("lyapunov_summary.json", summary);
}

void curves_cmd(const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  const auto& sys = *s.system;
  const auto& model = *s.model;
  const auto& cc = cfg.curves;
  const double alpha = sys.alpha();
  if (!(alpha > 0.0)) fail("ConfigError", "[system] alpha must be > 0 for the curve experiments");

  const auto set = curves::random_curve_set(sys, cc.count, cc.depth_min, cc.depth_max, cfg.run.seed);
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& c = set[i];
    std::ostringstream csv;
    csv << "# element=" << c.element << " depth=" << c.depth() << " y0=" << num(c.y0)
        << " alpha=" << num(alpha) << " word=" << chain_word(c.chain) << '\n';
    csv << "theta,X\n";
    const auto& t = c.X.node_points();
    const auto& v = c.X.values();
    for (std::size_t k = 0; k < t.size(); ++k) csv << num(t[k]) << ',' << num(v[k]) << '\n';
    std::ostringstream name;
    name << "curves/curve_" << std::setw(3) << std::setfill('0') << i << ".csv";
    out.text(name.str(), csv.str());
  }

  const auto nf = curves::check_nonflat(set, alpha, cc.l_max, cc.grid);
  out.json_file("curves_nonflat.json", curves::to_json(nf));

  // curve recurrence against the power bound
  json rec = json::array();
  for (double e : cc.epsilon) {
    double worst = 0.0;
    for (const auto& c : set)
      worst = std::max(worst, curves::curve_recurrence(c, alpha, {e}, model.I_a().length())[0]);
    const double bound = std::pow(e, 1.0 / (2.0 * nf.l0));
    rec.push_back({{"epsilon", e}, {"max_fraction", worst}, {"bound", bound}, {"within", worst <= bound}});
  }
  out.json_file("curves_recurrence.json", {{"l0", nf.l0}, {"levels", rec}});

  constexpr double kY0 = 0.2;
  auto linear = [&](int depth, std::uint64_t stream) {
    const auto chain = curves::random_chain(model, 0, depth, cfg.run.seed, stream);
    const auto ev = curves::evolve_chain(sys, kY0, chain);
    const auto e = curves::check_linear_approx(sys, ev, 3);
    return json{{"depth", depth}, {"word", chain_word(chain)}, {"sup_norms", e},
                {"ratio_alpha2", e[0] / (alpha * alpha)}};
  };
  out.json_file("curves_linear.json", {{"alpha", alpha}, {"y0", kY0},
                                       {"depth1", linear(1, 0x11)},
                                       {"deep", linear(cc.linear_depth, 0x12)}});

  const auto X = curves::evolve_horizontal(
      sys, kY0, curves::random_chain(model, 0, cc.separation_depth, cfg.run.seed, 0x13));
  curves::SeparationOptions opts;
  opts.threshold = cc.threshold;
  const auto sep = curves::separation_test(sys, X, cc.m_search, opts);
  out.json_file("curves_separation.json", {{"M_star", sep.m_star},
                                           {"eps0", sep.eps0},
                                           {"witness_plus", word_string(sep.witness_plus)},
                                           {"witness_minus", word_string(sep.witness_minus)},
                                           {"best_per_level", sep.best_per_level},
                                           {"curve_word", chain_word(X.chain)}});
}

void measure(const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  const auto& sys = *s.system;
  const auto& mc = cfg.measure;
  const auto u = measures::build_ulam(sys, mc.n_theta, mc.n_y, mc.samples, cfg.run.seed, cfg.run.workers);
  std::ostringstream csv;
  csv << "theta_index,y_index,mass\n";
  for (int i = 0; i < mc.n_theta; ++i)
    for (int j = 0; j < mc.n_y; ++j)
      csv << i << ',' << j << ',' << num(u.density[static_cast<std::size_t>(i) * mc.n_y + j]) << '\n';
  out.text("measure_density.csv", csv.str());

  double dev = 0.0;
  for (double m : measures::theta_marginal(u)) dev = std::max(dev, std::abs(m * mc.n_theta - 1.0));
  json diag{{"grid", {mc.n_theta, mc.n_y}},
            {"samples_per_cell", mc.samples},
            {"column_sum_error", u.op.column_sum_error()},
            {"nonzeros", u.op.row.size()},
            {"iterations", u.iterations},
            {"converged", u.converged},
            {"residual_l1", u.residual},
            {"step_log", u.log},
            {"theta_marginal_sup_deviation", dev}};
  const auto q = measures::uniqueness_diagnostic(u.op, mc.starts, cfg.run.seed);
  diag["uniqueness"] = {{"starts", mc.starts}, {"max_l1", q.max_distance}, {"pairwise", q.pairwise}};

  json att = json::array();
  std::optional<measures::AttractorEstimate> prev;
  for (int n : mc.attractor_n) {
    auto a = measures::attractor(sys, n, mc.n_theta, mc.n_y);
    json entry{{"n", n}, {"cells", a.count()}, {"fraction", double(a.count()) / double(a.grid.size())}};
    if (prev) entry["difference_from_previous"] = measures::symmetric_difference(*prev, a);
    att.push_back(entry);
    prev = std::move(a);
  }
  diag["attractor"] = att;
  if (!u.converged) diag["warning"] = "power iteration did not reach the step tolerance";
  out.json_file("measure_diagnostics.json", diag);
}

void recurrence(const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  const auto& sys = *s.system;
  if (!s.constants) fail("ConfigError", "[system] alpha must be > 0 for the recurrence experiments");
  const auto& rc = cfg.recurrence;
  const auto& k = *s.constants;

  measures::SlowRecurrenceOptions o;
  o.orbits = rc.orbits;
  o.n_list = rc.n;
  o.epsilon = rc.epsilon;
  o.delta_tilde = rc.delta_tilde;
  o.eta = k.eta;
  o.burn_in = rc.burn_in;
  o.seed = cfg.run.seed;
  o.workers = cfg.run.workers;
  const auto sr = measures::slow_recurrence(sys, o);
  std::ostringstream tail;
  tail << "n,epsilon,fraction\n";
  for (std::size_t i = 0; i < sr.n_list.size(); ++i)
    tail << sr.n_list[i] << ',' << num(rc.epsilon) << ',' << num(sr.fractions[i]) << '\n';
  out.text("recurrence_tail.csv", tail.str());

  const auto chain = curves::random_chain(*s.model, 0, rc.curve_depth, cfg.run.seed, 0x14);
  const auto Y = measures::critical_return_curve(sys, chain, k.m_alpha);
  std::vector<double> r;
  const int steps = static_cast<int>(std::floor(rc.r_span / rc.r_step + 1e-9));
  for (int i = 0; i <= steps; ++i) r.push_back(k.r0 + i * rc.r_step);
  const auto cr = measures::critical_return_test(sys, Y, k.m_alpha, r, rc.samples, cfg.run.seed);
  std::ostringstream crc;
  crc << "r,fraction\n";
  for (std::size_t i = 0; i < r.size(); ++i) crc << num(r[i]) << ',' << num(cr.fractions[i]) << '\n';
  out.text("recurrence_critical.csv", crc.str());

  json slow = measures::to_json(sr);
  slow["epsilon"] = rc.epsilon;
  slow["delta_tilde"] = rc.delta_tilde;
  json crit = measures::to_json(cr);
  crit["y0"] = Y.y0;
  crit["curve_word"] = chain_word(Y.chain);
  out.json_file("recurrence_fit.json", {{"slow_recurrence", slow}, {"critical_return", crit}});
}

void dispatch(const std::string& cmd, const config::ExperimentConfig& cfg, const Setup& s, Outputs& out) {
  if (cmd == "find-param")
    find_param(s, out);
  else if (cmd == "build-coords")
    build_coords(cfg, s, out);
  else if (cmd == "lyapunov")
    lyapunov(cfg, s, out);
  else if (cmd == "curves")
    curves_cmd(cfg, s, out);
  else if (cmd == "measure")
    measure(cfg, s, out);
  else if (cmd == "recurrence")
    recurrence(cfg, s, out);
  else
    fail("ConfigError", "unknown command '" + cmd + "'");
}

}  // namespace

Setup build(const config::ExperimentConfig& cfg) {
  Setup s;
  s.a = cfg.system.a.resolve();
  s.b = cfg.system.b.resolve();
  coords::ExpandingOptions opts;
  opts.m1 = cfg.system.m1;
  s.model = std::make_shared<const coords::ExpandingModel>(s.a, opts);
  s.system = std::make_shared<const skew::SkewSystem>(
      skew::build_system(s.model, s.b, cfg.system.alpha, skew::Polynomial(cfg.system.phi)));
  if (cfg.system.alpha > 0.0) {
    double sigma = cfg.sigma.sigma;
    if (sigma == 0.0) {
      const double radius = cfg.sigma.radius > 0.0 ? cfg.sigma.radius : std::sqrt(cfg.system.alpha);
      s.sigma_fit = skew::estimate_sigma(s.b, radius, cfg.sigma.trials, cfg.sigma.segment, cfg.run.seed);
      sigma = s.sigma_fit->sigma;
    }
    s.constants = skew::compute_constants(cfg.system.alpha, sigma);
  }
  return s;
}

json derived_constants(const Setup& s) {
  json j{{"a", s.a.param.value()},
         {"b", s.b.param.value()},
         {"lambda_a", s.model->lambda_a()},
         {"m0", s.model->m0()},
         {"m1", s.model->m1()},
         {"lambda_g", s.model->lambda_g()},
         {"alpha_max", s.system->alpha_max()}};
  if (s.sigma_fit)
    j["sigma_fit"] = {{"sigma", s.sigma_fit->sigma},
                      {"raw_sigma", s.sigma_fit->raw_sigma},
                      {"residual", s.sigma_fit->residual},
                      {"clamped", s.sigma_fit->clamped},
                      {"segments", s.sigma_fit->segments}};
  if (s.constants) {
    j["sigma"] = s.constants->sigma;
    j["M_alpha"] = s.constants->m_alpha;
    j["N_alpha"] = s.constants->n_alpha;
    j["eta"] = s.constants->eta;
    j["r0"] = s.constants->r0;
  }
  return j;
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"find-param", "build-coords", "lyapunov",
                                          "curves",     "measure",      "recurrence"};
  return c;
}

json run(const std::string& command, const config::ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  if (command != "all" && std::find(commands().begin(), commands().end(), command) == commands().end())
    fail("ConfigError", "unknown command '" + command + "'");
  Outputs out(cfg.run.out);
  const Setup s = build(cfg);
  if (command == "all")
    for (const auto& c : commands()) dispatch(c, cfg, s, out);
  else
    dispatch(command, cfg, s, out);

  json cj = config::to_json(cfg);
  cj["run"].erase("out");  // where the files went is not part of what was computed
  json files = json::array();
  for (const auto& f : out.files())
    files.push_back({{"file", f}, {"sha256", sha256_file(out.root() / f)}, {"bytes", fs::file_size(out.root() / f)}});
  json manifest{{"tool", "mtlab"},
                {"version", kToolVersion},
                {"command", command},
                {"config", cj},
                {"derived", derived_constants(s)},
                {"outputs", files},
                {"wall_clock_seconds",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}};
  std::ofstream(out.root() / "manifest.json") << manifest.dump(2) << "\n";
  return manifest;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("IOError", "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (f) {
    f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(f.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

VerifyResult verify(const fs::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) fail("ConfigError", "no manifest.json in " + dir.string());
  json m;
  try {
    m = json::parse(f);
  } catch (const json::exception& e) {
    fail("ConfigError", std::string("unreadable manifest: ") + e.what());
  }
  VerifyResult r;
  for (const auto& o : m.at("outputs")) {
    const std::string name = o.at("file");
    ++r.checked;
    if (!fs::exists(dir / name))
      r.missing.push_back(name);
    else if (sha256_file(dir / name) != o.at("sha256").get<std::string>())
      r.mismatched.push_back(name);
  }
  return r;
}

json comparable(json manifest) {
  manifest.erase("wall_clock_seconds");
  return manifest;
}

}  // namespace mtlab::runner
