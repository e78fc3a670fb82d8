#include "mtlab/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mtlab/error.hpp"

namespace mtlab::config {

mt::MTCertificate ParamSpec::resolve() const {
  if (value) return mt::certify(*value, preperiod, period);
  return mt::find_mt_parameter(preperiod, period, bracket);
}

namespace {

struct Field {
  std::string section;
  std::string key;
  std::string range;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

[[noreturn]] void bad_value(const Field& f, const std::string& v, const std::string& what) {
  fail("ConfigError", "[" + f.section + "] " + f.key + " = '" + v + "': expected " + what + " " + f.range);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
std::optional<T> to_number(const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) return std::nullopt;
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) return std::nullopt;
  return v;
}

template <class T>
std::string format(T v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

template <class T>
const char* kind() {
  return std::is_floating_point_v<T> ? "a real" : "an integer";
}

template <class T, class Pred>
Field number(std::string sec, std::string key, T& ref, std::string range, Pred ok) {
  Field f{std::move(sec), std::move(key), std::move(range), {}, {}};
  f.set = [&ref, ok, f](const std::string& v) {
    const auto x = to_number<T>(v);
    if (!x || !ok(*x)) bad_value(f, v, kind<T>());
    ref = *x;
  };
  f.get = [&ref] { return format(ref); };
  return f;
}

template <class T, class Pred>
Field list(std::string sec, std::string key, std::vector<T>& ref, std::string range, Pred ok) {
  Field f{std::move(sec), std::move(key), std::move(range), {}, {}};
  f.set = [&ref, ok, f](const std::string& v) {
    std::vector<T> out;
    for (const auto& item : split(v)) {
      const auto x = to_number<T>(item);
      if (!x || !ok(*x)) bad_value(f, v, std::string("a comma-separated list, each ") + kind<T>());
      out.push_back(*x);
    }
    if (out.empty()) bad_value(f, v, "a non-empty list");
    ref = std::move(out);
  };
  f.get = [&ref] {
    std::string s;
    for (std::size_t i = 0; i < ref.size(); ++i) s += (i ? ", " : "") + format(ref[i]);
    return s;
  };
  return f;
}

void param_fields(std::vector<Field>& fs, const std::string& name, ParamSpec& p) {
  Field v{"system", name, "in (1, 2], or 'find' to search the bracket", {}, {}};
  v.set = [&p, v](const std::string& s) {
    if (trim(s) == "find") {
      p.value.reset();
      return;
    }
    const auto x = to_number<double>(s);
    if (!x || !(*x > 1.0 && *x <= 2.0)) bad_value(v, s, "a real");
    p.value = *x;
  };
  v.get = [&p] { return p.value ? format(*p.value) : std::string("find"); };
  fs.push_back(v);
  fs.push_back(number("system", name + "_preperiod", p.preperiod, "in [1, 12]",
                      [](int x) { return x >= 1 && x <= 12; }));
  fs.push_back(number("system", name + "_period", p.period, "in [1, 12]",
                      [](int x) { return x >= 1 && x <= 12; }));
  Field br{"system", name + "_bracket", "as 'lo, hi' with 1 <= lo < hi <= 2", {}, {}};
  br.set = [&p, br](const std::string& s) {
    const auto parts = split(s);
    if (parts.size() != 2) bad_value(br, s, "two reals");
    const auto lo = to_number<double>(parts[0]);
    const auto hi = to_number<double>(parts[1]);
    if (!lo || !hi || !(*lo >= 1.0 && *lo < *hi && *hi <= 2.0)) bad_value(br, s, "two reals");
    p.bracket = {*lo, *hi};
  };
  br.get = [&p] { return format(p.bracket.first) + ", " + format(p.bracket.second); };
  fs.push_back(br);
}

std::vector<Field> fields(ExperimentConfig& c) {
  std::vector<Field> fs;
  auto in = [](auto lo, auto hi) { return [lo, hi](auto x) { return x >= lo && x <= hi; }; };

  param_fields(fs, "a", c.system.a);
  param_fields(fs, "b", c.system.b);
  fs.push_back(number("system", "m1", c.system.m1, "in [0, 20] (0 selects m0)", in(0, 20)));
  fs.push_back(number("system", "alpha", c.system.alpha, "in [0, 1)",
                      [](double x) { return x >= 0.0 && x < 1.0; }));
  fs.push_back(list("system", "phi", c.system.phi, "(polynomial coefficients, constant first)",
                    [](double) { return true; }));

  fs.push_back(number("sigma", "sigma", c.sigma.sigma, "equal to 0 (estimate) or in (1, 2)",
                      [](double x) { return x == 0.0 || (x > 1.0 && x < 2.0); }));
  fs.push_back(number("sigma", "radius", c.sigma.radius, "in [0, 1) (0 selects sqrt(alpha))",
                      [](double x) { return x >= 0.0 && x < 1.0; }));
  fs.push_back(number("sigma", "trials", c.sigma.trials, "in [1, 1000000]", in(1, 1000000)));
  fs.push_back(number("sigma", "segment", c.sigma.segment, "in [10, 10000]", in(10, 10000)));

  fs.push_back(number("coords", "levels", c.coords.levels, "in [1, 16]", in(1, 16)));
  fs.push_back(number("coords", "distortion_level", c.coords.distortion_level, "in [1, 12]", in(1, 12)));
  fs.push_back(number("coords", "distortion_samples", c.coords.distortion_samples, "in [1, 1000000]",
                      in(1, 1000000)));

  fs.push_back(number("lyapunov", "orbits", c.lyapunov.orbits, "in [1, 1000000]",
                      in(std::size_t{1}, std::size_t{1000000})));
  fs.push_back(number("lyapunov", "steps", c.lyapunov.steps, "in [1, 10000000000]", in(1L, 10000000000L)));
  fs.push_back(number("lyapunov", "burn_in", c.lyapunov.burn_in, "in [0, 1000000000]", in(0L, 1000000000L)));

  fs.push_back(number("curves", "count", c.curves.count, "in [1, 4096]",
                      in(std::size_t{1}, std::size_t{4096})));
  fs.push_back(number("curves", "depth_min", c.curves.depth_min, "in [1, 64]", in(1, 64)));
  fs.push_back(number("curves", "depth_max", c.curves.depth_max, "in [1, 64]", in(1, 64)));
  fs.push_back(number("curves", "l_max", c.curves.l_max, "in [1, 16]", in(1, 16)));
  fs.push_back(number("curves", "grid", c.curves.grid, "in [16, 100000]", in(16, 100000)));
  fs.push_back(number("curves", "linear_depth", c.curves.linear_depth, "in [1, 64]", in(1, 64)));
  fs.push_back(number("curves", "separation_depth", c.curves.separation_depth, "in [1, 64]", in(1, 64)));
  fs.push_back(number("curves", "m_search", c.curves.m_search, "in [1, 8]", in(1, 8)));
  fs.push_back(number("curves", "threshold", c.curves.threshold, "in (0, 1000]",
                      [](double x) { return x > 0.0 && x <= 1000.0; }));
  fs.push_back(list("curves", "epsilon", c.curves.epsilon, "with each value in (0, 1]",
                    [](double x) { return x > 0.0 && x <= 1.0; }));

  fs.push_back(number("measure", "n_theta", c.measure.n_theta, "in [16, 8192]", in(16, 8192)));
  fs.push_back(number("measure", "n_y", c.measure.n_y, "in [16, 8192]", in(16, 8192)));
  fs.push_back(number("measure", "samples", c.measure.samples, "in [32, 4096]", in(32, 4096)));
  fs.push_back(number("measure", "starts", c.measure.starts, "in [2, 64]", in(2, 64)));
  fs.push_back(list("measure", "attractor_n", c.measure.attractor_n, "with each value in [0, 6]", in(0, 6)));

  fs.push_back(number("recurrence", "orbits", c.recurrence.orbits, "in [1000, 10000000]",
                      in(std::size_t{1000}, std::size_t{10000000})));
  fs.push_back(list("recurrence", "n", c.recurrence.n, "increasing, each in [1, 1000000000]",
                    in(1L, 1000000000L)));
  fs.push_back(number("recurrence", "epsilon", c.recurrence.epsilon, "in (0, 1000000]",
                      [](double x) { return x > 0.0 && x <= 1e6; }));
  fs.push_back(number("recurrence", "delta_tilde", c.recurrence.delta_tilde, "in (0, 0.5)",
                      [](double x) { return x > 0.0 && x < 0.5; }));
  fs.push_back(number("recurrence", "burn_in", c.recurrence.burn_in, "in [0, 1000000000]",
                      in(0L, 1000000000L)));
  fs.push_back(number("recurrence", "r_span", c.recurrence.r_span, "in (0, 50]",
                      [](double x) { return x > 0.0 && x <= 50.0; }));
  fs.push_back(number("recurrence", "r_step", c.recurrence.r_step, "in (0, r_span]",
                      [](double x) { return x > 0.0 && x <= 50.0; }));
  fs.push_back(number("recurrence", "samples", c.recurrence.samples, "in [1, 100000000]",
                      in(std::size_t{1}, std::size_t{100000000})));
  fs.push_back(number("recurrence", "curve_depth", c.recurrence.curve_depth, "in [0, 64]", in(0, 64)));

  fs.push_back(number("run", "seed", c.run.seed, "in [0, 2^64 - 1]", [](std::uint64_t) { return true; }));
  fs.push_back(number("run", "workers", c.run.workers, "in [1, 1024]", in(1, 1024)));
  Field out{"run", "out", "(a directory path)", {}, {}};
  out.set = [&c, out](const std::string& v) {
    if (trim(v).empty()) bad_value(out, v, "a non-empty path");
    c.run.out = trim(v);
  };
  out.get = [&c] { return c.run.out; };
  fs.push_back(out);
  return fs;
}

void cross_check(const ExperimentConfig& c) {
  if (c.curves.depth_min > c.curves.depth_max)
    fail("ConfigError", "[curves] depth_min must not exceed depth_max");
  if (!std::is_sorted(c.recurrence.n.begin(), c.recurrence.n.end()) ||
      std::adjacent_find(c.recurrence.n.begin(), c.recurrence.n.end()) != c.recurrence.n.end())
    fail("ConfigError", "[recurrence] n must be strictly increasing");
  if (c.recurrence.r_step > c.recurrence.r_span)
    fail("ConfigError", "[recurrence] r_step must not exceed r_span");
  if (c.system.phi.empty()) fail("ConfigError", "[system] phi needs at least one coefficient");
}

}  // namespace

ExperimentConfig preset(const std::string& name) {
  if (name != "default") fail("ConfigError", "unknown preset '" + name + "' (available: default)");
  return {};
}

ExperimentConfig parse(const std::string& text, ExperimentConfig base) {
  namespace pt = boost::property_tree;
  // read_ini only recognises comments at the start of a line
  std::string cleaned;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    for (std::size_t i = 1; i < line.size(); ++i)
      if ((line[i] == ';' || line[i] == '#') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.resize(i);
        break;
      }
    cleaned += line + '\n';
  }
  pt::ptree tree;
  std::istringstream in(cleaned);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail("ConfigError", std::string("malformed config: ") + e.what());
  }
  auto fs = fields(base);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      fail("ConfigError", "key '" + section + "' appears outside any [section]");
    bool known_section = false;
    for (const auto& f : fs) known_section |= f.section == section;
    if (!known_section) fail("ConfigError", "unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      auto it = std::find_if(fs.begin(), fs.end(),
                             [&](const Field& f) { return f.section == section && f.key == key; });
      if (it == fs.end()) fail("ConfigError", "unknown key '" + key + "' in [" + section + "]");
      it->set(node.data());
    }
  }
  cross_check(base);
  return base;
}

ExperimentConfig load(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream f(path);
  if (!f) fail("ConfigError", "cannot read config file " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), std::move(base));
}

nlohmann::json to_json(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields(copy)) j[f.section][f.key] = f.get();
  return j;
}

std::string to_text(const ExperimentConfig& c) {
  ExperimentConfig copy = c;
  std::string out;
  std::string current;
  for (const auto& f : fields(copy)) {
    if (f.section != current) {
      out += (current.empty() ? "[" : "\n[") + f.section + "]\n";
      current = f.section;
    }
    out += f.key + " = " + f.get() + "\n";
  }
  return out;
}

}  // namespace mtlab::config
