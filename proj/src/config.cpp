#include "bethe/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "bethe/errors.hpp"

namespace bethe {

using nlohmann::json;

namespace {

constexpr const char* kKindNames[] = {
    "greens", "decay", "resolvent-diff", "derivatives",
    "bounds", "dos",   "validate",
};

DensityKind density_kind_from(const std::string& s) {
  if (s == "bump") return DensityKind::bump;
  if (s == "uniform") return DensityKind::uniform;
  if (s == "cauchy") return DensityKind::cauchy;
  fail(ErrorKind::config_malformed, "unknown density kind '" + s + "'");
}

const char* density_kind_name(DensityKind k) {
  switch (k) {
    case DensityKind::bump: return "bump";
    case DensityKind::uniform: return "uniform";
    case DensityKind::cauchy: return "cauchy";
  }
  return "unknown";
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v, const std::string& key) {
  try {
    size_t idx = 0;
    double d = std::stod(v, &idx);
    if (idx != v.size())
      fail(ErrorKind::config_malformed,
           "trailing characters in value for '" + key + "': " + v);
    return d;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::config_malformed,
         "cannot parse number for '" + key + "': " + v);
  }
}

std::int64_t parse_int(const std::string& v, const std::string& key) {
  std::int64_t out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  auto [p, ec] = std::from_chars(b, e, out);
  if (ec != std::errc{} || p != e)
    fail(ErrorKind::config_malformed,
         "cannot parse integer for '" + key + "': " + v);
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::config_malformed,
       "cannot parse boolean for '" + key + "': " + v);
}

std::vector<double> parse_list(const std::string& v, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      fail(ErrorKind::config_malformed, "empty element in list '" + key + "'");
    out.push_back(parse_double(item, key));
  }
  if (out.empty())
    fail(ErrorKind::config_malformed, "empty list for '" + key + "'");
  return out;
}

// one assignment in the section format; section is "", "moments" or "density"
void apply_kv(ExperimentConfig& c, const std::string& section,
              const std::string& key, const std::string& val, int line) {
  auto unknown = [&]() -> void {
    fail(ErrorKind::config_malformed,
         "unknown key '" + key + "' in section [" +
             (section.empty() ? "top-level" : section) + "] at line " +
             std::to_string(line));
  };
  if (section.empty()) {
    if (key == "kind") c.kind = experiment_kind_from(val);
    else if (key == "mode") c.mode = val;
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "ell") c.ell = int(parse_int(val, key));
    else if (key == "l_min") c.l_min = int(parse_int(val, key));
    else if (key == "xi_ref") c.xi_ref = parse_double(val, key);
    else if (key == "source") c.source = val;
    else if (key == "vertex_budget") c.vertex_budget = parse_int(val, key);
    else if (key == "sample_work_budget")
      c.sample_work_budget = parse_int(val, key);
    else unknown();
  } else if (section == "moments") {
    MomentConfig& m = c.moments;
    if (key == "K") m.K = int(parse_int(val, key));
    else if (key == "L") m.L = int(parse_int(val, key));
    else if (key == "lambda") m.lambda = parse_double(val, key);
    else if (key == "s") m.s = parse_double(val, key);
    else if (key == "e_min") m.e_min = parse_double(val, key);
    else if (key == "e_max") m.e_max = parse_double(val, key);
    else if (key == "e_step") m.e_step = parse_double(val, key);
    else if (key == "epsilon_ladder") m.epsilon_ladder = parse_list(val, key);
    else if (key == "sample_count") m.sample_count = parse_int(val, key);
    else if (key == "seed") m.seed = std::uint64_t(parse_int(val, key));
    else if (key == "p") m.p = int(parse_int(val, key));
    else if (key == "workers") m.workers = int(parse_int(val, key));
    else if (key == "blocks") m.blocks = int(parse_int(val, key));
    else if (key == "oracle_mode") m.oracle_mode = parse_bool(val, key);
    else unknown();
  } else if (section == "density") {
    DensitySpec& d = c.moments.density;
    if (key == "kind") d.kind = density_kind_from(val);
    else if (key == "m") d.m = int(parse_int(val, key));
    else if (key == "width") d.width = parse_double(val, key);
    else if (key == "a") d.a = parse_double(val, key);
    else if (key == "b") d.b = parse_double(val, key);
    else if (key == "gamma") d.gamma = parse_double(val, key);
    else unknown();
  } else {
    fail(ErrorKind::config_malformed,
         "unknown section [" + section + "] at line " + std::to_string(line));
  }
}

ExperimentConfig parse_kv(const std::string& text) {
  ExperimentConfig c;
  std::stringstream ss(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(ss, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s.front() == '[') {
      if (s.back() != ']')
        fail(ErrorKind::config_malformed,
             "unterminated section header at line " + std::to_string(line));
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::config_malformed,
           "expected 'key = value' at line " + std::to_string(line));
    apply_kv(c, section, trim(s.substr(0, eq)), trim(s.substr(eq + 1)), line);
  }
  return c;
}

double json_number(const json& v, const std::string& key) {
  if (!v.is_number())
    fail(ErrorKind::config_malformed, "'" + key + "' must be a number");
  return v.get<double>();
}

std::int64_t json_integer(const json& v, const std::string& key) {
  if (!v.is_number_integer())
    fail(ErrorKind::config_malformed, "'" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::string json_string(const json& v, const std::string& key) {
  if (!v.is_string())
    fail(ErrorKind::config_malformed, "'" + key + "' must be a string");
  return v.get<std::string>();
}

void apply_density_json(DensitySpec& d, const json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "kind") d.kind = density_kind_from(json_string(v, k));
    else if (k == "m") d.m = int(json_integer(v, k));
    else if (k == "width") d.width = json_number(v, k);
    else if (k == "a") d.a = json_number(v, k);
    else if (k == "b") d.b = json_number(v, k);
    else if (k == "gamma") d.gamma = json_number(v, k);
    else
      fail(ErrorKind::config_malformed, "unknown density key '" + k + "'");
  }
}

void apply_moments_json(MomentConfig& m, const json& j) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "K") m.K = int(json_integer(v, k));
    else if (k == "L") m.L = int(json_integer(v, k));
    else if (k == "lambda") m.lambda = json_number(v, k);
    else if (k == "s") m.s = json_number(v, k);
    else if (k == "e_min") m.e_min = json_number(v, k);
    else if (k == "e_max") m.e_max = json_number(v, k);
    else if (k == "e_step") m.e_step = json_number(v, k);
    else if (k == "epsilon_ladder") {
      if (!v.is_array() || v.empty())
        fail(ErrorKind::config_malformed,
             "'epsilon_ladder' must be a non-empty array");
      m.epsilon_ladder.clear();
      for (const json& e : v)
        m.epsilon_ladder.push_back(json_number(e, k));
    } else if (k == "sample_count") m.sample_count = json_integer(v, k);
    else if (k == "seed") m.seed = std::uint64_t(json_integer(v, k));
    else if (k == "p") m.p = int(json_integer(v, k));
    else if (k == "workers") m.workers = int(json_integer(v, k));
    else if (k == "blocks") m.blocks = int(json_integer(v, k));
    else if (k == "oracle_mode") {
      if (!v.is_boolean())
        fail(ErrorKind::config_malformed, "'oracle_mode' must be a boolean");
      m.oracle_mode = v.get<bool>();
    } else if (k == "density") {
      if (!v.is_object())
        fail(ErrorKind::config_malformed, "'density' must be an object");
      apply_density_json(m.density, v);
    } else
      fail(ErrorKind::config_malformed, "unknown moments key '" + k + "'");
  }
}

ExperimentConfig parse_json_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::config_malformed, std::string("JSON parse: ") + e.what());
  }
  if (!j.is_object())
    fail(ErrorKind::config_malformed, "config root must be an object");
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    if (k == "kind") c.kind = experiment_kind_from(json_string(v, k));
    else if (k == "mode") c.mode = json_string(v, k);
    else if (k == "out_dir") c.out_dir = json_string(v, k);
    else if (k == "ell") c.ell = int(json_integer(v, k));
    else if (k == "l_min") c.l_min = int(json_integer(v, k));
    else if (k == "xi_ref") c.xi_ref = json_number(v, k);
    else if (k == "source") c.source = json_string(v, k);
    else if (k == "vertex_budget") c.vertex_budget = json_integer(v, k);
    else if (k == "sample_work_budget")
      c.sample_work_budget = json_integer(v, k);
    else if (k == "moments") {
      if (!v.is_object())
        fail(ErrorKind::config_malformed, "'moments' must be an object");
      apply_moments_json(c.moments, v);
    } else
      fail(ErrorKind::config_malformed, "unknown config key '" + k + "'");
  }
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  const MomentConfig& m = c.moments;
  json jd{
      {"kind", density_kind_name(m.density.kind)}, {"m", m.density.m},
      {"width", m.density.width},                  {"a", m.density.a},
      {"b", m.density.b},                          {"gamma", m.density.gamma},
  };
  json jm{
      {"K", m.K},
      {"L", m.L},
      {"lambda", m.lambda},
      {"s", m.s},
      {"e_min", m.e_min},
      {"e_max", m.e_max},
      {"e_step", m.e_step},
      {"epsilon_ladder", m.epsilon_ladder},
      {"sample_count", m.sample_count},
      {"seed", m.seed},
      {"p", m.p},
      {"workers", m.workers},
      {"blocks", m.blocks},
      {"oracle_mode", m.oracle_mode},
      {"density", jd},
  };
  return json{
      {"kind", to_string(c.kind)},
      {"mode", c.mode},
      {"out_dir", c.out_dir},
      {"ell", c.ell},
      {"l_min", c.l_min},
      {"xi_ref", c.xi_ref},
      {"source", c.source},
      {"vertex_budget", c.vertex_budget},
      {"sample_work_budget", c.sample_work_budget},
      {"moments", jm},
  };
}

json check_to_json(const ValidationCheck& v) {
  return json{{"name", v.name}, {"pass", v.pass}, {"detail", v.detail}};
}

}  // namespace

const char* to_string(ExperimentKind k) { return kKindNames[int(k)]; }

ExperimentKind experiment_kind_from(const std::string& s) {
  for (int i = 0; i < 7; ++i)
    if (s == kKindNames[i]) return ExperimentKind(i);
  fail(ErrorKind::config_malformed, "unknown experiment kind '" + s + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
  for (char ch : text) {
    if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') continue;
    return ch == '{' ? parse_json_config(text) : parse_kv(text);
  }
  fail(ErrorKind::config_malformed, "empty config");
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io_failure, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string canonical_config_json(const ExperimentConfig& c) {
  return config_to_json(c).dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("out_dir");
  j["moments"].erase("workers");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                (unsigned long long)fnv1a64(j.dump()));
  return buf;
}

std::int64_t subtree_vertex_count(int K, int L, std::int64_t cap) {
  if (K < 1 || L < 0)
    fail(ErrorKind::invalid_parameter, "need K >= 1 and L >= 0");
  std::int64_t n = 1, shell = K + 1;
  for (int d = 1; d <= L; ++d) {
    n += shell;
    if (n > cap)
      fail(ErrorKind::budget_exceeded,
           "vertex count for (K,L) = (" + std::to_string(K) + "," +
               std::to_string(L) + ") exceeds budget " + std::to_string(cap));
    shell *= K;
  }
  return n;
}

void validate_experiment(const ExperimentConfig& c) {
  validate(c.moments);
  const std::int64_t cap =
      std::min(c.vertex_budget, kDefaultVertexBudget);
  const std::int64_t n = subtree_vertex_count(c.moments.K, c.moments.L, cap);
  const std::int64_t work_cap =
      std::min(c.sample_work_budget, kSampleWorkBudget);
  if (c.moments.sample_count > work_cap / std::max<std::int64_t>(n, 1))
    fail(ErrorKind::budget_exceeded,
         "sample_count x vertex count exceeds work budget " +
             std::to_string(work_cap));

  if (c.kind == ExperimentKind::dos) {
    if (c.mode != "eigen" && c.mode != "stieltjes" && c.mode != "smoothness" &&
        c.mode != "lloyd")
      fail(ErrorKind::config_malformed,
           "dos mode must be eigen | stieltjes | smoothness | lloyd, got '" +
               c.mode + "'");
    if (c.mode == "smoothness" && c.source != "eigen" &&
        c.source != "stieltjes")
      fail(ErrorKind::config_malformed,
           "smoothness source must be eigen | stieltjes, got '" + c.source +
               "'");
    if (c.mode == "lloyd" &&
        (c.moments.density.kind != DensityKind::cauchy ||
         !c.moments.oracle_mode))
      fail(ErrorKind::config_malformed,
           "dos lloyd requires the cauchy density in oracle mode");
  } else if (!c.mode.empty()) {
    fail(ErrorKind::config_malformed,
         std::string("kind '") + to_string(c.kind) + "' takes no mode");
  }

  if (c.kind == ExperimentKind::derivatives && (c.ell < 0 || c.ell > 3))
    fail(ErrorKind::config_malformed, "derivatives need 0 <= ell <= 3");
  if (c.kind == ExperimentKind::resolvent_diff) {
    if (c.l_min < 0 || c.l_min >= c.moments.L)
      fail(ErrorKind::config_malformed,
           "resolvent-diff needs 0 <= l_min < L");
    if (!(c.xi_ref >= 0))
      fail(ErrorKind::config_malformed, "xi_ref must be >= 0");
  }
  if (c.kind == ExperimentKind::bounds &&
      c.moments.density.kind != DensityKind::bump)
    fail(ErrorKind::config_malformed,
         "bounds draws differentiate the density; use the bump family");
}

std::string manifest_to_json(const ResultManifest& m) {
  json files = json::array();
  for (const ManifestFile& f : m.files)
    files.push_back(json{{"name", f.name}, {"checksum", f.checksum}});
  json checks = json::array();
  for (const ValidationCheck& v : m.validation)
    checks.push_back(check_to_json(v));
  json j{
      {"config_hash", m.config_hash},
      {"seed", m.seed},
      {"started_at", m.started_at},
      {"finished_at", m.finished_at},
      {"wall_seconds", m.wall_seconds},
      {"tool_version", m.tool_version},
      {"files", files},
      {"validation_cached", m.validation_cached},
      {"validation", checks},
      {"validation_passed", m.validation_passed},
      {"config", json::parse(m.config_json)},
      {"results", m.results_json.empty() ? json(nullptr)
                                         : json::parse(m.results_json)},
  };
  return j.dump(2) + "\n";
}

ResultManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::io_failure,
         std::string("corrupt manifest: ") + e.what());
  }
  ResultManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started_at = j.at("started_at").get<std::string>();
    m.finished_at = j.at("finished_at").get<std::string>();
    m.wall_seconds = j.at("wall_seconds").get<double>();
    m.tool_version = j.at("tool_version").get<std::string>();
    for (const json& f : j.at("files"))
      m.files.push_back({f.at("name").get<std::string>(),
                         f.at("checksum").get<std::string>()});
    m.validation_cached = j.at("validation_cached").get<bool>();
    for (const json& v : j.at("validation"))
      m.validation.push_back({v.at("name").get<std::string>(),
                              v.at("pass").get<bool>(),
                              v.at("detail").get<std::string>()});
    m.validation_passed = j.at("validation_passed").get<bool>();
    m.config_json = j.at("config").dump();
    m.results_json = j.at("results").is_null() ? "" : j.at("results").dump();
  } catch (const json::exception& e) {
    fail(ErrorKind::io_failure,
         std::string("corrupt manifest: ") + e.what());
  }
  return m;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io_failure, "cannot open " + tmp);
    out.write(content.data(), std::streamsize(content.size()));
    out.flush();
    if (!out) fail(ErrorKind::io_failure, "short write to " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(ErrorKind::io_failure, "cannot move " + tmp + " into place");
  }
}

std::string tool_version() {
#ifdef BETHE_BUILD_ID
  return std::string("bethe-lab 0.1.0 (") + BETHE_BUILD_ID + ")";
#else
  return "bethe-lab 0.1.0 (unknown)";
#endif
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace bethe
