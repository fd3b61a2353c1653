#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "bethe/campaign.hpp"
#include "bethe/config.hpp"
#include "bethe/errors.hpp"

using namespace bethe;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected a bethe::Error");
  return ErrorKind::invalid_parameter;
}

const char* kKvConfig = R"(# comment line
kind = dos
mode = eigen
out_dir = somewhere
ell = 2
l_min = 4
xi_ref = 0.25
source = stieltjes

[moments]
K = 2
L = 3
lambda = 5.5
s = 0.5
e_min = -2
e_max = 2
e_step = 0.5
epsilon_ladder = 0.4, 0.2, 0.1
sample_count = 500
seed = 42
p = 2
workers = 3
blocks = 50
oracle_mode = false

[density]
kind = bump
m = 6
width = 1.5
)";

const char* kJsonConfig = R"({
  "kind": "dos", "mode": "eigen", "out_dir": "somewhere",
  "ell": 2, "l_min": 4, "xi_ref": 0.25, "source": "stieltjes",
  "moments": {
    "K": 2, "L": 3, "lambda": 5.5, "s": 0.5,
    "e_min": -2.0, "e_max": 2.0, "e_step": 0.5,
    "epsilon_ladder": [0.4, 0.2, 0.1],
    "sample_count": 500, "seed": 42, "p": 2,
    "workers": 3, "blocks": 50, "oracle_mode": false,
    "density": {"kind": "bump", "m": 6, "width": 1.5}
  }
})";

fs::path fresh_dir(const std::string& leaf) {
  const fs::path p = fs::temp_directory_path() / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_eigen_config() {
  ExperimentConfig c;
  c.kind = ExperimentKind::dos;
  c.mode = "eigen";
  c.moments.K = 2;
  c.moments.L = 2;
  c.moments.lambda = 2.0;
  c.moments.density = {DensityKind::bump, 4, 1.0, -1, 1, 1.0};
  c.moments.e_min = -6.0;
  c.moments.e_max = 6.0;
  c.moments.e_step = 0.5;
  c.moments.sample_count = 40;
  c.moments.seed = 5;
  c.moments.blocks = 8;
  return c;
}

}  // namespace

TEST_CASE("the two config front-ends parse to the same experiment") {
  const ExperimentConfig kv = parse_config_text(kKvConfig);
  const ExperimentConfig js = parse_config_text(kJsonConfig);
  CHECK(canonical_config_json(kv) == canonical_config_json(js));
  CHECK(config_hash(kv) == config_hash(js));
  CHECK(kv.kind == ExperimentKind::dos);
  CHECK(kv.mode == "eigen");
  CHECK(kv.ell == 2);
  CHECK(kv.xi_ref == 0.25);
  CHECK(kv.moments.lambda == 5.5);
  CHECK(kv.moments.epsilon_ladder == std::vector<double>{0.4, 0.2, 0.1});
  CHECK(kv.moments.density.m == 6);
  CHECK(kv.moments.workers == 3);
}

TEST_CASE("unknown keys and malformed values are rejected, never dropped") {
  CHECK(kind_of([] { parse_config_text("bogus = 1\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[moments]\nbogus = 1\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[planets]\nK = 2\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("kind = cooking\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[moments]\nK = two\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[moments]\nlambda = 1.5x\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[moments]\noracle_mode = maybe\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("[moments]\nepsilon_ladder = \n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("kind dos\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("   \n\t\n"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("{\"bogus\": 1}"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("{\"moments\": {\"bogus\": 1}}"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_text("{ not json"); }) ==
        ErrorKind::config_malformed);
  CHECK(kind_of([] { parse_config_file("/no/such/file.conf"); }) ==
        ErrorKind::io_failure);
}

TEST_CASE("config hash tracks the experiment, not the execution") {
  ExperimentConfig a = parse_config_text(kKvConfig);
  ExperimentConfig b = a;
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) == config_hash(b));

  b.moments.seed = 43;  // a different experiment
  CHECK(config_hash(a) != config_hash(b));

  b = a;
  b.moments.workers = 8;  // same experiment, different execution
  b.out_dir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  CHECK(canonical_config_json(a) != canonical_config_json(b));
}

TEST_CASE("fnv1a64 matches the reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("format_double is shortest round-trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5) == "-2.5");
  CHECK(format_double(1.0) == "1");
  const double v = 0.1234567890123456789;
  CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("experiment-level validation gates") {
  ExperimentConfig c = tiny_eigen_config();
  validate_experiment(c);  // baseline passes

  SUBCASE("dos mode table") {
    c.mode = "histogram";
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("mode on a non-dos kind") {
    c.kind = ExperimentKind::decay;
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("lloyd wants the cauchy oracle") {
    c.mode = "lloyd";
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("smoothness source table") {
    c.mode = "smoothness";
    c.source = "tea-leaves";
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("bounds need a differentiable density") {
    c.kind = ExperimentKind::bounds;
    c.mode = "";
    c.moments.density.kind = DensityKind::uniform;
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("resolvent-diff depth range") {
    c.kind = ExperimentKind::resolvent_diff;
    c.mode = "";
    c.l_min = c.moments.L;
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::config_malformed);
  }
  SUBCASE("vertex budget cap") {
    c.vertex_budget = 5;  // tiny config has N = 10
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::budget_exceeded);
  }
  SUBCASE("sample-work cap") {
    c.sample_work_budget = 100;
    CHECK(kind_of([&] { validate_experiment(c); }) ==
          ErrorKind::budget_exceeded);
  }
}

TEST_CASE("subtree vertex counting") {
  CHECK(subtree_vertex_count(2, 0, 1000) == 1);
  CHECK(subtree_vertex_count(2, 4, 1000) == 46);
  CHECK(subtree_vertex_count(2, 8, 1000) == 766);
  CHECK(subtree_vertex_count(1, 5, 1000) == 11);
  CHECK(kind_of([] { subtree_vertex_count(2, 12, 1000); }) ==
        ErrorKind::budget_exceeded);
}

TEST_CASE("atomic writes leave no temporaries") {
  const fs::path dir = fresh_dir("bethe-cli-atomic");
  const fs::path target = dir / "x.csv";
  write_file_atomic(target.string(), "a,b\n1,2\n");
  CHECK(slurp(target) == "a,b\n1,2\n");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("manifest serialization round-trips") {
  ResultManifest m;
  m.config_hash = "00ff00ff00ff00ff";
  m.seed = 99;
  m.started_at = "2024-01-01T00:00:00Z";
  m.finished_at = "2024-01-01T00:00:01Z";
  m.wall_seconds = 1.25;
  m.tool_version = tool_version();
  m.files.push_back({"curve.csv", "abcdef0123456789"});
  m.validation.push_back({"free-closed-form", true, "off by 1e-12"});
  m.validation_passed = true;
  m.validation_cached = true;
  m.config_json = canonical_config_json(tiny_eigen_config());
  m.results_json = "{\"mass\":1.0}";

  const ResultManifest r = manifest_from_json(manifest_to_json(m));
  CHECK(r.config_hash == m.config_hash);
  CHECK(r.seed == m.seed);
  CHECK(r.wall_seconds == m.wall_seconds);
  CHECK(r.files.size() == 1);
  CHECK(r.files[0].checksum == m.files[0].checksum);
  CHECK(r.validation.size() == 1);
  CHECK(r.validation[0].pass);
  CHECK(r.validation_cached);
  CHECK(r.config_json == m.config_json);

  CHECK(kind_of([] { manifest_from_json("{half"); }) == ErrorKind::io_failure);
  CHECK(kind_of([] { manifest_from_json("{\"seed\": 1}"); }) ==
        ErrorKind::io_failure);
}

TEST_CASE("validation suite passes on a fresh build") {
  const std::vector<ValidationCheck> checks = validation_suite();
  REQUIRE(checks.size() == 6);
  for (const ValidationCheck& v : checks) {
    INFO(v.name, ": ", v.detail);
    CHECK(v.pass);
  }
}

TEST_CASE("run_experiment writes CSVs, checksums and a trusted manifest") {
  const fs::path out = fresh_dir("bethe-cli-run");
  ExperimentConfig c;
  c.kind = ExperimentKind::greens;
  c.out_dir = out.string();
  c.moments.K = 2;
  c.moments.L = 1;
  c.moments.lambda = 1.0;
  c.moments.density = {DensityKind::bump, 4, 1.0, -1, 1, 1.0};
  c.moments.e_min = -1.0;
  c.moments.e_max = 1.0;
  c.moments.e_step = 0.5;
  c.moments.epsilon_ladder = {0.1};
  c.moments.seed = 9;

  const RunOutcome rc = run_experiment(c);
  REQUIRE(rc.exit_code == 0);
  REQUIRE(!rc.out_dir.empty());
  const fs::path dir(rc.out_dir);
  CHECK(dir.filename().string() ==
        "greens-" + config_hash(c));

  const std::string csv = slurp(dir / "entries.csv");
  CHECK(csv.rfind("n1,n2,E,epsilon,re,im\n", 0) == 0);
  // header + ladder(1) x grid(5) x N(4) rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);

  const ResultManifest man = manifest_from_json(slurp(dir / "manifest.json"));
  CHECK(man.config_hash == config_hash(c));
  CHECK(man.validation_passed);
  CHECK(man.validation.size() == 6);
  REQUIRE(man.files.size() == 1);
  CHECK(man.files[0].name == "entries.csv");
  char want[17];
  std::snprintf(want, sizeof want, "%016llx",
                (unsigned long long)fnv1a64(csv));
  CHECK(man.files[0].checksum == want);
  CHECK(fs::exists(out / "validation-cache.json"));

  // reportable, and the second run reuses the cached validation
  CHECK(report_directory(rc.out_dir) == 0);
  const RunOutcome again = run_experiment(c);
  REQUIRE(again.exit_code == 0);
  const ResultManifest man2 =
      manifest_from_json(slurp(fs::path(again.out_dir) / "manifest.json"));
  CHECK(man2.validation_cached);
  CHECK(!man.validation_cached);
}

TEST_CASE("run_experiment is bit-identical across worker counts") {
  ExperimentConfig c = tiny_eigen_config();
  c.out_dir = fresh_dir("bethe-cli-w1").string();
  c.moments.workers = 1;
  const RunOutcome one = run_experiment(c);
  REQUIRE(one.exit_code == 0);

  c.out_dir = fresh_dir("bethe-cli-w2").string();
  c.moments.workers = 2;
  const RunOutcome two = run_experiment(c);
  REQUIRE(two.exit_code == 0);

  CHECK(config_hash(c) != "");
  CHECK(fs::path(one.out_dir).filename() == fs::path(two.out_dir).filename());
  CHECK(slurp(fs::path(one.out_dir) / "curve.csv") ==
        slurp(fs::path(two.out_dir) / "curve.csv"));
}

TEST_CASE("gnuplot emission rides along for dos curves") {
  ExperimentConfig c = tiny_eigen_config();
  c.out_dir = fresh_dir("bethe-cli-gp").string();
  RunOptions opt;
  opt.gnuplot = true;
  const RunOutcome rc = run_experiment(c, opt);
  REQUIRE(rc.exit_code == 0);
  const std::string dat = slurp(fs::path(rc.out_dir) / "curve.dat");
  CHECK(dat.find(',') == std::string::npos);
  CHECK(std::count(dat.begin(), dat.end(), '\n') == 25);
}

TEST_CASE("invalid experiments exit 2 with nothing written") {
  const fs::path out = fresh_dir("bethe-cli-invalid");
  ExperimentConfig c = tiny_eigen_config();
  c.out_dir = (out / "sub").string();
  c.mode = "histogram";
  const RunOutcome rc = run_experiment(c);
  CHECK(rc.exit_code == 2);
  CHECK(rc.out_dir.empty());
  CHECK(!fs::exists(out / "sub"));
}

TEST_CASE("runtime failures exit 1 with no partial run directory") {
  const fs::path out = fresh_dir("bethe-cli-runtime");
  ExperimentConfig c;
  c.kind = ExperimentKind::dos;
  c.mode = "stieltjes";
  c.out_dir = out.string();
  // free atomic spectrum at small L: the rung monotonicity gate must trip
  c.moments.K = 2;
  c.moments.L = 4;
  c.moments.lambda = 0.0;
  c.moments.e_min = -2.8;
  c.moments.e_max = 2.8;
  c.moments.e_step = 0.1;
  c.moments.epsilon_ladder = {0.4, 0.2, 0.1};
  c.moments.sample_count = 1;
  c.moments.blocks = 1;
  const RunOutcome rc = run_experiment(c);
  CHECK(rc.exit_code == 1);
  CHECK(rc.out_dir.empty());
  CHECK(rc.message.find("extrapolation-unstable") != std::string::npos);
  for (const auto& e : fs::directory_iterator(out))
    CHECK(e.path().filename() == "validation-cache.json");
}

TEST_CASE("report rejects missing or corrupt manifests") {
  const fs::path out = fresh_dir("bethe-cli-report");
  CHECK(report_directory(out.string()) == 2);
  write_file_atomic((out / "manifest.json").string(), "{broken");
  CHECK(report_directory(out.string()) == 2);
}

TEST_CASE("installed binary honors the exit-code contract") {
  const char* bin = std::getenv("BETHE_LAB_BIN");
  if (!bin || !*bin) return;  // library-only invocation
  const fs::path out = fresh_dir("bethe-cli-bin");
  const std::string b(bin);
  auto runc = [&](const std::string& args) {
    const int rc = std::system((b + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  CHECK(runc("--nonsense") == 2);
  CHECK(runc("report " + (out / "nothing").string()) == 2);

  const fs::path good = out / "ok.conf";
  write_file_atomic(good.string(), "kind = validate\n");
  CHECK(runc("validate --config " + good.string() + " --out " +
             (out / "runs").string()) == 0);

  const fs::path bad = out / "bad.conf";
  write_file_atomic(bad.string(), "kind = dos\nmode = nonsense\n");
  CHECK(runc("run --config " + bad.string() + " --out " +
             (out / "runs2").string()) == 2);
  CHECK(!fs::exists(out / "runs2"));
}
