#pragma once
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bethe/moments.hpp"

namespace bethe {

enum class ExperimentKind {
  greens,
  decay,
  resolvent_diff,
  derivatives,
  bounds,
  dos,
  validate,
};

const char* to_string(ExperimentKind k);
ExperimentKind experiment_kind_from(const std::string& s);

// One experiment = one of these, fully serializable; the hash of the
// canonical serialization (minus execution details) names the run.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::validate;
  std::string mode;        // dos only: eigen | stieltjes | smoothness | lloyd
  MomentConfig moments;
  std::string out_dir;     // empty -> $BETHE_LAB_OUT, then ./runs
  int ell = 1;             // derivatives: estimator order
  int l_min = 3;           // resolvent-diff: first inner depth
  double xi_ref = 0;       // resolvent-diff: rate for the bound curve, 0 = off
  std::string source = "eigen";  // smoothness: curve backend
  std::int64_t vertex_budget = kDefaultVertexBudget;
  std::int64_t sample_work_budget = kSampleWorkBudget;
};

// Accepts either the key-value section format or JSON (first significant
// byte '{').  Unknown keys are errors, never silently dropped.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Full dump with every default explicit, object keys sorted.
std::string canonical_config_json(const ExperimentConfig& c);

std::uint64_t fnv1a64(std::string_view bytes);

// Over the canonical dump minus out_dir and workers: where a run lands and
// how many threads computed it are not part of what it computed.
std::string config_hash(const ExperimentConfig& c);

// Library invariants plus experiment-level gates (mode tables, budget caps,
// per-kind requirements).  Throws config_malformed / invalid_parameter.
void validate_experiment(const ExperimentConfig& c);

std::int64_t subtree_vertex_count(int K, int L, std::int64_t cap);

struct ValidationCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ManifestFile {
  std::string name;
  std::string checksum;  // fnv1a64 of the bytes, hex
};

struct ResultManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started_at;   // UTC, ISO 8601
  std::string finished_at;
  double wall_seconds = 0;
  std::string tool_version;
  std::vector<ManifestFile> files;
  bool validation_cached = false;
  std::vector<ValidationCheck> validation;
  bool validation_passed = false;
  std::string config_json;   // canonical full config
  std::string results_json;  // kind-specific summary (report prints, never
                             // recomputes)
};

std::string manifest_to_json(const ResultManifest& m);
ResultManifest manifest_from_json(const std::string& text);

// temp-file-then-rename in the target directory; no partial files survive
void write_file_atomic(const std::string& path, const std::string& content);

std::string tool_version();

// shortest round-tripping decimal form; the one double formatter everywhere
std::string format_double(double v);

}  // namespace bethe
