#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace migra {

// One judge run.
struct ScoreRecord {
  std::string config;
  std::string model;
  std::string run_id;
  double score = 0.0;

  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

// Scores file: JSON array of {"config", "model", "run_id", "score"}.
// Throws Error{MalformedDocument}.
std::vector<ScoreRecord> parse_scores(std::string_view text);
std::string serialize_scores(const std::vector<ScoreRecord>& records);

// Ablation switches of an agent configuration.
struct ConfigFlags {
  bool planner_orchestrator = true;
  bool client_playbook = true;
  bool task_style_playbooks = true;

  friend bool operator==(const ConfigFlags&, const ConfigFlags&) = default;
};

// Flags of the four standard configurations single_agent_baseline,
// single_agent_yt_specific, multi_agent, multi_agent_yt_specific.
std::optional<ConfigFlags> known_config_flags(std::string_view name);

struct ModelScore {
  double mean = 0.0;
  std::size_t runs = 0;
};

struct ConfigScores {
  std::string config_name;
  std::map<std::string, ModelScore> models;
  double total = 0.0;  // unweighted mean of the per-model means
  std::optional<ConfigFlags> flags;
};

// Per-model mean of the runs, then the plain mean across models, so a model
// with more runs carries no extra weight. Throws Error{EmptyRuns}.
std::map<std::string, ConfigScores> aggregate_scores(const std::vector<ScoreRecord>& runs);

struct PairedT {
  double t = 0.0;
  int dof = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;  // sample standard deviation (n - 1)
};

// Paired t statistic over d_i = a_i - b_i.
// Throws Error{TooFewPairs} (n < 2), Error{ZeroVariance}.
PairedT paired_t(const std::vector<double>& a, const std::vector<double>& b);

// Aligned on model labels. Throws Error{MisalignedModels} when the label
// sets differ, then as above.
PairedT paired_t(const std::map<std::string, double>& a, const std::map<std::string, double>& b);

// Two-sided 5% critical value of Student's t for small dof (table lookup,
// 1..30; larger dof use the normal value 1.960).
double t_critical_05(int dof) noexcept;

}  // namespace migra
