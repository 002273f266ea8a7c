#include "migra/stats.hpp"

#include "migra/error.hpp"

#include <json.hpp>

#include <cmath>
#include <numeric>

namespace migra {

using json = nlohmann::ordered_json;

std::vector<ScoreRecord> parse_scores(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedDocument, std::string("scores file is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::MalformedDocument, "scores file must be a JSON array");
  std::vector<ScoreRecord> out;
  for (const auto& r : doc) {
    try {
      ScoreRecord rec{r.at("config").get<std::string>(), r.at("model").get<std::string>(), r.at("run_id").get<std::string>(),
                      r.at("score").get<double>()};
      if (!(rec.score >= 0.0 && rec.score <= 1.0)) {
        throw Error(ErrorCode::MalformedDocument, "score outside [0, 1] for run " + rec.run_id);
      }
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedDocument, std::string("score record needs config, model, run_id, score: ") + e.what());
    }
  }
  return out;
}

std::string serialize_scores(const std::vector<ScoreRecord>& records) {
  json arr = json::array();
  for (const auto& r : records) {
    arr.push_back({{"config", r.config}, {"model", r.model}, {"run_id", r.run_id}, {"score", r.score}});
  }
  return arr.dump(2) + "\n";
}

std::optional<ConfigFlags> known_config_flags(std::string_view name) {
  // {planner_orchestrator, client_playbook, task_style_playbooks}
  if (name == "single_agent_baseline") return ConfigFlags{false, false, false};
  if (name == "single_agent_yt_specific") return ConfigFlags{false, true, true};
  if (name == "multi_agent") return ConfigFlags{true, false, true};
  if (name == "multi_agent_yt_specific") return ConfigFlags{true, true, true};
  return std::nullopt;
}

std::map<std::string, ConfigScores> aggregate_scores(const std::vector<ScoreRecord>& runs) {
  if (runs.empty()) throw Error(ErrorCode::EmptyRuns, "no score records to aggregate");
  std::map<std::string, std::map<std::string, std::vector<double>>> grouped;
  for (const auto& r : runs) grouped[r.config][r.model].push_back(r.score);

  std::map<std::string, ConfigScores> out;
  for (const auto& [config, models] : grouped) {
    ConfigScores cs;
    cs.config_name = config;
    cs.flags = known_config_flags(config);
    double sum = 0.0;
    for (const auto& [model, scores] : models) {
      const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
      cs.models[model] = ModelScore{mean, scores.size()};
      sum += mean;
    }
    cs.total = sum / static_cast<double>(models.size());
    out.emplace(config, std::move(cs));
  }
  return out;
}

PairedT paired_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::MisalignedModels, "score vectors differ in length");
  const auto n = a.size();
  if (n < 2) throw Error(ErrorCode::TooFewPairs, "paired t needs at least 2 pairs, got " + std::to_string(n));
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double x : d) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd <= 1e-12 * std::max(1.0, std::fabs(mean))) {
    throw Error(ErrorCode::ZeroVariance, "all paired differences are equal; t is undefined");
  }
  return PairedT{mean / (sd / std::sqrt(static_cast<double>(n))), static_cast<int>(n - 1), mean, sd};
}

PairedT paired_t(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
  std::vector<double> va, vb;
  for (const auto& [model, score] : a) {
    auto it = b.find(model);
    if (it == b.end()) throw Error(ErrorCode::MisalignedModels, "model '" + model + "' missing from the second set");
    va.push_back(score);
    vb.push_back(it->second);
  }
  if (a.size() != b.size()) throw Error(ErrorCode::MisalignedModels, "the second set has models the first lacks");
  return paired_t(va, vb);
}

double t_critical_05(int dof) noexcept {
  static constexpr double kTable[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                                      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 0.0;
  if (dof <= 30) return kTable[dof - 1];
  return 1.960;
}

}  // namespace migra
