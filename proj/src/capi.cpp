#include "migra/migra.h"

#include "migra/engine.hpp"
#include "migra/error.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <memory>
#include <set>
#include <string>

struct migra_engine {
  std::unique_ptr<migra::Engine> engine;
};

namespace {

thread_local std::string g_last_error;
thread_local std::string g_last_code;

using json = nlohmann::json;
using migra::ErrorCode;

void clear_error() {
  g_last_error.clear();
  g_last_code.clear();
}

bool is_usage_error(ErrorCode code) {
  static const std::set<ErrorCode> usage = {
      ErrorCode::ConfigInvalid,         ErrorCode::PlanMissing,       ErrorCode::StateMissing,
      ErrorCode::RunCompleted,          ErrorCode::RunInProgress,     ErrorCode::NonEmptyForeignDir,
      ErrorCode::PlanExists,
      ErrorCode::BankLocked,            ErrorCode::InvalidStrategyParam, ErrorCode::UnknownPlaybookInRule,
      ErrorCode::StrategyMismatch,      ErrorCode::BankPlanMismatch,  ErrorCode::NoItems,
      ErrorCode::PreCheckedItem,        ErrorCode::MalformedCheckbox, ErrorCode::EmptyGoldenPair,
      ErrorCode::MalformedDocument,     ErrorCode::EmptyRuns,         ErrorCode::MisalignedModels,
      ErrorCode::TooFewPairs,           ErrorCode::ZeroVariance,      ErrorCode::RootNotFound,
      ErrorCode::TranscriptInvalid,     ErrorCode::EmptyPlaybook,     ErrorCode::DuplicateName,
      ErrorCode::WorkspaceInvalid,      ErrorCode::FileNotFound,
  };
  return usage.count(code) > 0;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs `body`, translating exceptions into a status and the thread's last
// error.
template <typename F>
migra_status guarded(F&& body) {
  clear_error();
  try {
    return body();
  } catch (const migra::Error& e) {
    g_last_error = e.what();
    g_last_code = std::string(migra::to_string(e.code()));
    return is_usage_error(e.code()) ? MIGRA_EUSAGE : MIGRA_EERROR;
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid request JSON: ") + e.what();
    g_last_code = "InvalidRequest";
    return MIGRA_EUSAGE;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    g_last_code = "Internal";
    return MIGRA_EERROR;
  }
}

migra_status emit(const migra::CommandResult& result, char** out_json) {
  if (out_json) *out_json = dup(result.json);
  return result.success ? MIGRA_OK : MIGRA_FAILED;
}

migra_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  g_last_code = "InvalidRequest";
  return MIGRA_EUSAGE;
}

json parse_object(const char* text) {
  if (!text || !*text) return json::object();
  auto j = json::parse(text);
  if (!j.is_object()) throw migra::Error(ErrorCode::ConfigInvalid, "request must be a JSON object");
  return j;
}

migra::RunRequest run_request(const char* options_json) {
  const auto j = parse_object(options_json);
  migra::RunRequest r;
  r.force = j.value("force", false);
  if (j.contains("stop_after_chunks") && !j["stop_after_chunks"].is_null()) {
    r.stop_after_chunks = j["stop_after_chunks"].get<std::size_t>();
  }
  return r;
}

}  // namespace

extern "C" {

const char* migra_version(void) { return "0.1.0"; }

const char* migra_last_error(void) { return g_last_error.c_str(); }
const char* migra_last_error_code(void) { return g_last_code.c_str(); }

migra_status migra_engine_open(const char* config_path, const char* overrides_json, migra_engine** out) {
  if (!config_path) return null_arg("config_path");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    auto config = migra::load_config(config_path, overrides_json ? overrides_json : "");
    *out = new migra_engine{std::make_unique<migra::Engine>(std::move(config))};
    return MIGRA_OK;
  });
}

void migra_engine_close(migra_engine* engine) { delete engine; }

void migra_engine_set_force_unlock(migra_engine* engine, int force) {
  if (engine) engine->engine->set_force_unlock(force != 0);
}

migra_status migra_plan(migra_engine* engine, const char* options_json, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] {
    const auto j = parse_object(options_json);
    std::optional<std::string> root;
    if (j.contains("root") && !j["root"].is_null()) root = j["root"].get<std::string>();
    return emit(engine->engine->plan(root, j.value("overwrite", false)), out_json);
  });
}

migra_status migra_run(migra_engine* engine, const char* options_json, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] { return emit(engine->engine->run(run_request(options_json)), out_json); });
}

migra_status migra_resume(migra_engine* engine, const char* options_json, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] { return emit(engine->engine->resume(run_request(options_json)), out_json); });
}

migra_status migra_judge(migra_engine* engine, const char* request_json, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] {
    const auto j = parse_object(request_json);
    migra::JudgeRequest r;
    r.checklist = j.at("checklist").get<std::string>();
    r.targets = j.value("targets", std::vector<std::string>{});
    r.runs = j.value("runs", 1);
    if (j.contains("out") && !j["out"].is_null()) r.out = j["out"].get<std::string>();
    if (j.contains("model") && !j["model"].is_null()) r.model = j["model"].get<std::string>();
    r.append = j.value("append", false);
    return emit(engine->engine->judge(r), out_json);
  });
}

migra_status migra_playbook_generate(migra_engine* engine, const char* request_json, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] {
    const auto j = parse_object(request_json);
    migra::PlaybookGenRequest r;
    for (const auto& pair : j.at("golden")) {
      r.golden.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
    if (j.contains("out") && !j["out"].is_null()) r.out = j["out"].get<std::string>();
    r.review = j.value("review", false);
    r.name = j.value("name", std::string("generated"));
    return emit(engine->engine->playbook_generate(r), out_json);
  });
}

migra_status migra_viz(migra_engine* engine, const char* out_path, char** out_json) {
  if (!engine) return null_arg("engine");
  return guarded([&] {
    std::optional<std::filesystem::path> out;
    if (out_path && *out_path) out = out_path;
    return emit(engine->engine->viz(out), out_json);
  });
}

migra_status migra_eval_compare(const char* request_json, char** out_json) {
  return guarded([&] {
    const auto j = parse_object(request_json);
    migra::CompareRequest r;
    r.a = j.at("a").get<std::string>();
    r.b = j.at("b").get<std::string>();
    if (j.contains("a_config") && !j["a_config"].is_null()) r.a_config = j["a_config"].get<std::string>();
    if (j.contains("b_config") && !j["b_config"].is_null()) r.b_config = j["b_config"].get<std::string>();
    return emit(migra::Engine::eval_compare(r), out_json);
  });
}

void migra_string_free(char* s) { std::free(s); }

}  // extern "C"
