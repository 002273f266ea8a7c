#include "migra/config.hpp"

#include "migra/error.hpp"
#include "migra/fs_util.hpp"
#include "migra/provider.hpp"

#include <json.hpp>

namespace migra {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    invalid(std::string("'") + key + "' has the wrong type");
  }
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) invalid(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

ProviderConfig parse_provider(const json& j, const fs::path& base, const char* where) {
  if (!j.is_object()) invalid(std::string(where) + " must be an object");
  ProviderConfig pc;
  const auto kind = get_or<std::string>(j, "kind", "scripted");
  if (kind == "scripted") {
    pc.kind = ProviderConfig::Kind::Scripted;
    auto script = opt_string(j, "script_path");
    if (!script) invalid(std::string(where) + ": scripted provider needs 'script_path'");
    pc.script_path = resolve(base, *script);
    if (!fs::is_regular_file(pc.script_path)) invalid(std::string(where) + ": no script at " + pc.script_path.string());
  } else if (kind == "http") {
    pc.kind = ProviderConfig::Kind::Http;
    auto endpoint = opt_string(j, "endpoint");
    auto model = opt_string(j, "model");
    if (!endpoint || !model) invalid(std::string(where) + ": http provider needs 'endpoint' and 'model'");
    pc.http.endpoint = *endpoint;
    pc.http.model = *model;
    pc.http.token_env = opt_string(j, "token_env");
    pc.http.max_attempts = get_or<int>(j, "max_attempts", 3);
    pc.http.backoff_initial_secs = get_or<double>(j, "backoff_initial_secs", 1.0);
    pc.http.timeout_secs = get_or<int>(j, "timeout_secs", 300);
  } else {
    invalid(std::string(where) + ": unknown provider kind '" + kind + "'");
  }
  if (auto rec = opt_string(j, "record_path")) pc.record_path = resolve(base, *rec);
  pc.temperature = get_or<double>(j, "temperature", 0.2);
  if (!(pc.temperature >= 0.0 && pc.temperature <= 2.0)) invalid(std::string(where) + ": temperature outside [0, 2]");
  return pc;
}

ChunkStrategy parse_strategy(const json& j) {
  try {
    if (j.is_string()) return ChunkStrategy::parse(j.get<std::string>());
    if (j.is_object()) {
      const auto kind = get_or<std::string>(j, "kind", "per_step");
      if (kind == "per_step") return ChunkStrategy{StrategyKind::PerStep, 1};
      if (kind == "fixed") return ChunkStrategy::parse("fixed(" + std::to_string(get_or<int>(j, "k", 0)) + ")");
      if (kind == "file_cluster") {
        return ChunkStrategy::parse("file_cluster(" + std::to_string(get_or<int>(j, "k_max", 4)) + ")");
      }
      invalid("unknown strategy kind '" + kind + "'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid) throw;
    throw Error(ErrorCode::ConfigInvalid, std::string("strategy: ") + e.what());
  }
  invalid("'strategy' must be a string such as \"fixed(2)\" or an object");
}

}  // namespace

EngineConfig parse_config(std::string_view text, const fs::path& base_dir, std::string_view overrides_json) {
  json doc;
  try {
    doc = json::parse(text);
    if (!overrides_json.empty()) {
      const auto patch = json::parse(overrides_json);
      if (!patch.is_object()) invalid("overrides must be a JSON object");
      doc.merge_patch(patch);
    }
  } catch (const json::exception& e) {
    invalid(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) invalid("config must be a JSON object");

  EngineConfig c;
  c.name = get_or<std::string>(doc, "name", "default");
  auto ws = opt_string(doc, "workspace_root");
  if (!ws) invalid("'workspace_root' is required");
  c.workspace_root = resolve(base_dir, *ws);
  if (!fs::is_directory(c.workspace_root)) invalid("workspace_root " + c.workspace_root.string() + " is not a directory");
  c.build_cmd = opt_string(doc, "build_cmd");
  c.test_cmd = opt_string(doc, "test_cmd");
  c.timeout_secs = get_or<int>(doc, "timeout_secs", 120);
  if (c.timeout_secs < 1) invalid("timeout_secs must be positive");
  c.root_file = get_or<std::string>(doc, "root_file", "");
  c.target_root = get_or<std::string>(doc, "target_root", "");
  c.source_ext = get_or<std::string>(doc, "source_ext", "py");

  if (!doc.contains("provider")) invalid("'provider' is required");
  c.provider = parse_provider(doc["provider"], base_dir, "provider");
  if (doc.contains("judge_provider") && !doc["judge_provider"].is_null()) {
    c.judge_provider = parse_provider(doc["judge_provider"], base_dir, "judge_provider");
  }

  if (auto it = doc.find("playbooks"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) invalid("'playbooks' must map kinds to path lists");
    for (const char* kind_name : {"general", "style", "task", "client"}) {
      auto list = it->find(kind_name);
      if (list == it->end()) continue;
      if (!list->is_array()) invalid(std::string("playbooks.") + kind_name + " must be a list");
      for (const auto& entry : *list) {
        PlaybookSource src;
        src.kind = *parse_playbook_kind(kind_name);
        if (entry.is_string()) {
          src.path = resolve(base_dir, entry.get<std::string>());
        } else if (entry.is_object() && entry.contains("path")) {
          src.path = resolve(base_dir, get_or<std::string>(entry, "path", ""));
          src.name = get_or<std::string>(entry, "name", "");
        } else {
          invalid(std::string("playbooks.") + kind_name + " entries must be paths or {name, path}");
        }
        if (!fs::is_regular_file(src.path)) invalid("playbook file " + src.path.string() + " does not exist");
        c.playbooks.push_back(std::move(src));
      }
    }
    for (const auto& [k, v] : it->items()) {
      if (!parse_playbook_kind(k)) invalid("unknown playbook kind '" + k + "'");
    }
  }

  if (auto it = doc.find("playbook_rules"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) invalid("'playbook_rules' must be a list");
    for (const auto& r : *it) {
      SelectionRule rule;
      rule.keyword = opt_string(r, "keyword");
      rule.target_prefix = opt_string(r, "target_prefix");
      auto ref = parse_playbook_ref(get_or<std::string>(r, "playbook", ""));
      if (!ref) invalid("playbook rule needs 'playbook' as \"<kind>/<name>\"");
      if (!rule.keyword && !rule.target_prefix) invalid("playbook rule needs 'keyword' or 'target_prefix'");
      rule.playbook = *ref;
      c.playbook_rules.push_back(std::move(rule));
    }
  }

  c.excluded_prefixes = get_or<std::vector<std::string>>(doc, "excluded_prefixes", {});
  if (auto it = doc.find("import_rules"); it != doc.end() && !it->is_null()) {
    if (!it->is_array()) invalid("'import_rules' must be a list");
    for (const auto& r : *it) {
      auto prefix = opt_string(r, "prefix");
      auto line = opt_string(r, "import");
      if (!prefix || !line) invalid("import rule needs 'prefix' and 'import'");
      c.import_rules.emplace_back(*prefix, *line);
    }
  }

  if (doc.contains("strategy")) c.strategy = parse_strategy(doc["strategy"]);
  if (auto it = doc.find("failure_policy"); it != doc.end() && !it->is_null()) {
    c.failure_policy.max_retries = get_or<int>(*it, "max_retries", 2);
    if (c.failure_policy.max_retries < 0) invalid("max_retries must be >= 0");
    const auto action = get_or<std::string>(*it, "on_exhaustion", "abort");
    if (action == "abort") c.failure_policy.on_exhaustion = ExhaustionAction::Abort;
    else if (action == "skip") c.failure_policy.on_exhaustion = ExhaustionAction::Skip;
    else invalid("on_exhaustion must be 'abort' or 'skip'");
    c.failure_policy.skip_cascade = get_or<bool>(*it, "skip_cascade", true);
  }

  auto bank = opt_string(doc, "bank_dir");
  if (!bank) invalid("'bank_dir' is required");
  c.bank_dir = resolve(base_dir, *bank);

  if (auto it = doc.find("limits"); it != doc.end() && !it->is_null()) {
    c.limits.max_rounds = get_or<int>(*it, "max_rounds", 5);
    c.limits.max_iterations = get_or<int>(*it, "max_iterations", 40);
    c.limits.judge_max_iterations = get_or<int>(*it, "judge_max_iterations", 30);
    c.limits.oversized_step_budget = get_or<std::size_t>(*it, "oversized_step_budget", 400);
    c.limits.context_char_budget = get_or<std::size_t>(*it, "context_char_budget", 400'000);
    if (c.limits.max_rounds < 1 || c.limits.max_iterations < 1 || c.limits.judge_max_iterations < 1) {
      invalid("limits must be positive");
    }
  }

  if (auto preset = opt_string(doc, "preset")) {
    auto flags = known_config_flags(*preset);
    if (!flags) invalid("unknown preset '" + *preset + "'");
    c.flags = *flags;
    if (!doc.contains("name")) c.name = *preset;
  }
  if (auto it = doc.find("flags"); it != doc.end() && !it->is_null()) {
    c.flags.planner_orchestrator = get_or<bool>(*it, "use_planner_orchestrator", c.flags.planner_orchestrator);
    c.flags.client_playbook = get_or<bool>(*it, "include_client_playbook", c.flags.client_playbook);
    c.flags.task_style_playbooks = get_or<bool>(*it, "include_task_style_playbooks", c.flags.task_style_playbooks);
  }
  c.lock_stale_secs = get_or<int>(doc, "lock_stale_secs", 3600);
  return c;
}

EngineConfig load_config(const fs::path& path, std::string_view overrides_json) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("cannot read config: ") + e.what());
  }
  return parse_config(text, fs::absolute(path).parent_path(), overrides_json);
}

std::vector<PlaybookSource> active_playbook_sources(const EngineConfig& config) {
  std::vector<PlaybookSource> out;
  for (const auto& src : config.playbooks) {
    switch (src.kind) {
      case PlaybookKind::General: out.push_back(src); break;
      case PlaybookKind::Style:
      case PlaybookKind::Task:
        if (config.flags.task_style_playbooks) out.push_back(src);
        break;
      case PlaybookKind::Client:
        if (config.flags.client_playbook) out.push_back(src);
        break;
    }
  }
  return out;
}

namespace {

// Owns the backend and appends each exchange to a transcript file.
class FileRecordedProvider : public CompletionProvider {
 public:
  FileRecordedProvider(std::unique_ptr<CompletionProvider> inner, fs::path path)
      : inner_(std::move(inner)), sink_(transcript_file_sink(std::move(path))) {
    set_context_char_budget(inner_->context_char_budget());
  }

 protected:
  CompletionResponse do_complete(const CompletionRequest& request) override {
    auto response = inner_->complete(request);
    std::lock_guard lock(mutex_);
    sink_(request, response);
    return response;
  }

 private:
  std::unique_ptr<CompletionProvider> inner_;
  RecordingProvider::Sink sink_;
  std::mutex mutex_;
};

}  // namespace

std::unique_ptr<CompletionProvider> make_provider(const ProviderConfig& config, const Limits& limits) {
  std::unique_ptr<CompletionProvider> p;
  if (config.kind == ProviderConfig::Kind::Scripted) {
    p = std::make_unique<ScriptedProvider>(load_transcript(config.script_path));
  } else {
    p = std::make_unique<HttpProvider>(config.http);
  }
  p->set_context_char_budget(limits.context_char_budget);
  if (config.record_path) p = std::make_unique<FileRecordedProvider>(std::move(p), *config.record_path);
  return p;
}

}  // namespace migra
