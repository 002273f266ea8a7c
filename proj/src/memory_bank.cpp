#include "migra/memory_bank.hpp"

#include "migra/error.hpp"
#include "migra/fs_util.hpp"
#include "migra/playbook.hpp"

#include <json.hpp>

#include <fcntl.h>
#include <signal.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <set>

namespace migra {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(StepStatus s) noexcept {
  switch (s) {
    case StepStatus::Pending: return "pending";
    case StepStatus::InProgress: return "in_progress";
    case StepStatus::Done: return "done";
    case StepStatus::Skipped: return "skipped";
    case StepStatus::Failed: return "failed";
  }
  return "pending";
}

std::optional<StepStatus> parse_step_status(std::string_view s) noexcept {
  if (s == "pending") return StepStatus::Pending;
  if (s == "in_progress") return StepStatus::InProgress;
  if (s == "done") return StepStatus::Done;
  if (s == "skipped") return StepStatus::Skipped;
  if (s == "failed") return StepStatus::Failed;
  return std::nullopt;
}

bool RunState::finished() const noexcept {
  for (const auto& [id, s] : status)
    if (!is_terminal(s)) return false;
  return true;
}

RunState initial_state(const MigrationPlan& plan, std::string strategy, std::vector<std::vector<StepId>> chunks) {
  RunState st;
  st.plan_hash = plan.plan_hash();
  st.strategy = std::move(strategy);
  st.chunks = std::move(chunks);
  for (const auto& step : plan.steps()) {
    st.status[step.step_id] = StepStatus::Pending;
    st.attempts[step.step_id] = 0;
  }
  return st;
}

std::string serialize_state(const RunState& state) {
  json j;
  j["plan_hash"] = state.plan_hash;
  j["strategy"] = state.strategy;
  j["chunks"] = state.chunks;
  j["next_chunk"] = state.next_chunk;
  json steps = json::array();
  for (const auto& [id, s] : state.status) {
    auto att = state.attempts.find(id);
    steps.push_back({{"step_id", id}, {"status", to_string(s)}, {"attempts", att == state.attempts.end() ? 0 : att->second}});
  }
  j["steps"] = std::move(steps);
  return j.dump(2) + "\n";
}

RunState parse_state(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::StateCorrupt, std::string("state is not JSON: ") + e.what());
  }
  RunState st;
  try {
    st.plan_hash = j.at("plan_hash").get<std::string>();
    st.strategy = j.at("strategy").get<std::string>();
    st.chunks = j.at("chunks").get<std::vector<std::vector<StepId>>>();
    const auto next = j.at("next_chunk").get<std::int64_t>();
    if (next < 0) throw Error(ErrorCode::StateCorrupt, "next_chunk is negative");
    st.next_chunk = static_cast<std::size_t>(next);
    for (const auto& s : j.at("steps")) {
      const auto id = s.at("step_id").get<StepId>();
      const auto token = s.at("status").get<std::string>();
      const auto status = parse_step_status(token);
      if (!status) throw Error(ErrorCode::StateCorrupt, "unknown status '" + token + "'");
      const auto attempts = s.at("attempts").get<int>();
      if (attempts < 0) throw Error(ErrorCode::StateCorrupt, "negative attempts for step " + std::to_string(id));
      if (!st.status.emplace(id, *status).second) {
        throw Error(ErrorCode::StateCorrupt, "step " + std::to_string(id) + " listed twice");
      }
      st.attempts[id] = attempts;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::StateCorrupt, std::string("state has wrong shape: ") + e.what());
  }
  if (st.next_chunk > st.chunks.size()) throw Error(ErrorCode::StateCorrupt, "next_chunk beyond chunk count");
  return st;
}

// --- bank ------------------------------------------------------------------

namespace {

const std::set<std::string> kFiles = {"plan.json", "plan.dot", "state.json", "bank.lock"};
const std::set<std::string> kDirs = {"playbooks", "summaries", "transcripts"};

bool is_temp_leftover(const std::string& name) { return name.size() > 1 && name[0] == '.' && name.find(".tmp.") != std::string::npos; }

std::string summary_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.md", index);
  return buf;
}

std::string sanitize_tag(std::string_view tag) {
  std::string out;
  for (char c : tag) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-';
    out += keep ? c : '_';
  }
  if (out.empty() || out[0] == '.') out.insert(out.begin(), '_');
  return out;
}

}  // namespace

MemoryBank MemoryBank::init(const fs::path& dir) {
  std::error_code ec;
  if (fs::exists(dir, ec)) {
    if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::NonEmptyForeignDir, dir.string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
      const auto name = entry.path().filename().string();
      const bool known = (kFiles.count(name) && entry.is_regular_file()) || (kDirs.count(name) && entry.is_directory()) ||
                         is_temp_leftover(name);
      if (!known) throw Error(ErrorCode::NonEmptyForeignDir, dir.string() + " contains unrecognized entry '" + name + "'");
    }
    if (ec) throw Error(ErrorCode::IoFailure, "cannot list " + dir.string() + ": " + ec.message());
  }
  for (const auto& sub : kDirs) {
    fs::create_directories(dir / sub, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  return MemoryBank(fs::absolute(dir).lexically_normal());
}

bool MemoryBank::has_plan() const { return fs::is_regular_file(root_ / "plan.json"); }

void MemoryBank::save_plan(const MigrationPlan& plan) const {
  atomic_write_file(root_ / "plan.json", serialize_plan(plan));
  atomic_write_file(root_ / "plan.dot", render_plan_dot(plan));
}

MigrationPlan MemoryBank::load_plan() const {
  if (!has_plan()) throw Error(ErrorCode::PlanMissing, "plan missing: no plan.json in " + root_.string());
  return parse_plan(read_text_file(root_ / "plan.json"));
}

bool MemoryBank::has_state() const { return fs::is_regular_file(root_ / "state.json"); }

void MemoryBank::save_state(const RunState& state) const {
  const auto plan = load_plan();
  if (state.plan_hash != plan.plan_hash()) {
    throw Error(ErrorCode::HashMismatch, "state belongs to plan " + state.plan_hash + ", bank holds " + plan.plan_hash());
  }
  atomic_write_file(root_ / "state.json", serialize_state(state));
}

RunState MemoryBank::load_state() const {
  if (!has_state()) throw Error(ErrorCode::StateMissing, "no state.json in " + root_.string());
  auto st = parse_state(read_text_file(root_ / "state.json"));
  const auto plan = load_plan();
  if (st.plan_hash != plan.plan_hash()) {
    throw Error(ErrorCode::HashMismatch, "state belongs to plan " + st.plan_hash + ", bank holds " + plan.plan_hash());
  }
  std::set<StepId> plan_ids, state_ids;
  for (const auto& s : plan.steps()) plan_ids.insert(s.step_id);
  for (const auto& [id, s] : st.status) state_ids.insert(id);
  if (plan_ids != state_ids) throw Error(ErrorCode::StateCorrupt, "state does not cover exactly the plan's steps");
  std::set<StepId> chunked;
  for (const auto& c : st.chunks) {
    if (c.empty()) throw Error(ErrorCode::StateCorrupt, "empty chunk in state");
    for (auto id : c)
      if (!chunked.insert(id).second) throw Error(ErrorCode::StateCorrupt, "step in two chunks");
  }
  if (chunked != plan_ids) throw Error(ErrorCode::StateCorrupt, "recorded chunks do not partition the plan");
  return st;
}

std::size_t MemoryBank::summary_count() const {
  std::size_t n = 0;
  while (fs::exists(root_ / "summaries" / summary_name(n))) ++n;
  return n;
}

void MemoryBank::append_summary(std::size_t index, const StoredSummary& summary) const {
  const auto count = summary_count();
  if (index != count) {
    throw Error(ErrorCode::IndexGap, "summary index " + std::to_string(index) + " but bank holds " +
                                         std::to_string(count));
  }
  std::string header = "<!-- chunk " + std::to_string(summary.chunk_index) + " steps ";
  for (std::size_t i = 0; i < summary.step_ids.size(); ++i) {
    if (i) header += ',';
    header += std::to_string(summary.step_ids[i]);
  }
  header += " -->\n";
  atomic_write_file(root_ / "summaries" / summary_name(index), header + summary.body);
}

std::vector<StoredSummary> MemoryBank::load_summaries() const {
  std::vector<StoredSummary> out;
  const auto n = summary_count();
  for (std::size_t i = 0; i < n; ++i) {
    const auto path = root_ / "summaries" / summary_name(i);
    const auto text = read_text_file(path);
    const auto eol = text.find('\n');
    const std::string header = text.substr(0, eol);
    StoredSummary s;
    unsigned long chunk = 0;
    char steps[512] = {0};
    if (eol == std::string::npos || std::sscanf(header.c_str(), "<!-- chunk %lu steps %511[0-9,] -->", &chunk, steps) != 2) {
      throw Error(ErrorCode::StateCorrupt, "summary header malformed in " + path.string());
    }
    s.chunk_index = chunk;
    for (const char* p = steps; *p;) {
      char* end = nullptr;
      s.step_ids.push_back(std::strtoll(p, &end, 10));
      p = *end == ',' ? end + 1 : end;
    }
    s.body = text.substr(eol + 1);
    out.push_back(std::move(s));
  }
  return out;
}

void MemoryBank::truncate_summaries(std::size_t keep) const {
  for (auto n = summary_count(); n > keep; --n) {
    std::error_code ec;
    fs::remove(root_ / "summaries" / summary_name(n - 1), ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot remove summary " + std::to_string(n - 1) + ": " + ec.message());
  }
}

std::vector<std::string> MemoryBank::snapshot_playbooks(const PlaybookSet& set) const {
  std::vector<std::string> names;
  for (const auto& p : set.playbooks()) {
    const auto name = std::string(to_string(p.kind)) + "." + sanitize_tag(p.name) + "." + p.version + ".md";
    const auto path = root_ / "playbooks" / name;
    if (!fs::exists(path)) atomic_write_file(path, p.body);
    names.push_back(name);
  }
  return names;
}

fs::path MemoryBank::transcript_path(std::string_view tag) const {
  return root_ / "transcripts" / (sanitize_tag(tag) + ".json");
}

RecordingProvider::Sink MemoryBank::transcript_sink() const {
  return [bank = *this](const CompletionRequest& req, const CompletionResponse& resp) {
    record_transcript(bank.transcript_path(req.tag), req, resp);
  };
}

void MemoryBank::clear_run() const {
  std::error_code ec;
  fs::remove(root_ / "state.json", ec);
  fs::remove_all(root_ / "summaries", ec);
  fs::create_directories(root_ / "summaries", ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot reset summaries: " + ec.message());
  remove_transcripts("coder.");
}

void MemoryBank::remove_transcripts(std::string_view prefix) const {
  std::error_code ec;
  std::vector<fs::path> doomed;
  for (const auto& entry : fs::directory_iterator(root_ / "transcripts", ec)) {
    if (entry.path().filename().string().rfind(prefix, 0) == 0) doomed.push_back(entry.path());
  }
  for (const auto& p : doomed) fs::remove(p, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot remove transcripts: " + ec.message());
}

// --- lock ------------------------------------------------------------------

namespace {

bool try_create_lock(const fs::path& path) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (fd < 0) {
    if (errno == EEXIST) return false;
    throw Error(ErrorCode::IoFailure, "cannot create lock " + path.string() + ": " + std::strerror(errno));
  }
  const auto pid = std::to_string(::getpid()) + "\n";
  const bool ok = ::write(fd, pid.data(), pid.size()) == static_cast<ssize_t>(pid.size());
  ::close(fd);
  if (!ok) throw Error(ErrorCode::IoFailure, "cannot write lock " + path.string());
  return true;
}

}  // namespace

BankLock::BankLock(const MemoryBank& bank, int stale_secs, bool force_clear) : path_(bank.root() / "bank.lock") {
  for (int tries = 0; tries < 2; ++tries) {
    if (try_create_lock(path_)) return;
    long owner = 0;
    try {
      owner = std::strtol(read_text_file(path_).c_str(), nullptr, 10);
    } catch (const Error&) {
      continue;  // vanished between open and read
    }
    const bool alive = owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM);
    bool clear = !alive;
    if (alive && force_clear) {
      struct stat st {};
      if (::stat(path_.c_str(), &st) == 0) {
        const auto age = std::chrono::system_clock::now().time_since_epoch() - std::chrono::seconds(st.st_mtime);
        clear = age >= std::chrono::seconds(stale_secs);
      }
    }
    if (!clear) {
      throw Error(ErrorCode::BankLocked, "bank " + bank.root().string() + " is locked by pid " + std::to_string(owner));
    }
    std::error_code ec;
    fs::remove(path_, ec);
  }
  throw Error(ErrorCode::BankLocked, "could not acquire " + path_.string());
}

BankLock::~BankLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace migra
