#include "migra/playbook.hpp"

#include "migra/digest.hpp"
#include "migra/error.hpp"
#include "migra/fence.hpp"
#include "migra/fs_util.hpp"
#include "migra/provider.hpp"
#include "migra/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace migra {

std::string_view to_string(PlaybookKind kind) noexcept {
  switch (kind) {
    case PlaybookKind::General: return "general";
    case PlaybookKind::Style: return "style";
    case PlaybookKind::Task: return "task";
    case PlaybookKind::Client: return "client";
  }
  return "general";
}

std::optional<PlaybookKind> parse_playbook_kind(std::string_view name) noexcept {
  if (name == "general") return PlaybookKind::General;
  if (name == "style") return PlaybookKind::Style;
  if (name == "task") return PlaybookKind::Task;
  if (name == "client") return PlaybookKind::Client;
  return std::nullopt;
}

Playbook Playbook::make(PlaybookKind kind, std::string name, std::string body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::EmptyPlaybook, std::string(to_string(kind)) + "/" + name + " has an empty body");
  }
  Playbook p{kind, std::move(name), std::move(body), {}};
  p.version = sha256_hex(p.body);
  return p;
}

std::string to_string(const PlaybookRef& ref) { return std::string(to_string(ref.kind)) + "/" + ref.name; }

std::optional<PlaybookRef> parse_playbook_ref(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos || slash + 1 >= text.size()) return std::nullopt;
  auto kind = parse_playbook_kind(text.substr(0, slash));
  if (!kind) return std::nullopt;
  return PlaybookRef{*kind, std::string(text.substr(slash + 1))};
}

PlaybookSet::PlaybookSet(std::vector<Playbook> playbooks) {
  std::set<PlaybookRef> seen;
  for (const auto& p : playbooks) {
    if (!seen.insert({p.kind, p.name}).second) {
      throw Error(ErrorCode::DuplicateName, "duplicate playbook " + to_string(PlaybookRef{p.kind, p.name}));
    }
  }
  std::stable_sort(playbooks.begin(), playbooks.end(),
                   [](const Playbook& a, const Playbook& b) { return a.kind < b.kind; });
  playbooks_ = std::move(playbooks);
}

const Playbook* PlaybookSet::find(const PlaybookRef& ref) const noexcept {
  for (const auto& p : playbooks_)
    if (p.kind == ref.kind && p.name == ref.name) return &p;
  return nullptr;
}

std::vector<PlaybookRef> PlaybookSet::refs() const {
  std::vector<PlaybookRef> out;
  for (const auto& p : playbooks_) out.push_back({p.kind, p.name});
  return out;
}

std::vector<PlaybookRef> PlaybookSet::refs_of(PlaybookKind kind) const {
  std::vector<PlaybookRef> out;
  for (const auto& p : playbooks_)
    if (p.kind == kind) out.push_back({p.kind, p.name});
  return out;
}

std::string PlaybookSet::digest() const {
  std::string manifest;
  for (const auto& p : playbooks_) {
    manifest += to_string(PlaybookRef{p.kind, p.name});
    manifest += ' ';
    manifest += p.version;
    manifest += '\n';
  }
  return sha256_hex(manifest);
}

PlaybookSet PlaybookSet::only(const std::vector<PlaybookKind>& kinds) const {
  std::vector<Playbook> kept;
  for (const auto& p : playbooks_)
    if (std::find(kinds.begin(), kinds.end(), p.kind) != kinds.end()) kept.push_back(p);
  return PlaybookSet(std::move(kept));
}

PlaybookSet load_set(const std::vector<PlaybookSource>& sources) {
  std::vector<Playbook> loaded;
  for (const auto& src : sources) {
    std::string body = read_text_file(src.path);
    std::string name = src.name.empty() ? src.path.stem().string() : src.name;
    loaded.push_back(Playbook::make(src.kind, std::move(name), std::move(body)));
  }
  return PlaybookSet(std::move(loaded));
}

std::string assemble_system_prompt(const PlaybookSet& set, const std::optional<std::vector<PlaybookRef>>& selection) {
  if (selection) {
    for (const auto& ref : *selection) {
      if (!set.find(ref)) throw Error(ErrorCode::UnknownSelection, "no playbook " + to_string(ref) + " in set");
    }
  }
  std::string out;
  for (const auto& p : set.playbooks()) {
    const PlaybookRef ref{p.kind, p.name};
    if (selection && std::find(selection->begin(), selection->end(), ref) == selection->end()) continue;
    if (!out.empty()) out += '\n';
    out += "## PLAYBOOK: " + to_string(ref) + "\n";
    out += p.body;
    if (out.back() != '\n') out += '\n';
  }
  return out;
}

// --- client playbook generation ---------------------------------------------

namespace {

constexpr const char* kDecomposeSystem =
    "You analyse a completed code migration. The user shows a legacy implementation and the "
    "human-migrated implementation of the same component. Break both into functionally "
    "equivalent semantic units (for example base imports, base methods, loss computation, "
    "metrics output) and pair each legacy unit with its migrated counterpart.";

constexpr const char* kSummarizeSystem =
    "You write migration playbooks. From paired semantic units of completed migrations, "
    "derive general, reusable migration rules for this team. Each rule should state the "
    "convention and include a short code example in the migrated style.";

std::string render_tree(const Workspace& ws, const std::string& root, const std::vector<std::string>& files) {
  std::string out;
  for (const auto& f : files) {
    auto ext = std::filesystem::path(f).extension().string();
    if (!ext.empty()) ext.erase(0, 1);
    out += "### " + f + "\n";
    out += make_fence(ext.empty() ? "text" : ext, ws.read(f));
    out += "\n";
  }
  if (out.empty()) out = "(no files under " + root + ")\n";
  return out;
}

nlohmann::ordered_json parse_units(const std::string& reply, const std::string& label) {
  auto block = first_block(reply, "units");
  if (!block) throw Error(ErrorCode::MalformedUnitsBlock, "pair '" + label + "': reply has no ```units block");
  nlohmann::ordered_json units;
  try {
    units = nlohmann::ordered_json::parse(*block);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedUnitsBlock, "pair '" + label + "': units block is not JSON: " + e.what());
  }
  if (!units.is_array() || units.empty()) {
    throw Error(ErrorCode::MalformedUnitsBlock, "pair '" + label + "': units block must be a non-empty array");
  }
  auto string_array = [](const nlohmann::ordered_json& j) {
    return j.is_array() && std::all_of(j.begin(), j.end(), [](const auto& e) { return e.is_string(); });
  };
  for (const auto& u : units) {
    if (!u.is_object() || !u.contains("unit") || !u["unit"].is_string() || u["unit"].get<std::string>().empty() ||
        !u.contains("source") || !string_array(u["source"]) || !u.contains("target") || !string_array(u["target"])) {
      throw Error(ErrorCode::MalformedUnitsBlock,
                  "pair '" + label + "': each unit needs 'unit' text and 'source'/'target' reference arrays");
    }
  }
  return units;
}

}  // namespace

Playbook generate_client_playbook(const std::vector<GoldenPair>& pairs, CompletionProvider& provider,
                                  const Workspace& workspace, const ClientPlaybookOptions& options) {
  if (pairs.empty()) throw Error(ErrorCode::EmptyGoldenPair, "at least one golden pair is required");
  struct Listed {
    std::vector<std::string> source, target;
  };
  std::vector<Listed> listings;
  for (const auto& pair : pairs) {
    Listed l;
    try {
      l.source = workspace.list_files(pair.source_root);
      l.target = workspace.list_files(pair.target_root);
    } catch (const Error& e) {
      throw Error(ErrorCode::EmptyGoldenPair, "pair '" + pair.label + "': " + e.what());
    }
    if (l.source.empty() || l.target.empty()) {
      throw Error(ErrorCode::EmptyGoldenPair, "pair '" + pair.label + "': both roots must be non-empty directories");
    }
    listings.push_back(std::move(l));
  }

  std::string all_units;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& pair = pairs[i];
    std::string prompt = "# Golden example: " + pair.label + "\n\n";
    prompt += "## Legacy implementation (" + pair.source_root + ")\n\n";
    prompt += render_tree(workspace, pair.source_root, listings[i].source);
    prompt += "## Migrated implementation (" + pair.target_root + ")\n\n";
    prompt += render_tree(workspace, pair.target_root, listings[i].target);
    prompt +=
        "## Response format\n"
        "Answer with one ```units block containing a JSON array. Each element is\n"
        "{\"unit\": <unit name>, \"source\": [<legacy excerpt refs, e.g. \"path:10-24\">],\n"
        " \"target\": [<migrated excerpt refs>]}.\n";
    CompletionRequest req;
    req.messages = {{Role::System, kDecomposeSystem}, {Role::User, std::move(prompt)}};
    req.temperature = options.temperature;
    req.tag = "playbook.decompose." + pair.label;
    const auto reply = provider.complete(req);
    const auto units = parse_units(reply.content, pair.label);
    all_units += "## Units from " + pair.label + "\n\n" + make_fence("json", units.dump(2)) + "\n";
  }

  std::string prompt = "# Semantic units from " + std::to_string(pairs.size()) + " golden migration(s)\n\n";
  prompt += all_units;
  prompt +=
      "## Response format\n"
      "Answer with one ```playbook block holding the markdown playbook: general migration rules "
      "with code examples. Use a longer outer fence (````playbook) if the rules contain code fences.\n";
  CompletionRequest req;
  req.messages = {{Role::System, kSummarizeSystem}, {Role::User, std::move(prompt)}};
  req.temperature = options.temperature;
  req.tag = "playbook.summarize";
  const auto reply = provider.complete(req);
  auto body = first_block(reply.content, "playbook");
  if (!body || body->find_first_not_of(" \t\r\n") == std::string::npos) {
    throw Error(ErrorCode::MalformedPlaybookBlock, "summary reply has no non-empty ```playbook block");
  }
  return Playbook::make(PlaybookKind::Client, options.name, std::move(*body));
}

}  // namespace migra
