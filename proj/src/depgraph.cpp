#include "migra/depgraph.hpp"

#include "migra/error.hpp"
#include "migra/workspace.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <functional>
#include <map>
#include <unordered_set>

namespace migra {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

bool is_dotted_name(std::string_view s) {
  if (s.empty()) return false;
  std::size_t start = 0;
  while (true) {
    const auto dot = s.find('.', start);
    if (!is_identifier(s.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start))) {
      return false;
    }
    if (dot == std::string_view::npos) return true;
    start = dot + 1;
  }
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto p = s.find(sep, start);
    parts.push_back(trim(s.substr(start, p == std::string_view::npos ? std::string_view::npos : p - start)));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return parts;
}

// "a.b as x" -> "a.b"; empty when the clause is not well formed.
std::string_view clause_name(std::string_view clause) {
  const auto sp = clause.find_first_of(" \t");
  std::string_view name = clause.substr(0, sp);
  if (sp != std::string_view::npos) {
    auto rest = trim(clause.substr(sp));
    if (rest.substr(0, 3) != "as " && rest.substr(0, 3) != "as\t") return {};
    if (!is_identifier(trim(rest.substr(3)))) return {};
  }
  return name;
}

std::optional<std::string> resolve_module(std::string_view dotted, const Workspace& ws, const ImportOptions& opt) {
  std::string base(dotted);
  std::replace(base.begin(), base.end(), '.', '/');
  const std::string as_file = base + "." + opt.extension;
  if (ws.is_file(as_file)) return as_file;
  const std::string as_package = base + "/__init__." + opt.extension;
  if (ws.is_file(as_package)) return as_package;
  return std::nullopt;
}

}  // namespace

std::vector<ImportRef> extract_imports(std::string_view file_text, std::string_view /*file_path*/,
                                       const Workspace& workspace, const ImportOptions& options) {
  std::vector<ImportRef> refs;
  std::unordered_set<std::string> seen;
  auto add = [&](std::string raw, std::optional<std::string> resolved) {
    if (seen.insert(raw).second) refs.push_back({std::move(raw), std::move(resolved)});
  };

  std::size_t pos = 0;
  while (pos < file_text.size()) {
    auto nl = file_text.find('\n', pos);
    if (nl == std::string_view::npos) nl = file_text.size();
    std::string_view line = trim(file_text.substr(pos, nl - pos));
    pos = nl + 1;
    if (line.empty() || line.front() == '#') continue;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));

    if (line.substr(0, 7) == "import " || line.substr(0, 7) == "import\t") {
      for (auto clause : split(line.substr(7), ',')) {
        const auto name = clause_name(clause);
        if (!is_dotted_name(name)) continue;
        add(std::string(name), resolve_module(name, workspace, options));
      }
    } else if (line.substr(0, 5) == "from " || line.substr(0, 5) == "from\t") {
      auto rest = trim(line.substr(5));
      const auto sp = rest.find_first_of(" \t");
      if (sp == std::string_view::npos) continue;
      const auto module = rest.substr(0, sp);
      auto tail = trim(rest.substr(sp));
      if (tail.substr(0, 7) != "import " && tail.substr(0, 7) != "import\t") continue;
      if (!is_dotted_name(module)) continue;  // relative imports are not resolved
      auto names = trim(tail.substr(7));
      if (!names.empty() && names.front() == '(') names.remove_prefix(1);
      if (!names.empty() && names.back() == ')') names.remove_suffix(1);
      for (auto clause : split(names, ',')) {
        const auto name = clause_name(clause);
        if (name == "*" || !is_identifier(name)) {
          if (name == "*") add(std::string(module), resolve_module(module, workspace, options));
          continue;
        }
        const std::string sub = std::string(module) + "." + std::string(name);
        if (auto p = resolve_module(sub, workspace, options)) {
          add(sub, std::move(p));
        } else {
          add(std::string(module), resolve_module(module, workspace, options));
        }
      }
    }
  }
  return refs;
}

DependencyGraph build_graph(std::string_view root_file, const Workspace& workspace, const ImportOptions& options) {
  std::string root;
  try {
    root = confine_path(workspace, root_file);
  } catch (const Error& e) {
    throw Error(ErrorCode::RootNotFound, e.what());
  }
  if (!workspace.is_file(root)) throw Error(ErrorCode::RootNotFound, std::string(root_file));

  DependencyGraph g;
  std::deque<std::string> queue{root};
  g.nodes.insert(root);
  while (!queue.empty()) {
    const std::string file = std::move(queue.front());
    queue.pop_front();
    for (auto& ref : extract_imports(workspace.read(file), file, workspace, options)) {
      if (!ref.resolved_path) {
        g.externals.insert(ref.raw_module);
        continue;
      }
      const auto& target = *ref.resolved_path;
      if (target == file) continue;
      g.edges.emplace(file, target);
      if (g.nodes.insert(target).second) queue.push_back(target);
    }
  }
  return g;
}

MigrationOrder leaf_first_order(const DependencyGraph& graph) {
  const std::vector<std::string> names(graph.nodes.begin(), graph.nodes.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = static_cast<int>(i);
  const int n = static_cast<int>(names.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& [from, to] : graph.edges) {
    auto a = index.find(from), b = index.find(to);
    if (a == index.end() || b == index.end() || a->second == b->second) continue;
    adj[a->second].push_back(b->second);
  }

  // Tarjan, iterative.
  std::vector<int> idx(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::vector<int> stack;
  int counter = 0, comps = 0;
  for (int s = 0; s < n; ++s) {
    if (idx[s] != -1) continue;
    std::vector<std::pair<int, std::size_t>> call{{s, 0}};
    idx[s] = low[s] = counter++;
    stack.push_back(s);
    on_stack[s] = true;
    while (!call.empty()) {
      auto& [v, next] = call.back();
      if (next < adj[v].size()) {
        const int w = adj[v][next++];
        if (idx[w] == -1) {
          idx[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], idx[w]);
        }
      } else {
        if (low[v] == idx[v]) {
          while (true) {
            const int w = stack.back();
            stack.pop_back();
            on_stack[w] = false;
            comp[w] = comps;
            if (w == v) break;
          }
          ++comps;
        }
        const int done = v;
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
      }
    }
  }

  std::vector<std::vector<std::string>> members(comps);
  for (int v = 0; v < n; ++v) members[comp[v]].push_back(names[v]);  // names sorted => members sorted
  std::vector<std::set<int>> deps(comps), dependents(comps);
  for (int v = 0; v < n; ++v) {
    for (int w : adj[v]) {
      if (comp[v] != comp[w]) {
        deps[comp[v]].insert(comp[w]);
        dependents[comp[w]].insert(comp[v]);
      }
    }
  }

  std::vector<std::size_t> remaining(comps);
  std::set<std::pair<std::string, int>> ready;
  for (int c = 0; c < comps; ++c) {
    remaining[c] = deps[c].size();
    if (remaining[c] == 0) ready.emplace(members[c].front(), c);
  }
  MigrationOrder order;
  while (!ready.empty()) {
    const int c = ready.begin()->second;
    ready.erase(ready.begin());
    order.clusters.push_back(members[c]);
    for (int d : dependents[c]) {
      if (--remaining[d] == 0) ready.emplace(members[d].front(), d);
    }
  }
  return order;
}

}  // namespace migra
