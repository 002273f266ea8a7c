#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace migra {

class Workspace;

struct ImportRef {
  std::string raw_module;                    // dotted path, never empty
  std::optional<std::string> resolved_path;  // none = external / unresolved

  friend bool operator==(const ImportRef&, const ImportRef&) = default;
};

struct ImportOptions {
  std::string extension = "py";
};

// Recognizes line-anchored `import a.b[ as x][, c]` and
// `from a.b import c[ as x][, d]` statements; comment lines and anything
// unparseable are skipped. For the `from` form each imported name is first
// tried as a submodule (a.b.c) and falls back to the package itself (a.b).
// A dotted path a.b.c resolves to a/b/c.<ext>, then a/b/c/__init__.<ext>.
// Result is deduplicated by raw_module, first occurrence wins.
std::vector<ImportRef> extract_imports(std::string_view file_text, std::string_view file_path,
                                       const Workspace& workspace, const ImportOptions& options = {});

struct DependencyGraph {
  std::set<std::string> nodes;
  std::set<std::pair<std::string, std::string>> edges;  // (importer, imported)
  std::set<std::string> externals;

  friend bool operator==(const DependencyGraph&, const DependencyGraph&) = default;
};

// Breadth-first import closure from `root_file`. Throws Error{RootNotFound}.
DependencyGraph build_graph(std::string_view root_file, const Workspace& workspace,
                            const ImportOptions& options = {});

// Dependencies-first clusters: each cluster is one strongly connected
// component (members sorted); a cluster is emitted only after every cluster it
// imports. Among ready clusters the one with the smallest member path goes
// first.
struct MigrationOrder {
  std::vector<std::vector<std::string>> clusters;

  friend bool operator==(const MigrationOrder&, const MigrationOrder&) = default;
};

MigrationOrder leaf_first_order(const DependencyGraph& graph);

}  // namespace migra
