#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigl/audit.hpp"

namespace sigl::graph {

using audit::AuditEvent;
using audit::EntityKind;
using audit::Relation;

struct NodeRef {
    std::string base_id;
    int version = 0;

    auto operator<=>(const NodeRef&) const = default;
};

struct NodeAttr {
    EntityKind kind = EntityKind::File;
    std::string name;

    bool operator==(const NodeAttr&) const = default;
};

// Edge type ids: the nine relations (by enum value) plus the synthetic
// Version edge linking consecutive versions of an entity.
constexpr int kVersionEdgeType = 9;
constexpr int kEdgeTypeCount = 10;

struct Edge {
    NodeRef src;
    NodeRef dst;
    int edge_type = 0;  // 0..8 = Relation, 9 = Version
    std::int64_t timestamp = 0;

    bool is_version() const { return edge_type == kVersionEdgeType; }
    auto operator<=>(const Edge&) const = default;
};

struct Sig {
    std::map<NodeRef, NodeAttr> nodes;
    std::vector<Edge> edges;
    std::set<NodeRef> targets;
    std::string graph_id;

    bool empty() const { return nodes.empty(); }
    const NodeAttr& attr(const NodeRef& n) const { return nodes.at(n); }
};

struct CycleDetected : std::runtime_error {
    CycleDetected() : std::runtime_error("cycle detected in SIG (builder bug)") {}
};
struct TargetNotFound : std::runtime_error {
    explicit TargetNotFound(const std::string& name)
        : std::runtime_error("target not found: " + name) {}
};
struct IdentityClash : std::runtime_error {
    explicit IdentityClash(const NodeRef& n)
        : std::runtime_error("identity clash on " + n.base_id + " v" + std::to_string(n.version)) {}
};

// Edge direction follows information flow: Read/Execute/Receive flow
// object -> subject, everything else subject -> object. The relation label
// is preserved as the edge type either way.
bool flows_object_to_subject(Relation r);

// Full (pre-backtrack) dependency graph with constructive versioning.
Sig build_dependency_graph(const std::vector<AuditEvent>& events);

struct BacktrackOptions {
    std::int64_t time_bound_us = 300'000'000;  // 300 s
    std::vector<std::string> service_names;    // basenames of generic system services
};

std::vector<std::string> default_service_names();

// Reverse reachability from every file node whose name matches one of
// target_names. Edges into a service node older than (entry time - bound)
// are not traversed.
Sig backtrack(const Sig& full, const std::set<std::string>& target_names,
              const BacktrackOptions& opts = {});

Sig merge_sigs(const std::vector<Sig>& parts);

// Deterministic topological order; ties broken by (earliest incident edge
// timestamp, base_id, version).
std::vector<NodeRef> topological_order(const Sig& sig);

bool is_acyclic(const Sig& sig);

std::string to_json(const Sig& sig);
Sig from_json(const std::string& text);
std::string to_dot(const Sig& sig, const std::set<NodeRef>& highlight = {});

}  // namespace sigl::graph
