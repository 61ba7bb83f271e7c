#include "sigl/sig.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace sigl::graph {

using nlohmann::json;

bool flows_object_to_subject(Relation r) {
    switch (r) {
        case Relation::Read:
        case Relation::Execute:
        case Relation::Receive: return true;
        default: return false;
    }
}

namespace {

struct EntityState {
    int latest_version = 0;
    NodeAttr attr;
    bool has_outgoing_latest = false;
};

std::string basename_of(const std::string& name) {
    auto pos = name.rfind('/');
    return pos == std::string::npos ? name : name.substr(pos + 1);
}

}  // namespace

Sig build_dependency_graph(const std::vector<AuditEvent>& events) {
    Sig sig;
    std::map<std::string, EntityState> entities;

    auto touch = [&](const std::string& id, EntityKind kind, const std::string& name) -> EntityState& {
        auto [it, inserted] = entities.try_emplace(id);
        if (inserted) {
            it->second.attr = NodeAttr{kind, name};
            sig.nodes[NodeRef{id, 0}] = it->second.attr;
        }
        return it->second;
    };

    for (const AuditEvent& ev : events) {
        EntityState& subj = touch(ev.subject_id, EntityKind::Process, ev.subject_name);
        EntityState& obj = touch(ev.object_id, ev.object_kind, ev.object_name);

        bool reversed = flows_object_to_subject(ev.relation);
        EntityState& src_ent = reversed ? obj : subj;
        EntityState& dst_ent = reversed ? subj : obj;
        const std::string& src_id = reversed ? ev.object_id : ev.subject_id;
        const std::string& dst_id = reversed ? ev.subject_id : ev.object_id;

        NodeRef src{src_id, src_ent.latest_version};
        NodeRef dst{dst_id, dst_ent.latest_version};

        // Versioning: a destination that already has outgoing edges (or a
        // self edge) gets a fresh version so the graph stays acyclic.
        if (dst_ent.has_outgoing_latest || src == dst) {
            NodeRef next{dst_id, dst_ent.latest_version + 1};
            sig.nodes[next] = dst_ent.attr;
            sig.edges.push_back(Edge{dst, next, kVersionEdgeType, ev.timestamp});
            dst_ent.latest_version = next.version;
            dst_ent.has_outgoing_latest = false;
            dst = next;
        }
        sig.edges.push_back(Edge{src, dst, static_cast<int>(ev.relation), ev.timestamp});
        // For a self edge src is the pre-bump version, not the latest.
        if (src.version == src_ent.latest_version) src_ent.has_outgoing_latest = true;
    }
    return sig;
}

std::vector<std::string> default_service_names() {
    return {"svchost.exe",  "services.exe", "explorer.exe", "winlogon.exe", "wininit.exe",
            "lsass.exe",    "conhost.exe",  "dllhost.exe",  "csrss.exe",    "smss.exe",
            "taskhostw.exe"};
}

Sig backtrack(const Sig& full, const std::set<std::string>& target_names, const BacktrackOptions& opts) {
    if (target_names.empty()) throw std::invalid_argument("backtrack: no target names");

    std::set<std::string> services(opts.service_names.begin(), opts.service_names.end());
    if (services.empty()) {
        auto defaults = default_service_names();
        services.insert(defaults.begin(), defaults.end());
    }
    auto is_service = [&](const NodeRef& n) {
        const NodeAttr& a = full.attr(n);
        return a.kind == EntityKind::Process && services.count(basename_of(a.name)) > 0;
    };

    std::set<NodeRef> targets;
    for (const std::string& name : target_names) {
        bool found = false;
        for (const auto& [ref, attr] : full.nodes) {
            if (attr.kind == EntityKind::File && attr.name == name) {
                targets.insert(ref);
                found = true;
            }
        }
        if (!found) throw TargetNotFound(name);
    }

    // Incoming edge index.
    std::map<NodeRef, std::vector<std::size_t>> incoming;
    for (std::size_t i = 0; i < full.edges.size(); ++i) incoming[full.edges[i].dst].push_back(i);

    // A node's entry timestamp is the latest included edge leaving it, which
    // only depends on nodes closer to the targets. One reverse-topological
    // pass therefore reaches the unique fixpoint.
    constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
    std::map<NodeRef, std::int64_t> entry;
    for (const NodeRef& t : targets) entry[t] = kInf;

    std::set<std::size_t> included;
    std::vector<NodeRef> order = topological_order(full);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const NodeRef& v = *it;
        auto eit = entry.find(v);
        if (eit == entry.end()) continue;  // not reached
        std::int64_t t = targets.count(v) ? kInf : eit->second;
        bool bounded = is_service(v) && t != kInf;
        auto iit = incoming.find(v);
        if (iit == incoming.end()) continue;
        for (std::size_t ei : iit->second) {
            const Edge& e = full.edges[ei];
            if (bounded && e.timestamp < t - opts.time_bound_us) continue;
            included.insert(ei);
            auto [uit, fresh] = entry.try_emplace(e.src, e.timestamp);
            if (!fresh && e.timestamp > uit->second && !targets.count(e.src))
                uit->second = e.timestamp;
        }
    }

    Sig out;
    out.graph_id = full.graph_id;
    out.targets = targets;
    for (const auto& [ref, t] : entry) out.nodes[ref] = full.attr(ref);
    for (std::size_t i = 0; i < full.edges.size(); ++i)
        if (included.count(i)) out.edges.push_back(full.edges[i]);
    return out;
}

Sig merge_sigs(const std::vector<Sig>& parts) {
    Sig out;
    std::set<Edge> edge_set;
    for (const Sig& p : parts) {
        if (out.graph_id.empty()) out.graph_id = p.graph_id;
        for (const auto& [ref, attr] : p.nodes) {
            auto [it, inserted] = out.nodes.try_emplace(ref, attr);
            if (!inserted && it->second != attr) throw IdentityClash(ref);
        }
        for (const Edge& e : p.edges) edge_set.insert(e);
        out.targets.insert(p.targets.begin(), p.targets.end());
    }
    out.edges.assign(edge_set.begin(), edge_set.end());
    return out;
}

std::vector<NodeRef> topological_order(const Sig& sig) {
    std::map<NodeRef, std::int64_t> earliest;
    for (const auto& [ref, attr] : sig.nodes) earliest[ref] = std::numeric_limits<std::int64_t>::max();
    std::map<NodeRef, int> indegree;
    std::map<NodeRef, std::vector<NodeRef>> succ;
    for (const auto& [ref, attr] : sig.nodes) indegree[ref] = 0;
    for (const Edge& e : sig.edges) {
        earliest[e.src] = std::min(earliest[e.src], e.timestamp);
        earliest[e.dst] = std::min(earliest[e.dst], e.timestamp);
        ++indegree[e.dst];
        succ[e.src].push_back(e.dst);
    }

    using Key = std::pair<std::int64_t, NodeRef>;
    std::set<Key> ready;
    for (const auto& [ref, deg] : indegree)
        if (deg == 0) ready.insert({earliest[ref], ref});

    std::vector<NodeRef> order;
    order.reserve(sig.nodes.size());
    while (!ready.empty()) {
        auto [key, ref] = *ready.begin();
        ready.erase(ready.begin());
        order.push_back(ref);
        for (const NodeRef& s : succ[ref])
            if (--indegree[s] == 0) ready.insert({earliest[s], s});
    }
    if (order.size() != sig.nodes.size()) throw CycleDetected();
    return order;
}

bool is_acyclic(const Sig& sig) {
    try {
        topological_order(sig);
        return true;
    } catch (const CycleDetected&) {
        return false;
    }
}

namespace {

const char* edge_type_name(int t) {
    if (t == kVersionEdgeType) return "version";
    return audit::to_string(static_cast<Relation>(t));
}

int parse_edge_type(const std::string& s) {
    if (s == "version") return kVersionEdgeType;
    auto r = audit::parse_relation(s);
    if (!r) throw std::runtime_error("unknown edge type: " + s);
    return static_cast<int>(*r);
}

}  // namespace

std::string to_json(const Sig& sig) {
    std::vector<NodeRef> order = topological_order(sig);
    std::map<NodeRef, std::size_t> index;
    for (std::size_t i = 0; i < order.size(); ++i) index[order[i]] = i;

    json nodes = json::array();
    for (const NodeRef& ref : order) {
        const NodeAttr& a = sig.attr(ref);
        nodes.push_back({{"id", ref.base_id},
                         {"version", ref.version},
                         {"kind", audit::to_string(a.kind)},
                         {"name", a.name}});
    }
    std::vector<Edge> edges = sig.edges;
    std::sort(edges.begin(), edges.end(), [&](const Edge& a, const Edge& b) {
        auto ka = std::tuple(index.at(a.src), index.at(a.dst), a.edge_type, a.timestamp);
        auto kb = std::tuple(index.at(b.src), index.at(b.dst), b.edge_type, b.timestamp);
        return ka < kb;
    });
    json jedges = json::array();
    for (const Edge& e : edges)
        jedges.push_back({{"src", {e.src.base_id, e.src.version}},
                          {"dst", {e.dst.base_id, e.dst.version}},
                          {"rel", edge_type_name(e.edge_type)},
                          {"ts", e.timestamp}});
    json jtargets = json::array();
    for (const NodeRef& t : sig.targets) jtargets.push_back({t.base_id, t.version});

    json j{{"graph_id", sig.graph_id}, {"nodes", nodes}, {"edges", jedges}, {"targets", jtargets}};
    return j.dump(2);
}

Sig from_json(const std::string& text) {
    json j = json::parse(text);
    Sig sig;
    sig.graph_id = j.value("graph_id", "");
    for (const auto& n : j.at("nodes")) {
        NodeRef ref{n.at("id").get<std::string>(), n.at("version").get<int>()};
        auto kind = audit::parse_entity_kind(n.at("kind").get<std::string>());
        if (!kind) throw std::runtime_error("bad node kind in SIG json");
        sig.nodes[ref] = NodeAttr{*kind, n.at("name").get<std::string>()};
    }
    for (const auto& e : j.at("edges")) {
        Edge edge;
        edge.src = NodeRef{e.at("src")[0].get<std::string>(), e.at("src")[1].get<int>()};
        edge.dst = NodeRef{e.at("dst")[0].get<std::string>(), e.at("dst")[1].get<int>()};
        edge.edge_type = parse_edge_type(e.at("rel").get<std::string>());
        edge.timestamp = e.at("ts").get<std::int64_t>();
        sig.edges.push_back(edge);
    }
    for (const auto& t : j.at("targets"))
        sig.targets.insert(NodeRef{t[0].get<std::string>(), t[1].get<int>()});
    return sig;
}

std::string to_dot(const Sig& sig, const std::set<NodeRef>& highlight) {
    std::ostringstream out;
    out << "digraph sig {\n  rankdir=LR;\n";
    auto node_id = [](const NodeRef& n) { return "\"" + n.base_id + "_v" + std::to_string(n.version) + "\""; };
    for (const auto& [ref, attr] : sig.nodes) {
        const char* shape = attr.kind == EntityKind::Process ? "box"
                            : attr.kind == EntityKind::File  ? "ellipse"
                                                             : "diamond";
        out << "  " << node_id(ref) << " [shape=" << shape << ",label=\"" << attr.name << " v"
            << ref.version << "\"";
        if (highlight.count(ref)) out << ",style=filled,fillcolor=salmon";
        else if (sig.targets.count(ref)) out << ",style=filled,fillcolor=lightblue";
        out << "];\n";
    }
    for (const Edge& e : sig.edges) {
        out << "  " << node_id(e.src) << " -> " << node_id(e.dst) << " [label=\""
            << edge_type_name(e.edge_type) << "\"";
        if (e.is_version()) out << ",style=dashed";
        out << "];\n";
    }
    out << "}\n";
    return out.str();
}

}  // namespace sigl::graph
