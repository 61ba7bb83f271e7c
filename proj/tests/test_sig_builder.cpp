#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sigl/rng.hpp"
#include "sigl/sig.hpp"

using namespace sigl;
using namespace sigl::graph;
using audit::AuditEvent;
using audit::EntityKind;
using audit::Relation;

namespace {

AuditEvent ev(std::int64_t ts, std::string sub, std::string sub_name, std::string obj,
              std::string obj_name, EntityKind kind, Relation rel) {
    AuditEvent e;
    e.timestamp = ts;
    e.subject_id = std::move(sub);
    e.subject_name = std::move(sub_name);
    e.object_id = std::move(obj);
    e.object_name = std::move(obj_name);
    e.object_kind = kind;
    e.relation = rel;
    return e;
}

// Random valid event sequence over a small entity pool. Timestamps strictly
// increase; occasionally jumps far to exercise the service time bound.
std::vector<AuditEvent> random_events(Rng& rng, std::size_t count) {
    std::vector<AuditEvent> events;
    std::int64_t ts = 1000;
    int procs = 1, files = 0, socks = 0;
    auto pname = [](int i) {
        if (i % 4 == 0) return std::string("c:/windows/explorer.exe");  // service node
        return "c:/bin/proc" + std::to_string(i) + ".exe";
    };
    for (std::size_t i = 0; i < count; ++i) {
        ts += 1 + static_cast<std::int64_t>(rng.next_below(50));
        if (rng.next_below(20) == 0) ts += 500'000'000;  // beyond the default bound
        int sub = static_cast<int>(rng.next_below(procs));
        Relation rel = static_cast<Relation>(rng.next_below(audit::kRelationCount));
        EntityKind kind = audit::required_object_kind(rel);
        std::string obj_id, obj_name;
        switch (kind) {
            case EntityKind::Process: {
                // starting may mint a process; End targets an existing one
                int o = rel == Relation::Start && (procs < 8 || rng.next_below(2) == 0)
                            ? procs++
                            : static_cast<int>(rng.next_below(procs));
                obj_id = "p" + std::to_string(o);
                obj_name = pname(o);
                break;
            }
            case EntityKind::File: {
                int o = files == 0 || rng.next_below(3) == 0 ? files++ : static_cast<int>(rng.next_below(files));
                obj_id = "f" + std::to_string(o);
                obj_name = "c:/data/file" + std::to_string(o) + ".bin";
                break;
            }
            case EntityKind::Socket: {
                int o = socks == 0 || rng.next_below(3) == 0 ? socks++ : static_cast<int>(rng.next_below(socks));
                obj_id = "s" + std::to_string(o);
                obj_name = "10.0.0." + std::to_string(o + 1) + ":443";
                break;
            }
        }
        events.push_back(ev(ts, "p" + std::to_string(sub), pname(sub), obj_id, obj_name, kind, rel));
    }
    return events;
}

// Independent fixpoint oracle for backtrack: recompute reached/included from
// scratch each round until the entry map stabilizes. On a DAG this converges
// to the unique solution of the recursion.
struct OracleResult {
    std::set<NodeRef> nodes;
    std::set<Edge> edges;
};

OracleResult oracle_backtrack(const Sig& full, const std::set<std::string>& target_names,
                              std::int64_t bound) {
    auto services = default_service_names();
    std::set<std::string> service_set(services.begin(), services.end());
    auto is_service = [&](const NodeRef& n) {
        const NodeAttr& a = full.attr(n);
        auto pos = a.name.rfind('/');
        std::string base = pos == std::string::npos ? a.name : a.name.substr(pos + 1);
        return a.kind == EntityKind::Process && service_set.count(base) > 0;
    };

    std::set<NodeRef> targets;
    for (const auto& [ref, attr] : full.nodes)
        if (attr.kind == EntityKind::File && target_names.count(attr.name)) targets.insert(ref);

    constexpr std::int64_t kInf = std::numeric_limits<std::int64_t>::max();
    std::map<NodeRef, std::int64_t> entry;
    for (const NodeRef& t : targets) entry[t] = kInf;

    for (std::size_t round = 0; round <= full.nodes.size() + 1; ++round) {
        std::set<Edge> included;
        for (const Edge& e : full.edges) {
            auto it = entry.find(e.dst);
            if (it == entry.end()) continue;
            if (is_service(e.dst) && it->second != kInf && e.timestamp < it->second - bound) continue;
            included.insert(e);
        }
        std::map<NodeRef, std::int64_t> next;
        for (const NodeRef& t : targets) next[t] = kInf;
        for (const Edge& e : included) {
            if (targets.count(e.src)) continue;
            auto [it, fresh] = next.try_emplace(e.src, e.timestamp);
            if (!fresh && e.timestamp > it->second) it->second = e.timestamp;
        }
        if (next == entry) {
            OracleResult r;
            for (const auto& [ref, t] : entry) r.nodes.insert(ref);
            r.edges = included;
            return r;
        }
        entry = std::move(next);
    }
    FAIL("oracle did not converge");
    return {};
}

}  // namespace

TEST_CASE("single start event yields two nodes and one edge") {
    auto sig = build_dependency_graph({ev(1, "p1", "a.exe", "p2", "b.exe", EntityKind::Process, Relation::Start)});
    CHECK(sig.nodes.size() == 2);
    REQUIRE(sig.edges.size() == 1);
    CHECK(sig.edges[0].src == NodeRef{"p1", 0});
    CHECK(sig.edges[0].dst == NodeRef{"p2", 0});
    CHECK(sig.edges[0].edge_type == static_cast<int>(Relation::Start));
}

TEST_CASE("empty event list yields an empty graph") {
    auto sig = build_dependency_graph({});
    CHECK(sig.empty());
    CHECK(sig.edges.empty());
}

TEST_CASE("read edges run object to subject") {
    auto sig = build_dependency_graph({ev(1, "p1", "a.exe", "f1", "x.txt", EntityKind::File, Relation::Read)});
    REQUIRE(sig.edges.size() == 1);
    CHECK(sig.edges[0].src == NodeRef{"f1", 0});
    CHECK(sig.edges[0].dst == NodeRef{"p1", 0});
}

TEST_CASE("write after read versions the file") {
    // p1 reads f1 (f1v0 -> p1v0), then p2 writes f1: f1 has an outgoing
    // edge, so a new version appears and the write lands on f1v1.
    auto sig = build_dependency_graph({
        ev(1, "p1", "a.exe", "f1", "x.txt", EntityKind::File, Relation::Read),
        ev(2, "p2", "b.exe", "f1", "x.txt", EntityKind::File, Relation::Write),
    });
    CHECK(sig.nodes.count(NodeRef{"f1", 1}) == 1);
    bool version_edge = false;
    for (const Edge& e : sig.edges)
        if (e.is_version()) {
            version_edge = true;
            CHECK(e.src == NodeRef{"f1", 0});
            CHECK(e.dst == NodeRef{"f1", 1});
        }
    CHECK(version_edge);
    CHECK(is_acyclic(sig));
}

TEST_CASE("version edges always step forward by one") {
    Rng rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        auto sig = build_dependency_graph(random_events(rng, 60));
        for (const Edge& e : sig.edges)
            if (e.is_version()) {
                CHECK(e.src.base_id == e.dst.base_id);
                CHECK(e.dst.version == e.src.version + 1);
            }
    }
}

TEST_CASE("random event sequences always build acyclic graphs") {
    Rng rng(20240812);
    for (int trial = 0; trial < 300; ++trial) {
        auto events = random_events(rng, 10 + rng.next_below(120));
        auto sig = build_dependency_graph(events);
        CHECK(is_acyclic(sig));
    }
}

TEST_CASE("backtrack keeps the whole chain to a target") {
    auto sig = build_dependency_graph({
        ev(1, "p1", "browser.exe", "f1", "c:/dl/installer.exe", EntityKind::File, Relation::Write),
        ev(2, "p2", "c:/dl/installer.exe", "f1", "c:/dl/installer.exe", EntityKind::File, Relation::Execute),
        ev(3, "p2", "c:/dl/installer.exe", "f2", "c:/app/app.exe", EntityKind::File, Relation::Write),
    });
    auto out = backtrack(sig, {"c:/app/app.exe"});
    CHECK(out.nodes.size() == 4);  // p1, f1, p2, f2
    CHECK(out.targets.size() == 1);
    CHECK(is_acyclic(out));
}

TEST_CASE("target with no ancestors is a single node") {
    auto sig = build_dependency_graph({
        ev(1, "p1", "a.exe", "f1", "c:/x/other.txt", EntityKind::File, Relation::Read),
        ev(2, "p1", "a.exe", "f2", "c:/x/app.exe", EntityKind::File, Relation::Read),
    });
    // f2 only has an outgoing (read) edge, so nothing flows into it.
    auto out = backtrack(sig, {"c:/x/app.exe"});
    CHECK(out.nodes.size() == 1);
    CHECK(out.edges.empty());
}

TEST_CASE("missing target raises") {
    auto sig = build_dependency_graph({ev(1, "p1", "a.exe", "f1", "b.txt", EntityKind::File, Relation::Write)});
    CHECK_THROWS_AS((void)backtrack(sig, {"nope.exe"}), TargetNotFound);
}

TEST_CASE("old edges through a service node are cut by the time bound") {
    // explorer.exe received input from p9 ten days before starting the
    // installer; with a one-day bound that history is excluded.
    constexpr std::int64_t day = 86'400'000'000;
    auto sig = build_dependency_graph({
        ev(day, "p9", "old.exe", "f9", "c:/stale/seed.bin", EntityKind::File, Relation::Write),
        ev(day + 1, "svc", "c:/windows/explorer.exe", "f9", "c:/stale/seed.bin", EntityKind::File, Relation::Read),
        ev(11 * day, "svc", "c:/windows/explorer.exe", "p2", "inst.exe", EntityKind::Process, Relation::Start),
        ev(11 * day + 2, "p2", "inst.exe", "f2", "c:/app/app.exe", EntityKind::File, Relation::Write),
    });
    BacktrackOptions opts;
    opts.time_bound_us = day;
    auto out = backtrack(sig, {"c:/app/app.exe"}, opts);
    CHECK(out.nodes.count(NodeRef{"svc", 0}) == 1);
    CHECK(out.nodes.count(NodeRef{"f9", 0}) == 0);
    CHECK(out.nodes.count(NodeRef{"p9", 0}) == 0);

    opts.time_bound_us = 20 * day;  // generous bound keeps everything
    auto wide = backtrack(sig, {"c:/app/app.exe"}, opts);
    CHECK(wide.nodes.count(NodeRef{"f9", 0}) == 1);
    CHECK(wide.nodes.count(NodeRef{"p9", 0}) == 1);
}

TEST_CASE("backtrack equals the brute-force oracle on random graphs") {
    Rng rng(555);
    int nonempty = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto events = random_events(rng, 20 + rng.next_below(100));
        auto sig = build_dependency_graph(events);
        // pick an actual file name from the graph as target
        std::vector<std::string> file_names;
        for (const auto& [ref, attr] : sig.nodes)
            if (attr.kind == EntityKind::File) file_names.push_back(attr.name);
        if (file_names.empty()) continue;
        std::sort(file_names.begin(), file_names.end());
        file_names.erase(std::unique(file_names.begin(), file_names.end()), file_names.end());
        std::set<std::string> targets{file_names[rng.next_below(file_names.size())]};

        BacktrackOptions opts;
        opts.time_bound_us = 100'000'000;
        auto got = backtrack(sig, targets, opts);
        auto want = oracle_backtrack(sig, targets, opts.time_bound_us);

        std::set<NodeRef> got_nodes;
        for (const auto& [ref, attr] : got.nodes) got_nodes.insert(ref);
        std::set<Edge> got_edges(got.edges.begin(), got.edges.end());
        CHECK(got_nodes == want.nodes);
        CHECK(got_edges == want.edges);
        if (got.edges.size() > 2) ++nonempty;
    }
    CHECK(nonempty > 50);  // the cases must actually exercise traversal
}

TEST_CASE("merge unions nodes and edges and rejects clashing attributes") {
    Sig a;
    a.nodes[{"x", 0}] = {EntityKind::Process, "x.exe"};
    a.nodes[{"y", 0}] = {EntityKind::File, "y.txt"};
    a.edges.push_back({{"x", 0}, {"y", 0}, static_cast<int>(Relation::Write), 1});
    Sig b;
    b.nodes[{"x", 0}] = {EntityKind::Process, "x.exe"};
    b.nodes[{"z", 0}] = {EntityKind::File, "z.txt"};
    b.edges.push_back({{"x", 0}, {"z", 0}, static_cast<int>(Relation::Write), 2});
    b.edges.push_back({{"x", 0}, {"y", 0}, static_cast<int>(Relation::Write), 1});  // duplicate
    b.nodes[{"y", 0}] = {EntityKind::File, "y.txt"};

    auto merged = merge_sigs({a, b});
    CHECK(merged.nodes.size() == 3);
    CHECK(merged.edges.size() == 2);

    Sig clash;
    clash.nodes[{"x", 0}] = {EntityKind::Process, "different.exe"};
    CHECK_THROWS_AS((void)merge_sigs({a, clash}), IdentityClash);
}

TEST_CASE("serialization round trips and is deterministic") {
    Rng rng(31337);
    auto events = random_events(rng, 80);
    auto sig = build_dependency_graph(events);
    sig.graph_id = "trial";
    std::string j1 = to_json(sig);
    std::string j2 = to_json(build_dependency_graph(events));
    // graph_id differs, rest identical
    auto sig2 = from_json(j1);
    CHECK(sig2.nodes == sig.nodes);
    CHECK(std::set<Edge>(sig2.edges.begin(), sig2.edges.end()) ==
          std::set<Edge>(sig.edges.begin(), sig.edges.end()));
    auto again = build_dependency_graph(events);
    again.graph_id = "trial";
    CHECK(to_json(again) == j1);
}

TEST_CASE("dot export mentions every node") {
    auto sig = build_dependency_graph({ev(1, "p1", "a.exe", "f1", "b.txt", EntityKind::File, Relation::Write)});
    auto dot = to_dot(sig);
    CHECK(dot.find("a.exe") != std::string::npos);
    CHECK(dot.find("b.txt") != std::string::npos);
    CHECK(dot.find("write") != std::string::npos);
}
