#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include "sigl/audit.hpp"
#include "sigl/sig.hpp"
#include "sigl/synth.hpp"

using namespace sigl;
using namespace sigl::synth;

namespace {

void check_valid_trace(const TraceBundle& bundle) {
    REQUIRE(!bundle.events.empty());
    std::int64_t prev = -1;
    for (const auto& ev : bundle.events) {
        auto problem = audit::validate_event(ev);
        if (problem) FAIL("invalid event: ", *problem);
        CHECK(ev.timestamp >= prev);
        prev = ev.timestamp;
    }
}

std::set<std::string> entity_ids(const TraceBundle& bundle) {
    std::set<std::string> ids;
    for (const auto& ev : bundle.events) {
        ids.insert(ev.subject_id);
        ids.insert(ev.object_id);
    }
    return ids;
}

bool event_present(const std::vector<audit::AuditEvent>& haystack, const audit::AuditEvent& needle) {
    return std::find(haystack.begin(), haystack.end(), needle) != haystack.end();
}

}  // namespace

TEST_CASE("five templates ship, smallest to largest") {
    const auto& all = templates();
    REQUIRE(all.size() == 5);
    std::set<std::string> names;
    for (const auto& t : all) {
        names.insert(t.name);
        CHECK(!t.stages.empty());
        CHECK(!t.target_files.empty());
        for (const auto& target : t.target_files)
            CHECK(target.rfind(t.app_dir + "/", 0) == 0);  // targets live in the app dir
    }
    CHECK(names.size() == 5);
    CHECK_THROWS_AS((void)template_by_name("nope"), std::invalid_argument);
}

TEST_CASE("benign traces are valid, deterministic, and build installable SIGs") {
    for (const auto& tmpl : templates()) {
        auto bundle = gen_benign_trace(tmpl, 7);
        check_valid_trace(bundle);
        CHECK(bundle.malicious_ids.empty());
        CHECK(bundle.targets == std::set<std::string>(tmpl.target_files.begin(), tmpl.target_files.end()));

        auto sig = graph::build_dependency_graph(bundle.events);
        CHECK(graph::is_acyclic(sig));
        auto back = graph::backtrack(sig, bundle.targets);
        CHECK(back.targets.size() >= bundle.targets.size());
        CHECK(back.nodes.size() > 3);

        auto again = gen_benign_trace(tmpl, 7);
        CHECK(again.events == bundle.events);
        auto other = gen_benign_trace(tmpl, 8);
        CHECK(other.events != bundle.events);
    }
}

TEST_CASE("all malware profiles resolve and validate") {
    for (const auto& name : MalwareProfile::names()) {
        auto p = MalwareProfile::by_name(name);
        CHECK(p.name == name);
    }
    CHECK_THROWS_AS((void)MalwareProfile::by_name("gremlin"), std::invalid_argument);
    MalwareProfile empty;
    empty.name = "empty";
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("bundle injection keeps the benign events verbatim and labels the additions") {
    auto benign = gen_benign_trace(template_by_name("notepadder"), 11);
    auto profile = MalwareProfile::by_name("trojan");
    auto mal = inject_bundle(benign, profile, 99);

    check_valid_trace(mal);
    CHECK(mal.mode == "bundle");
    CHECK(mal.profile == "trojan");
    CHECK(mal.events.size() > benign.events.size());
    for (const auto& ev : benign.events) CHECK(event_present(mal.events, ev));

    REQUIRE(!mal.malicious_ids.empty());
    auto benign_set = entity_ids(benign);
    for (const auto& id : mal.malicious_ids) CHECK(benign_set.count(id) == 0);

    // payload-drop adds an installed executable target
    CHECK(mal.targets.size() == benign.targets.size() + 1);

    // the malware lineage is an ancestor of the targets
    auto sig = graph::build_dependency_graph(mal.events);
    CHECK(graph::is_acyclic(sig));
    auto back = graph::backtrack(sig, mal.targets);
    std::set<std::string> mal_set(mal.malicious_ids.begin(), mal.malicious_ids.end());
    bool reached = false;
    for (const auto& [ref, attr] : back.nodes)
        if (mal_set.count(ref.base_id) && attr.kind == audit::EntityKind::Process) reached = true;
    CHECK(reached);
}

TEST_CASE("embed injection spawns from installer lineage") {
    auto benign = gen_benign_trace(template_by_name("mediaplay"), 13);
    auto mal = inject_embed(benign, MalwareProfile::by_name("backdoor"), 5);

    check_valid_trace(mal);
    CHECK(mal.mode == "embed");
    for (const auto& ev : benign.events) CHECK(event_present(mal.events, ev));
    REQUIRE(!mal.malicious_ids.empty());

    // the spawner is a benign entity: find the Start of a malicious process
    std::set<std::string> mal_set(mal.malicious_ids.begin(), mal.malicious_ids.end());
    auto benign_set = entity_ids(benign);
    bool spawned_from_benign = false;
    for (const auto& ev : mal.events)
        if (ev.relation == audit::Relation::Start && mal_set.count(ev.object_id) &&
            benign_set.count(ev.subject_id))
            spawned_from_benign = true;
    CHECK(spawned_from_benign);

    auto sig = graph::build_dependency_graph(mal.events);
    auto back = graph::backtrack(sig, mal.targets);
    bool reached = false;
    for (const auto& [ref, attr] : back.nodes)
        if (mal_set.count(ref.base_id)) reached = true;
    CHECK(reached);
}

TEST_CASE("beacon profile emits sockets without dropping a payload") {
    auto benign = gen_benign_trace(template_by_name("tinytool"), 3);
    auto mal = inject_embed(benign, MalwareProfile::by_name("beacon"), 4);
    CHECK(mal.targets == benign.targets);  // no dropped executable
    bool socket_seen = false;
    std::set<std::string> mal_set(mal.malicious_ids.begin(), mal.malicious_ids.end());
    for (const auto& ev : mal.events)
        if (ev.object_kind == audit::EntityKind::Socket && mal_set.count(ev.subject_id))
            socket_seen = true;
    CHECK(socket_seen);
}

TEST_CASE("injection is deterministic in the seed") {
    auto benign = gen_benign_trace(template_by_name("tinytool"), 17);
    auto a = inject_bundle(benign, MalwareProfile::by_name("dropper"), 1);
    auto b = inject_bundle(benign, MalwareProfile::by_name("dropper"), 1);
    CHECK(a.events == b.events);
    CHECK(a.malicious_ids == b.malicious_ids);
    auto c = inject_bundle(benign, MalwareProfile::by_name("dropper"), 2);
    CHECK(a.events != c.events);
}

TEST_CASE("trace and sidecar round trip through the filesystem") {
    auto benign = gen_benign_trace(template_by_name("tinytool"), 23);
    auto mal = inject_bundle(benign, MalwareProfile::by_name("ransomware"), 8);

    std::string trace_path = "synth_roundtrip.jsonl";
    std::string sidecar_path = "synth_roundtrip.labels.json";
    write_trace(mal, trace_path, sidecar_path);

    auto parsed = audit::parse_events_file(trace_path);
    CHECK(parsed.events == mal.events);

    auto side = read_sidecar(sidecar_path);
    CHECK(side.graph_id == mal.graph_id);
    CHECK(side.template_name == "tinytool");
    CHECK(side.label == "malicious");
    CHECK(side.mode == "bundle");
    CHECK(side.profile == "ransomware");
    CHECK(side.targets == mal.targets);
    CHECK(side.malicious_ids == mal.malicious_ids);

    write_trace(benign, trace_path, sidecar_path);
    CHECK(read_sidecar(sidecar_path).label == "benign");

    std::remove(trace_path.c_str());
    std::remove(sidecar_path.c_str());
}
