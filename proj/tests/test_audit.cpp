#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "sigl/audit.hpp"

using namespace sigl::audit;

namespace {

std::string line(std::int64_t ts, const std::string& sub, const std::string& sub_name,
                 const std::string& obj, const std::string& obj_name, const std::string& kind,
                 const std::string& rel) {
    std::ostringstream out;
    out << R"({"ts":)" << ts << R"(,"sub":")" << sub << R"(","sub_name":")" << sub_name
        << R"(","obj":")" << obj << R"(","obj_name":")" << obj_name << R"(","kind":")" << kind
        << R"(","rel":")" << rel << R"("})";
    return out.str();
}

}  // namespace

TEST_CASE("name normalization lowercases and flips backslashes") {
    CHECK(normalize_name("C:\\Windows\\Explorer.EXE") == "c:/windows/explorer.exe");
    CHECK(normalize_name("already/lower.txt") == "already/lower.txt");
}

TEST_CASE("well-formed lines parse with normalized names") {
    // JSON-escaped backslashes in the raw line
    std::istringstream in(line(10, "p1", "C:\\\\A\\\\run.EXE", "f1", "C:\\\\B\\\\out.TXT", "file", "write"));
    auto result = parse_events(in);
    REQUIRE(result.events.size() == 1);
    const auto& ev = result.events[0];
    CHECK(ev.timestamp == 10);
    CHECK(ev.subject_name == "c:/a/run.exe");
    CHECK(ev.object_name == "c:/b/out.txt");
    CHECK(ev.object_kind == EntityKind::File);
    CHECK(ev.relation == Relation::Write);
    CHECK(result.warnings.empty());
}

TEST_CASE("round trip through serialize_event") {
    AuditEvent ev;
    ev.timestamp = 42;
    ev.subject_id = "p9";
    ev.subject_name = "c:/x/a.exe";
    ev.object_id = "s1";
    ev.object_name = "10.0.0.1:443";
    ev.object_kind = EntityKind::Socket;
    ev.relation = Relation::Send;
    std::istringstream in(serialize_event(ev));
    auto result = parse_events(in);
    REQUIRE(result.events.size() == 1);
    CHECK(result.events[0] == ev);
}

TEST_CASE("kind/relation mismatch is rejected") {
    // Start requires a process object.
    std::istringstream in(line(1, "p1", "a.exe", "f1", "b.txt", "file", "start"));
    CHECK_THROWS_AS((void)parse_events(in), KindRelationMismatch);
}

TEST_CASE("validate_event flags each invariant") {
    AuditEvent ev;
    ev.timestamp = 1;
    ev.subject_id = "p1";
    ev.subject_name = "a.exe";
    ev.object_id = "f1";
    ev.object_name = "b.txt";
    ev.object_kind = EntityKind::File;
    ev.relation = Relation::Read;
    CHECK(!validate_event(ev).has_value());

    auto bad = ev;
    bad.timestamp = -1;
    CHECK(validate_event(bad).has_value());
    bad = ev;
    bad.subject_id.clear();
    CHECK(validate_event(bad).has_value());
    bad = ev;
    bad.relation = Relation::Send;  // send requires socket object
    CHECK(validate_event(bad).has_value());
}

TEST_CASE("strict mode rejects malformed JSON and unknown keys") {
    {
        std::istringstream in("{not json");
        CHECK_THROWS_AS((void)parse_events(in), MalformedRecord);
    }
    {
        std::istringstream in(
            R"({"ts":1,"sub":"p1","sub_name":"a","obj":"f1","obj_name":"b","kind":"file","rel":"read","extra":1})");
        CHECK_THROWS_AS((void)parse_events(in), MalformedRecord);
    }
    {
        // missing required key
        std::istringstream in(R"({"ts":1,"sub":"p1"})");
        CHECK_THROWS_AS((void)parse_events(in), MalformedRecord);
    }
}

TEST_CASE("strict mode rejects timestamp regressions") {
    std::istringstream in(line(10, "p1", "a", "f1", "b", "file", "read") + "\n" +
                          line(5, "p1", "a", "f1", "b", "file", "read"));
    CHECK_THROWS_AS((void)parse_events(in), NonMonotoneTimestamp);
}

TEST_CASE("permissive mode sorts and warns instead of throwing") {
    std::istringstream in(line(10, "p1", "a", "f1", "b", "file", "read") + "\nbroken\n" +
                          line(5, "p2", "c", "f2", "d", "file", "write"));
    ParseOptions opts;
    opts.strict = false;
    auto result = parse_events(in, opts);
    REQUIRE(result.events.size() == 2);
    CHECK(result.events[0].timestamp == 5);
    CHECK(result.events[1].timestamp == 10);
    CHECK(result.warnings.size() >= 1);
}

TEST_CASE("equal timestamps keep input order") {
    std::istringstream in(line(7, "p1", "a", "f1", "first", "file", "read") + "\n" +
                          line(7, "p1", "a", "f2", "second", "file", "read"));
    auto result = parse_events(in);
    REQUIRE(result.events.size() == 2);
    CHECK(result.events[0].object_name == "first");
    CHECK(result.events[1].object_name == "second");
}

TEST_CASE("required_object_kind covers every relation") {
    CHECK(required_object_kind(Relation::Start) == EntityKind::Process);
    CHECK(required_object_kind(Relation::End) == EntityKind::Process);
    CHECK(required_object_kind(Relation::Rename) == EntityKind::File);
    CHECK(required_object_kind(Relation::Read) == EntityKind::File);
    CHECK(required_object_kind(Relation::Write) == EntityKind::File);
    CHECK(required_object_kind(Relation::Execute) == EntityKind::File);
    CHECK(required_object_kind(Relation::Delete) == EntityKind::File);
    CHECK(required_object_kind(Relation::Send) == EntityKind::Socket);
    CHECK(required_object_kind(Relation::Receive) == EntityKind::Socket);
}
