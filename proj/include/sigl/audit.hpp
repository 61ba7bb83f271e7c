#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sigl::audit {

enum class EntityKind { Process, File, Socket };

enum class Relation { Start, End, Rename, Read, Write, Execute, Delete, Send, Receive };

constexpr int kRelationCount = 9;

const char* to_string(EntityKind k);
const char* to_string(Relation r);
std::optional<EntityKind> parse_entity_kind(const std::string& s);
std::optional<Relation> parse_relation(const std::string& s);

// Object kind a relation is defined against (subject is always a process).
EntityKind required_object_kind(Relation r);

struct AuditEvent {
    std::int64_t timestamp = 0;  // microseconds
    std::string subject_id;
    std::string subject_name;
    std::string object_id;
    std::string object_name;
    EntityKind object_kind = EntityKind::File;
    Relation relation = Relation::Read;

    bool operator==(const AuditEvent&) const = default;
};

// First violated invariant, or nullopt when the event is well formed.
std::optional<std::string> validate_event(const AuditEvent& ev);

struct ParseError : std::runtime_error {
    std::size_t line_no;
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_no(line) {}
};

struct MalformedRecord : ParseError {
    using ParseError::ParseError;
};
struct KindRelationMismatch : ParseError {
    using ParseError::ParseError;
};
struct NonMonotoneTimestamp : ParseError {
    using ParseError::ParseError;
};

struct ParseOptions {
    bool strict = true;         // false: malformed lines become warnings, out-of-order input is sorted
    bool reject_unknown = true; // unknown JSON keys are errors in strict mode
};

struct ParseResult {
    std::vector<AuditEvent> events;
    std::vector<std::string> warnings;
};

// Parses newline-delimited JSON event records. Names are normalized
// (backslashes to '/', lowercased). Output is nondecreasing in timestamp;
// equal timestamps keep input order.
ParseResult parse_events(std::istream& in, const ParseOptions& opts = {});
ParseResult parse_events_file(const std::string& path, const ParseOptions& opts = {});

std::string serialize_event(const AuditEvent& ev);
void serialize_events(const std::vector<AuditEvent>& events, std::ostream& out);

// Name normalization applied at parse time (also used by the generator).
std::string normalize_name(std::string name);

}  // namespace sigl::audit
