#include "sigl/audit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace sigl::audit {

using nlohmann::json;

const char* to_string(EntityKind k) {
    switch (k) {
        case EntityKind::Process: return "Process";
        case EntityKind::File: return "File";
        case EntityKind::Socket: return "Socket";
    }
    return "?";
}

const char* to_string(Relation r) {
    switch (r) {
        case Relation::Start: return "start";
        case Relation::End: return "end";
        case Relation::Rename: return "rename";
        case Relation::Read: return "read";
        case Relation::Write: return "write";
        case Relation::Execute: return "execute";
        case Relation::Delete: return "delete";
        case Relation::Send: return "send";
        case Relation::Receive: return "receive";
    }
    return "?";
}

static std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::optional<EntityKind> parse_entity_kind(const std::string& s) {
    std::string t = lower(s);
    if (t == "process") return EntityKind::Process;
    if (t == "file") return EntityKind::File;
    if (t == "socket") return EntityKind::Socket;
    return std::nullopt;
}

std::optional<Relation> parse_relation(const std::string& s) {
    std::string t = lower(s);
    if (t == "start") return Relation::Start;
    if (t == "end") return Relation::End;
    if (t == "rename") return Relation::Rename;
    if (t == "read") return Relation::Read;
    if (t == "write") return Relation::Write;
    if (t == "execute") return Relation::Execute;
    if (t == "delete") return Relation::Delete;
    if (t == "send") return Relation::Send;
    if (t == "receive") return Relation::Receive;
    return std::nullopt;
}

EntityKind required_object_kind(Relation r) {
    switch (r) {
        case Relation::Start:
        case Relation::End: return EntityKind::Process;
        case Relation::Rename:
        case Relation::Read:
        case Relation::Write:
        case Relation::Execute:
        case Relation::Delete: return EntityKind::File;
        case Relation::Send:
        case Relation::Receive: return EntityKind::Socket;
    }
    return EntityKind::File;
}

std::optional<std::string> validate_event(const AuditEvent& ev) {
    if (ev.timestamp < 0) return "timestamp ≥ 0";
    if (ev.subject_id.empty()) return "subject id must be nonempty";
    if (ev.object_id.empty()) return "object id must be nonempty";
    EntityKind need = required_object_kind(ev.relation);
    if (ev.object_kind != need) {
        std::string msg = std::string(to_string(ev.relation)) + " requires " + to_string(need) + " object";
        return msg;
    }
    return std::nullopt;
}

std::string normalize_name(std::string name) {
    for (char& c : name) {
        if (c == '\\') c = '/';
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return name;
}

namespace {

const char* kRequiredKeys[] = {"ts", "sub", "sub_name", "obj", "obj_name", "kind", "rel"};

AuditEvent parse_record(const json& j, std::size_t line_no, const ParseOptions& opts) {
    for (const char* k : kRequiredKeys)
        if (!j.contains(k)) throw MalformedRecord(line_no, std::string("missing key '") + k + "'");
    if (opts.reject_unknown && opts.strict) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            bool known = false;
            for (const char* k : kRequiredKeys)
                if (it.key() == k) known = true;
            if (!known) throw MalformedRecord(line_no, "unknown key '" + it.key() + "'");
        }
    }
    AuditEvent ev;
    if (!j["ts"].is_number_integer()) throw MalformedRecord(line_no, "ts must be an integer");
    ev.timestamp = j["ts"].get<std::int64_t>();
    for (const char* k : {"sub", "sub_name", "obj", "obj_name", "kind", "rel"})
        if (!j[k].is_string()) throw MalformedRecord(line_no, std::string("'") + k + "' must be a string");
    ev.subject_id = j["sub"].get<std::string>();
    ev.subject_name = normalize_name(j["sub_name"].get<std::string>());
    ev.object_id = j["obj"].get<std::string>();
    ev.object_name = normalize_name(j["obj_name"].get<std::string>());
    auto kind = parse_entity_kind(j["kind"].get<std::string>());
    if (!kind) throw MalformedRecord(line_no, "unknown kind '" + j["kind"].get<std::string>() + "'");
    ev.object_kind = *kind;
    auto rel = parse_relation(j["rel"].get<std::string>());
    if (!rel) throw MalformedRecord(line_no, "unknown rel '" + j["rel"].get<std::string>() + "'");
    ev.relation = *rel;

    if (ev.object_kind != required_object_kind(ev.relation))
        throw KindRelationMismatch(line_no, std::string(to_string(ev.relation)) + " incompatible with " +
                                                to_string(ev.object_kind) + " object");
    if (auto v = validate_event(ev)) throw MalformedRecord(line_no, *v);
    return ev;
}

}  // namespace

ParseResult parse_events(std::istream& in, const ParseOptions& opts) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    std::int64_t last_ts = -1;
    bool out_of_order = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line, nullptr, true);
            if (!j.is_object()) throw MalformedRecord(line_no, "record is not a JSON object");
            AuditEvent ev = parse_record(j, line_no, opts);
            if (ev.timestamp < last_ts) {
                if (opts.strict)
                    throw NonMonotoneTimestamp(line_no, "timestamp decreased from " + std::to_string(last_ts) +
                                                            " to " + std::to_string(ev.timestamp));
                out_of_order = true;
            }
            last_ts = std::max(last_ts, ev.timestamp);
            result.events.push_back(std::move(ev));
        } catch (const json::parse_error& e) {
            if (opts.strict) throw MalformedRecord(line_no, e.what());
            result.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            if (opts.strict) throw;
            result.warnings.push_back(e.what());
        }
    }
    if (out_of_order)
        std::stable_sort(result.events.begin(), result.events.end(),
                         [](const AuditEvent& a, const AuditEvent& b) { return a.timestamp < b.timestamp; });
    return result;
}

ParseResult parse_events_file(const std::string& path, const ParseOptions& opts) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return parse_events(in, opts);
}

std::string serialize_event(const AuditEvent& ev) {
    json j;
    j["ts"] = ev.timestamp;
    j["sub"] = ev.subject_id;
    j["sub_name"] = ev.subject_name;
    j["obj"] = ev.object_id;
    j["obj_name"] = ev.object_name;
    j["kind"] = to_string(ev.object_kind);
    j["rel"] = to_string(ev.relation);
    return j.dump();
}

void serialize_events(const std::vector<AuditEvent>& events, std::ostream& out) {
    for (const auto& ev : events) out << serialize_event(ev) << '\n';
}

}  // namespace sigl::audit
