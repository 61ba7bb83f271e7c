#pragma once

#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigl/audit.hpp"

namespace sigl::synth {

struct StageSpec {
    std::string helper_name;  // temp-dir helper executable basename; empty = installer acts itself
    int dll_reads = 0;
    int temp_writes = 0;
    bool update_check = false;
    std::vector<std::string> installed_files;  // relative to the template's app dir
};

struct InstallerTemplate {
    std::string name;
    std::string app_dir;
    std::string installer_file;
    std::string downloader;
    std::vector<std::string> dll_pool;
    std::vector<StageSpec> stages;
    double count_jitter = 0.2;    // relative noise on per-stage counts
    double temp_rand_rate = 0.5;  // fraction of temp files with machine-generated names
    std::string update_endpoint;  // "ip:port", empty = no network
    std::vector<std::string> target_files;  // absolute installed executable paths
};

// The five shipped installer shapes, smallest to largest.
const std::vector<InstallerTemplate>& templates();
const InstallerTemplate& template_by_name(const std::string& name);

struct MalwareProfile {
    std::string name;
    bool socket_beacon = false;
    bool payload_drop = false;
    bool spawn_shell = false;
    bool mass_file_writes = false;
    int intensity = 1;

    void validate() const {
        if (!socket_beacon && !payload_drop && !spawn_shell && !mass_file_writes)
            throw std::invalid_argument("malware profile must set at least one behavior");
    }
    static MalwareProfile by_name(const std::string& name);
    static std::vector<std::string> names();
};

// A generated trace plus its ground truth sidecar content.
struct TraceBundle {
    std::vector<audit::AuditEvent> events;
    std::set<std::string> targets;           // installed executable paths
    std::vector<std::string> malicious_ids;  // entity ids introduced by injection
    std::string graph_id;
    std::string template_name;
    std::string mode;     // "", "bundle" or "embed"
    std::string profile;  // empty for benign
    std::uint64_t seed = 0;
};

TraceBundle gen_benign_trace(const InstallerTemplate& tmpl, std::uint64_t seed);

// Wrapper-installer injection: a new root process starts both the original
// installer and a malware subtree. Benign events are kept verbatim.
TraceBundle inject_bundle(const TraceBundle& benign, const MalwareProfile& profile,
                          std::uint64_t seed);

// Embedded-malware injection: an installer-lineage process spawns the
// malware subtree mid-sequence.
TraceBundle inject_embed(const TraceBundle& benign, const MalwareProfile& profile,
                         std::uint64_t seed);

// trace JSONL + label sidecar (labels live next to the trace, never in it).
void write_trace(const TraceBundle& bundle, const std::string& trace_path,
                 const std::string& sidecar_path);
std::string sidecar_json(const TraceBundle& bundle);

struct Sidecar {
    std::string graph_id;
    std::string template_name;
    std::string label;  // "benign" | "malicious"
    std::string mode;
    std::string profile;
    std::uint64_t seed = 0;
    std::set<std::string> targets;
    std::vector<std::string> malicious_ids;
};

Sidecar read_sidecar(const std::string& path);

}  // namespace sigl::synth
