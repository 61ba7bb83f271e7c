#include "sigl/synth.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "sigl/rng.hpp"

namespace sigl::synth {

using audit::AuditEvent;
using audit::EntityKind;
using audit::Relation;
using nlohmann::json;

namespace {

const std::vector<std::string> kCommonDlls = {
    "c:/windows/system32/ntdll.dll",    "c:/windows/system32/kernel32.dll",
    "c:/windows/system32/user32.dll",   "c:/windows/system32/gdi32.dll",
    "c:/windows/system32/advapi32.dll", "c:/windows/system32/shell32.dll",
    "c:/windows/system32/ole32.dll",    "c:/windows/system32/comctl32.dll",
    "c:/windows/system32/msvcrt.dll",   "c:/windows/system32/ws2_32.dll",
    "c:/windows/system32/wininet.dll",  "c:/windows/system32/crypt32.dll",
    "c:/windows/system32/rpcrt4.dll",   "c:/windows/system32/sechost.dll",
    "c:/windows/system32/shlwapi.dll",  "c:/windows/system32/oleaut32.dll",
    "c:/windows/system32/setupapi.dll", "c:/windows/system32/version.dll",
    "c:/windows/system32/imm32.dll",    "c:/windows/system32/uxtheme.dll",
    "c:/windows/system32/msvcp140.dll", "c:/windows/system32/vcruntime140.dll",
    "c:/windows/system32/dwmapi.dll",   "c:/windows/system32/cryptbase.dll",
};

std::vector<std::string> with_common(std::vector<std::string> extra) {
    extra.insert(extra.end(), kCommonDlls.begin(), kCommonDlls.end());
    return extra;
}

std::vector<InstallerTemplate> make_templates() {
    std::vector<InstallerTemplate> out;

    {
        InstallerTemplate t;
        t.name = "tinytool";
        t.app_dir = "c:/program files/tinytool";
        t.installer_file = "c:/users/user/downloads/tinytool_setup.exe";
        t.downloader = "c:/program files/firefox/firefox.exe";
        t.dll_pool = kCommonDlls;
        t.stages = {{"", 10, 4, false, {"tinytool.exe", "readme.txt"}}};
        t.target_files = {t.app_dir + "/tinytool.exe"};
        out.push_back(t);
    }
    {
        InstallerTemplate t;
        t.name = "notepadder";
        t.app_dir = "c:/program files/notepadder";
        t.installer_file = "c:/users/user/downloads/notepadder_setup.exe";
        t.downloader = "c:/program files/edge/msedge.exe";
        t.dll_pool = with_common({"c:/windows/system32/comdlg32.dll", "c:/windows/system32/usp10.dll"});
        t.stages = {
            {"nsis_helper.exe", 30, 12, false, {}},
            {"", 20, 6, false, {"notepadder.exe", "plugins/spellcheck.dll", "uninstall.exe"}},
        };
        t.target_files = {t.app_dir + "/notepadder.exe", t.app_dir + "/uninstall.exe"};
        out.push_back(t);
    }
    {
        InstallerTemplate t;
        t.name = "mediaplay";
        t.app_dir = "c:/program files/mediaplay";
        t.installer_file = "c:/users/user/downloads/mediaplay_setup.exe";
        t.downloader = "c:/program files/firefox/firefox.exe";
        t.dll_pool = with_common({"c:/windows/system32/winmm.dll", "c:/windows/system32/dsound.dll",
                                  "c:/windows/system32/mf.dll", "c:/windows/system32/mfplat.dll",
                                  "c:/windows/system32/avrt.dll"});
        t.update_endpoint = "23.96.12.8:443";
        t.stages = {
            {"setup_engine.exe", 55, 30, true, {}},
            {"codec_install.exe", 50, 25, false,
             {"codecs/h264dec.dll", "codecs/aacdec.dll", "codecs/mp3lame.dll"}},
            {"", 40, 15, false, {"mediaplay.exe", "skins/default.skin", "uninstall.exe"}},
        };
        t.target_files = {t.app_dir + "/mediaplay.exe", t.app_dir + "/uninstall.exe"};
        out.push_back(t);
    }
    {
        InstallerTemplate t;
        t.name = "devsuite";
        t.app_dir = "c:/program files/devsuite";
        t.installer_file = "c:/users/user/downloads/devsuite_setup.exe";
        t.downloader = "c:/program files/chrome/chrome.exe";
        t.dll_pool = with_common({"c:/windows/system32/dbghelp.dll", "c:/windows/system32/imagehlp.dll",
                                  "c:/windows/system32/mscoree.dll", "c:/windows/system32/wintrust.dll"});
        t.update_endpoint = "40.112.72.205:443";
        t.stages = {
            {"extract_tool.exe", 80, 55, true, {}},
            {"compiler_setup.exe", 90, 60, false,
             {"bin/devcc.exe", "bin/devld.exe", "lib/runtime.lib"}},
            {"ide_setup.exe", 70, 45, false, {"ide/devstudio.exe", "ide/plugins/format.dll"}},
            {"", 45, 25, false, {"uninstall.exe", "docs/manual.pdf"}},
        };
        t.target_files = {t.app_dir + "/bin/devcc.exe", t.app_dir + "/ide/devstudio.exe",
                          t.app_dir + "/uninstall.exe"};
        out.push_back(t);
    }
    {
        InstallerTemplate t;
        t.name = "officepack";
        t.app_dir = "c:/program files/officepack";
        t.installer_file = "c:/users/user/downloads/officepack_setup.exe";
        t.downloader = "c:/program files/edge/msedge.exe";
        t.dll_pool = with_common({"c:/windows/system32/riched20.dll", "c:/windows/system32/msxml6.dll",
                                  "c:/windows/system32/gdiplus.dll", "c:/windows/system32/windowscodecs.dll",
                                  "c:/windows/system32/d2d1.dll", "c:/windows/system32/dwrite.dll"});
        t.update_endpoint = "52.109.8.21:443";
        t.stages = {
            {"msi_unpack.exe", 95, 70, true, {}},
            {"wordproc_setup.exe", 100, 80, false, {"word/wordproc.exe", "word/proof.dll"}},
            {"sheets_setup.exe", 95, 75, false, {"sheets/sheetcalc.exe", "sheets/solver.dll"}},
            {"slides_setup.exe", 85, 60, false, {"slides/slideshow.exe"}},
            {"", 55, 30, false, {"common/shared.dll", "uninstall.exe"}},
        };
        t.target_files = {t.app_dir + "/word/wordproc.exe", t.app_dir + "/sheets/sheetcalc.exe",
                          t.app_dir + "/slides/slideshow.exe", t.app_dir + "/uninstall.exe"};
        out.push_back(t);
    }
    return out;
}

const std::vector<std::string> kWrapperNames = {
    "freevideo_codec_pack_setup.exe", "driverboost_pro_setup.exe", "gamebooster_crack_loader.exe",
    "smartpdf_converter_bundle.exe",  "ultrafast_downloader_setup.exe",
};
const std::vector<std::string> kPayloadNames = {
    "sysupdate_svc.exe", "winhelper32_agent.exe", "netsync_daemon.exe", "hostcfg_service.exe",
};
const std::vector<std::string> kBeaconEndpoints = {
    "185.220.101.47:9001", "91.219.236.18:6667", "45.133.1.87:8443", "103.36.79.22:4444",
};

constexpr const char* kExplorer = "c:/windows/explorer.exe";
constexpr const char* kTempDir = "c:/users/user/appdata/local/temp";

// Deterministic event emitter with per-path entity identity.
class TraceWriter {
public:
    TraceWriter(Rng& rng, std::int64_t start_ts, const std::string& id_prefix)
        : rng_(rng), ts_(start_ts), prefix_(id_prefix) {}

    std::string new_process(const std::string& name) {
        std::string id = prefix_ + "p" + std::to_string(++proc_count_);
        proc_names_[id] = name;
        return id;
    }
    // Attach to an entity that already exists in the benign trace.
    void register_process(const std::string& id, const std::string& name) { proc_names_[id] = name; }
    void register_file(const std::string& path, const std::string& id) { file_ids_[path] = id; }
    std::string file_id(const std::string& path) {
        auto [it, inserted] = file_ids_.try_emplace(path, "");
        if (inserted) it->second = prefix_ + "f" + std::to_string(++file_count_);
        return it->second;
    }
    std::string socket_id(const std::string& endpoint) {
        auto [it, inserted] = socket_ids_.try_emplace(endpoint, "");
        if (inserted) it->second = prefix_ + "s" + std::to_string(++socket_count_);
        return it->second;
    }

    std::int64_t tick() { return ts_ += 300 + static_cast<std::int64_t>(rng_.next_below(300)); }
    void set_ts(std::int64_t ts) { ts_ = ts; }
    std::int64_t ts() const { return ts_; }

    void proc_file(Relation rel, const std::string& pid, const std::string& path) {
        events_.push_back({tick(), pid, proc_names_.at(pid), file_id(path), path, EntityKind::File, rel});
    }
    void proc_proc(Relation rel, const std::string& pid, const std::string& child) {
        events_.push_back(
            {tick(), pid, proc_names_.at(pid), child, proc_names_.at(child), EntityKind::Process, rel});
    }
    void proc_socket(Relation rel, const std::string& pid, const std::string& endpoint) {
        events_.push_back({tick(), pid, proc_names_.at(pid), socket_id(endpoint), endpoint,
                           EntityKind::Socket, rel});
    }

    std::vector<AuditEvent>& events() { return events_; }
    const std::string& proc_name(const std::string& id) const { return proc_names_.at(id); }

private:
    Rng& rng_;
    std::int64_t ts_;
    std::string prefix_;
    int proc_count_ = 0, file_count_ = 0, socket_count_ = 0;
    std::map<std::string, std::string> file_ids_, socket_ids_;
    std::map<std::string, std::string> proc_names_;
    std::vector<AuditEvent> events_;
};

int jittered(Rng& rng, int n, double jitter) {
    if (n <= 0) return 0;
    double scaled = n * (1.0 + rng.uniform(-jitter, jitter));
    return std::max(1, static_cast<int>(scaled + 0.5));
}

std::string random_hex(Rng& rng, int len) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (int i = 0; i < len; ++i) s += digits[rng.next_below(16)];
    return s;
}

std::vector<std::string> pick_dlls(Rng& rng, const std::vector<std::string>& pool, int n) {
    std::vector<std::string> shuffled = pool;
    rng.shuffle(shuffled);
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(shuffled[i % shuffled.size()]);
    return out;
}

}  // namespace

const std::vector<InstallerTemplate>& templates() {
    static const std::vector<InstallerTemplate> all = make_templates();
    return all;
}

const InstallerTemplate& template_by_name(const std::string& name) {
    for (const auto& t : templates())
        if (t.name == name) return t;
    throw std::invalid_argument("unknown template: " + name);
}

MalwareProfile MalwareProfile::by_name(const std::string& name) {
    MalwareProfile p;
    p.name = name;
    if (name == "trojan") {
        p.socket_beacon = p.payload_drop = true;
        p.intensity = 2;
    } else if (name == "ransomware") {
        p.mass_file_writes = p.socket_beacon = p.payload_drop = true;
        p.intensity = 3;
    } else if (name == "pua") {
        p.payload_drop = true;
    } else if (name == "backdoor") {
        p.socket_beacon = p.spawn_shell = p.payload_drop = true;
        p.intensity = 2;
    } else if (name == "dropper") {
        p.payload_drop = p.spawn_shell = true;
    } else if (name == "beacon") {
        p.socket_beacon = true;
    } else {
        throw std::invalid_argument("unknown malware profile: " + name);
    }
    p.validate();
    return p;
}

std::vector<std::string> MalwareProfile::names() {
    return {"trojan", "ransomware", "pua", "backdoor", "dropper", "beacon"};
}

TraceBundle gen_benign_trace(const InstallerTemplate& tmpl, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, fnv1a(tmpl.name)));
    TraceWriter w(rng, 1'000'000, "");

    TraceBundle bundle;
    bundle.template_name = tmpl.name;
    bundle.seed = seed;
    bundle.graph_id = tmpl.name + "_s" + std::to_string(seed);
    bundle.targets.insert(tmpl.target_files.begin(), tmpl.target_files.end());

    std::string downloader = w.new_process(tmpl.downloader);
    w.proc_file(Relation::Write, downloader, tmpl.installer_file);

    // Gap so a wrapper prologue can be interleaved ahead of the install.
    w.set_ts(w.ts() + 10'000);

    std::string explorer = w.new_process(kExplorer);
    std::string installer = w.new_process(tmpl.installer_file);
    w.proc_proc(Relation::Start, explorer, installer);
    w.proc_file(Relation::Read, installer, tmpl.installer_file);
    w.proc_file(Relation::Execute, installer, tmpl.installer_file);

    int stage_idx = 0;
    for (const auto& stage : tmpl.stages) {
        ++stage_idx;
        std::string acting = installer;
        if (!stage.helper_name.empty()) {
            std::string helper_path = std::string(kTempDir) + "/" + stage.helper_name;
            w.proc_file(Relation::Write, installer, helper_path);
            acting = w.new_process(helper_path);
            w.proc_proc(Relation::Start, installer, acting);
            w.proc_file(Relation::Read, acting, helper_path);
            w.proc_file(Relation::Execute, acting, helper_path);
        }
        for (const auto& dll : pick_dlls(rng, tmpl.dll_pool, jittered(rng, stage.dll_reads, tmpl.count_jitter)))
            w.proc_file(Relation::Read, acting, dll);
        if (stage.update_check && !tmpl.update_endpoint.empty()) {
            w.proc_socket(Relation::Send, acting, tmpl.update_endpoint);
            w.proc_socket(Relation::Receive, acting, tmpl.update_endpoint);
        }
        int ntemp = jittered(rng, stage.temp_writes, tmpl.count_jitter);
        for (int i = 0; i < ntemp; ++i) {
            std::string base = rng.next_double() < tmpl.temp_rand_rate
                                   ? random_hex(rng, 10) + ".tmp"
                                   : "tmp_" + std::to_string(stage_idx) + "_" + std::to_string(i) + ".tmp";
            w.proc_file(Relation::Write, acting, std::string(kTempDir) + "/" + base);
        }
        for (const auto& rel_path : stage.installed_files)
            w.proc_file(Relation::Write, acting, tmpl.app_dir + "/" + rel_path);
        if (acting != installer) w.proc_proc(Relation::End, installer, acting);
    }
    bundle.events = std::move(w.events());
    return bundle;
}

namespace {

// Shared malware subtree: parent spawns the malware process, which then
// exhibits the profile behaviors. Returns the dropped payload paths.
void emit_malware_subtree(TraceWriter& w, Rng& rng, const std::string& parent,
                          const std::string& app_dir, const MalwareProfile& profile,
                          TraceBundle& bundle, std::vector<std::string>& new_proc_ids) {
    std::string mal_base = kPayloadNames[rng.next_below(kPayloadNames.size())];
    std::string mal_path = std::string(kTempDir) + "/" + mal_base;
    w.proc_file(Relation::Write, parent, mal_path);
    std::string mal = w.new_process(mal_path);
    new_proc_ids.push_back(mal);
    w.proc_proc(Relation::Start, parent, mal);
    w.proc_file(Relation::Read, mal, mal_path);
    w.proc_file(Relation::Execute, mal, mal_path);

    if (profile.socket_beacon) {
        std::string endpoint = kBeaconEndpoints[rng.next_below(kBeaconEndpoints.size())];
        for (int i = 0; i < profile.intensity; ++i) {
            w.proc_socket(Relation::Send, mal, endpoint);
            w.proc_socket(Relation::Receive, mal, endpoint);
        }
    }
    if (profile.mass_file_writes) {
        int n = 8 * profile.intensity;
        for (int i = 0; i < n; ++i) {
            std::string doc = "c:/users/user/documents/doc_" + std::to_string(i) + ".docx";
            w.proc_file(Relation::Read, mal, doc);
            w.proc_file(Relation::Write, mal, doc);
        }
    }
    std::string dropper = mal;
    if (profile.spawn_shell) {
        std::string shell = w.new_process("c:/windows/system32/cmd.exe");
        new_proc_ids.push_back(shell);
        w.proc_proc(Relation::Start, mal, shell);
        w.proc_file(Relation::Write, shell,
                    "c:/users/user/appdata/roaming/" + mal_base.substr(0, mal_base.find('.')) + "/run.bat");
        if (profile.payload_drop) dropper = shell;
    }
    if (profile.payload_drop) {
        std::string payload_base = kPayloadNames[rng.next_below(kPayloadNames.size())];
        std::string payload = app_dir + "/" + payload_base;
        w.proc_file(Relation::Write, dropper, payload);
        w.proc_file(Relation::Execute, dropper, payload);
        bundle.targets.insert(payload);  // it is an installed executable
    }
}

TraceBundle finish_injection(const TraceBundle& benign, TraceWriter& w, const std::string& mode,
                             const MalwareProfile& profile, std::uint64_t seed, TraceBundle bundle) {
    bundle.template_name = benign.template_name;
    bundle.mode = mode;
    bundle.profile = profile.name;
    bundle.seed = seed;
    bundle.graph_id = benign.graph_id + "_" + mode + "_" + profile.name + "_s" + std::to_string(seed);

    std::set<std::string> benign_ids;
    for (const auto& ev : benign.events) {
        benign_ids.insert(ev.subject_id);
        benign_ids.insert(ev.object_id);
    }
    std::set<std::string> mal_ids;
    for (const auto& ev : w.events()) {
        if (!benign_ids.count(ev.subject_id)) mal_ids.insert(ev.subject_id);
        if (!benign_ids.count(ev.object_id)) mal_ids.insert(ev.object_id);
    }
    bundle.malicious_ids.assign(mal_ids.begin(), mal_ids.end());

    bundle.events = benign.events;
    bundle.events.insert(bundle.events.end(), w.events().begin(), w.events().end());
    std::stable_sort(bundle.events.begin(), bundle.events.end(),
                     [](const AuditEvent& a, const AuditEvent& b) { return a.timestamp < b.timestamp; });
    return bundle;
}

}  // namespace

TraceBundle inject_bundle(const TraceBundle& benign, const MalwareProfile& profile,
                          std::uint64_t seed) {
    profile.validate();
    const InstallerTemplate& tmpl = template_by_name(benign.template_name);
    Rng rng(Rng::derive(seed, fnv1a(benign.graph_id) ^ 0xb0baULL));

    // The benign trace opens with the download, then a gap before the
    // explorer Start of the installer. The wrapper prologue fits there.
    const AuditEvent* start_ev = nullptr;
    for (const auto& ev : benign.events)
        if (ev.relation == Relation::Start) {
            start_ev = &ev;
            break;
        }
    if (!start_ev) throw std::invalid_argument("benign trace has no installer start");
    std::int64_t prologue_ts = start_ev->timestamp - 9'000;

    TraceWriter w(rng, prologue_ts, "m");
    std::string wrapper_base = kWrapperNames[rng.next_below(kWrapperNames.size())];
    std::string wrapper_path = "c:/users/user/downloads/" + wrapper_base;
    // Reuse the benign trace's downloader and explorer entities.
    std::string downloader = benign.events.front().subject_id;
    w.register_process(downloader, benign.events.front().subject_name);
    std::string explorer = start_ev->subject_id;
    w.register_process(explorer, start_ev->subject_name);
    w.proc_file(Relation::Write, downloader, wrapper_path);
    std::string wrapper = w.new_process(wrapper_path);
    w.proc_proc(Relation::Start, explorer, wrapper);
    w.proc_file(Relation::Read, wrapper, wrapper_path);
    w.proc_file(Relation::Execute, wrapper, wrapper_path);

    // The wrapper starts the original installer root alongside the malware.
    AuditEvent start_installer = *start_ev;
    start_installer.subject_id = wrapper;
    start_installer.subject_name = wrapper_path;
    start_installer.timestamp = w.ts() + 100;
    w.events().push_back(start_installer);

    std::vector<std::string> new_procs{wrapper};
    w.set_ts(start_ev->timestamp + 2'000);
    TraceBundle bundle;
    bundle.targets = benign.targets;
    emit_malware_subtree(w, rng, wrapper, tmpl.app_dir, profile, bundle, new_procs);
    return finish_injection(benign, w, "bundle", profile, seed, std::move(bundle));
}

TraceBundle inject_embed(const TraceBundle& benign, const MalwareProfile& profile,
                         std::uint64_t seed) {
    profile.validate();
    const InstallerTemplate& tmpl = template_by_name(benign.template_name);
    Rng rng(Rng::derive(seed, fnv1a(benign.graph_id) ^ 0xe3bedULL));

    // Spawner: the installer process (subject of the first file Execute).
    std::string spawner_id, spawner_name;
    for (const auto& ev : benign.events)
        if (ev.relation == Relation::Execute) {
            spawner_id = ev.subject_id;
            spawner_name = ev.subject_name;
            break;
        }
    if (spawner_id.empty()) throw std::invalid_argument("benign trace has no installer execute");

    std::int64_t mid_ts = benign.events[benign.events.size() / 2].timestamp + 50;
    TraceWriter w(rng, mid_ts, "m");
    // Emit from the existing installer-lineage process.
    w.register_process(spawner_id, spawner_name);

    std::vector<std::string> new_procs;
    TraceBundle bundle;
    bundle.targets = benign.targets;
    emit_malware_subtree(w, rng, spawner_id, tmpl.app_dir, profile, bundle, new_procs);
    return finish_injection(benign, w, "embed", profile, seed, std::move(bundle));
}

std::string sidecar_json(const TraceBundle& bundle) {
    json j{{"graph_id", bundle.graph_id},
           {"template", bundle.template_name},
           {"label", bundle.malicious_ids.empty() ? "benign" : "malicious"},
           {"mode", bundle.mode},
           {"profile", bundle.profile},
           {"seed", bundle.seed},
           {"targets", std::vector<std::string>(bundle.targets.begin(), bundle.targets.end())},
           {"malicious_ids", bundle.malicious_ids}};
    return j.dump(2);
}

void write_trace(const TraceBundle& bundle, const std::string& trace_path,
                 const std::string& sidecar_path) {
    std::ofstream trace(trace_path);
    if (!trace) throw std::runtime_error("cannot write trace: " + trace_path);
    audit::serialize_events(bundle.events, trace);
    std::ofstream side(sidecar_path);
    if (!side) throw std::runtime_error("cannot write sidecar: " + sidecar_path);
    side << sidecar_json(bundle) << '\n';
}

Sidecar read_sidecar(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open sidecar: " + path);
    json j = json::parse(in);
    Sidecar s;
    s.graph_id = j.at("graph_id").get<std::string>();
    s.template_name = j.at("template").get<std::string>();
    s.label = j.at("label").get<std::string>();
    s.mode = j.value("mode", "");
    s.profile = j.value("profile", "");
    s.seed = j.value("seed", 0ULL);
    for (const auto& t : j.at("targets")) s.targets.insert(t.get<std::string>());
    s.malicious_ids = j.at("malicious_ids").get<std::vector<std::string>>();
    return s;
}

}  // namespace sigl::synth
