#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sigl/pipeline.hpp"
#include "sigl/rng.hpp"
#include "sigl/synth.hpp"

namespace fs = std::filesystem;
using namespace sigl;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> threshold_multiplier;
    std::optional<std::int64_t> time_bound;
    std::string dot_path;
};

pipeline::PipelineConfig resolve_config(const GlobalOpts& g) {
    pipeline::PipelineConfig config;
    if (!g.config_path.empty()) config = pipeline::PipelineConfig::from_ini_file(g.config_path);
    if (g.seed) config.seed = *g.seed;
    if (g.threshold_multiplier) config.threshold_multiplier = *g.threshold_multiplier;
    if (g.time_bound) config.time_bound_us = *g.time_bound;
    config.validate();
    return config;
}

void maybe_write_dot(const GlobalOpts& g, const graph::Sig& sig,
                     const std::set<graph::NodeRef>& highlight = {}) {
    if (g.dot_path.empty()) return;
    std::ofstream out(g.dot_path);
    if (!out) throw std::runtime_error("cannot write " + g.dot_path);
    out << graph::to_dot(sig, highlight);
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

int run(int argc, char** argv) {
    CLI::App app{"Provenance-graph anomaly detector for software installations"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "key=value config file");
    app.add_option("--seed", g.seed, "override config seed");
    app.add_option("--threshold-multiplier", g.threshold_multiplier, "override sigma multiplier");
    app.add_option("--time-bound", g.time_bound, "service edge time bound (microseconds)");
    app.add_option("--dot", g.dot_path, "write the relevant SIG as Graphviz dot");

    // ingest: validate a trace and report event statistics.
    auto* ingest = app.add_subcommand("ingest", "parse and validate an audit trace");
    std::string ingest_trace;
    bool ingest_permissive = false;
    ingest->add_option("trace", ingest_trace, "JSONL audit trace")->required();
    ingest->add_flag("--permissive", ingest_permissive, "reorder and warn instead of failing");

    // build-sig: trace -> backtracked SIG JSON.
    auto* build = app.add_subcommand("build-sig", "build the backtracked installation graph");
    std::string build_trace, build_out;
    std::vector<std::string> build_targets;
    build->add_option("trace", build_trace, "JSONL audit trace")->required();
    build->add_option("-o,--out", build_out, "output SIG JSON (default stdout)");
    build->add_option("-t,--target", build_targets,
                      "installed executable path (repeatable; default: sidecar targets)");

    // synth: generate a labeled corpus.
    auto* synth_cmd = app.add_subcommand("synth", "generate a labeled synthetic corpus");
    std::string synth_dir, synth_template = "all", synth_profile = "trojan", synth_mode = "both";
    int synth_benign = 20, synth_malicious = 5;
    synth_cmd->add_option("out_dir", synth_dir, "output directory")->required();
    synth_cmd->add_option("--template", synth_template, "installer template name, or 'all'");
    synth_cmd->add_option("--benign", synth_benign, "benign traces per template");
    synth_cmd->add_option("--malicious", synth_malicious, "malicious traces per template per mode");
    synth_cmd->add_option("--profile", synth_profile, "malware profile name");
    synth_cmd->add_option("--mode", synth_mode, "injection mode: bundle, embed or both");

    // train: corpus dir -> model bundle.
    auto* train_cmd = app.add_subcommand("train", "train a detection bundle from benign traces");
    std::string train_dir, train_bundle;
    train_cmd->add_option("corpus_dir", train_dir, "directory of traces + label sidecars")->required();
    train_cmd->add_option("bundle_dir", train_bundle, "output bundle directory")->required();

    // detect: one trace -> verdict (exit 0 benign, 2 abnormal).
    auto* detect_cmd = app.add_subcommand("detect", "score one trace against a bundle");
    std::string detect_bundle, detect_trace_path;
    detect_cmd->add_option("bundle_dir", detect_bundle, "trained bundle directory")->required();
    detect_cmd->add_option("trace", detect_trace_path, "JSONL audit trace")->required();

    // rank: one trace -> ranked process table.
    auto* rank_cmd = app.add_subcommand("rank", "print the ranked anomalous process list");
    std::string rank_bundle, rank_trace;
    std::size_t rank_top = 10;
    rank_cmd->add_option("bundle_dir", rank_bundle, "trained bundle directory")->required();
    rank_cmd->add_option("trace", rank_trace, "JSONL audit trace")->required();
    rank_cmd->add_option("--top", rank_top, "rows to print");

    // eval: labeled corpus -> metrics JSON.
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a bundle on a labeled corpus");
    std::string eval_bundle, eval_dir, eval_out;
    eval_cmd->add_option("bundle_dir", eval_bundle, "trained bundle directory")->required();
    eval_cmd->add_option("corpus_dir", eval_dir, "directory of traces + label sidecars")->required();
    eval_cmd->add_option("-o,--out", eval_out, "metrics JSON output (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (*ingest) {
        audit::ParseOptions opts;
        opts.strict = !ingest_permissive;
        auto result = audit::parse_events_file(ingest_trace, opts);
        for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
        std::cout << "events: " << result.events.size() << "\n";
        if (!result.events.empty()) {
            std::cout << "first_ts: " << result.events.front().timestamp << "\n"
                      << "last_ts: " << result.events.back().timestamp << "\n";
        }
        return 0;
    }

    if (*build) {
        auto config = resolve_config(g);
        std::set<std::string> targets(build_targets.begin(), build_targets.end());
        if (targets.empty()) {
            fs::path sidecar = fs::path(build_trace).replace_extension(".labels.json");
            if (!fs::exists(sidecar))
                throw std::runtime_error("no --target given and no sidecar at " + sidecar.string());
            targets = synth::read_sidecar(sidecar.string()).targets;
        }
        graph::Sig sig = pipeline::build_from_trace(build_trace, targets, stem_of(build_trace), config);
        maybe_write_dot(g, sig);
        std::string json = graph::to_json(sig);
        if (build_out.empty()) {
            std::cout << json << "\n";
        } else {
            std::ofstream out(build_out);
            if (!out) throw std::runtime_error("cannot write " + build_out);
            out << json << "\n";
        }
        return 0;
    }

    if (*synth_cmd) {
        auto config = resolve_config(g);
        fs::create_directories(synth_dir);
        std::vector<std::string> names;
        if (synth_template == "all")
            for (const auto& t : synth::templates()) names.push_back(t.name);
        else
            names.push_back(synth::template_by_name(synth_template).name);
        auto profile = synth::MalwareProfile::by_name(synth_profile);
        std::vector<std::string> modes;
        if (synth_mode == "both") modes = {"bundle", "embed"};
        else if (synth_mode == "bundle" || synth_mode == "embed") modes = {synth_mode};
        else throw std::runtime_error("unknown mode: " + synth_mode);

        std::size_t written = 0;
        for (const auto& name : names) {
            const auto& tmpl = synth::template_by_name(name);
            for (int i = 0; i < synth_benign; ++i) {
                auto seed = Rng::derive(config.seed, fnv1a(name + "/benign/" + std::to_string(i)));
                auto trace = synth::gen_benign_trace(tmpl, seed);
                fs::path base = fs::path(synth_dir) / trace.graph_id;
                synth::write_trace(trace, base.string() + ".jsonl", base.string() + ".labels.json");
                ++written;
            }
            for (const auto& mode : modes) {
                for (int i = 0; i < synth_malicious; ++i) {
                    auto salt = fnv1a(name + "/" + mode + "/" + std::to_string(i));
                    auto benign = synth::gen_benign_trace(tmpl, Rng::derive(config.seed, salt));
                    auto trace = mode == "bundle"
                                     ? synth::inject_bundle(benign, profile, Rng::derive(config.seed, salt ^ 1))
                                     : synth::inject_embed(benign, profile, Rng::derive(config.seed, salt ^ 1));
                    fs::path base = fs::path(synth_dir) / trace.graph_id;
                    synth::write_trace(trace, base.string() + ".jsonl", base.string() + ".labels.json");
                    ++written;
                }
            }
        }
        std::cout << "wrote " << written << " traces to " << synth_dir << "\n";
        return 0;
    }

    if (*train_cmd) {
        auto config = resolve_config(g);
        pipeline::Bundle bundle = pipeline::train_pipeline(config, train_dir, train_bundle);
        std::cout << "bundle: " << train_bundle << "\n"
                  << "threshold: " << bundle.threshold.value << "\n"
                  << "manifest_hash: " << pipeline::bundle_manifest_hash(train_bundle) << "\n";
        return 0;
    }

    if (*detect_cmd || *rank_cmd) {
        const std::string& bundle_dir = *detect_cmd ? detect_bundle : rank_bundle;
        const std::string& trace_path = *detect_cmd ? detect_trace_path : rank_trace;
        pipeline::Bundle bundle = pipeline::load_bundle(bundle_dir);
        if (g.threshold_multiplier) {
            bundle.threshold.multiplier = *g.threshold_multiplier;
            bundle.threshold.value =
                bundle.threshold.mean + *g.threshold_multiplier * bundle.threshold.stddev;
        }
        if (g.time_bound) bundle.config.time_bound_us = *g.time_bound;

        fs::path sidecar = fs::path(trace_path).replace_extension(".labels.json");
        std::set<std::string> targets;
        if (fs::exists(sidecar)) targets = synth::read_sidecar(sidecar.string()).targets;
        if (targets.empty())
            throw std::runtime_error("no targets: expected a label sidecar next to " + trace_path);

        auto result = pipeline::detect_trace(bundle, trace_path, targets, stem_of(trace_path));
        std::set<graph::NodeRef> highlight;
        for (const auto& p : result.report.processes)
            if (p.rank <= 5) highlight.insert(p.node);
        maybe_write_dot(g, result.sig, highlight);

        if (*detect_cmd) {
            std::cout << detect::to_json(result.report) << "\n";
            return result.report.abnormal ? 2 : 0;
        }
        std::cout << detect::to_table(result.report, rank_top);
        return 0;
    }

    if (*eval_cmd) {
        pipeline::Bundle bundle = pipeline::load_bundle(eval_bundle);
        if (g.threshold_multiplier) {
            bundle.threshold.multiplier = *g.threshold_multiplier;
            bundle.threshold.value =
                bundle.threshold.mean + *g.threshold_multiplier * bundle.threshold.stddev;
        }
        auto metrics = pipeline::eval_pipeline(bundle, eval_dir);
        std::string json = metrics.to_json();
        if (eval_out.empty()) {
            std::cout << json << "\n";
        } else {
            std::ofstream out(eval_out);
            if (!out) throw std::runtime_error("cannot write " + eval_out);
            out << json << "\n";
        }
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
