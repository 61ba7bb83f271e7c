#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sigl/detector.hpp"
#include "sigl/embedding.hpp"
#include "sigl/lstm.hpp"
#include "sigl/sig.hpp"
#include "sigl/synth.hpp"

namespace sigl::pipeline {

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct BundleVersionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PipelineConfig {
    // embedding
    int dim = 128;
    int window = 5;
    int walks_per_node = 10;
    int walk_length = 10;
    int negatives = 5;
    int embed_epochs = 20;
    double embed_learning_rate = 0.025;
    double alacarte_lambda = 1e-3;
    // model
    int hidden = 64;
    int epochs = 100;
    int batch_size = 25;
    double learning_rate = 1e-3;
    double trim_fraction = 0.1;  // highest-loss graphs excluded per epoch
    // detector
    double threshold_multiplier = 3.0;
    int k_cap = 5;
    double gvf_cutoff = 0.9;
    // builder
    std::int64_t time_bound_us = 300'000'000;
    std::vector<std::string> service_names;  // empty = built-in default list
    // split
    double train_ratio = 0.7;
    double validation_ratio = 0.1;
    double test_ratio = 0.2;

    std::uint64_t seed = 42;

    void validate() const;
    detect::SelectKOptions select_k_options() const { return {k_cap, gvf_cutoff}; }

    std::string to_json() const;
    static PipelineConfig from_json(const std::string& text);
    // Flat key/value file with [section] headers; later keys win.
    static PipelineConfig from_ini_file(const std::string& path, PipelineConfig base);
    static PipelineConfig from_ini_file(const std::string& path);
};

inline PipelineConfig PipelineConfig::from_ini_file(const std::string& path) {
    return from_ini_file(path, PipelineConfig{});
}

// A trace plus its ground-truth sidecar, as found on disk.
struct CorpusEntry {
    std::string trace_path;
    synth::Sidecar sidecar;
};

std::vector<CorpusEntry> discover_corpus(const std::string& dir);

// Backtracked SIG built from one trace file using its sidecar targets.
graph::Sig build_from_trace(const std::string& trace_path, const std::set<std::string>& targets,
                            const std::string& graph_id, const PipelineConfig& config);

struct Bundle {
    PipelineConfig config;
    embed::Vocabulary vocab;
    embed::AlaCarteTransform transform;
    model::AutoencoderModel autoencoder;
    detect::Threshold threshold;
};

void save_bundle(const Bundle& bundle, const std::string& dir);
Bundle load_bundle(const std::string& dir);
// Hash over the manifest's per-file hashes; stable across identical runs.
std::string bundle_manifest_hash(const std::string& dir);

// Full training stage: split, featurize, train, threshold, write bundle.
Bundle train_pipeline(const PipelineConfig& config, const std::string& trace_dir,
                      const std::string& bundle_dir);

struct DetectResult {
    detect::AnomalyReport report;
    graph::Sig sig;
};

DetectResult detect_trace(const Bundle& bundle, const std::string& trace_path,
                          const std::set<std::string>& targets, const std::string& graph_id);

struct GraphOutcome {
    std::string graph_id;
    std::string template_name;
    bool labeled_malicious = false;
    double score = 0.0;
    bool flagged = false;
    // guidance (malicious graphs only)
    bool basic = false;     // top-10 process within 3 hops of labeled malware
    bool improved = false;  // top-5 within 3 hops
    bool targeted = false;  // malware in top-5, or 1 hop from a top-5 process
};

struct EvalMetrics {
    std::vector<GraphOutcome> outcomes;
    double precision = 1.0;
    double recall = 0.0;
    double accuracy = 0.0;
    double f_score = 0.0;
    double auc = 0.0;
    bool zero_positives = false;
    std::map<std::string, double> auc_per_template;
    // min malicious score / max benign score, per template
    std::map<std::string, std::pair<double, double>> margin_per_template;
    double guidance_basic = 0.0, guidance_improved = 0.0, guidance_targeted = 0.0;

    std::string to_json() const;
};

EvalMetrics eval_pipeline(const Bundle& bundle, const std::string& corpus_dir);
EvalMetrics summarize(const std::vector<GraphOutcome>& outcomes);

// Undirected hop distance from a node to the nearest labeled malicious
// entity in the SIG; -1 when unreachable.
int hops_to_malicious(const graph::Sig& sig, const graph::NodeRef& from,
                      const std::set<std::string>& malicious_ids);

double roc_auc(const std::vector<std::pair<double, bool>>& scored);  // (score, is_positive)

}  // namespace sigl::pipeline
