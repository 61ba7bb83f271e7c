#include "sigl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "sigl/rng.hpp"

namespace sigl::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void PipelineConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (v <= 0) throw std::invalid_argument(std::string("config: ") + name + " must be positive");
    };
    positive(dim, "dim");
    positive(window, "window");
    positive(walks_per_node, "walks_per_node");
    positive(walk_length, "walk_length");
    positive(negatives, "negatives");
    positive(embed_epochs, "embed_epochs");
    positive(embed_learning_rate, "embed_learning_rate");
    positive(hidden, "hidden");
    positive(epochs, "epochs");
    positive(batch_size, "batch_size");
    positive(threshold_multiplier, "threshold_multiplier");
    positive(k_cap, "k_cap");
    positive(gvf_cutoff, "gvf_cutoff");
    positive(time_bound_us, "time_bound_us");
    positive(train_ratio, "train_ratio");
    positive(validation_ratio, "validation_ratio");
    if (learning_rate < 0) throw std::invalid_argument("config: learning_rate must be >= 0");
    if (trim_fraction < 0 || trim_fraction >= 0.5)
        throw std::invalid_argument("config: trim_fraction must be in [0, 0.5)");
    if (alacarte_lambda < 0) throw std::invalid_argument("config: alacarte_lambda must be >= 0");
    if (test_ratio < 0) throw std::invalid_argument("config: test_ratio must be >= 0");
    if (train_ratio + validation_ratio + test_ratio > 1.0 + 1e-9)
        throw std::invalid_argument("config: split ratios must sum to <= 1");
}

std::string PipelineConfig::to_json() const {
    json j{{"dim", dim},
           {"window", window},
           {"walks_per_node", walks_per_node},
           {"walk_length", walk_length},
           {"negatives", negatives},
           {"embed_epochs", embed_epochs},
           {"embed_learning_rate", embed_learning_rate},
           {"alacarte_lambda", alacarte_lambda},
           {"hidden", hidden},
           {"epochs", epochs},
           {"batch_size", batch_size},
           {"learning_rate", learning_rate},
           {"trim_fraction", trim_fraction},
           {"threshold_multiplier", threshold_multiplier},
           {"k_cap", k_cap},
           {"gvf_cutoff", gvf_cutoff},
           {"time_bound_us", time_bound_us},
           {"service_names", service_names},
           {"train_ratio", train_ratio},
           {"validation_ratio", validation_ratio},
           {"test_ratio", test_ratio},
           {"seed", seed}};
    return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    PipelineConfig c;
    c.dim = j.at("dim").get<int>();
    c.window = j.at("window").get<int>();
    c.walks_per_node = j.at("walks_per_node").get<int>();
    c.walk_length = j.at("walk_length").get<int>();
    c.negatives = j.at("negatives").get<int>();
    c.embed_epochs = j.at("embed_epochs").get<int>();
    c.embed_learning_rate = j.at("embed_learning_rate").get<double>();
    c.alacarte_lambda = j.at("alacarte_lambda").get<double>();
    c.hidden = j.at("hidden").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.trim_fraction = j.at("trim_fraction").get<double>();
    c.threshold_multiplier = j.at("threshold_multiplier").get<double>();
    c.k_cap = j.at("k_cap").get<int>();
    c.gvf_cutoff = j.at("gvf_cutoff").get<double>();
    c.time_bound_us = j.at("time_bound_us").get<std::int64_t>();
    c.service_names = j.at("service_names").get<std::vector<std::string>>();
    c.train_ratio = j.at("train_ratio").get<double>();
    c.validation_ratio = j.at("validation_ratio").get<double>();
    c.test_ratio = j.at("test_ratio").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
}

PipelineConfig PipelineConfig::from_ini_file(const std::string& path, PipelineConfig base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto strip = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        if (line.front() == '[') continue;  // sections are informational
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = strip(line.substr(0, eq));
        std::string value = strip(line.substr(eq + 1));

        auto as_int = [&] { return std::stoi(value); };
        auto as_double = [&] { return std::stod(value); };
        if (key == "dim") base.dim = as_int();
        else if (key == "window") base.window = as_int();
        else if (key == "walks_per_node") base.walks_per_node = as_int();
        else if (key == "walk_length") base.walk_length = as_int();
        else if (key == "negatives") base.negatives = as_int();
        else if (key == "embed_epochs") base.embed_epochs = as_int();
        else if (key == "embed_learning_rate") base.embed_learning_rate = as_double();
        else if (key == "alacarte_lambda") base.alacarte_lambda = as_double();
        else if (key == "hidden") base.hidden = as_int();
        else if (key == "epochs") base.epochs = as_int();
        else if (key == "batch_size") base.batch_size = as_int();
        else if (key == "learning_rate") base.learning_rate = as_double();
        else if (key == "trim_fraction") base.trim_fraction = as_double();
        else if (key == "threshold_multiplier") base.threshold_multiplier = as_double();
        else if (key == "k_cap") base.k_cap = as_int();
        else if (key == "gvf_cutoff") base.gvf_cutoff = as_double();
        else if (key == "time_bound_us") base.time_bound_us = std::stoll(value);
        else if (key == "train_ratio") base.train_ratio = as_double();
        else if (key == "validation_ratio") base.validation_ratio = as_double();
        else if (key == "test_ratio") base.test_ratio = as_double();
        else if (key == "seed") base.seed = std::stoull(value);
        else if (key == "service_names") {
            base.service_names.clear();
            std::stringstream ss(value);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) base.service_names.push_back(strip(item));
        } else {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return base;
}

std::vector<CorpusEntry> discover_corpus(const std::string& dir) {
    std::vector<CorpusEntry> entries;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<fs::path> traces;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".jsonl") traces.push_back(e.path());
    std::sort(traces.begin(), traces.end());
    for (const auto& p : traces) {
        fs::path sidecar = p;
        sidecar.replace_extension(".labels.json");
        if (!fs::exists(sidecar))
            throw std::runtime_error("missing label sidecar for " + p.string());
        entries.push_back({p.string(), synth::read_sidecar(sidecar.string())});
    }
    return entries;
}

graph::Sig build_from_trace(const std::string& trace_path, const std::set<std::string>& targets,
                            const std::string& graph_id, const PipelineConfig& config) {
    auto parsed = audit::parse_events_file(trace_path);
    graph::Sig full = graph::build_dependency_graph(parsed.events);
    full.graph_id = graph_id;
    graph::BacktrackOptions opts;
    opts.time_bound_us = config.time_bound_us;
    opts.service_names =
        config.service_names.empty() ? graph::default_service_names() : config.service_names;
    return graph::backtrack(full, targets, opts);
}

namespace {

std::string hash_hex(const std::string& bytes) {
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << fnv1a(bytes);
    return out.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

constexpr int kBundleFormatVersion = 1;

}  // namespace

void save_bundle(const Bundle& bundle, const std::string& dir) {
    fs::create_directories(dir);
    fs::path root(dir);
    {
        std::ofstream out(root / "config.json");
        out << bundle.config.to_json() << '\n';
    }
    {
        std::ofstream out(root / "vocab.json");
        out << bundle.vocab.to_json() << '\n';
    }
    {
        std::ofstream out(root / "alacarte.json");
        out << bundle.transform.to_json() << '\n';
    }
    model::save_model(bundle.autoencoder, (root / "model.bin").string());
    {
        std::ofstream out(root / "threshold.json");
        out << detect::threshold_to_json(bundle.threshold) << '\n';
    }
    json files = json::object();
    for (const char* name : {"config.json", "vocab.json", "alacarte.json", "model.bin", "threshold.json"})
        files[name] = hash_hex(read_file(root / name));
    json manifest{{"format_version", kBundleFormatVersion}, {"seed", bundle.config.seed}, {"files", files}};
    std::ofstream out(root / "manifest.json");
    out << manifest.dump(2) << '\n';
}

Bundle load_bundle(const std::string& dir) {
    fs::path root(dir);
    if (!fs::exists(root / "manifest.json"))
        throw BundleVersionMismatch("no manifest.json in " + dir);
    json manifest = json::parse(read_file(root / "manifest.json"));
    if (manifest.at("format_version").get<int>() != kBundleFormatVersion)
        throw BundleVersionMismatch("bundle format version mismatch in " + dir);
    for (const auto& [name, expected] : manifest.at("files").items()) {
        std::string actual = hash_hex(read_file(root / name));
        if (actual != expected.get<std::string>())
            throw BundleVersionMismatch("bundle file hash mismatch: " + name);
    }
    Bundle b;
    b.config = PipelineConfig::from_json(read_file(root / "config.json"));
    b.vocab = embed::Vocabulary::from_json(read_file(root / "vocab.json"));
    b.transform = embed::AlaCarteTransform::from_json(read_file(root / "alacarte.json"));
    b.autoencoder = model::load_model((root / "model.bin").string());
    b.threshold = detect::threshold_from_json(read_file(root / "threshold.json"));
    return b;
}

std::string bundle_manifest_hash(const std::string& dir) {
    return hash_hex(read_file(fs::path(dir) / "manifest.json"));
}

Bundle train_pipeline(const PipelineConfig& config, const std::string& trace_dir,
                      const std::string& bundle_dir) {
    config.validate();
    auto corpus_entries = discover_corpus(trace_dir);
    if (corpus_entries.size() < 5)
        throw InsufficientData("training needs at least 5 traces, found " +
                               std::to_string(corpus_entries.size()));

    std::vector<graph::Sig> sigs;
    sigs.reserve(corpus_entries.size());
    for (const auto& entry : corpus_entries)
        sigs.push_back(build_from_trace(entry.trace_path, entry.sidecar.targets,
                                        entry.sidecar.graph_id, config));

    // Deterministic split.
    std::vector<std::size_t> perm(sigs.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng split_rng(Rng::derive(config.seed, 0x5714ULL));
    split_rng.shuffle(perm);
    auto n = sigs.size();
    auto n_val = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(config.validation_ratio * n)));
    auto n_train = std::min<std::size_t>(n - n_val, static_cast<std::size_t>(std::llround(config.train_ratio * n)));
    if (n_train == 0) throw InsufficientData("empty training split");

    std::vector<const graph::Sig*> train_sigs, val_sigs;
    for (std::size_t i = 0; i < n_train; ++i) train_sigs.push_back(&sigs[perm[i]]);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) val_sigs.push_back(&sigs[perm[i]]);

    // Featurization corpus from the training graphs only.
    embed::Corpus walk_corpus;
    for (const graph::Sig* sig : train_sigs) {
        auto walks = embed::generate_walks(*sig, config.walks_per_node, config.walk_length,
                                           Rng::derive(config.seed, fnv1a(sig->graph_id)));
        embed::append_walk_sentences(walk_corpus, *sig, walks);
    }
    embed::VocabTrainParams vparams;
    vparams.dim = config.dim;
    vparams.window = config.window;
    vparams.epochs = config.embed_epochs;
    vparams.negatives = config.negatives;
    vparams.learning_rate = config.embed_learning_rate;
    vparams.seed = config.seed;
    embed::Vocabulary vocab = embed::train_component_vocab(walk_corpus, vparams);
    embed::AlaCarteTransform transform =
        embed::fit_alacarte(vocab, walk_corpus, config.window, config.alacarte_lambda);

    auto embed_all = [&](const std::vector<const graph::Sig*>& graphs) {
        std::vector<model::Embeddings> out;
        out.reserve(graphs.size());
        for (const graph::Sig* sig : graphs)
            out.push_back(embed::embed_graph(vocab, transform, *sig, config.walks_per_node,
                                             config.walk_length, config.window, config.seed));
        return out;
    };
    auto train_embeddings = embed_all(train_sigs);
    auto val_embeddings = embed_all(val_sigs);

    model::AutoencoderModel autoencoder =
        model::init_model(config.dim, config.hidden, graph::kEdgeTypeCount, config.seed);
    std::vector<model::GraphSample> train_samples, val_samples;
    for (std::size_t i = 0; i < train_sigs.size(); ++i)
        train_samples.push_back({train_sigs[i], &train_embeddings[i]});
    for (std::size_t i = 0; i < val_sigs.size(); ++i)
        val_samples.push_back({val_sigs[i], &val_embeddings[i]});

    model::TrainParams tparams;
    tparams.epochs = config.epochs;
    tparams.batch_size = config.batch_size;
    tparams.learning_rate = config.learning_rate;
    tparams.trim_fraction = config.trim_fraction;
    tparams.seed = config.seed;
    model::train(autoencoder, train_samples, val_samples, tparams);

    std::vector<std::vector<double>> val_losses;
    for (const auto& sample : val_samples) {
        auto losses = model::node_losses(autoencoder, *sample.sig, *sample.embeddings);
        std::vector<double> flat;
        for (const auto& [ref, l] : losses) flat.push_back(l);
        if (!flat.empty()) val_losses.push_back(std::move(flat));
    }
    detect::Threshold threshold = detect::compute_threshold(val_losses, config.threshold_multiplier,
                                                            config.select_k_options());

    Bundle bundle{config, std::move(vocab), std::move(transform), std::move(autoencoder), threshold};
    if (!bundle_dir.empty()) save_bundle(bundle, bundle_dir);
    return bundle;
}

DetectResult detect_trace(const Bundle& bundle, const std::string& trace_path,
                          const std::set<std::string>& targets, const std::string& graph_id) {
    const PipelineConfig& config = bundle.config;
    graph::Sig sig = build_from_trace(trace_path, targets, graph_id, config);
    if (sig.empty()) throw InsufficientData("trace produced an empty SIG: " + trace_path);

    auto embeddings = embed::embed_graph(bundle.vocab, bundle.transform, sig, config.walks_per_node,
                                         config.walk_length, config.window, config.seed);
    auto losses = model::node_losses(bundle.autoencoder, sig, embeddings);
    if (losses.empty()) throw InsufficientData("SIG has no process nodes: " + trace_path);

    std::map<graph::NodeRef, std::string> names;
    for (const auto& [ref, loss] : losses) names[ref] = sig.attr(ref).name;
    DetectResult result;
    result.report = detect::classify_and_rank(graph_id, losses, names, bundle.threshold,
                                              config.select_k_options());
    result.sig = std::move(sig);
    return result;
}

int hops_to_malicious(const graph::Sig& sig, const graph::NodeRef& from,
                      const std::set<std::string>& malicious_ids) {
    if (malicious_ids.count(from.base_id)) return 0;
    std::map<graph::NodeRef, std::vector<graph::NodeRef>> adj;
    for (const auto& e : sig.edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }
    std::map<graph::NodeRef, int> dist{{from, 0}};
    std::deque<graph::NodeRef> queue{from};
    while (!queue.empty()) {
        graph::NodeRef cur = queue.front();
        queue.pop_front();
        for (const auto& next : adj[cur]) {
            if (dist.count(next)) continue;
            dist[next] = dist[cur] + 1;
            if (malicious_ids.count(next.base_id)) return dist[next];
            queue.push_back(next);
        }
    }
    return -1;
}

double roc_auc(const std::vector<std::pair<double, bool>>& scored) {
    std::vector<std::pair<double, bool>> sorted = scored;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // Mann-Whitney with average ranks for ties.
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0, n_neg = 0, i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
        double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (sorted[k].second) pos_rank_sum += avg_rank;
        i = j;
    }
    for (const auto& [score, pos] : sorted) (pos ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return 1.0;
    double u = pos_rank_sum - static_cast<double>(n_pos) * (n_pos + 1) / 2.0;
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

EvalMetrics summarize(const std::vector<GraphOutcome>& outcomes) {
    EvalMetrics m;
    m.outcomes = outcomes;
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::vector<std::pair<double, bool>> scored;
    std::map<std::string, std::vector<std::pair<double, bool>>> per_template;
    std::size_t detected_mal = 0, basic = 0, improved = 0, targeted = 0;

    for (const auto& o : outcomes) {
        scored.push_back({o.score, o.labeled_malicious});
        per_template[o.template_name].push_back({o.score, o.labeled_malicious});
        if (o.labeled_malicious && o.flagged) ++tp;
        else if (o.labeled_malicious) ++fn;
        else if (o.flagged) ++fp;
        else ++tn;
        if (o.labeled_malicious && o.flagged) {
            ++detected_mal;
            if (o.basic) ++basic;
            if (o.improved) ++improved;
            if (o.targeted) ++targeted;
        }

        auto& [min_mal, max_ben] = m.margin_per_template.try_emplace(
            o.template_name, std::pair<double, double>{std::numeric_limits<double>::infinity(),
                                                       -std::numeric_limits<double>::infinity()}).first->second;
        if (o.labeled_malicious) min_mal = std::min(min_mal, o.score);
        else max_ben = std::max(max_ben, o.score);
    }

    m.zero_positives = (tp + fp) == 0;
    m.precision = m.zero_positives ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    m.recall = (tp + fn) == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.accuracy = outcomes.empty() ? 0.0
                                  : static_cast<double>(tp + tn) / static_cast<double>(outcomes.size());
    m.f_score = (m.precision + m.recall) == 0.0
                    ? 0.0
                    : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.auc = roc_auc(scored);
    for (const auto& [tmpl, s] : per_template) m.auc_per_template[tmpl] = roc_auc(s);
    if (detected_mal > 0) {
        m.guidance_basic = static_cast<double>(basic) / detected_mal;
        m.guidance_improved = static_cast<double>(improved) / detected_mal;
        m.guidance_targeted = static_cast<double>(targeted) / detected_mal;
    }
    return m;
}

EvalMetrics eval_pipeline(const Bundle& bundle, const std::string& corpus_dir) {
    auto entries = discover_corpus(corpus_dir);
    if (entries.empty()) throw InsufficientData("empty evaluation corpus: " + corpus_dir);

    std::vector<GraphOutcome> outcomes;
    for (const auto& entry : entries) {
        DetectResult res = detect_trace(bundle, entry.trace_path, entry.sidecar.targets,
                                        entry.sidecar.graph_id);
        GraphOutcome o;
        o.graph_id = entry.sidecar.graph_id;
        o.template_name = entry.sidecar.template_name;
        o.labeled_malicious = entry.sidecar.label == "malicious";
        o.score = res.report.score;
        o.flagged = res.report.abnormal;

        if (o.labeled_malicious) {
            std::set<std::string> mal_ids(entry.sidecar.malicious_ids.begin(),
                                          entry.sidecar.malicious_ids.end());
            for (const auto& proc : res.report.processes) {
                if (proc.rank > 10) break;
                int hops = hops_to_malicious(res.sig, proc.node, mal_ids);
                if (hops < 0) continue;
                if (hops <= 3) {
                    o.basic = true;
                    if (proc.rank <= 5) o.improved = true;
                }
                if (proc.rank <= 5 && hops <= 1) o.targeted = true;
            }
        }
        outcomes.push_back(o);
    }
    return summarize(outcomes);
}

std::string EvalMetrics::to_json() const {
    json jout = json::array();
    for (const auto& o : outcomes)
        jout.push_back({{"graph_id", o.graph_id},
                        {"template", o.template_name},
                        {"label", o.labeled_malicious ? "malicious" : "benign"},
                        {"score", o.score},
                        {"verdict", o.flagged ? "abnormal" : "benign"},
                        {"basic", o.basic},
                        {"improved", o.improved},
                        {"targeted", o.targeted}});
    json margins = json::object();
    for (const auto& [tmpl, mm] : margin_per_template)
        margins[tmpl] = {{"min_malicious_score", mm.first}, {"max_benign_score", mm.second}};
    json j{{"precision", precision},
           {"recall", recall},
           {"accuracy", accuracy},
           {"f_score", f_score},
           {"auc", auc},
           {"zero_positives", zero_positives},
           {"auc_per_template", auc_per_template},
           {"margins_per_template", margins},
           {"guidance",
            {{"basic", guidance_basic}, {"improved", guidance_improved}, {"targeted", guidance_targeted}}},
           {"graphs", jout}};
    return j.dump(2);
}

}  // namespace sigl::pipeline
