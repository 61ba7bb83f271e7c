#include "sigl/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace sigl::detect {

using nlohmann::json;

namespace {

std::size_t distinct_count(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
}

}  // namespace

JenksPartition jenks_breaks(const std::vector<double>& values, int k) {
    if (values.empty()) throw std::invalid_argument("jenks_breaks: empty input");
    std::size_t n = values.size();
    std::size_t distinct = distinct_count(values);
    if (k < 1 || static_cast<std::size_t>(k) > distinct)
        throw KTooLarge("jenks_breaks: k=" + std::to_string(k) + " with " + std::to_string(distinct) +
                        " distinct values");

    JenksPartition part;
    part.sorted_values = values;
    std::sort(part.sorted_values.begin(), part.sorted_values.end());
    part.k = k;
    const auto& v = part.sorted_values;

    // Prefix sums for O(1) within-class SSE.
    std::vector<double> pref(n + 1, 0.0), pref2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        pref[i + 1] = pref[i] + v[i];
        pref2[i + 1] = pref2[i] + v[i] * v[i];
    }
    auto sse = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
        double cnt = static_cast<double>(hi - lo);
        double s = pref[hi] - pref[lo];
        double s2 = pref2[hi] - pref2[lo];
        double e = s2 - s * s / cnt;
        return e > 0 ? e : 0.0;  // clamp tiny negatives from rounding
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    // dp[c][j]: min SSE partitioning the first j values into c classes.
    std::vector<std::vector<double>> dp(k + 1, std::vector<double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> arg(k + 1, std::vector<std::size_t>(n + 1, 0));
    dp[0][0] = 0.0;
    for (int c = 1; c <= k; ++c) {
        for (std::size_t j = c; j <= n; ++j) {
            for (std::size_t i = c; i <= j; ++i) {  // class c is [i-1, j)
                double cand = dp[c - 1][i - 1] + sse(i - 1, j);
                if (cand < dp[c][j]) {
                    dp[c][j] = cand;
                    arg[c][j] = i - 1;
                }
            }
        }
    }

    part.sdcm = dp[k][n];
    std::vector<std::size_t> starts(k);
    std::size_t j = n;
    for (int c = k; c >= 1; --c) {
        starts[c - 1] = arg[c][j];
        j = arg[c][j];
    }
    part.break_indices.assign(starts.begin() + 1, starts.end());

    double mean = pref[n] / static_cast<double>(n);
    part.sdam = 0.0;
    for (double x : v) part.sdam += (x - mean) * (x - mean);
    for (int c = 0; c < k; ++c) {
        std::size_t lo = starts[c];
        std::size_t hi = c + 1 < k ? starts[c + 1] : n;
        part.class_means.push_back((pref[hi] - pref[lo]) / static_cast<double>(hi - lo));
    }
    part.gvf = part.sdam == 0.0 ? 1.0 : 1.0 - part.sdcm / part.sdam;
    return part;
}

int select_k(const std::vector<double>& values, const SelectKOptions& opts) {
    if (values.empty()) throw std::invalid_argument("select_k: empty input");
    std::size_t distinct = distinct_count(values);
    if (distinct == 1) return 1;
    int cap = std::min<int>(opts.k_cap, static_cast<int>(distinct));
    for (int k = 2; k <= cap; ++k)
        if (jenks_breaks(values, k).gvf >= opts.gvf_cutoff) return k;
    return cap;
}

double max_zone_avg(const std::vector<double>& values, const SelectKOptions& opts) {
    if (values.empty()) throw std::invalid_argument("max_zone_avg: empty input");
    int k = select_k(values, opts);
    if (static_cast<std::size_t>(k) > values.size())
        return *std::max_element(values.begin(), values.end());
    JenksPartition part = jenks_breaks(values, k);
    return *std::max_element(part.class_means.begin(), part.class_means.end());
}

Threshold compute_threshold(const std::vector<std::vector<double>>& validation_losses,
                            double multiplier, const SelectKOptions& opts) {
    if (validation_losses.size() < 2)
        throw TooFewGraphs("compute_threshold: need at least 2 validation graphs");
    Threshold t;
    t.multiplier = multiplier;
    for (const auto& losses : validation_losses) t.graph_scores.push_back(max_zone_avg(losses, opts));
    double n = static_cast<double>(t.graph_scores.size());
    t.mean = std::accumulate(t.graph_scores.begin(), t.graph_scores.end(), 0.0) / n;
    double var = 0.0;
    for (double s : t.graph_scores) var += (s - t.mean) * (s - t.mean);
    t.stddev = std::sqrt(var / n);
    t.value = t.mean + multiplier * t.stddev;
    return t;
}

AnomalyReport classify_and_rank(const std::string& graph_id,
                                const std::map<graph::NodeRef, double>& process_losses,
                                const std::map<graph::NodeRef, std::string>& names,
                                const Threshold& threshold, const SelectKOptions& opts) {
    if (process_losses.empty()) throw std::invalid_argument("classify_and_rank: no process losses");
    AnomalyReport report;
    report.graph_id = graph_id;
    report.threshold = threshold.value;

    std::vector<double> losses;
    for (const auto& [node, loss] : process_losses) losses.push_back(loss);
    report.score = max_zone_avg(losses, opts);
    report.abnormal = report.score > threshold.value;

    for (const auto& [node, loss] : process_losses) {
        RankedProcess p;
        p.node = node;
        auto it = names.find(node);
        p.name = it != names.end() ? it->second : node.base_id;
        p.loss = loss;
        report.processes.push_back(p);
    }
    std::sort(report.processes.begin(), report.processes.end(),
              [](const RankedProcess& a, const RankedProcess& b) {
                  if (a.loss != b.loss) return a.loss > b.loss;
                  return a.node < b.node;
              });
    for (std::size_t i = 0; i < report.processes.size(); ++i)
        report.processes[i].rank = static_cast<int>(i + 1);
    return report;
}

std::string to_json(const AnomalyReport& report) {
    json procs = json::array();
    for (const auto& p : report.processes)
        procs.push_back({{"base_id", p.node.base_id},
                         {"version", p.node.version},
                         {"name", p.name},
                         {"loss", p.loss},
                         {"rank", p.rank}});
    json j{{"graph_id", report.graph_id},
           {"score", report.score},
           {"threshold", report.threshold},
           {"verdict", report.abnormal ? "abnormal" : "benign"},
           {"processes", procs}};
    return j.dump(2);
}

std::string to_table(const AnomalyReport& report, std::size_t top_n) {
    std::ostringstream out;
    out << "graph " << report.graph_id << "  score=" << report.score
        << "  threshold=" << report.threshold << "  verdict="
        << (report.abnormal ? "ABNORMAL" : "benign") << "\n";
    out << std::left << std::setw(6) << "rank" << std::setw(14) << "loss"
        << "process\n";
    for (const auto& p : report.processes) {
        if (static_cast<std::size_t>(p.rank) > top_n) break;
        out << std::left << std::setw(6) << p.rank << std::setw(14) << p.loss << p.name << " (v"
            << p.node.version << ")\n";
    }
    return out.str();
}

std::string threshold_to_json(const Threshold& t) {
    json j{{"value", t.value},
           {"mean", t.mean},
           {"stddev", t.stddev},
           {"multiplier", t.multiplier},
           {"graph_scores", t.graph_scores}};
    return j.dump(2);
}

Threshold threshold_from_json(const std::string& text) {
    json j = json::parse(text);
    Threshold t;
    t.value = j.at("value").get<double>();
    t.mean = j.at("mean").get<double>();
    t.stddev = j.at("stddev").get<double>();
    t.multiplier = j.at("multiplier").get<double>();
    t.graph_scores = j.at("graph_scores").get<std::vector<double>>();
    return t;
}

}  // namespace sigl::detect
