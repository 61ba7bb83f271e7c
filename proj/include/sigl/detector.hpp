#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sigl/sig.hpp"

namespace sigl::detect {

struct KTooLarge : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct TooFewGraphs : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct JenksPartition {
    std::vector<double> sorted_values;
    int k = 1;
    // break_indices[i] = first position (into sorted_values) of class i+1;
    // class 0 starts at 0. Size k-1.
    std::vector<std::size_t> break_indices;
    std::vector<double> class_means;
    double sdcm = 0.0;  // sum of within-class squared deviations
    double sdam = 0.0;  // total squared deviation from the global mean
    double gvf = 0.0;   // 1 - sdcm/sdam (1 when sdam == 0)
};

// Exact optimum over all contiguous k-partitions of the sorted values
// (Fisher's dynamic program, not the move heuristic).
JenksPartition jenks_breaks(const std::vector<double>& values, int k);

struct SelectKOptions {
    int k_cap = 5;
    double gvf_cutoff = 0.9;
};

// Smallest k in 2..min(cap, #distinct) reaching the GVF cutoff; the cap if
// none does; 1 when all values are equal.
int select_k(const std::vector<double>& values, const SelectKOptions& opts = {});

double max_zone_avg(const std::vector<double>& values, const SelectKOptions& opts = {});

struct Threshold {
    double value = 0.0;
    double mean = 0.0;
    double stddev = 0.0;  // population
    double multiplier = 3.0;
    std::vector<double> graph_scores;  // per-validation-graph max zone averages
};

Threshold compute_threshold(const std::vector<std::vector<double>>& validation_losses,
                            double multiplier = 3.0, const SelectKOptions& opts = {});

struct RankedProcess {
    graph::NodeRef node;
    std::string name;
    double loss = 0.0;
    int rank = 0;
};

struct AnomalyReport {
    std::string graph_id;
    double score = 0.0;  // max zone average over process losses
    double threshold = 0.0;
    bool abnormal = false;  // score strictly greater than threshold
    std::vector<RankedProcess> processes;
};

AnomalyReport classify_and_rank(const std::string& graph_id,
                                const std::map<graph::NodeRef, double>& process_losses,
                                const std::map<graph::NodeRef, std::string>& names,
                                const Threshold& threshold, const SelectKOptions& opts = {});

std::string to_json(const AnomalyReport& report);
std::string to_table(const AnomalyReport& report, std::size_t top_n = 10);

std::string threshold_to_json(const Threshold& t);
Threshold threshold_from_json(const std::string& text);

}  // namespace sigl::detect
