#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "sigl/detector.hpp"
#include "sigl/rng.hpp"

using namespace sigl;
using namespace sigl::detect;

namespace {

// Minimum SDCM over every contiguous k-partition of the sorted values,
// enumerated directly. Exponential, fine for n <= 12.
double exhaustive_sdcm(std::vector<double> v, int k) {
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    auto sse = [&](std::size_t lo, std::size_t hi) {
        double mean = 0.0;
        for (std::size_t i = lo; i < hi; ++i) mean += v[i];
        mean /= static_cast<double>(hi - lo);
        double e = 0.0;
        for (std::size_t i = lo; i < hi; ++i) e += (v[i] - mean) * (v[i] - mean);
        return e;
    };
    double best = std::numeric_limits<double>::infinity();
    // choose k-1 break positions from 1..n-1
    std::vector<std::size_t> breaks(k - 1);
    auto recurse = [&](auto&& self, int idx, std::size_t lo) -> void {
        if (idx == k - 1) {
            double total = 0.0;
            std::size_t prev = 0;
            for (std::size_t b : breaks) {
                total += sse(prev, b);
                prev = b;
            }
            total += sse(prev, n);
            best = std::min(best, total);
            return;
        }
        for (std::size_t b = lo; b + static_cast<std::size_t>(k - 2 - idx) < n; ++b) {
            breaks[idx] = b;
            self(self, idx + 1, b + 1);
        }
    };
    if (k == 1) return sse(0, n);
    recurse(recurse, 0, 1);
    return best;
}

std::vector<double> random_values(Rng& rng, std::size_t n, bool with_ties) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = with_ties ? static_cast<double>(rng.next_below(5)) : rng.uniform(-10.0, 10.0);
    }
    return v;
}

}  // namespace

TEST_CASE("jenks matches the exhaustive optimum on 1000 random cases") {
    Rng rng(20240811);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 2 + rng.next_below(11);  // 2..12
        bool ties = trial % 3 == 0;
        auto v = random_values(rng, n, ties);
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        std::size_t distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
        for (int k = 1; static_cast<std::size_t>(k) <= distinct; ++k) {
            double oracle = exhaustive_sdcm(v, k);
            auto part = jenks_breaks(v, k);
            CHECK(part.sdcm == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
}

TEST_CASE("jenks worked example") {
    std::vector<double> v{1.0, 1.1, 1.2, 5.0, 5.1, 9.7};
    auto part = jenks_breaks(v, 3);
    REQUIRE(part.break_indices.size() == 2);
    CHECK(part.break_indices[0] == 3);
    CHECK(part.break_indices[1] == 5);
    CHECK(part.class_means[0] == doctest::Approx(1.1));
    CHECK(part.class_means[1] == doctest::Approx(5.05));
    CHECK(part.class_means[2] == doctest::Approx(9.7));
    CHECK(part.gvf > 0.99);
}

TEST_CASE("k larger than distinct count throws") {
    CHECK_THROWS_AS((void)jenks_breaks({1.0, 1.0, 2.0}, 3), KTooLarge);
    CHECK_THROWS_AS((void)jenks_breaks({1.0}, 0), KTooLarge);
}

TEST_CASE("partition quality is translation invariant") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        auto v = random_values(rng, 8, false);
        auto shifted = v;
        for (auto& x : shifted) x += 1000.0;
        for (int k = 1; k <= 4; ++k) {
            auto a = jenks_breaks(v, k);
            auto b = jenks_breaks(shifted, k);
            CHECK(a.break_indices == b.break_indices);
            // prefix-sum cancellation after the shift costs a few digits
            CHECK(a.sdcm == doctest::Approx(b.sdcm).epsilon(1e-6));
        }
    }
}

TEST_CASE("select_k edge cases") {
    CHECK(select_k({3.0, 3.0, 3.0}) == 1);
    CHECK(select_k({1.0, 2.0}) == 2);
    // widely separated clusters satisfy the cutoff at k=2
    CHECK(select_k({0.0, 0.1, 10.0, 10.1}) == 2);
    // cap limits k even when the cutoff is never reached
    SelectKOptions tight;
    tight.k_cap = 3;
    tight.gvf_cutoff = 1.0 + 1e-9;  // unreachable
    CHECK(select_k({1.0, 2.0, 4.0, 8.0, 16.0, 32.0}, tight) == 3);
}

TEST_CASE("max_zone_avg picks the top cluster mean") {
    CHECK(max_zone_avg({0.0, 0.1, 10.0, 10.2}) == doctest::Approx(10.1));
    CHECK(max_zone_avg({5.0, 5.0, 5.0}) == doctest::Approx(5.0));
}

TEST_CASE("compute_threshold is mean + m * population std of graph scores") {
    std::vector<std::vector<double>> losses{{1.0, 1.0}, {3.0, 3.0}};
    auto t = compute_threshold(losses, 3.0);
    CHECK(t.graph_scores == std::vector<double>{1.0, 3.0});
    CHECK(t.mean == doctest::Approx(2.0));
    CHECK(t.stddev == doctest::Approx(1.0));
    CHECK(t.value == doctest::Approx(5.0));
    CHECK_THROWS_AS((void)compute_threshold({{1.0}}, 3.0), TooFewGraphs);
}

TEST_CASE("classification uses a strict comparison and deterministic ranks") {
    Threshold t;
    t.value = 2.0;
    std::map<graph::NodeRef, double> losses{{{"a", 0}, 2.0}, {{"b", 0}, 2.0}};
    std::map<graph::NodeRef, std::string> names{{{"a", 0}, "a.exe"}, {{"b", 0}, "b.exe"}};

    auto at_threshold = classify_and_rank("g", losses, names, t);
    CHECK(at_threshold.score == doctest::Approx(2.0));
    CHECK_FALSE(at_threshold.abnormal);  // equality is benign

    losses[{"b", 0}] = 2.5;
    auto above = classify_and_rank("g", losses, names, t);
    CHECK(above.abnormal);
    REQUIRE(above.processes.size() == 2);
    CHECK(above.processes[0].name == "b.exe");
    CHECK(above.processes[0].rank == 1);
    CHECK(above.processes[1].rank == 2);

    // ties break by node ref
    losses[{"b", 0}] = 2.0;
    auto tied = classify_and_rank("g", losses, names, t);
    CHECK(tied.processes[0].name == "a.exe");
}

TEST_CASE("threshold JSON round trip") {
    Threshold t;
    t.value = 1.5;
    t.mean = 1.0;
    t.stddev = 1.0 / 6.0;
    t.multiplier = 3.0;
    t.graph_scores = {0.9, 1.1};
    auto back = threshold_from_json(threshold_to_json(t));
    CHECK(back.value == t.value);
    CHECK(back.stddev == t.stddev);
    CHECK(back.graph_scores == t.graph_scores);
}
