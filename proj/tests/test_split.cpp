#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "fgtt/split.hpp"
#include "helpers.hpp"

using namespace fgtt;
using namespace fgtt::data;

namespace {

std::vector<int> mixed_labels(std::size_t n0, std::size_t n1, std::size_t n2, std::uint64_t seed) {
    std::vector<int> labels;
    labels.insert(labels.end(), n0, 0);
    labels.insert(labels.end(), n1, 1);
    labels.insert(labels.end(), n2, 2);
    Rng rng(seed);
    rng.shuffle(labels);
    return labels;
}

void check_partition(const SplitIndices& sp, std::size_t n) {
    std::set<std::size_t> seen;
    for (const auto* part : {&sp.train, &sp.validation, &sp.test})
        for (std::size_t r : *part) {
            CHECK(r < n);
            CHECK(seen.insert(r).second);  // disjoint
        }
    CHECK(seen.size() == n);  // exhaustive
}

std::vector<std::size_t> split_class_counts(const std::vector<std::size_t>& part,
                                            const std::vector<int>& labels, std::size_t C) {
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t r : part) ++counts[static_cast<std::size_t>(labels[r])];
    return counts;
}

}  // namespace

TEST_CASE("stratified_split reproduces the reference 6026/392/392 partition") {
    auto labels = mixed_labels(3950, 1975, 885, 1);
    SplitIndices sp = stratified_split(labels, {0.885, 0.0575, 0.0575}, 42);
    CHECK(sp.train.size() == 6026);
    CHECK(sp.validation.size() == 392);
    CHECK(sp.test.size() == 392);
    check_partition(sp, labels.size());

    // per-class deviation from the 58/29/13 mix at most 1 in every split
    const std::vector<std::size_t> class_totals{3950, 1975, 885};
    const double n = 6810.0;
    for (const auto* part : {&sp.train, &sp.validation, &sp.test}) {
        auto counts = split_class_counts(*part, labels, 3);
        for (std::size_t c = 0; c < 3; ++c) {
            const double quota = static_cast<double>(class_totals[c]) *
                                 static_cast<double>(part->size()) / n;
            CHECK(std::abs(static_cast<double>(counts[c]) - quota) <= 1.0);
        }
    }
}

TEST_CASE("small exact case: 10 rows at (0.8, 0.1, 0.1)") {
    auto labels = mixed_labels(5, 5, 0, 3);
    labels.resize(10);
    SplitIndices sp = stratified_split(labels, {0.8, 0.1, 0.1}, 7);
    CHECK(sp.train.size() == 8);
    CHECK(sp.validation.size() == 1);
    CHECK(sp.test.size() == 1);
    check_partition(sp, 10);
}

TEST_CASE("stratified_split is deterministic per seed") {
    auto labels = mixed_labels(120, 60, 20, 5);
    SplitIndices a = stratified_split(labels, {0.7, 0.15, 0.15}, 11);
    SplitIndices b = stratified_split(labels, {0.7, 0.15, 0.15}, 11);
    CHECK(a.train == b.train);
    CHECK(a.validation == b.validation);
    CHECK(a.test == b.test);
    SplitIndices c = stratified_split(labels, {0.7, 0.15, 0.15}, 12);
    CHECK(a.train != c.train);
}

TEST_CASE("stratified_split input validation") {
    auto labels = mixed_labels(10, 10, 10, 2);
    CHECK_THROWS_AS(stratified_split(labels, {0.5, 0.25, 0.3}, 1), contract_error);
    CHECK_THROWS_AS(stratified_split(labels, {1.0, 0.0, 0.0}, 1), contract_error);
    CHECK_THROWS_AS(stratified_split({}, {0.8, 0.1, 0.1}, 1), contract_error);
    // a class with fewer rows than nonzero splits
    std::vector<int> tiny{0, 0, 0, 0, 0, 0, 1, 1};
    tiny.push_back(2);  // class 2 has a single row
    CHECK_THROWS_AS(stratified_split(tiny, {0.5, 0.25, 0.25}, 1), data_error);
}

TEST_CASE("property: random mixes stay within quota and cover all rows") {
    Rng rng(2024);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n0 = 20 + rng.below(200), n1 = 20 + rng.below(150), n2 = 20 + rng.below(80);
        auto labels = mixed_labels(n0, n1, n2, rng.next_u64());
        double r1 = 0.05 + 0.2 * rng.unit(), r2 = 0.05 + 0.2 * rng.unit();
        std::array<double, 3> ratios{1.0 - r1 - r2, r1, r2};
        SplitIndices sp = stratified_split(labels, ratios, rng.next_u64());
        check_partition(sp, labels.size());
        const double n = static_cast<double>(labels.size());
        const std::array<std::size_t, 3> class_totals{n0, n1, n2};
        for (const auto* part : {&sp.train, &sp.validation, &sp.test}) {
            auto counts = split_class_counts(*part, labels, 3);
            for (std::size_t c = 0; c < 3; ++c) {
                const double quota = static_cast<double>(class_totals[c]) *
                                     static_cast<double>(part->size()) / n;
                CHECK(std::abs(static_cast<double>(counts[c]) - quota) <= 1.0);
            }
        }
    }
}

TEST_CASE("stratified folds are balanced and stratified") {
    auto labels = mixed_labels(58, 29, 13, 9);
    auto folds = stratified_folds(labels, 5, 77);
    REQUIRE(folds.size() == 5);
    std::size_t total = 0;
    for (const auto& f : folds) {
        CHECK(f.size() == 20);
        total += f.size();
        auto counts = split_class_counts(f, labels, 3);
        CHECK(std::abs(static_cast<double>(counts[0]) - 58.0 / 5.0) <= 1.0);
        CHECK(std::abs(static_cast<double>(counts[1]) - 29.0 / 5.0) <= 1.0);
        CHECK(std::abs(static_cast<double>(counts[2]) - 13.0 / 5.0) <= 1.0);
    }
    CHECK(total == 100);
    // identical for the same seed
    auto again = stratified_folds(labels, 5, 77);
    CHECK(folds == again);
    // class smaller than k
    std::vector<int> tiny{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    tiny.push_back(2);
    CHECK_THROWS_AS(stratified_folds(tiny, 5, 1), data_error);
}

TEST_CASE("split file round-trip") {
    auto dir = testutil::scratch_dir("splitio");
    auto labels = mixed_labels(40, 25, 12, 4);
    SplitIndices sp = stratified_split(labels, {0.6, 0.2, 0.2}, 5);
    save_splits((dir / "splits.csv").string(), sp, labels);
    SplitIndices back = load_splits((dir / "splits.csv").string());
    CHECK(back.train == sp.train);
    CHECK(back.validation == sp.validation);
    CHECK(back.test == sp.test);
}
