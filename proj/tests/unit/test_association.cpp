#include "auprobe/association.hpp"
#include "auprobe/error.hpp"

#include "support/oracles.hpp"
#include "support/scratch.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

using namespace auprobe;

namespace {

std::vector<double> random_list(std::mt19937_64& rng, std::size_t n, double hi = 5) {
    std::uniform_real_distribution<double> d(0, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

struct Fixture {
    Manifest manifest;
    ActivationDB db;
};

// Images 0..k-1 carry the unit; map `detector` responds only to them.
Fixture detector_fixture(std::size_t images, std::size_t with_au, std::size_t maps, std::size_t detector) {
    Fixture f;
    f.db = ActivationDB(images, maps, Provenance{"c", "m", "train", 1});
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> noise(0, 0.2);
    for (std::size_t i = 0; i < images; ++i) {
        std::set<int> aus;
        if (i < with_au) aus.insert(4);
        if (i % 2) aus.insert(9);
        f.manifest.rows.push_back(ManifestRow{"x.png", "a", aus, "", "", std::nullopt});
        for (std::size_t m = 0; m < maps; ++m) {
            const double v = noise(rng) + (m == detector && i < with_au ? 3.0 : 0.0);
            f.db.record(i, m) = ActivationRecord{i, m, real(v), 0, 0};
        }
    }
    return f;
}

}  // namespace

TEST_CASE("kl_term matches hand evaluation") {
    // 0.5 ln(0.5/0.25) + 0.5 ln(0.5/0.75) = 0.5 ln(4/3)
    CHECK(kl_term({0.5, 0.5}, {0.25, 0.75}) == doctest::Approx(0.5 * std::log(4.0 / 3.0)).epsilon(1e-14));
    CHECK(kl_term({2, 1}, {2, 1}) == 0);
    // A silent map floors to epsilon: 1 * ln(1 / 1e-8).
    CHECK(kl_term({1}, {0}) == doctest::Approx(std::log(1e8)).epsilon(1e-12));
    CHECK(kl_term({0}, {1}) == doctest::Approx(1e-8 * std::log(1e-8)).epsilon(1e-9));
    CHECK(kl_term({0, 0}, {0, 0}) == 0);
}

TEST_CASE("kl_term agrees with a long-double reference on random lists") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 200; ++t) {
        auto r = random_list(rng, 9), q = random_list(rng, 9);
        if (t % 3 == 0) r[t % 9] = 0;
        if (t % 5 == 0) q[(t + 1) % 9] = 0;
        CHECK(kl_term(r, q) == doctest::Approx(oracle::kl_reference(r, q)).epsilon(1e-10));
    }
}

TEST_CASE("normalize floors first and then scales to unit mass") {
    const std::vector<double> r{0, 2, 2}, q{1, 1, 2};
    DistanceOptions o;
    o.normalize = true;
    // The reference gets a negligible floor so it does not re-floor after scaling.
    const double total = 4 + 1e-8;
    const std::vector<double> rn{1e-8 / total, 2 / total, 2 / total}, qn{0.25, 0.25, 0.5};
    CHECK(kl_term(r, q, o) == doctest::Approx(oracle::kl_reference(rn, qn, 1e-300)).epsilon(1e-12));
    // Scaling both lists leaves the normalized distance unchanged.
    CHECK(kl_term({0.5, 1, 1}, {2, 2, 4}, o) == doctest::Approx(kl_term({1, 2, 2}, q, o)).epsilon(1e-12));
}

TEST_CASE("kl_term input validation") {
    CHECK_THROWS_AS(kl_term({1, 2}, {1}), ShapeError);
    CHECK_THROWS_AS(kl_term({-1}, {1}), NumericError);
    CHECK_THROWS_AS(kl_term({1}, {std::nan("")}), NumericError);
    CHECK_THROWS_AS(argmax_first({}), ShapeError);
}

TEST_CASE("symmetric distance is symmetric, non-negative and zero only on equal lists") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
        const auto r = random_list(rng, 6), q = random_list(rng, 6);
        const double d = symmetric_distance({r, q});
        CHECK(d > 0);
        CHECK(d == doctest::Approx(symmetric_distance({q, r})).epsilon(1e-12));
        CHECK(symmetric_distance({r, r}) == 0);
    }
}

TEST_CASE("widening the gap between R and Q increases the distance") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 100; ++t) {
        auto q = random_list(rng, 5, 1);
        auto r = q;
        for (auto& v : r) v += 0.5;
        double prev = symmetric_distance({r, q});
        for (int step = 0; step < 5; ++step) {
            r[std::size_t(step)] += 0.7;
            const double next = symmetric_distance({r, q});
            CHECK(next > prev);
            prev = next;
        }
    }
}

TEST_CASE("make_pair truncates to the shorter list; argmax prefers the first index") {
    const ResponsePair p = make_pair({5, 4, 3}, {1, 2});
    CHECK(p.r == std::vector<double>{5, 4});
    CHECK(p.q == std::vector<double>{1, 2});
    CHECK(argmax_first({1, 3, 3, 2}) == 1);
    CHECK(argmax_first({0, 0, 0}) == 0);
}

TEST_CASE("profile finds the planted detector map") {
    const Fixture f = detector_fixture(40, 12, 6, 4);
    const AUDistanceProfile p = profile(f.db, f.manifest, 4, 9);
    CHECK(p.distances.size() == 6);
    CHECK(p.argmax_map == 4);
    CHECK(p.n_used == 9);
    CHECK(p.warnings.empty());
    for (std::size_t id : p.top_present[4]) CHECK(f.manifest.rows[id].aus.count(4) == 1);
    for (std::size_t id : p.top_absent[4]) CHECK(f.manifest.rows[id].aus.count(4) == 0);

    // Hand recomputation of one map from the sorted partitions.
    std::vector<double> r, q;
    for (std::size_t i = 0; i < 40; ++i) (i < 12 ? r : q).push_back(double(f.db.record(i, 2).value));
    std::sort(r.rbegin(), r.rend());
    std::sort(q.rbegin(), q.rend());
    r.resize(9);
    q.resize(9);
    CHECK(p.distances[2] ==
          doctest::Approx(oracle::kl_reference(r, q) + oracle::kl_reference(q, r)).epsilon(1e-10));
}

TEST_CASE("all-zero activations give zero distances and argmax 0") {
    Fixture f = detector_fixture(10, 4, 3, 0);
    for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t m = 0; m < 3; ++m) f.db.record(i, m).value = 0;
    const AUDistanceProfile p = profile(f.db, f.manifest, 4, 3);
    CHECK(p.distances == std::vector<double>{0, 0, 0});
    CHECK(p.argmax_map == 0);
}

TEST_CASE("profiles do not depend on manifest row order") {
    const Fixture f = detector_fixture(30, 10, 5, 1);
    std::vector<std::size_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(5));
    Fixture g;
    g.db = ActivationDB(30, 5, f.db.provenance());
    for (std::size_t i = 0; i < 30; ++i) {
        g.manifest.rows.push_back(f.manifest.rows[perm[i]]);
        for (std::size_t m = 0; m < 5; ++m) {
            auto rec = f.db.record(perm[i], m);
            rec.image_id = i;
            g.db.record(i, m) = rec;
        }
    }
    for (int au : {4, 9}) {
        const auto a = profile(f.db, f.manifest, au, 5), b = profile(g.db, g.manifest, au, 5);
        CHECK(a.distances == b.distances);
        CHECK(a.argmax_map == b.argmax_map);
    }
}

TEST_CASE("small partitions shrink n with a warning; degenerate units are errors") {
    const Fixture f = detector_fixture(12, 3, 2, 0);
    const AUDistanceProfile p = profile(f.db, f.manifest, 4, 9);
    CHECK(p.n_used == 3);
    CHECK(p.warnings.size() == 1);
    CHECK(p.top_present[0].size() == 3);
    CHECK(p.top_absent[0].size() == 3);
    CHECK_THROWS_AS(profile(f.db, f.manifest, 77, 9), DataError);

    Fixture all = detector_fixture(4, 4, 2, 0);
    CHECK_THROWS_AS(profile(all.db, all.manifest, 4, 2), DataError);
    Manifest shorter = f.manifest;
    shorter.rows.pop_back();
    CHECK_THROWS_AS(profile(f.db, shorter, 4, 9), DataError);
}

TEST_CASE("profile_all preserves order and matches single profiles") {
    const Fixture f = detector_fixture(20, 6, 4, 2);
    const auto all = profile_all(f.db, f.manifest, {9, 4}, 5, {}, 2);
    REQUIRE(all.size() == 2);
    CHECK(all[0].au == 9);
    CHECK(all[1].distances == profile(f.db, f.manifest, 4, 5).distances);
}

TEST_CASE("profile CSV has one row per map plus the argmax row") {
    testing::ScratchDir dir("profile");
    const Fixture f = detector_fixture(20, 6, 7, 3);
    const AUDistanceProfile p = profile(f.db, f.manifest, 4, 5);
    write_profile_csv(p, dir / "p.csv");
    std::ifstream in(dir / "p.csv");
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    REQUIRE(lines.size() == 1 + 7 + 1);
    CHECK(lines.front() == "map,distance");
    CHECK(lines.back().rfind("argmax,3,", 0) == 0);
    CHECK(std::stod(lines[4].substr(2)) == p.distances[3]);
}
