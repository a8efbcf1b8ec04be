#include "test_support.hpp"
#include "tsad/errors.hpp"
#include "tsad/timeseries.hpp"

#include <doctest.h>

#include <cmath>

using namespace tsad;
using tsad_test::TempDir;
using tsad_test::write_file;

namespace {

std::vector<SeriesPoint> series_of(std::initializer_list<double> values) {
    std::vector<SeriesPoint> pts;
    std::int64_t t = 0;
    for (double v : values) pts.push_back({t++, v, 0});
    return pts;
}

}  // namespace

TEST_CASE("load_series reads labeled rows") {
    TempDir dir("ts");
    write_file(dir / "a.csv", "1,0.5,0\n2,0.7,1\n");
    auto pts = load_series(dir / "a.csv");
    REQUIRE(pts.size() == 2);
    CHECK(pts[0].timestamp == 1);
    CHECK(pts[0].value == 0.5);
    CHECK(pts[0].label == 0);
    CHECK(pts[1].label == 1);
}

TEST_CASE("load_series header and unlabeled schema") {
    TempDir dir("ts");
    write_file(dir / "h.csv", "timestamp,value\n10,1.5\n11,2.5\n");
    auto pts = load_series(dir / "h.csv");
    REQUIRE(pts.size() == 2);
    CHECK_FALSE(pts[0].label.has_value());
    CHECK(pts[1].value == 2.5);
    CHECK_THROWS_AS(load_series(dir / "h.csv", SeriesSchema::labeled), ParseError);
}

TEST_CASE("load_series errors") {
    TempDir dir("ts");
    write_file(dir / "empty.csv", "");
    try {
        load_series(dir / "empty.csv");
        FAIL("expected an error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("no data rows") != std::string::npos);
    }

    write_file(dir / "bad.csv", "1,abc,0\n");
    try {
        load_series(dir / "bad.csv");
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }

    write_file(dir / "order.csv", "2,1.0,0\n1,1.0,0\n");
    CHECK_THROWS_AS(load_series(dir / "order.csv"), DataError);
    write_file(dir / "label.csv", "1,1.0,2\n");
    CHECK_THROWS_AS(load_series(dir / "label.csv"), ParseError);
    CHECK_THROWS_AS(load_series(dir / "missing.csv"), IoError);
}

TEST_CASE("write_series round trip") {
    TempDir dir("ts");
    auto pts = generate_synthetic(200, 0.02, 3);
    write_series(dir / "s.csv", pts);
    auto back = load_series(dir / "s.csv");
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(back[i].timestamp == pts[i].timestamp);
        CHECK(back[i].value == pts[i].value);
        CHECK(back[i].label == pts[i].label);
    }
}

TEST_CASE("generate_synthetic places floor(length * rate) spikes") {
    auto pts = generate_synthetic(1000, 0.01, 7);
    REQUIRE(pts.size() == 1000);
    int anomalies = 0;
    for (const auto& p : pts) anomalies += *p.label;
    CHECK(anomalies == 10);

    auto again = generate_synthetic(1000, 0.01, 7);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].value == again[i].value);
        CHECK(pts[i].label == again[i].label);
    }
    CHECK_THROWS_AS(generate_synthetic(1000, 0.6, 7), ArgumentError);

    for (std::size_t len : {37u, 500u, 5000u}) {
        for (double rate : {0.0, 0.01, 0.05, 0.1}) {
            auto s = generate_synthetic(len, rate, 11);
            int count = 0;
            for (const auto& p : s) count += *p.label;
            CHECK(count == static_cast<int>(std::floor(static_cast<double>(len) * rate + 1e-9)));
        }
    }
}

TEST_CASE("spikes stand out from the baseline") {
    auto pts = generate_synthetic(2000, 0.01, 5);
    double sum = 0, sq = 0;
    int normal = 0;
    for (const auto& p : pts)
        if (*p.label == 0) {
            sum += p.value;
            sq += p.value * p.value;
            ++normal;
        }
    const double mean = sum / normal;
    const double sd = std::sqrt(sq / normal - mean * mean);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i)
        if (*pts[i].label == 1) {
            const double local = 0.5 * (pts[i - 1].value + pts[i + 1].value);
            CHECK(std::abs(pts[i].value - local) > 2.0 * sd);
        }
}

TEST_CASE("make_windows stride-1 layout") {
    auto ds = make_windows(series_of({1, 2, 3, 4}), 2, false);
    REQUIRE(ds.num_windows() == 3);
    CHECK(ds.windows(0, 0) == 1);
    CHECK(ds.windows(0, 1) == 2);
    CHECK(ds.windows(1, 0) == 2);
    CHECK(ds.windows(1, 1) == 3);
    CHECK(ds.windows(2, 0) == 3);
    CHECK(ds.windows(2, 1) == 4);
    CHECK(ds.end_point(0) == 1);

    auto long_ds = make_windows(generate_synthetic(100, 0.0, 1), 25, false);
    CHECK(long_ds.num_windows() == 76);

    CHECK_THROWS_AS(make_windows(series_of({3, 3, 3, 3}), 2, true), DataError);
    CHECK_THROWS_AS(make_windows(series_of({1, 2}), 3, false), DataError);
    CHECK_THROWS_AS(make_windows(series_of({1, 2}), 0, false), ArgumentError);
}

TEST_CASE("window label is the label of its last point") {
    auto pts = generate_synthetic(300, 0.05, 2);
    auto ds = make_windows(pts, 8, false);
    REQUIRE(ds.has_labels());
    for (std::size_t w = 0; w < ds.num_windows(); ++w) CHECK((*ds.labels)[w] == *pts[w + 7].label);
}

TEST_CASE("overlapping windows reproduce the series") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        auto pts = generate_synthetic(120 + seed * 7, 0.02, seed);
        for (int n : {1, 3, 16}) {
            auto ds = make_windows(pts, n, false);
            std::vector<double> rebuilt(pts.size());
            for (std::size_t w = 0; w < ds.num_windows(); ++w)
                for (int k = 0; k < n; ++k) rebuilt[w + static_cast<std::size_t>(k)] = ds.windows(static_cast<Eigen::Index>(w), k);
            for (std::size_t i = 0; i < pts.size(); ++i) CHECK(rebuilt[i] == pts[i].value);
        }
    }
}

TEST_CASE("split sizes and errors") {
    auto ds = make_windows(generate_synthetic(103, 0.0, 1), 4, false);
    REQUIRE(ds.num_windows() == 100);
    auto [a, b] = split(ds, 0.8);
    CHECK(a.num_windows() == 80);
    CHECK(b.num_windows() == 20);
    auto [c, d] = split(ds, 0.999);
    CHECK(c.num_windows() == 99);
    CHECK(d.num_windows() == 1);
    CHECK(d.end_point(0) == ds.end_point(99));
    CHECK_THROWS_AS(split(ds, 0.0), ArgumentError);
    CHECK_THROWS_AS(split(ds, 1.0), ArgumentError);
    CHECK_THROWS_AS(split(ds, 0.001), DataError);
}

TEST_CASE("standardized train windows are centred with unit variance") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        auto ds = make_windows(generate_synthetic(800, 0.01, seed), 16, true);
        auto [train, valid] = split(ds, 0.7);
        const double n = static_cast<double>(train.windows.size());
        const double mean = train.windows.sum() / n;
        const double var = (train.windows.array() - mean).square().sum() / n;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(var - 1.0) < 1e-6);
        CHECK(valid.mean == train.mean);
        CHECK(valid.std == train.std);
        // Raw values survive standardization.
        const Vector raw = valid.raw_window(3);
        for (int k = 0; k < 16; ++k)
            CHECK(valid.windows(3, k) == doctest::Approx((raw[k] - train.mean) / train.std).epsilon(1e-12));
    }
}

TEST_CASE("raw_context is clipped at the series ends") {
    auto pts = generate_synthetic(50, 0.0, 1);
    auto ds = make_windows(pts, 5, false);
    CHECK(ds.raw_context(0).size() == 10);   // window + 5 after
    CHECK(ds.raw_context(20).size() == 15);
    CHECK(ds.raw_context(ds.num_windows() - 1).size() == 10);
    CHECK(ds.raw_context(20)[5] == pts[20].value);
}
