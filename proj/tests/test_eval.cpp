#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "glucolens/eval.hpp"
#include "glucolens/random.hpp"

using namespace glucolens;

namespace {

// Direct transcription of the grid rules, no shared code with the library.
// Fractions are cleared so lattice points on a line compare exactly.
char oracle_zone(double r, double p)
{
    if ((r <= 70 && p <= 70) || 5 * std::abs(p - r) <= r)
        return 'A';
    if ((r >= 180 && p <= 70) || (r <= 70 && p >= 180))
        return 'E';
    if ((r >= 70 && r <= 290 && p >= r + 110) || (r >= 130 && r <= 180 && 5 * p <= 7 * r - 910))
        return 'C';
    if ((r >= 240 && p >= 70 && p <= 180) || (3 * r <= 175 && p >= 70 && p <= 180) ||
        (3 * r >= 175 && r <= 70 && 5 * p >= 6 * r))
        return 'D';
    return 'B';
}

std::size_t count_of(const std::string& text, const std::string& needle)
{
    std::size_t n = 0;
    for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1))
        ++n;
    return n;
}

} // namespace

TEST_CASE("metrics fixture")
{
    const std::vector<double> refs{100, 200}, preds{110, 180};
    const MetricReport m = compute_metrics(refs, preds);
    CHECK(std::abs(m.rmse - 15.8114) <= 1e-4);
    CHECK(m.rmse == doctest::Approx(std::sqrt(250.0)).epsilon(1e-15));
    CHECK(m.mae == 15.0);
    CHECK(m.mape == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(m.n == 2);

    const MetricReport z = compute_metrics(refs, refs);
    CHECK(z.rmse == 0.0);
    CHECK(z.mae == 0.0);
    CHECK(z.mape == 0.0);

    CHECK_THROWS_AS(compute_metrics(refs, std::vector<double>{1}), ValidationError);
    CHECK_THROWS_AS(compute_metrics(std::vector<double>{}, std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(compute_metrics(std::vector<double>{0, 1}, std::vector<double>{1, 1}), ValidationError);
}

TEST_CASE("metric properties on random vectors")
{
    Rng rng(1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        std::vector<double> r(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            r[i] = rng.uniform(40, 400);
            p[i] = rng.uniform(0, 450);
        }
        const MetricReport m = compute_metrics(r, p);
        CHECK(m.rmse >= m.mae);
        CHECK(m.mae >= 0);
        const double k = rng.uniform(0.1, 10);
        std::vector<double> rk(n), pk(n);
        for (std::size_t i = 0; i < n; ++i) {
            rk[i] = k * r[i];
            pk[i] = k * p[i];
        }
        CHECK(compute_metrics(rk, pk).mape == doctest::Approx(m.mape).epsilon(1e-12));
    }
}

TEST_CASE("zone examples")
{
    CHECK(ceg_zone(100, 100) == Zone::A);
    CHECK(ceg_zone(200, 160) == Zone::A);
    CHECK(ceg_zone(60, 200) == Zone::E);
    CHECK(ceg_zone(250, 150) == Zone::D);
    CHECK(ceg_zone(200, 350) == Zone::C);
    CHECK(ceg_zone(50, 60) == Zone::A);
    CHECK(ceg_zone(300, 200) == Zone::B);
    CHECK_THROWS_AS(ceg_zone(-1, 100), ValidationError);
    CHECK_THROWS_AS(ceg_zone(100, 401), ValidationError);
    CHECK(zone_letter(Zone::D) == 'D');
}

TEST_CASE("zone boundaries are inclusive")
{
    CHECK(ceg_zone(100, 120) == Zone::A);
    CHECK(ceg_zone(100, 80) == Zone::A);
    CHECK(ceg_zone(70, 56) == Zone::A);
    CHECK(ceg_zone(70, 84) == Zone::A);
    CHECK(ceg_zone(180, 70) == Zone::E);
    CHECK(ceg_zone(70, 180) == Zone::E);
    CHECK(ceg_zone(100, 210) == Zone::C);
    CHECK(ceg_zone(150, 28) == Zone::C);
    CHECK(ceg_zone(240, 180) == Zone::D);
}

TEST_CASE("cascade agrees with the oracle and partitions the square")
{
    Rng rng(99);
    std::array<int, 5> seen{};
    for (int i = 0; i < 200000; ++i) {
        const double r = rng.uniform(0, 400);
        const double p = rng.uniform(0, 400);
        const Zone z = ceg_zone(r, p);
        CHECK(zone_letter(z) == oracle_zone(r, p));

        const bool a = in_zone_a(r, p);
        const bool e = in_zone_e(r, p) && !a;
        const bool c = in_zone_c(r, p) && !a && !e;
        const bool d = in_zone_d(r, p) && !a && !e && !c;
        const bool b = !a && !e && !c && !d;
        CHECK(a + e + c + d + b == 1);
        ++seen[static_cast<std::size_t>(z)];
    }
    for (int n : seen)
        CHECK(n > 0);
}

TEST_CASE("zones on an integer lattice match the oracle")
{
    for (int r = 0; r <= 400; r += 2)
        for (int p = 0; p <= 400; p += 2)
            CHECK(zone_letter(ceg_zone(r, p)) == oracle_zone(r, p));
}

TEST_CASE("report over the example pairs")
{
    const std::vector<GlucosePair> pairs{{100, 100}, {200, 160}, {60, 200}, {250, 150}, {200, 350}};
    const CegOutcome o = ceg_report(pairs);
    CHECK(o.zone_percent(Zone::A) == 40.0);
    CHECK(o.zone_percent(Zone::B) == 0.0);
    CHECK(o.zone_percent(Zone::C) == 20.0);
    CHECK(o.zone_percent(Zone::D) == 20.0);
    CHECK(o.zone_percent(Zone::E) == 20.0);
    CHECK(o.zones.size() == 5);
    CHECK(ceg_summary("Demo", o) == "Demo: 40.0% Zone A, 20.0% C, 20.0% D, 20.0% E.");

    const std::vector<GlucosePair> same{{120, 120}, {80, 80}};
    const CegOutcome all = ceg_report(same);
    CHECK(all.zone_percent(Zone::A) == 100.0);
    CHECK(ceg_summary("650 nm Laser", all) == "650 nm Laser: 100.0% in Zone A.");
    CHECK_THROWS_AS(ceg_report(std::vector<GlucosePair>{}), ValidationError);
}

TEST_CASE("zone percentages sum to 100")
{
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<GlucosePair> pairs(1 + rng.below(300));
        for (auto& p : pairs)
            p = {rng.uniform(0, 400), rng.uniform(0, 400)};
        const CegOutcome o = ceg_report(pairs);
        CHECK(std::abs(std::accumulate(o.percent.begin(), o.percent.end(), 0.0) - 100.0) <= 1e-9);
    }
}

TEST_CASE("split contract")
{
    const auto s = split_train_test(10, 0.7, 42);
    CHECK(s.train.size() == 7);
    CHECK(s.test.size() == 3);

    const auto big = split_train_test(2640, 0.7, 42);
    CHECK(big.train.size() == 1848);
    CHECK(big.test.size() == 792);
    const auto again = split_train_test(2640, 0.7, 42);
    CHECK(again.train == big.train);
    CHECK(again.test == big.test);
    std::vector<std::size_t> all = big.train;
    all.insert(all.end(), big.test.begin(), big.test.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i)
        CHECK(all[i] == i);
    CHECK(split_train_test(2640, 0.7, 43).train != big.train);

    CHECK_THROWS_AS(split_train_test(1, 0.7, 42), ValidationError);
    CHECK_THROWS_AS(split_train_test(10, 1.5, 42), ValidationError);

    const std::vector<std::string> items{"a", "b", "c", "d"};
    const auto [tr, te] = split_train_test(items, 0.5, 1);
    CHECK(tr.size() == 2);
    std::set<std::string> u(tr.begin(), tr.end());
    u.insert(te.begin(), te.end());
    CHECK(u.size() == 4);
}

TEST_CASE("split partition for random sizes")
{
    Rng rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(500);
        const double ratio = rng.uniform(0.05, 0.95);
        const auto s = split_train_test(n, ratio, rng.next_u64());
        CHECK(s.train.size() == static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n))));
        std::set<std::size_t> u(s.train.begin(), s.train.end());
        u.insert(s.test.begin(), s.test.end());
        CHECK(u.size() == n);
        CHECK(s.train.size() + s.test.size() == n);
    }
}

TEST_CASE("boundary geometry")
{
    bool low = false, high = false;
    for (const auto& s : ceg_boundaries()) {
        for (auto [x, y] : {std::pair{s.x0, s.y0}, {s.x1, s.y1}}) {
            low |= x == 70 && y == 56;
            high |= x == 70 && y == 84;
        }
        CHECK(std::min(s.x0, s.x1) >= 0);
        CHECK(std::max(s.y0, s.y1) <= 400);
    }
    CHECK(low);
    CHECK(high);
}

TEST_CASE("svg")
{
    const std::vector<GlucosePair> pairs{{100, 100}, {200, 160}, {60, 200}, {250, 150}, {200, 350}, {90, 95}};
    const CegOutcome o = ceg_report(pairs);
    const std::string svg = render_ceg_svg(pairs, o, "Grid <A&B>");
    CHECK(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(count_of(svg, "class=\"marker") == 6);
    CHECK(count_of(svg, "class=\"marker zone-A\"") == 3);
    CHECK(count_of(svg, "class=\"boundary\"") == ceg_boundaries().size());
    CHECK(svg.find("Grid &lt;A&amp;B&gt;") != std::string::npos);
    CHECK(svg.find("50.0%") != std::string::npos);
}
