#ifndef GLUCOLENS_EVAL_HPP
#define GLUCOLENS_EVAL_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glucolens/errors.hpp"
#include "glucolens/random.hpp"

namespace glucolens {

struct MetricReport {
    double rmse = 0; // mg/dL
    double mae = 0;  // mg/dL
    double mape = 0; // percent
    std::size_t n = 0;
};

/// Throws on length mismatch, empty input, or a zero reference.
MetricReport compute_metrics(std::span<const double> refs, std::span<const double> preds);

enum class Zone { A, B, C, D, E };

inline constexpr std::array<Zone, 5> kZones{Zone::A, Zone::B, Zone::C, Zone::D, Zone::E};

char zone_letter(Zone z);

/// Raw region predicates of the Clarke grid, before overlap resolution.
bool in_zone_a(double ref, double pred);
bool in_zone_c(double ref, double pred);
bool in_zone_d(double ref, double pred);
bool in_zone_e(double ref, double pred);

/// First matching of A, E, C, D in that order, otherwise B. Inputs in [0, 400] mg/dL.
Zone ceg_zone(double ref, double pred);

struct GlucosePair {
    double reference = 0;
    double predicted = 0;
};

struct CegOutcome {
    std::vector<Zone> zones;
    std::array<double, 5> percent{}; // indexed A..E, sums to 100

    double zone_percent(Zone z) const { return percent[static_cast<std::size_t>(z)]; }
};

CegOutcome ceg_report(std::span<const GlucosePair> pairs);

/// "650 nm Laser: 94.2% Zone A, 4.2% B, 1.6% D." (zero zones omitted; 100% A
/// reads "100.0% in Zone A").
std::string ceg_summary(const std::string& label, const CegOutcome& outcome);

/// Deterministic shuffled split; train size = round(ratio * N).
struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

SplitIndices split_train_test(std::size_t n, double ratio = 0.7, std::uint64_t seed = 42);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split_train_test(const std::vector<T>& items, double ratio = 0.7,
                                                           std::uint64_t seed = 42)
{
    const auto idx = split_train_test(items.size(), ratio, seed);
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(idx.train.size());
    out.second.reserve(idx.test.size());
    for (auto i : idx.train)
        out.first.push_back(items[i]);
    for (auto i : idx.test)
        out.second.push_back(items[i]);
    return out;
}

/// Zone boundary segments in data coordinates (mg/dL), as drawn on the grid.
struct Segment {
    double x0, y0, x1, y1;
};

const std::vector<Segment>& ceg_boundaries();

/// Standalone SVG: 0-400 mg/dL axes, zone boundaries, one circle per pair
/// colored by zone, and a legend with the zone percentages.
std::string render_ceg_svg(std::span<const GlucosePair> pairs, const CegOutcome& outcome,
                           const std::string& title = "Clarke Error Grid");

} // namespace glucolens

#endif // GLUCOLENS_EVAL_HPP
