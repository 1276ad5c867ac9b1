#include "glucolens/eval.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace glucolens {

MetricReport compute_metrics(std::span<const double> refs, std::span<const double> preds)
{
    if (refs.size() != preds.size())
        throw ValidationError("metrics: " + std::to_string(refs.size()) + " references but " +
                              std::to_string(preds.size()) + " predictions");
    if (refs.empty())
        throw ValidationError("metrics: empty input");
    double se = 0, ae = 0, ape = 0;
    for (std::size_t i = 0; i < refs.size(); ++i) {
        if (refs[i] == 0)
            throw ValidationError("metrics: zero reference value at index " + std::to_string(i));
        const double err = preds[i] - refs[i];
        se += err * err;
        ae += std::abs(err);
        ape += std::abs(err) / std::abs(refs[i]);
    }
    const double n = static_cast<double>(refs.size());
    return {std::sqrt(se / n), ae / n, 100.0 * ape / n, refs.size()};
}

char zone_letter(Zone z)
{
    return "ABCDE"[static_cast<int>(z)];
}

bool in_zone_a(double ref, double pred)
{
    // |pred - ref| <= 0.2 ref, written without the inexact 0.2.
    return (ref <= 70 && pred <= 70) || 5.0 * std::abs(pred - ref) <= ref;
}

bool in_zone_e(double ref, double pred)
{
    return (ref >= 180 && pred <= 70) || (ref <= 70 && pred >= 180);
}

bool in_zone_c(double ref, double pred)
{
    return (ref >= 70 && ref <= 290 && pred >= ref + 110) ||
           (ref >= 130 && ref <= 180 && 5.0 * pred <= 7.0 * ref - 910.0);
}

bool in_zone_d(double ref, double pred)
{
    return (ref >= 240 && pred >= 70 && pred <= 180) || (3.0 * ref <= 175 && pred >= 70 && pred <= 180) ||
           (3.0 * ref >= 175 && ref <= 70 && 5.0 * pred >= 6.0 * ref);
}

Zone ceg_zone(double ref, double pred)
{
    if (!(ref >= 0 && ref <= 400 && pred >= 0 && pred <= 400))
        throw ValidationError("ceg_zone: values must lie in [0, 400] mg/dL");
    if (in_zone_a(ref, pred))
        return Zone::A;
    if (in_zone_e(ref, pred))
        return Zone::E;
    if (in_zone_c(ref, pred))
        return Zone::C;
    if (in_zone_d(ref, pred))
        return Zone::D;
    return Zone::B;
}

CegOutcome ceg_report(std::span<const GlucosePair> pairs)
{
    if (pairs.empty())
        throw ValidationError("ceg_report: no pairs");
    CegOutcome out;
    out.zones.reserve(pairs.size());
    std::array<std::size_t, 5> counts{};
    for (const auto& p : pairs) {
        const Zone z = ceg_zone(p.reference, p.predicted);
        out.zones.push_back(z);
        ++counts[static_cast<std::size_t>(z)];
    }
    for (std::size_t i = 0; i < 5; ++i)
        out.percent[i] = 100.0 * static_cast<double>(counts[i]) / static_cast<double>(pairs.size());
    return out;
}

std::string ceg_summary(const std::string& label, const CegOutcome& outcome)
{
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << label << ": ";
    if (outcome.zone_percent(Zone::A) >= 100.0) {
        s << "100.0% in Zone A.";
        return s.str();
    }
    bool first = true;
    for (Zone z : kZones) {
        const double p = outcome.zone_percent(z);
        if (p <= 0)
            continue;
        if (!first)
            s << ", ";
        s << p << "% " << (first ? "Zone " : "") << zone_letter(z);
        first = false;
    }
    s << '.';
    return s.str();
}

SplitIndices split_train_test(std::size_t n, double ratio, std::uint64_t seed)
{
    if (n < 2)
        throw ValidationError("split: need at least 2 items, got " + std::to_string(n));
    if (!(ratio > 0 && ratio < 1))
        throw ValidationError("split: ratio must lie in (0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());
    const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
    SplitIndices out;
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return out;
}

const std::vector<Segment>& ceg_boundaries()
{
    static const std::vector<Segment> segments{
        {0, 70, 175.0 / 3.0, 70},   {175.0 / 3.0, 70, 400.0 / 1.2, 400}, // upper A
        {70, 84, 70, 400},          {0, 180, 70, 180},   {70, 180, 290, 400}, // upper C/D/E
        {70, 0, 70, 56},            {70, 56, 400, 320},                      // lower A
        {180, 0, 180, 70},          {180, 70, 400, 70},                      // lower E
        {240, 70, 240, 180},        {240, 180, 400, 180},                    // lower D
        {130, 0, 180, 70},                                                   // lower C
    };
    return segments;
}

namespace {

constexpr const char* kZoneColors[5] = {"#2e7d32", "#1565c0", "#f9a825", "#ef6c00", "#c62828"};

} // namespace

namespace {

std::string xml_escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

std::string render_ceg_svg(std::span<const GlucosePair> pairs, const CegOutcome& outcome, const std::string& title)
{
    constexpr double margin = 60, plot = 480, size = 400;
    const double width = margin * 2 + plot + 140;
    const double height = margin * 2 + plot;
    auto sx = [&](double v) { return margin + v / size * plot; };
    auto sy = [&](double v) { return margin + plot - v / size * plot; };

    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << margin + plot / 2 << "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << xml_escape(title) << "</text>\n";

    s << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n";
    s << "<rect x=\"" << sx(0) << "\" y=\"" << sy(size) << "\" width=\"" << plot << "\" height=\"" << plot
      << "\"/>\n";
    for (int t = 0; t <= 400; t += 50) {
        s << "<line x1=\"" << sx(t) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(t) << "\" y2=\"" << sy(0) + 5
          << "\"/>\n";
        s << "<line x1=\"" << sx(0) - 5 << "\" y1=\"" << sy(t) << "\" x2=\"" << sx(0) << "\" y2=\"" << sy(t)
          << "\"/>\n";
    }
    s << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
    for (int t = 0; t <= 400; t += 50) {
        s << "<text x=\"" << sx(t) << "\" y=\"" << sy(0) + 18 << "\" text-anchor=\"middle\">" << t << "</text>\n";
        s << "<text x=\"" << sx(0) - 8 << "\" y=\"" << sy(t) + 4 << "\" text-anchor=\"end\">" << t << "</text>\n";
    }
    s << "<text x=\"" << margin + plot / 2 << "\" y=\"" << height - 15
      << "\" text-anchor=\"middle\">Reference concentration (mg/dL)</text>\n";
    s << "<text transform=\"translate(18," << margin + plot / 2
      << ") rotate(-90)\" text-anchor=\"middle\">Predicted concentration (mg/dL)</text>\n</g>\n";

    s << "<line class=\"identity\" x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(400) << "\" y2=\""
      << sy(400) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    s << "<g id=\"boundaries\" stroke=\"black\" stroke-width=\"1.2\" fill=\"none\">\n";
    for (const auto& b : ceg_boundaries())
        s << "<polyline class=\"boundary\" points=\"" << sx(b.x0) << ',' << sy(b.y0) << ' ' << sx(b.x1) << ','
          << sy(b.y1) << "\"/>\n";
    s << "</g>\n";

    s << "<g id=\"markers\" stroke=\"none\">\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto z = i < outcome.zones.size() ? outcome.zones[i] : ceg_zone(pairs[i].reference, pairs[i].predicted);
        s << "<circle class=\"marker zone-" << zone_letter(z) << "\" cx=\"" << sx(pairs[i].reference) << "\" cy=\""
          << sy(pairs[i].predicted) << "\" r=\"3\" fill=\"" << kZoneColors[static_cast<int>(z)]
          << "\" fill-opacity=\"0.75\"/>\n";
    }
    s << "</g>\n";

    const double lx = margin + plot + 20;
    s << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (Zone z : kZones) {
        const double ly = margin + 20 + 22 * static_cast<int>(z);
        s << "<circle cx=\"" << lx << "\" cy=\"" << ly - 4 << "\" r=\"5\" fill=\"" << kZoneColors[static_cast<int>(z)]
          << "\"/>\n";
        s << "<text x=\"" << lx + 12 << "\" y=\"" << ly << "\">Zone " << zone_letter(z) << ": " << std::setprecision(1)
          << outcome.zone_percent(z) << "%</text>\n"
          << std::setprecision(2);
    }
    s << "</g>\n";
    for (const auto& [label, x, y] : {std::tuple{"A", 340.0, 370.0}, std::tuple{"A", 370.0, 270.0},
                                      std::tuple{"B", 280.0, 370.0}, std::tuple{"B", 370.0, 210.0},
                                      std::tuple{"C", 160.0, 370.0}, std::tuple{"C", 160.0, 15.0},
                                      std::tuple{"D", 30.0, 140.0}, std::tuple{"D", 370.0, 120.0},
                                      std::tuple{"E", 30.0, 370.0}, std::tuple{"E", 370.0, 15.0}})
        s << "<text class=\"zone-label\" x=\"" << sx(x) << "\" y=\"" << sy(y)
          << "\" font-family=\"sans-serif\" font-size=\"14\" fill=\"#555\">" << label << "</text>\n";
    s << "</svg>\n";
    return s.str();
}

} // namespace glucolens
