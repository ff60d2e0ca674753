#pragma once

#include "pushacc/core.hpp"
#include "pushacc/diagnostics.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pushacc {

inline constexpr const char* kTraceHeader =
    "k,loss,consensus_error,projection_error,grad_avg_norm,phi1,phi2,phi3,phi4,v_min";

/// Shortest round-trip text for a double: 17 significant digits.
inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string trace_to_csv(const RunTrace& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : trace.records) {
        out += std::to_string(r.k);
        for (const std::string& field :
             {format_double(r.loss), format_double(r.consensus_error), format_double(r.projection_error),
              format_double(r.grad_avg_norm), opt(r.phi1), opt(r.phi2), opt(r.phi3), opt(r.phi4), format_double(r.v_min)}) {
            out += ',';
            out += field;
        }
        out += '\n';
    }
    return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw ConfigError("write failed for " + path.string());
}

inline void emit_csv(const RunTrace& trace, const std::filesystem::path& path) { write_text_file(path, trace_to_csv(trace)); }

inline RunTrace parse_trace_csv(std::istream& in, std::string label = {}) {
    RunTrace trace;
    trace.label = std::move(label);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (lineno == 1) {
            if (line != kTraceHeader) throw ConfigError("trace line 1: unexpected header");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        if (f.size() != 10) throw ConfigError("trace line " + std::to_string(lineno) + ": expected 10 fields");
        // strtod rather than stod: subnormal values set ERANGE but are representable
        auto num = [&](const std::string& s) {
            char* end = nullptr;
            errno = 0;
            const double v = s.empty() ? 0.0 : std::strtod(s.c_str(), &end);
            const bool overflow = errno == ERANGE && std::abs(v) == HUGE_VAL;
            if (s.empty() || end != s.c_str() + s.size() || overflow)
                throw ConfigError("trace line " + std::to_string(lineno) + ": malformed number '" + s + "'");
            return v;
        };
        auto opt = [&](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return num(s);
        };
        TraceRecord r;
        r.k = static_cast<std::size_t>(num(f[0]));
        r.loss = num(f[1]);
        r.consensus_error = num(f[2]);
        r.projection_error = num(f[3]);
        r.grad_avg_norm = num(f[4]);
        r.phi1 = opt(f[5]);
        r.phi2 = opt(f[6]);
        r.phi3 = opt(f[7]);
        r.phi4 = opt(f[8]);
        r.v_min = num(f[9]);
        trace.records.push_back(r);
    }
    if (lineno == 0) throw ConfigError("trace file is empty");
    return trace;
}

inline RunTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    return parse_trace_csv(in, path.stem().string());
}

enum class PlotAxes { loglog, semilogy };

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
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

inline std::string fmt_coord(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

/// Round step (1, 2 or 5 times a power of ten) giving roughly `target` intervals.
inline double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

}  // namespace detail

inline constexpr double kPlotFloor = 1e-17;

/// Self-contained SVG with one polyline per trace (loss against k), decade ticks on the
/// log axes and a legend in input order. Losses are clipped at 1e-17 for display.
inline std::string render_svg_plot(const std::vector<RunTrace>& traces, PlotAxes axes) {
    require(!traces.empty(), "nothing to plot");
    for (const auto& t : traces) require(!t.records.empty(), "trace '" + t.label + "' is empty");
    const bool logx = axes == PlotAxes::loglog;
    const double W = 800, H = 500, left = 80, right = 190, top = 30, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto xval = [&](std::size_t k) { return logx ? std::log10(static_cast<double>(k)) : static_cast<double>(k); };
    auto yval = [](double loss) { return std::log10(std::max(loss, kPlotFloor)); };
    for (const auto& t : traces)
        for (const auto& r : t.records) {
            if (logx && r.k == 0) continue;
            xmin = std::min(xmin, xval(r.k));
            xmax = std::max(xmax, xval(r.k));
            ymin = std::min(ymin, yval(r.loss));
            ymax = std::max(ymax, yval(r.loss));
        }
    if (xmin > xmax) xmin = 0, xmax = 1;
    if (logx) xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
    if (xmax <= xmin) xmax = xmin + 1;
    ymin = std::floor(ymin);
    ymax = std::ceil(ymax);
    if (ymax <= ymin) ymax = ymin + 1;
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return top + (ymax - y) / (ymax - ymin) * ph; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
       << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    const int ystep = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / 12.0)));
    for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); e += ystep) {
        const double y = py(e);
        os << "<line class=\"ytick\" x1=\"" << left - 5 << "\" y1=\"" << detail::fmt_coord(y) << "\" x2=\"" << left + pw
           << "\" y2=\"" << detail::fmt_coord(y) << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt_coord(y + 4) << "\" text-anchor=\"end\">1e" << e
           << "</text>\n";
    }
    if (logx) {
        for (int e = static_cast<int>(xmin); e <= static_cast<int>(xmax); ++e) {
            const double x = px(e);
            os << "<line class=\"xtick\" x1=\"" << detail::fmt_coord(x) << "\" y1=\"" << top << "\" x2=\""
               << detail::fmt_coord(x) << "\" y2=\"" << top + ph + 5 << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << detail::fmt_coord(x) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">1e" << e
               << "</text>\n";
        }
    } else {
        const double step = detail::nice_step(xmax - xmin, 6);
        for (double v = std::ceil(xmin / step) * step; v <= xmax + 1e-9 * step; v += step) {
            const double x = px(v);
            os << "<line class=\"xtick\" x1=\"" << detail::fmt_coord(x) << "\" y1=\"" << top << "\" x2=\""
               << detail::fmt_coord(x) << "\" y2=\"" << top + ph + 5 << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << detail::fmt_coord(x) << "\" y=\"" << top + ph + 20 << "\" text-anchor=\"middle\">"
               << static_cast<long long>(std::llround(v)) << "</text>\n";
        }
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">iteration k"
       << (logx ? " (log scale)" : "") << "</text>\n";
    os << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << top + ph / 2
       << ")\">optimality gap (log scale)</text>\n";

    for (std::size_t t = 0; t < traces.size(); ++t) {
        const char* color = palette[t % (sizeof palette / sizeof *palette)];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (const auto& r : traces[t].records) {
            if (logx && r.k == 0) continue;
            if (!first) os << ' ';
            os << detail::fmt_coord(px(xval(r.k))) << ',' << detail::fmt_coord(py(yval(r.loss)));
            first = false;
        }
        os << "\"/>\n";
        const double ly = top + 10 + 20.0 * static_cast<double>(t);
        os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 40 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text class=\"legend\" x=\"" << left + pw + 46 << "\" y=\"" << ly + 4 << "\">"
           << detail::xml_escape(traces[t].label) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void emit_svg_plot(const std::vector<RunTrace>& traces, const std::filesystem::path& path, PlotAxes axes) {
    write_text_file(path, render_svg_plot(traces, axes));
}

}  // namespace pushacc
