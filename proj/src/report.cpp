#include "oosenc/report.hpp"

#include "oosenc/common.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace oosenc {

ReportFormat parse_report_format(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    throw FormatError("unknown report format '" + s + "'");
}

std::string format_delta(double value, double baseline) {
    if (baseline == 0.0) return value == 0.0 ? "0%" : "n/a";
    const long pct = std::lround(100.0 * (value - baseline) / baseline);
    return (pct > 0 ? "+" : "") + std::to_string(pct) + "%";
}

namespace {

std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

std::string emit_report(const ReportTable& table, ReportFormat format) {
    if (table.rows.empty()) throw std::invalid_argument("empty report table");
    const ReportRow* base = nullptr;
    for (const auto& r : table.rows)
        if (!base && r.algorithm == Algorithm::one_hot_softmax) base = &r;

    const std::vector<std::string> header{"algorithm", "N",        "eer_avg",  "eer_std",     "eer_min",
                                          "far_avg",   "far_std",  "far_min",  "iser_avg",    "iser_std",
                                          "iser_min",  "d_eer_min", "d_far_min", "d_iser_min"};
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : table.rows) {
        std::vector<std::string> cells{to_string(r.algorithm), std::to_string(r.n)};
        for (const MetricStats* m : {&r.eer, &r.far, &r.iser}) {
            cells.push_back(fixed4(m->avg));
            cells.push_back(fixed4(m->std));
            cells.push_back(fixed4(m->min));
        }
        if (base) {
            cells.push_back(format_delta(r.eer.min, base->eer.min));
            cells.push_back(format_delta(r.far.min, base->far.min));
            cells.push_back(format_delta(r.iser.min, base->iser.min));
        } else {
            cells.insert(cells.end(), 3, "n/a");
        }
        rows.push_back(std::move(cells));
    }

    std::string out;
    if (format == ReportFormat::csv) {
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + cells[i];
            out += "\n";
        };
        line(header);
        for (const auto& r : rows) line(r);
    } else {
        auto line = [&](const std::vector<std::string>& cells) {
            out += "|";
            for (const auto& c : cells) out += " " + c + " |";
            out += "\n";
        };
        line(header);
        out += "|";
        for (std::size_t i = 0; i < header.size(); ++i) out += i < 2 ? " --- |" : " ---: |";
        out += "\n";
        for (const auto& r : rows) line(r);
    }
    return out;
}

}  // namespace oosenc
