#pragma once

#include "oosenc/experiment.hpp"

#include <string>

namespace oosenc {

enum class ReportFormat { csv, markdown };

ReportFormat parse_report_format(const std::string& s);

// Relative change of `value` against `baseline` as a rounded percentage,
// e.g. "-42%". "n/a" when the baseline is zero and the value is not.
std::string format_delta(double value, double baseline);

// Columns: algorithm, N, EER/FAR/ISER (avg, std, min), then the min-value
// deltas against the one_hot_softmax row. Throws std::invalid_argument on
// an empty table.
std::string emit_report(const ReportTable& table, ReportFormat format);

}  // namespace oosenc
