#pragma once

#include <string>

#include "causalattr/attribution.hpp"

namespace causalattr {

inline constexpr int kReportSchemaVersion = 1;

// JSON body with stable key order and shortest round-trip number formatting,
// so identical reports serialize to identical bytes.
std::string report_to_json(const AttributionReport& report);
AttributionReport report_from_json(const std::string& text);

// One data row per node: node, phi, ci_lo, ci_hi, p_value, gated. Absent
// values stay empty.
std::string report_to_csv(const AttributionReport& report);

// format is "json" or "csv".
void write_report(const AttributionReport& report, const std::string& path,
                  const std::string& format);
AttributionReport read_report_json(const std::string& path);

}  // namespace causalattr
