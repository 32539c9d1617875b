#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "sipi/core.hpp"
#include "sipi/inference.hpp"
#include "sipi/sim.hpp"

namespace sipi::io {

inline constexpr int kSchemaVersion = 1;

/// Headerless comma-separated numeric matrix, one row per line. Blank lines
/// are skipped. Throws ParseError naming the offending line.
Matrix read_csv(std::istream& in);
Matrix read_csv_file(const std::string& path);
Vector read_csv_column(const std::string& path);

/// Shortest round-trip formatting of every value.
void write_csv(std::ostream& out, const Matrix& m);
std::string format_double(double v);

nlohmann::ordered_json to_json(const TestResult& r);
nlohmann::ordered_json to_json(const ChainConfig& c);
nlohmann::ordered_json to_json(const SimConfig& c);
nlohmann::ordered_json to_json(const SimSummary& s);
nlohmann::ordered_json to_json(const std::vector<SizeRow>& rows);

/// Fills fields present in `j`; unknown keys raise ConfigError.
void from_json(const nlohmann::json& j, ChainConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);

/// replicate,method,p_value,n_true_positives rows ordered by replicate then method.
void write_pvalue_table(std::ostream& out, const SimSummary& s);

nlohmann::json read_json_file(const std::string& path);

}  // namespace sipi::io
