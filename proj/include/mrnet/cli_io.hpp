#pragma once

// Command-line surface and report serialization. Every numeric value written to a
// report is rounded to 12 significant digits, and reports carry the resolved
// configuration that produced them.

#include "mrnet/netsim.hpp"
#include "mrnet/shaper.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mrnet::cli {

inline constexpr std::string_view kToolName = "mrnet";
inline constexpr std::string_view kToolVersion = "1.0.0";

using Json = nlohmann::ordered_json;

/// Rounds to `digits` significant digits; non-finite values pass through.
double round_sig(double x, int digits = 12);

/// "start:stop:step" (stop included when hit within step/1e9), a comma list, or one value.
/// Throws ConfigError on malformed input or a non-positive step.
std::vector<double> parse_grid(std::string_view text);

struct CsvTable {
    std::vector<std::string> header;
    /// Cells are numbers or strings; null renders as an empty cell.
    std::vector<std::vector<Json>> rows;

    friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

struct ReportDocument {
    Json metadata = Json::object();
    Json sections = Json::object();
    std::optional<CsvTable> table;

    friend bool operator==(const ReportDocument&, const ReportDocument&) = default;
};

enum class ReportFormat { kJson, kCsv };

/// JSON: {"metadata": ..., "sections": ..., "table": {"header": [...], "rows": [...]}}
/// with two-space indentation. CSV: the table only. Throws std::invalid_argument when
/// CSV is requested without a table.
std::string emit_report(const ReportDocument& doc, ReportFormat format);

/// Inverse of the JSON emitter. Throws ConfigError on malformed input.
ReportDocument parse_report(std::string_view json_text);

/// Writes text to path; throws IoError when the file cannot be written.
void write_text(const std::string& path, std::string_view text);

struct ResolvedSimConfig {
    SimConfig config;
    Json resolved;  ///< every field with its effective value
};

/// Reads a simulation config. Recognized keys: mode, n, dist, q, lambda, theta,
/// saturated, p, n_int, success_eq, radius, slots, warmup, seed, audit,
/// keep_delay_samples, phi_continuous. theta sets lambda = theta / E[L].
/// Throws ConfigError on unknown keys, wrong types, or both lambda and theta.
ResolvedSimConfig sim_config_from_json(const Json& doc);

Json to_json(const SimReport& report);
Json to_json(const AlohaHopModel& hop);
Json to_json(const ShaperTrace& trace);

/// Runs one subcommand: analyze, tail, scaling, optimize, simulate or shape.
/// args[0] is the program name. Returns 0 on success, 2 on usage errors and
/// 1 on errors raised by the models. Output goes to --out (relative paths resolve
/// against $MRNET_OUT_DIR when set), else to $MRNET_OUT_DIR/<command>.<ext> when
/// that is set, else to `out`.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mrnet::cli
