#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fenplan/cost_model.hpp"
#include "fenplan/fen.hpp"
#include "fenplan/planner.hpp"
#include "fenplan/scoring.hpp"

namespace fenplan {

using Json = nlohmann::ordered_json;

// Two-space indented, trailing newline.
std::string dump_json(const Json& j);
// Throws FormatError on malformed text.
Json parse_json(std::string_view text);

// Hashes and checksums are written as 16-digit hex strings. Every *_from_json
// throws FormatError on missing or mistyped fields.
Json to_json(const FenConfig& cfg);
FenConfig fen_config_from_json(const Json& j);

Json to_json(const PruneDecision& d);
PruneDecision prune_decision_from_json(const Json& j);

Json to_json(const CostReport& c);
CostReport cost_report_from_json(const Json& j);

Json to_json(const CharacterizationTable& t);
CharacterizationTable table_from_json(const Json& j);

// Keys: psnr_budget_db (required), mac_budget, byte_budget, pivot_db.
Json to_json(const ConstraintSet& c);
ConstraintSet constraints_from_json(const Json& j);

Json to_json(const Plan& p);

Json to_json(const SettingsReport& r);
// Rows utility_mean, utility_std, psnr_mean, psnr_std; one column per
// setting.
std::string settings_to_csv(const SettingsReport& r);

// One row per conv layer of an m-prefix plus a totals row ("total" in the
// layer column). Timing columns are empty when the report carries no
// latency.
struct ProfileRow {
  std::size_t m = 0;
  std::optional<std::size_t> conv;  // conv ordinal; empty for the totals row
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  std::uint64_t bytes = 0;
  std::optional<double> ms_median;
  std::optional<double> ms_iqr;

  bool operator==(const ProfileRow&) const = default;
};

std::vector<ProfileRow> profile_rows(std::size_t m, const CostReport& report);
std::string profile_to_csv(std::span<const ProfileRow> rows);
std::vector<ProfileRow> profile_from_csv(std::string_view text);

}  // namespace fenplan
