#include "fenplan/serialize.hpp"

#include "fenplan/checksum.hpp"
#include "fenplan/csv.hpp"
#include "fenplan/error.hpp"

namespace fenplan {

namespace {

const Json& field(const Json& j, const char* key) {
  if (!j.is_object()) throw FormatError(std::string("expected a JSON object holding '") + key + "'");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T get(const Json& j, const char* key) {
  const Json& v = field(j, key);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

std::uint64_t get_hex(const Json& j, const char* key) { return parse_hex(get<std::string>(j, key)); }

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<T>(j, key);
}

Json optional_json(const std::optional<std::uint64_t>& v) { return v ? Json(*v) : Json(nullptr); }

Json to_json(const LatencyStats& s) {
  return Json{{"median_ms", s.median_ms}, {"iqr_ms", s.iqr_ms}, {"repetitions", s.repetitions}};
}

LatencyStats latency_from_json(const Json& j) {
  return {get<double>(j, "median_ms"), get<double>(j, "iqr_ms"), get<std::size_t>(j, "repetitions")};
}

Json to_json(const InputShape& s) {
  return Json{{"channels", s.channels}, {"height", s.height}, {"width", s.width}};
}

InputShape shape_from_json(const Json& j) {
  return {get<std::size_t>(j, "channels"), get<std::size_t>(j, "height"), get<std::size_t>(j, "width")};
}

Json to_json(const GridEntry& e) {
  return Json{{"m", e.m},
              {"d_prime", e.d_prime},
              {"utility_mean", e.utility_mean},
              {"utility_std", e.utility_std},
              {"psnr_mean", e.psnr_mean},
              {"psnr_std", e.psnr_std},
              {"seeds", e.seeds},
              {"macs", e.macs},
              {"bytes", e.bytes}};
}

GridEntry grid_entry_from_json(const Json& j) {
  GridEntry e;
  e.m = get<std::size_t>(j, "m");
  e.d_prime = get<std::size_t>(j, "d_prime");
  e.utility_mean = get<double>(j, "utility_mean");
  e.utility_std = get<double>(j, "utility_std");
  e.psnr_mean = get<double>(j, "psnr_mean");
  e.psnr_std = get<double>(j, "psnr_std");
  e.seeds = get<std::size_t>(j, "seeds");
  e.macs = get<std::uint64_t>(j, "macs");
  e.bytes = get<std::uint64_t>(j, "bytes");
  return e;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : std::string(); }

std::uint64_t parse_count(const std::string& field) {
  const double v = parse_number(field);
  if (v < 0 || v != static_cast<double>(static_cast<std::uint64_t>(v))) {
    throw FormatError("expected a nonnegative integer, got '" + field + "'");
  }
  return static_cast<std::uint64_t>(v);
}

}  // namespace

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
}

Json to_json(const FenConfig& cfg) {
  return Json{{"m", cfg.m},
              {"kept_channels", cfg.kept_channels},
              {"output_channels", cfg.output_channels},
              {"seed", cfg.seed},
              {"hash", to_hex(cfg.hash())}};
}

FenConfig fen_config_from_json(const Json& j) {
  FenConfig cfg;
  cfg.m = get<std::size_t>(j, "m");
  cfg.kept_channels = get<std::vector<std::vector<std::size_t>>>(j, "kept_channels");
  cfg.output_channels = get<std::vector<std::size_t>>(j, "output_channels");
  cfg.seed = get<std::uint64_t>(j, "seed");
  if (j.contains("hash") && get_hex(j, "hash") != cfg.hash()) {
    throw ChecksumError("FEN config hash does not match its contents");
  }
  return cfg;
}

Json to_json(const PruneDecision& d) {
  return Json{{"pruned_utility", d.pruned_utility},
              {"pruned_privacy", d.pruned_privacy},
              {"remaining", d.remaining},
              {"selected", d.selected},
              {"seed", d.seed}};
}

PruneDecision prune_decision_from_json(const Json& j) {
  PruneDecision d;
  d.pruned_utility = get<std::vector<std::size_t>>(j, "pruned_utility");
  d.pruned_privacy = get<std::vector<std::size_t>>(j, "pruned_privacy");
  d.remaining = get<std::vector<std::size_t>>(j, "remaining");
  d.selected = get<std::vector<std::size_t>>(j, "selected");
  d.seed = get<std::uint64_t>(j, "seed");
  return d;
}

Json to_json(const CostReport& c) {
  Json layers = Json::array();
  for (std::size_t i = 0; i < c.layers.size(); ++i) {
    const LayerCost& l = c.layers[i];
    Json e{{"layer_index", l.layer_index},
           {"kind", std::string(to_string(l.kind))},
           {"input", to_json(l.input)},
           {"output", to_json(l.output)},
           {"macs", l.macs},
           {"params", l.params}};
    if (i < c.layer_latency.size() && c.layer_latency[i]) e["latency"] = to_json(*c.layer_latency[i]);
    layers.push_back(std::move(e));
  }
  Json j{{"layers", std::move(layers)},
         {"total_macs", c.total_macs},
         {"params", c.params},
         {"bytes", c.bytes},
         {"config_hash", to_hex(c.config_hash)}};
  if (c.latency) j["latency"] = to_json(*c.latency);
  return j;
}

CostReport cost_report_from_json(const Json& j) {
  CostReport c;
  bool any_latency = false;
  for (const Json& e : field(j, "layers")) {
    LayerCost l;
    l.layer_index = get<std::size_t>(e, "layer_index");
    l.kind = parse_layer_kind(get<std::string>(e, "kind"));
    l.input = shape_from_json(field(e, "input"));
    l.output = shape_from_json(field(e, "output"));
    l.macs = get<std::uint64_t>(e, "macs");
    l.params = get<std::uint64_t>(e, "params");
    c.layers.push_back(l);
    if (e.contains("latency")) any_latency = true;
  }
  if (any_latency) {
    for (const Json& e : field(j, "layers")) {
      c.layer_latency.push_back(e.contains("latency") ? std::optional(latency_from_json(e.at("latency")))
                                                      : std::nullopt);
    }
  }
  c.total_macs = get<std::uint64_t>(j, "total_macs");
  c.params = get<std::uint64_t>(j, "params");
  c.bytes = get<std::uint64_t>(j, "bytes");
  c.config_hash = get_hex(j, "config_hash");
  if (j.contains("latency")) c.latency = latency_from_json(j.at("latency"));
  return c;
}

Json to_json(const CharacterizationTable& t) {
  Json grid = Json::array();
  for (const auto& e : t.grid) grid.push_back(to_json(e));
  Json channels = Json::array();
  for (const auto& e : t.channels) {
    channels.push_back(Json{{"m", e.m}, {"channel", e.channel}, {"utility", e.utility}, {"psnr", e.psnr}});
  }
  const Provenance& p = t.provenance;
  return Json{{"format", "fenplan-characterization"},
              {"version", 1},
              {"provenance",
               {{"dataset_id", p.dataset_id},
                {"net_name", p.net_name},
                {"net_checksum", to_hex(p.net_checksum)},
                {"seed", p.seed},
                {"seeds_per_cell", p.seeds_per_cell},
                {"hyper_hash", to_hex(p.hyper_hash)}}},
              {"grid", std::move(grid)},
              {"channels", std::move(channels)},
              {"warnings", t.warnings}};
}

CharacterizationTable table_from_json(const Json& j) {
  if (get<std::string>(j, "format") != "fenplan-characterization") {
    throw FormatError("not a characterization table");
  }
  if (get<int>(j, "version") != 1) throw FormatError("unsupported characterization table version");
  CharacterizationTable t;
  const Json& p = field(j, "provenance");
  t.provenance.dataset_id = get<std::string>(p, "dataset_id");
  t.provenance.net_name = get<std::string>(p, "net_name");
  t.provenance.net_checksum = get_hex(p, "net_checksum");
  t.provenance.seed = get<std::uint64_t>(p, "seed");
  t.provenance.seeds_per_cell = get<std::size_t>(p, "seeds_per_cell");
  t.provenance.hyper_hash = get_hex(p, "hyper_hash");
  for (const Json& e : field(j, "grid")) {
    GridEntry g = grid_entry_from_json(e);
    if (!(g.psnr_mean >= 0.0) || !(g.utility_mean >= 0.0 && g.utility_mean <= 1.0)) {
      throw FormatError("grid entry m=" + std::to_string(g.m) + " D'=" + std::to_string(g.d_prime) +
                        " is out of range");
    }
    t.grid.push_back(g);
  }
  for (const Json& e : field(j, "channels")) {
    t.channels.push_back({get<std::size_t>(e, "m"), get<std::size_t>(e, "channel"), get<double>(e, "utility"),
                          get<double>(e, "psnr")});
  }
  if (j.contains("warnings")) t.warnings = get<std::vector<std::string>>(j, "warnings");
  return t;
}

Json to_json(const ConstraintSet& c) {
  return Json{{"psnr_budget_db", c.psnr_budget},
              {"mac_budget", optional_json(c.mac_budget)},
              {"byte_budget", optional_json(c.byte_budget)},
              {"pivot_db", c.pivot_db}};
}

ConstraintSet constraints_from_json(const Json& j) {
  ConstraintSet c;
  c.psnr_budget = get<double>(j, "psnr_budget_db");
  c.mac_budget = get_optional<std::uint64_t>(j, "mac_budget");
  c.byte_budget = get_optional<std::uint64_t>(j, "byte_budget");
  if (auto pivot = get_optional<double>(j, "pivot_db")) c.pivot_db = *pivot;
  c.validate();
  return c;
}

Json to_json(const Plan& p) {
  Json scores = Json::array();
  for (const auto& s : p.scores) {
    scores.push_back(Json{{"channel", s.channel}, {"criterion", std::string(to_string(s.criterion))}, {"value", s.value}});
  }
  return Json{{"format", "fenplan-plan"},
              {"version", 1},
              {"m", p.topology.m},
              {"d_prime", p.topology.d_prime},
              {"regime", p.constraints.high_privacy() ? "high-privacy" : "low-privacy"},
              {"constraints", to_json(p.constraints)},
              {"predicted", p.predicted ? to_json(*p.predicted) : Json(nullptr)},
              {"scores", std::move(scores)},
              {"decision", to_json(p.decision)},
              {"config", to_json(p.config)},
              {"cost", to_json(p.cost)}};
}

Json to_json(const SettingsReport& r) {
  Json settings = Json::array();
  for (const auto& s : r.settings) {
    Json trials = Json::array();
    for (const auto& t : s.trials) {
      trials.push_back(Json{{"selected", t.selected}, {"utility", t.utility}, {"psnr", t.psnr}});
    }
    settings.push_back(Json{{"name", s.name},
                            {"pruned", s.pruned},
                            {"utility_mean", s.utility_mean},
                            {"utility_std", s.utility_std},
                            {"psnr_mean", s.psnr_mean},
                            {"psnr_std", s.psnr_std},
                            {"trials", std::move(trials)}});
  }
  return Json{{"m", r.m},
              {"d_prime", r.d_prime},
              {"n_prune_utility", r.n_prune_utility},
              {"n_prune_privacy", r.n_prune_privacy},
              {"n_trials", r.n_trials},
              {"seed", r.seed},
              {"settings", std::move(settings)}};
}

std::string settings_to_csv(const SettingsReport& r) {
  std::string out = "statistic";
  for (const auto& s : r.settings) out += "," + s.name;
  out += "\n";
  const std::pair<const char*, double SettingResult::*> rows[] = {
      {"utility_mean", &SettingResult::utility_mean},
      {"utility_std", &SettingResult::utility_std},
      {"psnr_mean", &SettingResult::psnr_mean},
      {"psnr_std", &SettingResult::psnr_std},
  };
  for (const auto& [name, member] : rows) {
    out += name;
    for (const auto& s : r.settings) out += "," + format_number(s.*member);
    out += "\n";
  }
  return out;
}

std::vector<ProfileRow> profile_rows(std::size_t m, const CostReport& report) {
  std::vector<ProfileRow> rows;
  std::size_t ordinal = 0;
  for (std::size_t i = 0; i < report.layers.size(); ++i) {
    const LayerCost& l = report.layers[i];
    if (l.kind != LayerKind::conv) continue;
    ProfileRow r;
    r.m = m;
    r.conv = ordinal++;
    r.macs = l.macs;
    r.params = l.params;
    r.bytes = l.params * 4;
    if (i < report.layer_latency.size() && report.layer_latency[i]) {
      r.ms_median = report.layer_latency[i]->median_ms;
      r.ms_iqr = report.layer_latency[i]->iqr_ms;
    }
    rows.push_back(r);
  }
  ProfileRow total;
  total.m = m;
  total.macs = report.total_macs;
  total.params = report.params;
  total.bytes = report.bytes;
  if (report.latency) {
    total.ms_median = report.latency->median_ms;
    total.ms_iqr = report.latency->iqr_ms;
  }
  rows.push_back(total);
  return rows;
}

std::string profile_to_csv(std::span<const ProfileRow> rows) {
  std::string out = "m,layer,macs,params,bytes,ms_per_image_median,ms_per_image_iqr\n";
  for (const auto& r : rows) {
    out += std::to_string(r.m) + "," + (r.conv ? std::to_string(*r.conv) : std::string("total")) + "," +
           std::to_string(r.macs) + "," + std::to_string(r.params) + "," + std::to_string(r.bytes) + "," +
           optional_number(r.ms_median) + "," + optional_number(r.ms_iqr) + "\n";
  }
  return out;
}

std::vector<ProfileRow> profile_from_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].size() != 7 || rows[0][0] != "m") throw FormatError("not a profile CSV");
  std::vector<ProfileRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 7) throw FormatError("profile CSV row " + std::to_string(i) + " needs 7 fields");
    ProfileRow r;
    r.m = parse_count(f[0]);
    if (f[1] != "total") r.conv = parse_count(f[1]);
    r.macs = parse_count(f[2]);
    r.params = parse_count(f[3]);
    r.bytes = parse_count(f[4]);
    if (!f[5].empty()) r.ms_median = parse_number(f[5]);
    if (!f[6].empty()) r.ms_iqr = parse_number(f[6]);
    out.push_back(r);
  }
  return out;
}

}  // namespace fenplan
