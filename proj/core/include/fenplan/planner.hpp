#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fenplan/cost_model.hpp"
#include "fenplan/dataset.hpp"
#include "fenplan/evaluation.hpp"
#include "fenplan/fen.hpp"
#include "fenplan/netspec.hpp"
#include "fenplan/scoring.hpp"

namespace fenplan {

// Aggregate over the seeds of one (m, D') cell. Standard deviations use the
// population convention.
struct GridEntry {
  std::size_t m = 0;
  std::size_t d_prime = 0;
  double utility_mean = 0.0;
  double utility_std = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  std::size_t seeds = 0;
  std::uint64_t macs = 0;   // per image, for any D'-subset at this m
  std::uint64_t bytes = 0;

  bool operator==(const GridEntry&) const = default;
};

// One output channel released alone (D' = 1).
struct ChannelEntry {
  std::size_t m = 0;
  std::size_t channel = 0;
  double utility = 0.0;
  double psnr = 0.0;

  bool operator==(const ChannelEntry&) const = default;
};

struct Provenance {
  std::string dataset_id;
  std::string net_name;
  std::uint64_t net_checksum = 0;
  std::uint64_t seed = 0;
  std::size_t seeds_per_cell = 0;
  std::uint64_t hyper_hash = 0;

  bool operator==(const Provenance&) const = default;
};

struct CharacterizationTable {
  std::vector<GridEntry> grid;         // sorted by (m, D')
  std::vector<ChannelEntry> channels;  // sorted by (m, channel)
  Provenance provenance;
  std::vector<std::string> warnings;   // skipped cells

  const GridEntry* find(std::size_t m, std::size_t d_prime) const;
  bool has_channels(std::size_t m) const;
  // Per-channel values at layer m, indexed by channel id. Throws ConfigError
  // unless every channel 0..count-1 has an entry.
  std::vector<double> channel_psnr(std::size_t m, std::size_t count) const;
  std::vector<double> channel_utility(std::size_t m, std::size_t count) const;

  bool operator==(const CharacterizationTable&) const = default;
};

struct CharacterizeOptions {
  std::vector<std::size_t> m_list;
  std::vector<std::size_t> d_list;
  std::size_t seeds_per_cell = 1;
  std::vector<std::size_t> per_channel_m;  // layers to characterize per channel
  std::uint64_t seed = 0;
  EvalHyper hyper;
  std::size_t threads = 1;  // does not affect results
};

// Hash of everything in `opts` that affects the table (not `threads`).
std::uint64_t characterization_hash(const CharacterizeOptions& opts);

// For every (m, D') and seed: a seeded random output subset of size D' at
// layer m (all intermediate channels kept), evaluated on `data`. Cells with
// D' above the channel count at m are skipped with a warning. Then every
// channel of each layer in per_channel_m is evaluated alone.
CharacterizationTable characterize_grid(const PretrainedNet& net, const LabeledDataset& data,
                                        const CharacterizeOptions& opts);

// Output subset used for (m, D', seed index) by characterize_grid.
std::vector<std::size_t> cell_channels(const PretrainedNet& net, std::uint64_t seed, std::size_t m,
                                       std::size_t d_prime, std::size_t seed_index);

struct ConstraintSet {
  double psnr_budget = 0.0;                 // max mean PSNR in dB
  std::optional<std::uint64_t> mac_budget;  // per image; unset = unlimited
  std::optional<std::uint64_t> byte_budget;
  // Budgets below the pivot count as a high privacy requirement.
  double pivot_db = 22.0;

  bool high_privacy() const noexcept { return psnr_budget < pivot_db; }
  // Throws ConfigError unless every budget is positive.
  void validate() const;
  bool admits(const GridEntry& e) const noexcept;
  bool admits(const CostReport& c) const noexcept;

  bool operator==(const ConstraintSet&) const = default;
};

struct Topology {
  std::size_t m = 0;
  std::size_t d_prime = 0;
  bool operator==(const Topology&) const = default;
};

// Feasible cells meet every budget. High privacy requirement: deepest
// feasible m, then the largest feasible D' there. Otherwise: shallowest
// feasible m, then the largest feasible D'. Throws InfeasibleError (listing
// the nearest misses) when nothing is feasible.
Topology choose_topology(const CharacterizationTable& table, const ConstraintSet& constraints);

struct PlanOptions {
  std::size_t n_prune_utility = 0;
  std::size_t n_prune_privacy = 0;
  std::optional<std::size_t> d_prime;  // overrides the table's choice
  std::uint64_t seed = 0;
  ScatterWeighting weighting = ScatterWeighting::unweighted;
  std::size_t threads = 1;
};

struct Plan {
  Topology topology;
  std::vector<ChannelScore> scores;  // Fisher score of every channel at m
  PruneDecision decision;
  FenConfig config;
  std::optional<GridEntry> predicted;
  CostReport cost;
  ConstraintSet constraints;

  bool operator==(const Plan&) const = default;
};

// choose_topology, Fisher scores of all channels at m on data.train,
// pruning (privacy ranks from the table's per-channel PSNR at m), seeded
// random selection, then a cost check of the sliced FEN.
Plan plan(const PretrainedNet& net, const LabeledDataset& data, const CharacterizationTable& table,
          const ConstraintSet& constraints, const PlanOptions& opts);

struct TrialResult {
  std::vector<std::size_t> selected;
  double utility = 0.0;
  double psnr = 0.0;

  bool operator==(const TrialResult&) const = default;
};

struct SettingResult {
  std::string name;
  std::vector<std::size_t> pruned;  // union of both pruned sets
  std::vector<TrialResult> trials;
  double utility_mean = 0.0;
  double utility_std = 0.0;
  double psnr_mean = 0.0;
  double psnr_std = 0.0;

  bool operator==(const SettingResult&) const = default;
};

struct SettingsReport {
  std::size_t m = 0;
  std::size_t d_prime = 0;
  std::size_t n_prune_utility = 0;
  std::size_t n_prune_privacy = 0;
  std::size_t n_trials = 0;
  std::uint64_t seed = 0;
  // random selection; characterization-based pruning; LDA + characterization
  // pruning.
  std::vector<SettingResult> settings;

  bool operator==(const SettingsReport&) const = default;
};

struct CompareOptions {
  std::size_t m = 1;
  std::size_t d_prime = 1;
  std::size_t n_prune_utility = 0;
  std::size_t n_prune_privacy = 0;
  std::size_t n_trials = 20;
  std::uint64_t seed = 0;
  EvalHyper hyper;
  ScatterWeighting weighting = ScatterWeighting::unweighted;
  std::size_t threads = 1;
};

// Runs n_trials seeded selections in each setting. `table` must hold
// per-channel entries at opts.m. Trial t uses the same selection seed in
// every setting.
SettingsReport compare_settings(const PretrainedNet& net, const LabeledDataset& data,
                                const CharacterizationTable& table, const CompareOptions& opts);

// Mean and population standard deviation (two-pass).
std::pair<double, double> mean_std(std::span<const double> values);

// Characterization cache keyed by (net checksum, dataset id, hyper hash).
std::uint64_t cache_key(std::uint64_t net_checksum, const std::string& dataset_id, std::uint64_t hyper_hash);
std::filesystem::path cache_path(const std::filesystem::path& dir, std::uint64_t key);
std::optional<CharacterizationTable> load_cached_table(const std::filesystem::path& dir, std::uint64_t key);
void store_cached_table(const std::filesystem::path& dir, std::uint64_t key, const CharacterizationTable& table);

}  // namespace fenplan
