#include "fenplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "fenplan/checksum.hpp"
#include "fenplan/csv.hpp"
#include "fenplan/error.hpp"
#include "fenplan/rng.hpp"
#include "fenplan/serialize.hpp"
#include "file_util.hpp"
#include "parallel.hpp"

namespace fenplan {

namespace {

struct PrefixReps {
  FeatureTensor train;
  FeatureTensor test;
};

PrefixReps prefix_reps(const PretrainedNet& net, const LabeledDataset& data, std::size_t m) {
  const Fen fen = truncate(net, m);
  return {fen.forward(data.train.images), fen.forward(data.test.images)};
}

// Releasing a channel subset of the unsliced prefix output equals forwarding
// the FEN sliced at its last conv layer: every output channel is computed
// independently.
EvalResult evaluate_subset(const PrefixReps& reps, std::span<const std::size_t> channels,
                           const LabeledDataset& data, EvalHyper hyper, std::uint64_t job_seed) {
  hyper.classifier.seed = job_seed;
  return evaluate_representations(reps.train.select_channels(channels), reps.test.select_channels(channels), data,
                                  hyper);
}

std::uint64_t job_seed(std::uint64_t seed, const std::string& name, std::uint64_t index) {
  return Rng::stream(seed, name, index).next();
}

std::string cell_name(std::size_t m, std::size_t d) {
  return "m" + std::to_string(m) + "/d" + std::to_string(d);
}

FenConfig config_for(const PretrainedNet& net, std::size_t m, std::vector<std::size_t> output) {
  FenConfig cfg = FenConfig::full(net, m);
  cfg.output_channels = std::move(output);
  return cfg;
}

std::size_t width_at(const PretrainedNet& net, std::size_t m) {
  const auto widths = net.conv_widths();
  if (m < 1 || m > widths.size()) {
    throw ConfigError("m=" + std::to_string(m) + " outside [1, " + std::to_string(widths.size()) + "]");
  }
  return widths[m - 1];
}

std::vector<std::size_t> utility_order_from(std::span<const double> utility) {
  std::vector<std::size_t> order(utility.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return utility[a] < utility[b]; });
  return order;
}

std::vector<double> per_channel(const std::vector<ChannelEntry>& entries, std::size_t m, std::size_t count,
                                double ChannelEntry::*field) {
  std::vector<double> out(count, std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(count, false);
  for (const auto& e : entries) {
    if (e.m != m || e.channel >= count) continue;
    out[e.channel] = e.*field;
    seen[e.channel] = true;
  }
  for (std::size_t j = 0; j < count; ++j) {
    if (!seen[j]) {
      throw ConfigError("characterization table has no per-channel entry for channel " + std::to_string(j) +
                        " at m=" + std::to_string(m));
    }
  }
  return out;
}

std::vector<ChannelScore> fisher_scores_at(const PretrainedNet& net, const LabeledDataset& data, std::size_t m,
                                           ScatterWeighting weighting, std::size_t threads) {
  const FeatureTensor reps = truncate(net, m).forward(data.train.images);
  return score_channels(reps, data.train.labels, Criterion::fisher_lda, nullptr, weighting, threads);
}

}  // namespace

const GridEntry* CharacterizationTable::find(std::size_t m, std::size_t d_prime) const {
  for (const auto& e : grid)
    if (e.m == m && e.d_prime == d_prime) return &e;
  return nullptr;
}

bool CharacterizationTable::has_channels(std::size_t m) const {
  return std::any_of(channels.begin(), channels.end(), [&](const ChannelEntry& e) { return e.m == m; });
}

std::vector<double> CharacterizationTable::channel_psnr(std::size_t m, std::size_t count) const {
  return per_channel(channels, m, count, &ChannelEntry::psnr);
}

std::vector<double> CharacterizationTable::channel_utility(std::size_t m, std::size_t count) const {
  return per_channel(channels, m, count, &ChannelEntry::utility);
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size()))};
}

std::uint64_t characterization_hash(const CharacterizeOptions& opts) {
  std::string s = "characterize/v1";
  auto add = [&s](const std::string& field) {
    s += '|';
    s += field;
  };
  for (auto m : opts.m_list) add("m" + std::to_string(m));
  for (auto d : opts.d_list) add("d" + std::to_string(d));
  add("s" + std::to_string(opts.seeds_per_cell));
  for (auto m : opts.per_channel_m) add("c" + std::to_string(m));
  add("seed" + std::to_string(opts.seed));
  const auto& c = opts.hyper.classifier;
  add(std::to_string(c.epochs) + "," + format_number(c.rate) + "," + std::to_string(c.batch) + "," +
      std::to_string(c.hidden) + "," + format_number(c.l2) + "," + format_number(c.backoff) + "," +
      format_number(c.monotone_tol));
  add(format_number(opts.hyper.recon_lambda_rel) + "," + format_number(opts.hyper.psnr.peak) + "," +
      format_number(opts.hyper.psnr.cap_db));
  return fnv1a64(s);
}

std::vector<std::size_t> cell_channels(const PretrainedNet& net, std::uint64_t seed, std::size_t m,
                                       std::size_t d_prime, std::size_t seed_index) {
  const std::size_t width = width_at(net, m);
  if (d_prime == 0 || d_prime > width) {
    throw ConfigError("D'=" + std::to_string(d_prime) + " outside [1, " + std::to_string(width) + "] at m=" +
                      std::to_string(m));
  }
  return Rng::stream(seed, "characterize/select/" + cell_name(m, d_prime), seed_index).sample(width, d_prime);
}

CharacterizationTable characterize_grid(const PretrainedNet& net, const LabeledDataset& data,
                                        const CharacterizeOptions& opts) {
  data.validate();
  if (opts.seeds_per_cell == 0) throw ConfigError("seeds_per_cell must be positive");
  CharacterizationTable table;
  table.provenance = {data.id, net.name, net_checksum(net), opts.seed, opts.seeds_per_cell,
                      characterization_hash(opts)};

  std::vector<std::size_t> ms = opts.m_list;
  ms.insert(ms.end(), opts.per_channel_m.begin(), opts.per_channel_m.end());
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  for (auto m : ms) width_at(net, m);

  struct Job {
    std::size_t m;
    std::size_t d;          // 0 for a per-channel job
    std::size_t index;      // seed index or channel id
    std::vector<std::size_t> channels;
    std::uint64_t seed;
    EvalResult result;
  };
  std::vector<Job> jobs;
  std::vector<std::size_t> ds = opts.d_list;
  std::sort(ds.begin(), ds.end());
  ds.erase(std::unique(ds.begin(), ds.end()), ds.end());
  std::vector<std::size_t> grid_ms = opts.m_list;
  std::sort(grid_ms.begin(), grid_ms.end());
  grid_ms.erase(std::unique(grid_ms.begin(), grid_ms.end()), grid_ms.end());
  for (auto m : grid_ms) {
    for (auto d : ds) {
      if (d == 0 || d > width_at(net, m)) {
        table.warnings.push_back("skipped cell m=" + std::to_string(m) + " D'=" + std::to_string(d) + ": layer has " +
                                 std::to_string(width_at(net, m)) + " channels");
        continue;
      }
      for (std::size_t s = 0; s < opts.seeds_per_cell; ++s) {
        jobs.push_back({m, d, s, cell_channels(net, opts.seed, m, d, s),
                        job_seed(opts.seed, "characterize/eval/" + cell_name(m, d), s), {}});
      }
    }
  }
  std::vector<std::size_t> channel_ms = opts.per_channel_m;
  std::sort(channel_ms.begin(), channel_ms.end());
  channel_ms.erase(std::unique(channel_ms.begin(), channel_ms.end()), channel_ms.end());
  for (auto m : channel_ms) {
    for (std::size_t j = 0; j < width_at(net, m); ++j) {
      jobs.push_back({m, 0, j, {j}, job_seed(opts.seed, "characterize/channel/m" + std::to_string(m), j), {}});
    }
  }

  // One forward pass per layer count; jobs only select channels from it.
  std::vector<PrefixReps> reps(ms.size());
  detail::parallel_for(ms.size(), opts.threads, [&](std::size_t i) { reps[i] = prefix_reps(net, data, ms[i]); });
  auto reps_for = [&](std::size_t m) -> const PrefixReps& {
    return reps[static_cast<std::size_t>(std::lower_bound(ms.begin(), ms.end(), m) - ms.begin())];
  };
  detail::parallel_for(jobs.size(), opts.threads, [&](std::size_t i) {
    Job& j = jobs[i];
    j.result = evaluate_subset(reps_for(j.m), j.channels, data, opts.hyper, j.seed);
  });

  for (std::size_t i = 0; i < jobs.size();) {
    const Job& first = jobs[i];
    if (first.d == 0) {
      table.channels.push_back({first.m, first.index, first.result.utility, first.result.privacy});
      ++i;
      continue;
    }
    std::vector<double> util, psnr;
    std::size_t k = i;
    for (; k < jobs.size() && jobs[k].d == first.d && jobs[k].m == first.m; ++k) {
      util.push_back(jobs[k].result.utility);
      psnr.push_back(jobs[k].result.privacy);
    }
    GridEntry e;
    e.m = first.m;
    e.d_prime = first.d;
    std::tie(e.utility_mean, e.utility_std) = mean_std(util);
    std::tie(e.psnr_mean, e.psnr_std) = mean_std(psnr);
    e.seeds = util.size();
    const CostReport cost = fen_cost(net, config_for(net, first.m, first.channels));
    e.macs = cost.total_macs;
    e.bytes = cost.bytes;
    table.grid.push_back(e);
    i = k;
  }
  return table;
}

void ConstraintSet::validate() const {
  if (!(psnr_budget > 0.0) || !std::isfinite(psnr_budget)) throw ConfigError("psnr budget must be positive");
  if (mac_budget && *mac_budget == 0) throw ConfigError("MAC budget must be positive");
  if (byte_budget && *byte_budget == 0) throw ConfigError("byte budget must be positive");
  if (!std::isfinite(pivot_db)) throw ConfigError("pivot must be finite");
}

bool ConstraintSet::admits(const GridEntry& e) const noexcept {
  return e.psnr_mean <= psnr_budget && (!mac_budget || e.macs <= *mac_budget) &&
         (!byte_budget || e.bytes <= *byte_budget);
}

bool ConstraintSet::admits(const CostReport& c) const noexcept {
  return (!mac_budget || c.total_macs <= *mac_budget) && (!byte_budget || c.bytes <= *byte_budget);
}

Topology choose_topology(const CharacterizationTable& table, const ConstraintSet& constraints) {
  constraints.validate();
  if (table.grid.empty()) throw ConfigError("characterization table has no grid entries");
  std::vector<const GridEntry*> feasible;
  for (const auto& e : table.grid)
    if (constraints.admits(e)) feasible.push_back(&e);

  if (feasible.empty()) {
    std::vector<const GridEntry*> misses;
    for (const auto& e : table.grid) misses.push_back(&e);
    auto excess = [&](const GridEntry* e) {
      double x = std::max(0.0, e->psnr_mean - constraints.psnr_budget);
      if (constraints.mac_budget && e->macs > *constraints.mac_budget) x += 1e6;
      if (constraints.byte_budget && e->bytes > *constraints.byte_budget) x += 1e6;
      return x;
    };
    std::stable_sort(misses.begin(), misses.end(),
                     [&](const GridEntry* a, const GridEntry* b) { return excess(a) < excess(b); });
    std::string msg = "no characterized topology meets the budget (PSNR <= " + format_number(constraints.psnr_budget) +
                      " dB";
    if (constraints.mac_budget) msg += ", MACs <= " + std::to_string(*constraints.mac_budget);
    if (constraints.byte_budget) msg += ", bytes <= " + std::to_string(*constraints.byte_budget);
    msg += "); nearest misses:";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, misses.size()); ++i) {
      const GridEntry& e = *misses[i];
      msg += " (m=" + std::to_string(e.m) + ", D'=" + std::to_string(e.d_prime) +
             ", PSNR=" + format_number(e.psnr_mean) + " dB, MACs=" + std::to_string(e.macs) +
             ", bytes=" + std::to_string(e.bytes) + ")";
    }
    throw InfeasibleError(msg);
  }

  std::size_t m = feasible.front()->m;
  for (const auto* e : feasible) m = constraints.high_privacy() ? std::max(m, e->m) : std::min(m, e->m);
  std::size_t d = 0;
  for (const auto* e : feasible)
    if (e->m == m) d = std::max(d, e->d_prime);
  return {m, d};
}

Plan plan(const PretrainedNet& net, const LabeledDataset& data, const CharacterizationTable& table,
          const ConstraintSet& constraints, const PlanOptions& opts) {
  Plan p;
  p.constraints = constraints;
  p.topology = choose_topology(table, constraints);
  if (opts.d_prime) p.topology.d_prime = *opts.d_prime;
  const std::size_t m = p.topology.m;
  const std::size_t width = width_at(net, m);

  p.scores = fisher_scores_at(net, data, m, opts.weighting, opts.threads);
  const auto order = rank_channels(p.scores);
  const std::vector<double> leak =
      opts.n_prune_privacy > 0 ? table.channel_psnr(m, width) : std::vector<double>(width, 0.0);
  p.decision = prune_and_select(order, leak, opts.n_prune_utility, opts.n_prune_privacy, p.topology.d_prime,
                                job_seed(opts.seed, "plan/selection", 0));
  p.config = config_for(net, m, p.decision.selected);
  p.config.seed = opts.seed;
  p.config.validate(net);
  if (const GridEntry* e = table.find(m, p.topology.d_prime)) p.predicted = *e;
  p.cost = fen_cost(net, p.config);
  if (!constraints.admits(p.cost)) {
    throw InfeasibleError("sliced FEN (m=" + std::to_string(m) + ", D'=" + std::to_string(p.topology.d_prime) +
                          ") needs " + std::to_string(p.cost.total_macs) + " MACs and " +
                          std::to_string(p.cost.bytes) + " bytes, over budget");
  }
  return p;
}

SettingsReport compare_settings(const PretrainedNet& net, const LabeledDataset& data,
                                const CharacterizationTable& table, const CompareOptions& opts) {
  data.validate();
  if (opts.n_trials == 0) throw ConfigError("n_trials must be positive");
  const std::size_t width = width_at(net, opts.m);
  SettingsReport report;
  report.m = opts.m;
  report.d_prime = opts.d_prime;
  report.n_prune_utility = opts.n_prune_utility;
  report.n_prune_privacy = opts.n_prune_privacy;
  report.n_trials = opts.n_trials;
  report.seed = opts.seed;

  const std::vector<double> leak = table.channel_psnr(opts.m, width);
  const std::vector<double> char_utility = table.channel_utility(opts.m, width);
  const auto lda_order = rank_channels(fisher_scores_at(net, data, opts.m, opts.weighting, opts.threads));
  std::vector<std::size_t> identity(width);
  std::iota(identity.begin(), identity.end(), std::size_t{0});

  struct Setting {
    const char* name;
    std::vector<std::size_t> order;
    std::size_t n_utility;
    std::size_t n_privacy;
  };
  const std::vector<Setting> settings = {
      {"random", identity, 0, 0},
      {"characterization", utility_order_from(char_utility), opts.n_prune_utility, opts.n_prune_privacy},
      {"lda", lda_order, opts.n_prune_utility, opts.n_prune_privacy},
  };

  const PrefixReps reps = prefix_reps(net, data, opts.m);
  std::vector<PruneDecision> decisions(settings.size() * opts.n_trials);
  for (std::size_t s = 0; s < settings.size(); ++s) {
    for (std::size_t t = 0; t < opts.n_trials; ++t) {
      decisions[s * opts.n_trials + t] =
          prune_and_select(settings[s].order, leak, settings[s].n_utility, settings[s].n_privacy, opts.d_prime,
                           job_seed(opts.seed, "compare/selection", t));
    }
  }
  std::vector<EvalResult> results(decisions.size());
  detail::parallel_for(decisions.size(), opts.threads, [&](std::size_t i) {
    results[i] = evaluate_subset(reps, decisions[i].selected, data, opts.hyper,
                                 job_seed(opts.seed, "compare/eval", i % opts.n_trials));
  });

  for (std::size_t s = 0; s < settings.size(); ++s) {
    SettingResult r;
    r.name = settings[s].name;
    const PruneDecision& d0 = decisions[s * opts.n_trials];
    r.pruned = d0.pruned_utility;
    r.pruned.insert(r.pruned.end(), d0.pruned_privacy.begin(), d0.pruned_privacy.end());
    std::sort(r.pruned.begin(), r.pruned.end());
    std::vector<double> util, psnr;
    for (std::size_t t = 0; t < opts.n_trials; ++t) {
      const std::size_t i = s * opts.n_trials + t;
      r.trials.push_back({decisions[i].selected, results[i].utility, results[i].privacy});
      util.push_back(results[i].utility);
      psnr.push_back(results[i].privacy);
    }
    std::tie(r.utility_mean, r.utility_std) = mean_std(util);
    std::tie(r.psnr_mean, r.psnr_std) = mean_std(psnr);
    report.settings.push_back(std::move(r));
  }
  return report;
}

std::uint64_t cache_key(std::uint64_t net_checksum, const std::string& dataset_id, std::uint64_t hyper_hash) {
  Fnv1a64 h;
  h.update(to_hex(net_checksum));
  h.update("|");
  h.update(dataset_id);
  h.update("|");
  h.update(to_hex(hyper_hash));
  return h.digest();
}

std::filesystem::path cache_path(const std::filesystem::path& dir, std::uint64_t key) {
  return dir / ("characterization-" + to_hex(key) + ".json");
}

std::optional<CharacterizationTable> load_cached_table(const std::filesystem::path& dir, std::uint64_t key) {
  const auto path = cache_path(dir, key);
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) return std::nullopt;
  return table_from_json(parse_json(detail::read_text(path)));
}

void store_cached_table(const std::filesystem::path& dir, std::uint64_t key, const CharacterizationTable& table) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create cache directory " + dir.string() + ": " + ec.message());
  const auto path = cache_path(dir, key);
  const auto tmp = path.string() + ".tmp";
  detail::write_text(tmp, dump_json(to_json(table)));
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " into the cache: " + ec.message());
}

}  // namespace fenplan
