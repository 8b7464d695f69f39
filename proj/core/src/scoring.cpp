#include "fenplan/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "fenplan/csv.hpp"
#include "fenplan/error.hpp"
#include "fenplan/fen.hpp"
#include "fenplan/linalg.hpp"
#include "fenplan/rng.hpp"
#include "parallel.hpp"

namespace fenplan {

ScatterPair class_scatter(const Matrix& rows, std::span<const int> labels, ScatterWeighting weighting) {
  if (labels.size() != rows.rows()) {
    throw DimensionError("class_scatter: " + std::to_string(rows.rows()) + " rows but " +
                         std::to_string(labels.size()) + " labels");
  }
  if (!rows.all_finite()) throw NonFiniteError("class_scatter: representations contain NaN or Inf");

  // Dense class ids in ascending label order.
  std::map<int, std::size_t> class_of;
  for (int y : labels) {
    if (y < 0) throw ConfigError("class_scatter: negative label " + std::to_string(y));
    class_of.emplace(y, 0);
  }
  if (class_of.size() < 2) throw ConfigError("class_scatter: need at least two classes, got " +
                                             std::to_string(class_of.size()));
  std::size_t next = 0;
  for (auto& [label, id] : class_of) id = next++;

  const std::size_t n = rows.rows();
  const std::size_t dim = rows.cols();
  const std::size_t k = class_of.size();

  ScatterPair sp;
  sp.weighting = weighting;
  sp.n_total = n;
  sp.class_counts.assign(k, 0);

  Matrix class_means(k, dim);
  std::vector<double> global(dim, 0.0);
  std::vector<std::size_t> cls(n);
  for (std::size_t i = 0; i < n; ++i) {
    cls[i] = class_of.at(labels[i]);
    ++sp.class_counts[cls[i]];
    auto r = rows.row(i);
    auto m = class_means.row(cls[i]);
    for (std::size_t d = 0; d < dim; ++d) {
      m[d] += r[d];
      global[d] += r[d];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double inv = 1.0 / static_cast<double>(sp.class_counts[c]);
    for (double& v : class_means.row(c)) v *= inv;
  }
  for (double& v : global) v /= static_cast<double>(n);

  sp.between = Matrix(dim, dim);
  std::vector<double> diff(dim);
  for (std::size_t c = 0; c < k; ++c) {
    auto m = class_means.row(c);
    const double weight = weighting == ScatterWeighting::class_size ? static_cast<double>(sp.class_counts[c]) : 1.0;
    for (std::size_t d = 0; d < dim; ++d) diff[d] = m[d] - global[d];
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = a; b < dim; ++b) sp.between(a, b) += weight * diff[a] * diff[b];
  }

  sp.within = Matrix(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = rows.row(i);
    auto m = class_means.row(cls[i]);
    for (std::size_t d = 0; d < dim; ++d) diff[d] = r[d] - m[d];
    for (std::size_t a = 0; a < dim; ++a) {
      const double da = diff[a];
      if (da == 0.0) continue;
      auto wa = sp.within.row(a);
      for (std::size_t b = a; b < dim; ++b) wa[b] += da * diff[b];
    }
  }

  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = a + 1; b < dim; ++b) {
      sp.between(b, a) = sp.between(a, b);
      sp.within(b, a) = sp.within(a, b);
    }
  return sp;
}

double default_ridge(const ScatterPair& sp) {
  const auto dim = static_cast<double>(sp.dim());
  const double tw = sp.within.trace();
  if (tw <= 0.0) return 1e-6 * std::max(sp.between.trace() / dim, 1.0);
  const bool rank_deficient = sp.n_total < sp.class_count() + sp.dim();
  return rank_deficient ? 1e-6 * tw / dim : 0.0;
}

double fisher_score(const ScatterPair& sp, double ridge) {
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ConfigError("fisher_score: ridge must be finite and >= 0");
  const std::size_t dim = sp.dim();
  if (dim == 0 || sp.within.rows() != dim) throw DimensionError("fisher_score: malformed scatter pair");

  if (std::all_of(sp.between.data().begin(), sp.between.data().end(), [](double v) { return v == 0.0; })) {
    return 0.0;
  }

  Matrix a = sp.within;
  for (std::size_t i = 0; i < dim; ++i) a(i, i) += ridge;
  Matrix l;
  try {
    l = cholesky(a);
  } catch (const NumericError&) {
    throw NumericError("fisher_score: S_w + " + format_number(ridge) +
                       " I is not positive definite; use a larger ridge (default_ridge gives " +
                       format_number(default_ridge(sp)) + ")");
  }
  // L^-1 S_b L^-T, using the symmetry of S_b for the right-hand factor.
  const Matrix left = solve_lower(l, sp.between);
  const Matrix reduced = symmetrized(solve_lower(l, left.transposed()));
  return std::max(0.0, largest_eigenvalue_sym(reduced));
}

double channel_fisher_score(const Matrix& rows, std::span<const int> labels, ScatterWeighting weighting) {
  const ScatterPair sp = class_scatter(rows, labels, weighting);
  double ridge = default_ridge(sp);
  const double floor = 1e-6 * std::max(sp.within.trace(), sp.between.trace()) /
                       static_cast<double>(sp.dim());
  for (int attempt = 0;; ++attempt) {
    try {
      return fisher_score(sp, ridge);
    } catch (const ConvergenceError&) {
      throw;
    } catch (const NumericError&) {
      if (attempt == 8) throw;
      ridge = std::max(ridge * 10.0, floor > 0.0 ? floor : 1e-12);
    }
  }
}

std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::fisher_lda: return "fisher_lda";
    case Criterion::wgt_fro: return "wgt_fro";
    case Criterion::rep_mm: return "rep_mm";
    case Criterion::rep_ms: return "rep_ms";
    case Criterion::rep_mf: return "rep_mf";
  }
  return "?";
}

Criterion parse_criterion(std::string_view name) {
  for (Criterion c : {Criterion::fisher_lda, Criterion::wgt_fro, Criterion::rep_mm, Criterion::rep_ms,
                      Criterion::rep_mf}) {
    if (name == to_string(c)) return c;
  }
  throw FormatError("unknown criterion '" + std::string(name) + "'");
}

double weight_frobenius(const FilterBank& filters, std::size_t j) {
  if (j >= filters.out_channels) {
    throw ConfigError("filter " + std::to_string(j) + " out of range for " +
                      std::to_string(filters.out_channels) + " filters");
  }
  double s = 0.0;
  for (double w : filters.filter(j)) s += w * w;
  return std::sqrt(s);
}

double representation_score(Criterion criterion, const Matrix& rows) {
  if (rows.rows() == 0 || rows.cols() == 0) throw ConfigError("representation_score: no representations");
  const auto width = static_cast<double>(rows.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    auto r = rows.row(i);
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / width;
    switch (criterion) {
      case Criterion::rep_mm:
        total += mean;
        break;
      case Criterion::rep_ms: {
        double ss = 0.0;
        for (double v : r) ss += (v - mean) * (v - mean);
        total += std::sqrt(ss / width);
        break;
      }
      case Criterion::rep_mf: {
        double ss = 0.0;
        for (double v : r) ss += v * v;
        total += std::sqrt(ss);
        break;
      }
      default:
        throw ConfigError("representation_score: " + std::string(to_string(criterion)) +
                          " is not a representation criterion");
    }
  }
  return total / static_cast<double>(rows.rows());
}

double unsupervised_score(Criterion criterion, const FilterBank* filters, std::size_t channel, const Matrix* rows) {
  switch (criterion) {
    case Criterion::wgt_fro:
      if (filters == nullptr) throw ConfigError("wgt_fro needs the filter bank");
      return weight_frobenius(*filters, channel);
    case Criterion::rep_mm:
    case Criterion::rep_ms:
    case Criterion::rep_mf:
      if (rows == nullptr) throw ConfigError(std::string(to_string(criterion)) + " needs representations");
      return representation_score(criterion, *rows);
    case Criterion::fisher_lda:
      break;
  }
  throw ConfigError("fisher_lda is supervised; use fisher_score");
}

std::vector<ChannelScore> score_channels(const FeatureTensor& reps, std::span<const int> labels,
                                         Criterion criterion, const FilterBank* filters,
                                         ScatterWeighting weighting, std::size_t threads) {
  if (criterion == Criterion::wgt_fro) {
    if (filters == nullptr) throw ConfigError("wgt_fro needs the filter bank");
    if (filters->out_channels != reps.c()) {
      throw DimensionError("filter bank has " + std::to_string(filters->out_channels) +
                           " filters for " + std::to_string(reps.c()) + " channels");
    }
  }
  std::vector<ChannelScore> scores(reps.c());
  detail::parallel_for(reps.c(), threads, [&](std::size_t j) {
    double value = 0.0;
    if (criterion == Criterion::wgt_fro) {
      value = weight_frobenius(*filters, j);
    } else {
      const Matrix rows = flatten_channel(reps, j);
      value = criterion == Criterion::fisher_lda ? channel_fisher_score(rows, labels, weighting)
                                                 : representation_score(criterion, rows);
    }
    scores[j] = ChannelScore{j, criterion, value};
  });
  return scores;
}

std::vector<std::size_t> rank_channels(std::span<const ChannelScore> scores) {
  std::set<std::size_t> seen;
  for (const auto& s : scores) {
    if (!seen.insert(s.channel).second) {
      throw ConfigError("rank_channels: duplicate entry for channel " + std::to_string(s.channel));
    }
    if (s.criterion != scores.front().criterion) throw ConfigError("rank_channels: mixed criteria");
    if (!std::isfinite(s.value)) throw NonFiniteError("rank_channels: non-finite score");
  }
  std::vector<ChannelScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const ChannelScore& a, const ChannelScore& b) {
    return a.value != b.value ? a.value < b.value : a.channel < b.channel;
  });
  std::vector<std::size_t> order;
  order.reserve(sorted.size());
  for (const auto& s : sorted) order.push_back(s.channel);
  return order;
}

void PruneDecision::validate(std::size_t channel_count) const {
  std::vector<int> owner(channel_count, 0);
  auto mark = [&](const std::vector<std::size_t>& set, const char* name) {
    for (std::size_t ch : set) {
      if (ch >= channel_count) throw ConfigError(std::string(name) + " holds out-of-range channel " + std::to_string(ch));
      if (owner[ch]++ != 0) throw ConfigError("channel " + std::to_string(ch) + " appears in more than one set");
    }
  };
  mark(pruned_utility, "pruned_utility");
  mark(pruned_privacy, "pruned_privacy");
  mark(remaining, "remaining");
  for (std::size_t ch = 0; ch < channel_count; ++ch)
    if (owner[ch] == 0) throw ConfigError("channel " + std::to_string(ch) + " is in no set");
  for (std::size_t ch : selected)
    if (!std::binary_search(remaining.begin(), remaining.end(), ch))
      throw ConfigError("selected channel " + std::to_string(ch) + " is not in the remaining set");
}

PruneDecision prune_and_select(std::span<const std::size_t> utility_order, std::span<const double> privacy_psnr,
                               std::size_t n_prune_utility, std::size_t n_prune_privacy, std::size_t d_prime,
                               std::uint64_t seed) {
  const std::size_t count = privacy_psnr.size();
  if (utility_order.size() != count) {
    throw ConfigError("utility order has " + std::to_string(utility_order.size()) + " channels, privacy table " +
                      std::to_string(count));
  }
  std::vector<bool> seen(count, false);
  for (std::size_t ch : utility_order) {
    if (ch >= count || seen[ch]) throw ConfigError("utility order is not a permutation of the channel ids");
    seen[ch] = true;
  }
  for (double p : privacy_psnr)
    if (!std::isfinite(p)) throw NonFiniteError("privacy table holds a non-finite PSNR");
  if (n_prune_utility + n_prune_privacy >= count) {
    throw ConfigError("pruning " + std::to_string(n_prune_utility) + " + " + std::to_string(n_prune_privacy) +
                      " channels leaves none of " + std::to_string(count));
  }
  if (d_prime == 0) throw ConfigError("d_prime must be positive");

  PruneDecision d;
  d.seed = seed;
  std::vector<int> state(count, 0);  // 0 remaining, 1 utility, 2 privacy
  for (std::size_t i = 0; i < n_prune_utility; ++i) state[utility_order[i]] = 1;

  std::vector<std::size_t> leak_order(count);
  std::iota(leak_order.begin(), leak_order.end(), std::size_t{0});
  std::stable_sort(leak_order.begin(), leak_order.end(),
                   [&](std::size_t a, std::size_t b) { return privacy_psnr[a] > privacy_psnr[b]; });
  for (std::size_t i = 0; i < n_prune_privacy; ++i)
    if (state[leak_order[i]] == 0) state[leak_order[i]] = 2;

  for (std::size_t ch = 0; ch < count; ++ch) {
    (state[ch] == 1 ? d.pruned_utility : state[ch] == 2 ? d.pruned_privacy : d.remaining).push_back(ch);
  }
  if (d_prime > d.remaining.size()) {
    throw ConfigError("d_prime=" + std::to_string(d_prime) + " exceeds the " + std::to_string(d.remaining.size()) +
                      " channels left after pruning");
  }
  Rng rng = Rng::stream(seed, "prune_and_select/selection");
  for (std::size_t idx : rng.sample(d.remaining.size(), d_prime)) d.selected.push_back(d.remaining[idx]);
  return d;
}

std::string scores_to_csv(std::span<const ChannelScore> scores) {
  std::string out = "channel,criterion,value\n";
  for (const auto& s : scores) {
    out += std::to_string(s.channel) + "," + std::string(to_string(s.criterion)) + "," + format_number(s.value) + "\n";
  }
  return out;
}

std::vector<ChannelScore> scores_from_csv(std::string_view text) {
  auto rows = parse_csv(text);
  if (rows.empty() || rows.front() != std::vector<std::string>{"channel", "criterion", "value"}) {
    throw FormatError("scores CSV must start with 'channel,criterion,value'");
  }
  std::vector<ChannelScore> scores;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw FormatError("scores CSV row " + std::to_string(i) + " needs 3 fields");
    const double ch = parse_number(rows[i][0]);
    if (ch < 0 || ch != std::floor(ch)) throw FormatError("scores CSV: bad channel id '" + rows[i][0] + "'");
    scores.push_back({static_cast<std::size_t>(ch), parse_criterion(rows[i][1]), parse_number(rows[i][2])});
  }
  return scores;
}

}  // namespace fenplan
