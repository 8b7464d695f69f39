#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fenplan/tensor.hpp"

namespace fenplan {

// How class means enter the between-class scatter. `unweighted` sums the
// outer products of (class mean - global mean) once per class; `class_size`
// is the textbook LDA form that weights each term by the class size.
enum class ScatterWeighting { unweighted, class_size };

// Between- and within-class scatter of one channel's flattened
// representations (dim = H' * W').
struct ScatterPair {
  Matrix between;
  Matrix within;
  std::vector<std::size_t> class_counts;  // one entry per class present
  std::size_t n_total = 0;
  ScatterWeighting weighting = ScatterWeighting::unweighted;

  std::size_t dim() const noexcept { return between.rows(); }
  std::size_t class_count() const noexcept { return class_counts.size(); }
};

// rows: N x dim, labels: class index per row. Needs at least two distinct
// classes (ConfigError otherwise).
ScatterPair class_scatter(const Matrix& rows, std::span<const int> labels,
                          ScatterWeighting weighting = ScatterWeighting::unweighted);

// 1e-6 * trace(S_w) / dim when S_w is rank deficient (N - K < dim), else 0.
// A zero-trace S_w gets 1e-6 * max(trace(S_b) / dim, 1) so the result stays
// usable.
double default_ridge(const ScatterPair& sp);

// Largest eigenvalue of (S_w + ridge I)^-1 S_b, computed on the symmetric
// matrix L^-1 S_b L^-T where S_w + ridge I = L L^T. Result is >= 0. Throws
// NumericError (suggesting a larger ridge) if the Cholesky factorization
// fails.
double fisher_score(const ScatterPair& sp, double ridge);

// Fisher score of one channel with default_ridge, escalating the ridge
// tenfold (up to 8 times) while S_w + ridge I fails to factor.
double channel_fisher_score(const Matrix& rows, std::span<const int> labels,
                            ScatterWeighting weighting = ScatterWeighting::unweighted);

enum class Criterion { fisher_lda, wgt_fro, rep_mm, rep_ms, rep_mf };

std::string_view to_string(Criterion c) noexcept;
Criterion parse_criterion(std::string_view name);

struct ChannelScore {
  std::size_t channel = 0;
  Criterion criterion = Criterion::fisher_lda;
  double value = 0.0;  // higher = more useful under the criterion

  bool operator==(const ChannelScore&) const = default;
};

// Frobenius norm of filter j.
double weight_frobenius(const FilterBank& filters, std::size_t j);

// rep_mm, rep_ms (population std per sample) or rep_mf over the rows of one
// channel's flattened representations.
double representation_score(Criterion criterion, const Matrix& rows);

// Dispatches the unsupervised criteria. wgt_fro reads `filters` (filter
// `channel`); the rep_* criteria read `rows`. Throws ConfigError when the
// needed input is missing or the criterion is fisher_lda.
double unsupervised_score(Criterion criterion, const FilterBank* filters, std::size_t channel,
                          const Matrix* rows);

// Scores every channel of `reps`. `labels` is needed for fisher_lda,
// `filters` (the bank that produced reps) for wgt_fro. Channels are
// independent; `threads` > 1 gives the same result as the sequential run.
std::vector<ChannelScore> score_channels(const FeatureTensor& reps, std::span<const int> labels,
                                         Criterion criterion, const FilterBank* filters = nullptr,
                                         ScatterWeighting weighting = ScatterWeighting::unweighted,
                                         std::size_t threads = 1);

// Channel ids ordered by ascending score (worst first); ties by ascending
// channel id. Throws ConfigError on duplicate channels or mixed criteria.
std::vector<std::size_t> rank_channels(std::span<const ChannelScore> scores);

struct PruneDecision {
  std::vector<std::size_t> pruned_utility;
  std::vector<std::size_t> pruned_privacy;
  std::vector<std::size_t> remaining;
  std::vector<std::size_t> selected;
  std::uint64_t seed = 0;

  // Throws ConfigError if the sets do not partition [0, channel_count) or
  // `selected` leaves `remaining`.
  void validate(std::size_t channel_count) const;

  bool operator==(const PruneDecision&) const = default;
};

// Prunes the n_prune_utility first entries of utility_order (worst first) and
// the n_prune_privacy channels with the highest PSNR (ties: lower id first);
// a channel in both sets stays in the utility set only. Then draws d_prime
// channels uniformly from the rest using `seed`.
//
// privacy_psnr is indexed by channel id and fixes the channel count;
// utility_order must be a permutation of those ids.
PruneDecision prune_and_select(std::span<const std::size_t> utility_order,
                               std::span<const double> privacy_psnr, std::size_t n_prune_utility,
                               std::size_t n_prune_privacy, std::size_t d_prime, std::uint64_t seed);

// "channel,criterion,value" with a header row.
std::string scores_to_csv(std::span<const ChannelScore> scores);
std::vector<ChannelScore> scores_from_csv(std::string_view text);

}  // namespace fenplan
