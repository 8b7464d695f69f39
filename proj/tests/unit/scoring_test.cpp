#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fenplan/error.hpp"
#include "fenplan/fen.hpp"
#include "fenplan/linalg.hpp"
#include "fenplan/scoring.hpp"
#include "fenplan/synthetic.hpp"
#include "oracles.hpp"

using namespace fenplan;

namespace {

Matrix random_rows(oracle::Draw& d, std::size_t n, std::size_t dim) {
  Matrix m(n, dim);
  for (double& v : m.data()) v = d.normal();
  return m;
}

// Labels 0..k-1 in round-robin so every class is present.
std::vector<int> round_robin(std::size_t n, std::size_t k) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % k);
  return y;
}

double max_abs_diff(const Matrix& a, const Eigen::MatrixXd& b) {
  return (oracle::to_eigen(a) - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(Scatter, HandExample) {
  // Class 0 at {0, 2}, class 1 at {4, 6}: means 1 and 5, global mean 3.
  const Matrix rows(4, 1, std::vector<double>{0, 2, 4, 6});
  const std::vector<int> y{0, 0, 1, 1};
  const ScatterPair u = class_scatter(rows, y);
  EXPECT_DOUBLE_EQ(u.between(0, 0), 8.0);
  EXPECT_DOUBLE_EQ(u.within(0, 0), 4.0);
  const ScatterPair w = class_scatter(rows, y, ScatterWeighting::class_size);
  EXPECT_DOUBLE_EQ(w.between(0, 0), 16.0);
  EXPECT_EQ(u.class_counts, (std::vector<std::size_t>{2, 2}));
}

TEST(Scatter, MatchesDefinitionOracle) {
  oracle::Draw d(40);
  for (int t = 0; t < 20; ++t) {
    const std::size_t dim = 1 + d.index(6), k = 2 + d.index(3), n = k * (2 + d.index(6));
    const Matrix rows = random_rows(d, n, dim);
    const std::vector<int> y = round_robin(n, k);
    for (ScatterWeighting wt : {ScatterWeighting::unweighted, ScatterWeighting::class_size}) {
      Eigen::MatrixXd sb, sw;
      oracle::scatter_by_definition(rows, y, wt == ScatterWeighting::class_size, sb, sw);
      const ScatterPair sp = class_scatter(rows, y, wt);
      EXPECT_LE(max_abs_diff(sp.between, sb), 1e-10 * std::max(1.0, sb.norm()));
      EXPECT_LE(max_abs_diff(sp.within, sw), 1e-10 * std::max(1.0, sw.norm()));
    }
  }
}

TEST(Scatter, SymmetricPositiveSemidefinite) {
  oracle::Draw d(41);
  for (int t = 0; t < 20; ++t) {
    const Matrix rows = random_rows(d, 30, 5);
    const ScatterPair sp = class_scatter(rows, round_robin(30, 3));
    for (const Matrix* m : {&sp.between, &sp.within}) {
      EXPECT_EQ(max_asymmetry(*m), 0.0);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(oracle::to_eigen(*m));
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * std::max(1.0, m->trace()));
    }
  }
}

TEST(Scatter, SingleClassThrows) {
  const Matrix rows(3, 2, 1.0);
  EXPECT_THROW(class_scatter(rows, std::vector<int>{1, 1, 1}), ConfigError);
}

TEST(Fisher, OneDimensionalAnalytic) {
  const Matrix rows(4, 1, std::vector<double>{0, 2, 4, 6});
  const std::vector<int> y{0, 0, 1, 1};
  const ScatterPair sp = class_scatter(rows, y);
  EXPECT_EQ(default_ridge(sp), 0.0);
  EXPECT_NEAR(fisher_score(sp, 0.0), 2.0, 1e-12);
  EXPECT_NEAR(fisher_score(sp, 1.0), 8.0 / 5.0, 1e-12);
  EXPECT_NEAR(channel_fisher_score(rows, y), 2.0, 1e-12);
}

TEST(Fisher, MatchesGeneralizedEigenOracle) {
  oracle::Draw d(42);
  for (int t = 0; t < 50; ++t) {
    const Matrix rows = random_rows(d, 40, 6);
    const ScatterPair sp = class_scatter(rows, round_robin(40, 4));
    const double ridge = default_ridge(sp);
    const double want = oracle::generalized_max_eig(sp.between, sp.within, ridge);
    EXPECT_LE(std::abs(fisher_score(sp, ridge) - want), 1e-8 * std::max(1.0, want)) << "trial " << t;
  }
}

TEST(Fisher, RankDeficientUsesRidge) {
  oracle::Draw d(43);
  const Matrix rows = random_rows(d, 6, 9);
  const ScatterPair sp = class_scatter(rows, round_robin(6, 2));
  const double ridge = default_ridge(sp);
  EXPECT_NEAR(ridge, 1e-6 * sp.within.trace() / 9.0, 1e-18);
  const double want = oracle::generalized_max_eig(sp.between, sp.within, ridge);
  EXPECT_LE(std::abs(fisher_score(sp, ridge) - want), 1e-6 * want);
}

TEST(Fisher, InvariantUnderOrthogonalTransform) {
  oracle::Draw d(44);
  const Matrix rows = random_rows(d, 50, 5);
  const std::vector<int> y = round_robin(50, 3);
  Eigen::MatrixXd g(5, 5);
  for (Eigen::Index i = 0; i < 25; ++i) g.data()[i] = d.normal();
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  const Matrix rotated = oracle::from_eigen(oracle::to_eigen(rows) * q);
  const double a = fisher_score(class_scatter(rows, y), 0.0);
  const double b = fisher_score(class_scatter(rotated, y), 0.0);
  EXPECT_LE(std::abs(a - b), 1e-8 * a);
}

TEST(Fisher, NonNegativeAndZeroForIdenticalMeans) {
  // Both classes at {-1, 1}: no between-class scatter.
  const Matrix rows(4, 1, std::vector<double>{-1, 1, -1, 1});
  EXPECT_NEAR(channel_fisher_score(rows, std::vector<int>{0, 0, 1, 1}), 0.0, 1e-12);
}

TEST(Unsupervised, RepresentationExamples) {
  const Matrix rows(2, 2, std::vector<double>{1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(representation_score(Criterion::rep_mm, rows), 2.5);
  EXPECT_DOUBLE_EQ(representation_score(Criterion::rep_ms, rows), 0.5);
  EXPECT_DOUBLE_EQ(representation_score(Criterion::rep_mf, rows), (std::sqrt(5.0) + 5.0) / 2.0);
}

TEST(Unsupervised, WeightFrobenius) {
  FilterBank f;
  f.out_channels = 2;
  f.in_channels = 1;
  f.kernel_h = 1;
  f.kernel_w = 2;
  f.weights = {3, 4, 1, 0};
  f.bias = {0, 0};
  EXPECT_DOUBLE_EQ(weight_frobenius(f, 0), 5.0);
  EXPECT_DOUBLE_EQ(unsupervised_score(Criterion::wgt_fro, &f, 1, nullptr), 1.0);
  EXPECT_THROW(unsupervised_score(Criterion::wgt_fro, nullptr, 0, nullptr), ConfigError);
  EXPECT_THROW(unsupervised_score(Criterion::rep_mm, &f, 0, nullptr), ConfigError);
  EXPECT_THROW(unsupervised_score(Criterion::fisher_lda, &f, 0, nullptr), ConfigError);
}

TEST(Rank, AscendingWithTiesById) {
  const std::vector<ChannelScore> s{{0, Criterion::rep_mm, 3.0}, {1, Criterion::rep_mm, 1.0},
                                    {2, Criterion::rep_mm, 3.0}, {3, Criterion::rep_mm, 0.5}};
  EXPECT_EQ(rank_channels(s), (std::vector<std::size_t>{3, 1, 0, 2}));
}

TEST(Rank, RejectsDuplicatesAndMixedCriteria) {
  EXPECT_THROW(rank_channels(std::vector<ChannelScore>{{0, Criterion::rep_mm, 1}, {0, Criterion::rep_mm, 2}}),
               ConfigError);
  EXPECT_THROW(rank_channels(std::vector<ChannelScore>{{0, Criterion::rep_mm, 1}, {1, Criterion::rep_ms, 2}}),
               ConfigError);
}

TEST(Rank, ScaleInvariant) {
  oracle::Draw d(45);
  for (int t = 0; t < 20; ++t) {
    std::vector<ChannelScore> s, scaled;
    const double c = d.uniform(0.01, 100.0);
    for (std::size_t j = 0; j < 12; ++j) {
      const double v = std::round(d.uniform(0, 8));  // forces ties
      s.push_back({j, Criterion::fisher_lda, v});
      scaled.push_back({j, Criterion::fisher_lda, c * v});
    }
    EXPECT_EQ(rank_channels(s), rank_channels(scaled));
  }
}

TEST(Prune, SmallExample) {
  // Worst utility first: 2, 0. Highest PSNR: 3 then 0.
  const std::vector<std::size_t> order{2, 0, 4, 1, 3, 5};
  const std::vector<double> psnr{30, 10, 12, 31, 15, 11};
  const PruneDecision d = prune_and_select(order, psnr, 2, 2, 2, 9);
  EXPECT_EQ(d.pruned_utility, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(d.pruned_privacy, (std::vector<std::size_t>{3}));
  EXPECT_EQ(d.remaining, (std::vector<std::size_t>{1, 4, 5}));
  EXPECT_EQ(d.selected.size(), 2u);
  d.validate(6);
}

TEST(Prune, OverlapCountedOnce) {
  std::vector<std::size_t> order(128);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> psnr(128, 10.0);
  for (std::size_t ch = 54; ch < 86; ++ch) psnr[ch] = 40.0;  // 10 overlap with utility-pruned 0..63
  const PruneDecision d = prune_and_select(order, psnr, 64, 32, 8, 1);
  EXPECT_EQ(d.pruned_utility.size(), 64u);
  EXPECT_EQ(d.pruned_privacy.size(), 22u);
  EXPECT_EQ(d.remaining.size(), 42u);
  d.validate(128);
}

TEST(Prune, SelectionIsSeededAndUniform) {
  std::vector<std::size_t> order(10);
  std::iota(order.begin(), order.end(), 0);
  const std::vector<double> psnr(10, 20.0);
  EXPECT_EQ(prune_and_select(order, psnr, 0, 0, 3, 5), prune_and_select(order, psnr, 0, 0, 3, 5));
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 2000; ++s)
    for (std::size_t ch : prune_and_select(order, psnr, 0, 0, 3, s).selected) ++hits[ch];
  for (int h : hits) EXPECT_NEAR(h / 2000.0, 0.3, 0.05);
}

TEST(Prune, Errors) {
  const std::vector<std::size_t> order{0, 1, 2};
  const std::vector<double> psnr{1, 2, 3};
  EXPECT_THROW(prune_and_select(order, psnr, 2, 1, 1, 0), ConfigError);
  EXPECT_THROW(prune_and_select(order, psnr, 0, 0, 4, 0), ConfigError);
  EXPECT_THROW(prune_and_select(order, psnr, 0, 0, 0, 0), ConfigError);
  EXPECT_THROW(prune_and_select(std::vector<std::size_t>{0, 0, 2}, psnr, 0, 0, 1, 0), ConfigError);
}

TEST(ScoreChannels, ParallelEqualsSequential) {
  const PretrainedNet net = make_planted_net(3);
  const LabeledDataset data = make_planted_dataset(PlantedSpec{});
  const FeatureTensor reps = truncate(net, 1).forward(data.train.images);
  for (Criterion c : {Criterion::fisher_lda, Criterion::rep_mm, Criterion::rep_ms, Criterion::rep_mf,
                      Criterion::wgt_fro}) {
    const FilterBank& f = net.layers[0].filters;
    const auto a = score_channels(reps, data.train.labels, c, &f, ScatterWeighting::unweighted, 1);
    const auto b = score_channels(reps, data.train.labels, c, &f, ScatterWeighting::unweighted, 4);
    EXPECT_EQ(a, b) << to_string(c);
    ASSERT_EQ(a.size(), kPlantedChannels);
  }
}

TEST(ScoreChannels, FisherRanksPlantedNoiseWorst) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PretrainedNet net = make_planted_net(seed);
    PlantedSpec ps;
    ps.seed = seed;
    const LabeledDataset data = make_planted_dataset(ps);
    const FeatureTensor reps = truncate(net, 1).forward(data.train.images);
    const auto order = rank_channels(score_channels(reps, data.train.labels, Criterion::fisher_lda));
    std::size_t noise = 0;
    for (std::size_t i = 0; i < kPlantedNoiseChannels; ++i) noise += order[i] < kPlantedNoiseChannels;
    EXPECT_EQ(noise, kPlantedNoiseChannels) << "seed " << seed;
  }
}

TEST(ScoresCsv, RoundTrip) {
  const std::vector<ChannelScore> s{{0, Criterion::rep_mf, 0.1}, {1, Criterion::rep_mf, 1.0 / 3.0},
                                    {2, Criterion::rep_mf, 12345.678}};
  EXPECT_EQ(scores_from_csv(scores_to_csv(s)), s);
}

TEST(Criterion, NamesRoundTrip) {
  for (Criterion c : {Criterion::fisher_lda, Criterion::wgt_fro, Criterion::rep_mm, Criterion::rep_ms,
                      Criterion::rep_mf})
    EXPECT_EQ(parse_criterion(to_string(c)), c);
  EXPECT_THROW(parse_criterion("nope"), Error);
}
