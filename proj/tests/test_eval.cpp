#include "metanode/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "oracles.hpp"

using mn::Matrix;
using mn::i64;

namespace {

// All 3^n label vectors of length n, as flat enumeration.
std::vector<int> nth_labels(i64 code, int n) {
  std::vector<int> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<size_t>(i)] = static_cast<int>(code % 3);
    code /= 3;
  }
  return v;
}

std::vector<int> labels_of(std::initializer_list<int> v) { return std::vector<int>(v); }

}  // namespace

TEST(Split, CardinalityAndDisjointness) {
  std::vector<int> labels(300);
  for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  auto split = mn::make_split(labels, 20, 50, 100, 7);
  EXPECT_EQ(split.train.size(), 60u);
  EXPECT_EQ(split.val.size(), 50u);
  EXPECT_EQ(split.test.size(), 100u);

  std::set<i64> all;
  for (i64 v : split.train) all.insert(v);
  for (i64 v : split.val) all.insert(v);
  for (i64 v : split.test) all.insert(v);
  EXPECT_EQ(all.size(), 210u);  // pairwise disjoint

  // Exactly 20 per class in train.
  std::vector<int> per_class(3, 0);
  for (i64 v : split.train) ++per_class[static_cast<size_t>(labels[static_cast<size_t>(v)])];
  for (int c : per_class) EXPECT_EQ(c, 20);
  // Val/test contain only labeled nodes and are sorted.
  EXPECT_TRUE(std::is_sorted(split.val.begin(), split.val.end()));
  EXPECT_TRUE(std::is_sorted(split.test.begin(), split.test.end()));
}

TEST(Split, SkipsUnlabeledNodes) {
  std::vector<int> labels(100, -1);
  for (size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 2);
  auto split = mn::make_split(labels, 5, 10, 10, 3);
  for (i64 v : split.train) EXPECT_GE(labels[static_cast<size_t>(v)], 0);
  for (i64 v : split.val) EXPECT_GE(labels[static_cast<size_t>(v)], 0);
  for (i64 v : split.test) EXPECT_GE(labels[static_cast<size_t>(v)], 0);
}

TEST(Split, ErrorsOnInfeasibleRequests) {
  std::vector<int> labels{0, 0, 0, 1, 1, 1};
  EXPECT_THROW(mn::make_split(labels, 4, 0, 0, 1), mn::ConfigError);   // class too small
  EXPECT_THROW(mn::make_split(labels, 2, 2, 2, 1), mn::ConfigError);   // remainder too small
  EXPECT_THROW(mn::make_split(labels, 0, 1, 1, 1), mn::ConfigError);
  EXPECT_THROW(mn::make_split(std::vector<int>{0, 0, 0}, 1, 0, 0, 1), mn::ConfigError);  // single class
  EXPECT_NO_THROW(mn::make_split(labels, 2, 1, 1, 1));
}

TEST(Split, DeterministicPerSeedAndSensitiveToIt) {
  std::vector<int> labels(120);
  for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  auto a = mn::make_split(labels, 10, 20, 30, 11);
  auto b = mn::make_split(labels, 10, 20, 30, 11);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.val, b.val);
  EXPECT_EQ(a.test, b.test);
  auto c = mn::make_split(labels, 10, 20, 30, 12);
  EXPECT_NE(a.train, c.train);
}

TEST(Logistic, SeparableClustersReachPerfectAccuracy) {
  Matrix x(40, 1);
  std::vector<int> y(40);
  for (i64 i = 0; i < 40; ++i) {
    const bool hi = i >= 20;
    x(i, 0) = (hi ? 2.0 : -2.0) + 0.01 * static_cast<double>(i % 20);
    y[static_cast<size_t>(i)] = hi ? 1 : 0;
  }
  auto model = mn::logistic_fit(x, y, 2);
  EXPECT_EQ(model.predict(x), y);
}

TEST(Logistic, IdenticalFeaturesGiveUniformProbabilities) {
  Matrix x = Matrix::full(30, 4, 0.7);
  std::vector<int> y(30);
  for (size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 3);
  auto model = mn::logistic_fit(x, y, 3);
  Matrix p = model.predict_proba(x);
  for (double v : p.data) EXPECT_NEAR(v, 1.0 / 3.0, 1e-3);
}

TEST(Logistic, ZeroIterationsPredictUniformFromZeroInit) {
  Matrix x(6, 2);
  std::vector<int> y{0, 1, 0, 1, 0, 1};
  auto model = mn::logistic_fit(x, y, 2, 1e-3, /*iters=*/0);
  Matrix p = model.predict_proba(x);
  for (double v : p.data) EXPECT_EQ(v, 0.5);
}

TEST(Logistic, RejectsDegenerateInput) {
  Matrix x(4, 2);
  EXPECT_THROW(mn::logistic_fit(x, {0, 0, 0, 0}, 1), mn::ConfigError);        // K < 2
  EXPECT_THROW(mn::logistic_fit(x, {0, 1, 0}, 2), mn::ConfigError);           // length mismatch
  EXPECT_THROW(mn::logistic_fit(x, {0, 1, 2, 1}, 2), mn::ConfigError);        // label out of range
  EXPECT_THROW(mn::logistic_fit(Matrix(0, 2), {}, 2), mn::ConfigError);       // empty
}

TEST(F1, WorkedExample) {
  const auto yt = labels_of({0, 0, 1, 1});
  const auto yp = labels_of({0, 1, 1, 1});
  EXPECT_NEAR(mn::micro_f1(yt, yp, 2), 0.75, 1e-15);
  EXPECT_NEAR(mn::macro_f1(yt, yp, 2), 11.0 / 15.0, 1e-15);
}

TEST(F1, PerfectAndDegenerateCases) {
  const auto y = labels_of({0, 1, 2, 0, 1, 2});
  EXPECT_EQ(mn::micro_f1(y, y, 3), 1.0);
  EXPECT_EQ(mn::macro_f1(y, y, 3), 1.0);

  // Constant prediction on a balanced binary problem.
  const auto yt = labels_of({0, 0, 1, 1});
  const auto yp = labels_of({0, 0, 0, 0});
  EXPECT_NEAR(mn::micro_f1(yt, yp, 2), 0.5, 1e-15);

  // A class present in neither truth nor prediction contributes zero.
  EXPECT_NEAR(mn::macro_f1(labels_of({0, 1}), labels_of({0, 1}), 3), 2.0 / 3.0, 1e-15);
}

TEST(F1, MicroEqualsAccuracy) {
  mn::Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(12));
    std::vector<int> yt(static_cast<size_t>(n)), yp(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      yt[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
      yp[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
    }
    double correct = 0;
    for (int i = 0; i < n; ++i) correct += yt[static_cast<size_t>(i)] == yp[static_cast<size_t>(i)] ? 1 : 0;
    EXPECT_NEAR(mn::micro_f1(yt, yp, 3), correct / n, 1e-15);
  }
}

TEST(F1, LengthMismatchThrows) {
  EXPECT_THROW(mn::micro_f1(labels_of({0, 1}), labels_of({0}), 2), mn::ConfigError);
  EXPECT_THROW(mn::macro_f1(labels_of({0, 3}), labels_of({0, 1}), 2), mn::ConfigError);  // label ≥ K
}

TEST(Auc, WorkedBinaryExample) {
  const auto yt = labels_of({1, 0, 1, 0});
  Matrix scores(4, 2);
  const double p1[] = {0.9, 0.8, 0.4, 0.2};
  for (i64 i = 0; i < 4; ++i) {
    scores(i, 1) = p1[i];
    scores(i, 0) = 1.0 - p1[i];
  }
  EXPECT_NEAR(mn::auc(yt, scores, 2), 0.75, 1e-15);
}

TEST(Auc, PerfectEqualAndInvertedOrderings) {
  const auto yt = labels_of({0, 0, 1, 1});
  Matrix perfect(4, 2);
  for (i64 i = 0; i < 4; ++i) {
    perfect(i, 1) = i >= 2 ? 0.9 : 0.1;
    perfect(i, 0) = 1.0 - perfect(i, 1);
  }
  EXPECT_EQ(mn::auc(yt, perfect, 2), 1.0);

  Matrix flat = Matrix::full(4, 2, 0.5);
  EXPECT_EQ(mn::auc(yt, flat, 2), 0.5);  // exact under midranks

  Matrix inverted(4, 2);
  for (i64 i = 0; i < 4; ++i) {
    inverted(i, 1) = i >= 2 ? 0.1 : 0.9;
    inverted(i, 0) = 1.0 - inverted(i, 1);
  }
  EXPECT_EQ(mn::auc(yt, inverted, 2), 0.0);
}

TEST(Auc, MonotoneTransformInvariance) {
  mn::Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 5 + static_cast<int>(rng.below(6));
    std::vector<int> yt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) yt[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
    Matrix s = Matrix::random_uniform(n, 3, rng, 0.0, 1.0);
    Matrix warped = s;
    for (double& v : warped.data) v = std::exp(3.0 * v) - 0.5;  // strictly increasing
    double base;
    try {
      base = mn::auc(yt, s, 3);
    } catch (const mn::NumericalError&) {
      continue;  // all classes one-sided in this draw
    }
    EXPECT_NEAR(mn::auc(yt, warped, 3), base, 1e-12);
  }
}

TEST(Auc, OneSidedClassesSkippedOrError) {
  // Class 2 never appears: it is skipped, the others still average.
  const auto yt = labels_of({0, 1, 0, 1});
  mn::Rng rng(31);
  Matrix s = Matrix::random_uniform(4, 3, rng, 0.0, 1.0);
  EXPECT_NO_THROW(mn::auc(yt, s, 3));

  // Single-class truth: every class lacks one side, so the value is undefined.
  EXPECT_THROW(mn::auc(labels_of({1, 1, 1}), Matrix::full(3, 2, 0.5), 2), mn::NumericalError);
  EXPECT_THROW(mn::auc(yt, Matrix(3, 3), 3), mn::ConfigError);  // shape mismatch
}

TEST(MetricOracles, ExhaustiveAgreementOnShortVectors) {
  // Lengths 1..5 exhaustively (the acceptance suite pushes this to 8).
  for (int n = 1; n <= 5; ++n) {
    i64 total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (i64 ca = 0; ca < total; ++ca) {
      const auto a = nth_labels(ca, n);
      for (i64 cb = 0; cb < total; ++cb) {
        const auto b = nth_labels(cb, n);
        ASSERT_NEAR(mn::macro_f1(a, b, 3), oracle::macro_f1(a, b, 3), 1e-12);
        ASSERT_NEAR(mn::micro_f1(a, b, 3), oracle::micro_f1(a, b), 1e-12);
        ASSERT_NEAR(mn::nmi(a, b), oracle::nmi(a, b), 1e-12);
        ASSERT_NEAR(mn::ari(a, b), oracle::ari(a, b), 1e-12);
      }
    }
  }
}

TEST(MetricOracles, AucAgreesWithPairCounting) {
  mn::Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    std::vector<int> yt(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) yt[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
    Matrix s = Matrix::random_uniform(n, 3, rng, 0.0, 1.0);
    if (trial % 3 == 0) {  // force ties sometimes
      for (double& v : s.data) v = std::round(v * 4.0) / 4.0;
    }
    double mine, brute;
    bool threw1 = false, threw2 = false;
    try {
      mine = mn::auc(yt, s, 3);
    } catch (const mn::NumericalError&) {
      threw1 = true;
    }
    try {
      brute = oracle::auc(yt, s, 3);
    } catch (const mn::NumericalError&) {
      threw2 = true;
    }
    ASSERT_EQ(threw1, threw2);
    if (!threw1) {
      ASSERT_NEAR(mine, brute, 1e-12);
    }
  }
}

TEST(PartitionMetrics, IdenticalAndDegeneratePartitions) {
  const auto a = labels_of({0, 0, 1, 1, 2});
  EXPECT_NEAR(mn::nmi(a, a), 1.0, 1e-15);
  EXPECT_NEAR(mn::ari(a, a), 1.0, 1e-15);

  const auto constant = labels_of({0, 0, 0, 0, 0});
  EXPECT_EQ(mn::nmi(a, constant), 0.0);
  EXPECT_EQ(mn::ari(a, constant), 0.0);
  EXPECT_EQ(mn::nmi(constant, a), 0.0);

  EXPECT_EQ(mn::ari(labels_of({0}), labels_of({0})), 0.0);  // single point: no pairs
  EXPECT_THROW(mn::nmi(labels_of({0, 1}), labels_of({0})), mn::ConfigError);
  EXPECT_THROW(mn::nmi({}, {}), mn::ConfigError);
}

TEST(PartitionMetrics, HandComputedTwoByTwoContingency) {
  // a=[0,0,1,1], b=[0,1,1,1]: cells n00=1 n01=1 n10=0 n11=2.
  const auto a = labels_of({0, 0, 1, 1});
  const auto b = labels_of({0, 1, 1, 1});
  const double ha = std::log(2.0);
  const double hb = -(0.25 * std::log(0.25) + 0.75 * std::log(0.75));
  const double mi = 0.25 * std::log(4.0 * 1.0 / (2.0 * 1.0)) + 0.25 * std::log(4.0 * 1.0 / (2.0 * 3.0)) +
                    0.5 * std::log(4.0 * 2.0 / (2.0 * 3.0));
  EXPECT_NEAR(mn::nmi(a, b), mi / std::sqrt(ha * hb), 1e-14);

  // ARI from pair counts: index = sum C(n_ij,2) = 1; row/col sums give
  // sum_a C2 = 2 and sum_b C2 = 3, so expected = 2*3/6 = 1 and the adjusted
  // index is exactly zero for this particular pair of partitions.
  const double expected_index = 2.0 * 3.0 / 6.0;
  const double max_index = 0.5 * (2.0 + 3.0);
  EXPECT_NEAR(mn::ari(a, b), (1.0 - expected_index) / (max_index - expected_index), 1e-14);
  EXPECT_NEAR(mn::ari(a, b), 0.0, 1e-14);
}

TEST(PartitionMetrics, SymmetryAndLabelRenamingInvariance) {
  mn::Rng rng(47);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(7));
    std::vector<int> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      a[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
      b[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
    }
    EXPECT_NEAR(mn::nmi(a, b), mn::nmi(b, a), 1e-14);
    EXPECT_NEAR(mn::ari(a, b), mn::ari(b, a), 1e-14);
    std::vector<int> renamed = a;  // swap labels 0 <-> 2
    for (int& v : renamed) v = (v == 0) ? 2 : (v == 2 ? 0 : v);
    EXPECT_NEAR(mn::nmi(renamed, b), mn::nmi(a, b), 1e-14);
    EXPECT_NEAR(mn::ari(renamed, b), mn::ari(a, b), 1e-14);
  }
}

TEST(KMeans, EachPointItsOwnClusterMeansZeroInertia) {
  mn::Rng rng(53);
  Matrix x = Matrix::random_uniform(6, 2, rng);
  auto res = mn::kmeans(x, 6, 1);
  EXPECT_EQ(res.inertia, 0.0);
  std::set<int> used(res.assignments.begin(), res.assignments.end());
  EXPECT_EQ(used.size(), 6u);
}

TEST(KMeans, RecoversWellSeparatedBlobs) {
  mn::Rng rng(59);
  Matrix x(60, 2);
  std::vector<int> truth(60);
  for (i64 i = 0; i < 60; ++i) {
    const int blob = static_cast<int>(i % 3);
    truth[static_cast<size_t>(i)] = blob;
    x(i, 0) = 100.0 * blob + rng.gaussian();
    x(i, 1) = -50.0 * blob + rng.gaussian();
  }
  auto res = mn::kmeans(x, 3, 7);
  EXPECT_NEAR(mn::nmi(truth, res.assignments), 1.0, 1e-12);  // up to label permutation
}

TEST(KMeans, IdenticalPointsCollapseToZeroInertia) {
  Matrix x = Matrix::full(10, 3, 1.25);
  auto res = mn::kmeans(x, 2, 3);
  EXPECT_EQ(res.inertia, 0.0);
}

TEST(KMeans, MatchesBruteForceOptimumOnTinyInputs) {
  // n <= 7 lets us enumerate every labeling; with 10 restarts the solver
  // should land on the global optimum for these modest geometries.
  for (mn::u64 seed = 0; seed < 8; ++seed) {
    mn::Rng rng(mn::stream_seed(seed, "tiny"));
    Matrix x = Matrix::random_uniform(7, 2, rng, -1.0, 1.0);
    for (i64 i = 0; i < 7; ++i) x(i, 0) += (i < 4) ? 4.0 : -4.0;  // mild separation
    auto res = mn::kmeans(x, 2, seed);
    EXPECT_NEAR(res.inertia, oracle::best_inertia(x, 2), 1e-9);
  }
}

TEST(KMeans, DeterministicPerSeed) {
  mn::Rng rng(61);
  Matrix x = Matrix::random_uniform(40, 3, rng);
  auto a = mn::kmeans(x, 4, 9);
  auto b = mn::kmeans(x, 4, 9);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, RejectsMoreClustersThanPoints) {
  Matrix x(3, 2);
  EXPECT_THROW(mn::kmeans(x, 4, 1), mn::ConfigError);
  EXPECT_THROW(mn::kmeans(x, 0, 1), mn::ConfigError);
}

TEST(Silhouette, TightFarBlobsScoreNearOne) {
  mn::Rng rng(67);
  Matrix x(40, 2);
  std::vector<int> labels(40);
  for (i64 i = 0; i < 40; ++i) {
    const int blob = i < 20 ? 0 : 1;
    labels[static_cast<size_t>(i)] = blob;
    x(i, 0) = 200.0 * blob + rng.unit();
    x(i, 1) = rng.unit();
  }
  EXPECT_GT(mn::silhouette(x, labels), 0.9);
}

TEST(Silhouette, RandomLabelsOnOneBlobScoreNearZero) {
  mn::Rng rng(71);
  Matrix x = Matrix::random_uniform(200, 2, rng);
  std::vector<int> labels(200);
  for (auto& v : labels) v = static_cast<int>(rng.below(2));
  EXPECT_LT(std::fabs(mn::silhouette(x, labels)), 0.1);
}

TEST(Silhouette, SingletonConventionAndErrors) {
  Matrix two(2, 1);
  two(0, 0) = 0.0;
  two(1, 0) = 5.0;
  EXPECT_EQ(mn::silhouette(two, labels_of({0, 1})), 0.0);  // both singleton -> 0

  Matrix x(4, 1);
  EXPECT_THROW(mn::silhouette(x, labels_of({0, 0, 0, 0})), mn::ConfigError);  // one cluster
  EXPECT_THROW(mn::silhouette(x, labels_of({0, 1})), mn::ConfigError);        // length mismatch
}

TEST(Silhouette, AgreesWithDirectOracle) {
  mn::Rng rng(73);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 4 + static_cast<int>(rng.below(8));
    Matrix x = Matrix::random_uniform(n, 3, rng);
    std::vector<int> labels(static_cast<size_t>(n));
    bool two = false;
    for (int i = 0; i < n; ++i) {
      labels[static_cast<size_t>(i)] = static_cast<int>(rng.below(3));
      two = two || labels[static_cast<size_t>(i)] != labels[0];
    }
    if (!two) labels[0] = (labels[0] + 1) % 3;
    EXPECT_NEAR(mn::silhouette(x, labels), oracle::silhouette(x, labels), 1e-10);
  }
}

TEST(MetricsRow, RendersJsonAndTsv) {
  mn::MetricsRow row;
  row.add("micro_f1", 0.9125);
  row.add("nmi", 0.5);
  EXPECT_EQ(row.json_line(), "{\"micro_f1\": 0.9125, \"nmi\": 0.5}");
  EXPECT_EQ(row.tsv(), "micro_f1\tnmi\n0.9125\t0.5\n");
}
