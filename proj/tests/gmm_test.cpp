// tests/gmm_test.cpp

// Copyright 2026 The susr Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "susr/gmm.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "test_util.hpp"

using namespace susr;
using susr_test::random_gmm;
using susr_test::random_features;

namespace {

// Brute-force weighted density sum, kept free of log-sum-exp tricks.
double naive_log_likelihood(const DiagGmm &gmm, const Eigen::VectorXd &x) {
  double total = 0.0;
  for (int c = 0; c < gmm.num_components(); c++) {
    double density = 1.0;
    for (int d = 0; d < gmm.dim(); d++) {
      double var = gmm.vars(c, d);
      double diff = x(d) - gmm.means(c, d);
      density *= std::exp(-0.5 * diff * diff / var) /
                 std::sqrt(2.0 * std::numbers::pi * var);
    }
    total += gmm.weights(c) * density;
  }
  return std::log(total);
}

Eigen::VectorXd naive_posteriors(const DiagGmm &gmm, const Eigen::VectorXd &x) {
  Eigen::VectorXd p(gmm.num_components());
  for (int c = 0; c < gmm.num_components(); c++) {
    double density = 1.0;
    for (int d = 0; d < gmm.dim(); d++) {
      double var = gmm.vars(c, d);
      double diff = x(d) - gmm.means(c, d);
      density *= std::exp(-0.5 * diff * diff / var) /
                 std::sqrt(2.0 * std::numbers::pi * var);
    }
    p(c) = gmm.weights(c) * density;
  }
  return p / p.sum();
}

DiagGmm single_gauss(double mean, double var) {
  DiagGmm gmm;
  gmm.weights = Eigen::VectorXd::Ones(1);
  gmm.means = Eigen::MatrixXd::Constant(1, 1, mean);
  gmm.vars = Eigen::MatrixXd::Constant(1, 1, var);
  gmm.finalize();
  return gmm;
}

}  // namespace

TEST(GmmLogLikelihood, StandardNormalAtZero) {
  DiagGmm gmm = single_gauss(0.0, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(1);
  EXPECT_NEAR(gmm_log_likelihood(gmm, x), -0.5 * std::log(2.0 * std::numbers::pi), 1e-12);
  EXPECT_NEAR(gmm_log_likelihood(gmm, x), -0.918939, 1e-6);
}

TEST(GmmLogLikelihood, DuplicatedComponentCollapses) {
  DiagGmm one = single_gauss(0.7, 1.3);
  DiagGmm two;
  two.weights = Eigen::VectorXd::Constant(2, 0.5);
  two.means = Eigen::MatrixXd::Constant(2, 1, 0.7);
  two.vars = Eigen::MatrixXd::Constant(2, 1, 1.3);
  two.finalize();
  Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -0.2);
  EXPECT_NEAR(gmm_log_likelihood(two, x), gmm_log_likelihood(one, x), 1e-12);
}

TEST(GmmLogLikelihood, MatchesBruteForceOracle) {
  Rng rng(101);
  for (int i = 0; i < 100; i++) {
    DiagGmm gmm = random_gmm(3, 2, rng);
    Eigen::VectorXd x(2);
    x << 3.0 * rng.gauss(), 3.0 * rng.gauss();
    EXPECT_NEAR(gmm_log_likelihood(gmm, x), naive_log_likelihood(gmm, x), 1e-10);
  }
}

TEST(GmmLogLikelihood, DimensionMismatchErrors) {
  DiagGmm gmm = single_gauss(0.0, 1.0);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
  EXPECT_THROW(gmm_log_likelihood(gmm, x), DataError);
}

TEST(FramePosteriors, IdenticalComponentsAreUniform) {
  DiagGmm gmm;
  const int C = 4;
  gmm.weights = Eigen::VectorXd::Constant(C, 1.0 / C);
  gmm.means = Eigen::MatrixXd::Constant(C, 2, 0.3);
  gmm.vars = Eigen::MatrixXd::Constant(C, 2, 1.1);
  gmm.finalize();
  Eigen::VectorXd p = frame_posteriors(gmm, Eigen::VectorXd::Constant(2, 0.9));
  for (int c = 0; c < C; c++) EXPECT_NEAR(p(c), 0.25, 1e-12);
}

TEST(FramePosteriors, DominantComponentNearOne) {
  DiagGmm gmm;
  gmm.weights = Eigen::VectorXd::Constant(2, 0.5);
  gmm.means.resize(2, 1);
  gmm.means << 0.0, 30.0;
  gmm.vars = Eigen::MatrixXd::Constant(2, 1, 1.0);
  gmm.finalize();
  Eigen::VectorXd p = frame_posteriors(gmm, Eigen::VectorXd::Zero(1));
  EXPECT_GT(p(0), 0.999);
}

TEST(FramePosteriors, MatchesBruteForceAndSumsToOne) {
  Rng rng(202);
  for (int i = 0; i < 100; i++) {
    DiagGmm gmm = random_gmm(4, 3, rng);
    Eigen::VectorXd x(3);
    for (int d = 0; d < 3; d++) x(d) = 3.0 * rng.gauss();
    Eigen::VectorXd p = frame_posteriors(gmm, x);
    Eigen::VectorXd expected = naive_posteriors(gmm, x);
    EXPECT_NEAR(p.sum(), 1.0, 1e-10);
    for (int c = 0; c < 4; c++) EXPECT_NEAR(p(c), expected(c), 1e-10);
  }
}

TEST(TrainUbmEm, SingleComponentClosedForm) {
  Rng rng(7);
  std::vector<FeatureMatrix> feats = {random_features("a", 200, 3, rng),
                                      random_features("b", 100, 3, rng)};
  EmConfig cfg;
  cfg.num_iters = 1;
  cfg.seed = 1;
  DiagGmm gmm = train_ubm_em(feats, 1, cfg).gmm;

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(3), sum2 = Eigen::VectorXd::Zero(3);
  double n = 0;
  for (const auto &f : feats) {
    Eigen::MatrixXd x = f.frames.cast<double>();
    sum += x.colwise().sum();
    sum2 += x.array().square().matrix().colwise().sum();
    n += f.num_frames();
  }
  Eigen::VectorXd mean = sum / n;
  Eigen::VectorXd var = sum2 / n - mean.array().square().matrix();
  EXPECT_NEAR(gmm.weights(0), 1.0, 1e-12);
  for (int d = 0; d < 3; d++) {
    EXPECT_NEAR(gmm.means(0, d), mean(d), 1e-8);
    EXPECT_NEAR(gmm.vars(0, d), var(d), 1e-8);
  }
}

TEST(TrainUbmEm, RecoversTwoSeparatedGaussians) {
  Rng rng(13);
  FeatureMatrix f;
  f.utt_id = "mix";
  f.frames.resize(4000, 2);
  for (int t = 0; t < 4000; t++) {
    double cx = t % 2 == 0 ? -5.0 : 5.0;
    f.frames(t, 0) = static_cast<float>(cx + rng.gauss());
    f.frames(t, 1) = static_cast<float>(-cx + rng.gauss());
  }
  EmConfig cfg;
  cfg.num_iters = 10;
  cfg.seed = 3;
  DiagGmm gmm = train_ubm_em({f}, 2, cfg).gmm;
  // Order components by first mean dimension.
  int lo = gmm.means(0, 0) < gmm.means(1, 0) ? 0 : 1;
  EXPECT_NEAR(gmm.means(lo, 0), -5.0, 0.1);
  EXPECT_NEAR(gmm.means(lo, 1), 5.0, 0.1);
  EXPECT_NEAR(gmm.means(1 - lo, 0), 5.0, 0.1);
  EXPECT_NEAR(gmm.means(1 - lo, 1), -5.0, 0.1);
  EXPECT_NEAR(gmm.weights(0), 0.5, 0.05);
}

TEST(TrainUbmEm, LogLikelihoodNonDecreasing) {
  Rng rng(17);
  std::vector<FeatureMatrix> feats;
  for (int u = 0; u < 4; u++)
    feats.push_back(random_features("u" + std::to_string(u), 300, 4, rng));
  EmConfig cfg;
  cfg.num_iters = 12;
  cfg.seed = 5;
  UbmTrainResult result = train_ubm_em(feats, 8, cfg);
  ASSERT_EQ(result.avg_log_likes.size(), 12u);
  for (std::size_t i = 1; i < result.avg_log_likes.size(); i++)
    EXPECT_GE(result.avg_log_likes[i], result.avg_log_likes[i - 1] - 1e-6) << i;
}

TEST(TrainUbmEm, FewerFramesThanComponentsErrors) {
  Rng rng(19);
  std::vector<FeatureMatrix> feats = {random_features("a", 5, 2, rng)};
  EmConfig cfg;
  cfg.seed = 1;
  EXPECT_THROW(train_ubm_em(feats, 8, cfg), DataError);
}

TEST(MapAdapt, UnseenComponentKeepsUbmMean) {
  // Components far apart; all data at component 0, so component 1 gets
  // exactly zero posterior mass (exp underflow) and keeps its mean.
  DiagGmm ubm;
  ubm.weights = Eigen::VectorXd::Constant(2, 0.5);
  ubm.means.resize(2, 1);
  ubm.means << 0.0, 100.0;
  ubm.vars = Eigen::MatrixXd::Constant(2, 1, 1.0);
  ubm.finalize();
  FeatureMatrix f;
  f.utt_id = "s";
  f.frames = FloatMatrix::Constant(10, 1, 0.5f);
  SpeakerModel spk = map_adapt(ubm, f, 16.0, "s");
  EXPECT_DOUBLE_EQ(spk.gmm.means(1, 0), 100.0);
  EXPECT_NE(spk.gmm.means(0, 0), 0.0);
}

TEST(MapAdapt, ScalarExample) {
  DiagGmm ubm;
  ubm.weights = Eigen::VectorXd::Ones(1);
  ubm.means = Eigen::MatrixXd::Zero(1, 1);
  ubm.vars = Eigen::MatrixXd::Ones(1, 1);
  ubm.finalize();
  FeatureMatrix f;
  f.utt_id = "s";
  f.frames = FloatMatrix::Constant(1, 1, 2.0f);
  SpeakerModel spk = map_adapt(ubm, f, 16.0, "s");
  EXPECT_NEAR(spk.gmm.means(0, 0), 2.0 / 17.0, 1e-12);
}

TEST(MapAdapt, MatchesOnePassOracle) {
  Rng rng(23);
  for (int i = 0; i < 100; i++) {
    DiagGmm ubm = random_gmm(2, 2, rng);
    FeatureMatrix f = random_features("s", 20, 2, rng);
    double r = rng.uniform(1.0, 30.0);
    SpeakerModel spk = map_adapt(ubm, f, r, "s");

    Eigen::VectorXd occ = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd wx = Eigen::MatrixXd::Zero(2, 2);
    for (int t = 0; t < f.num_frames(); t++) {
      Eigen::VectorXd x = f.frames.row(t).cast<double>();
      Eigen::VectorXd gamma = naive_posteriors(ubm, x);
      occ += gamma;
      wx += gamma * x.transpose();
    }
    for (int c = 0; c < 2; c++)
      for (int d = 0; d < 2; d++)
        EXPECT_NEAR(spk.gmm.means(c, d),
                    (wx(c, d) + r * ubm.means(c, d)) / (occ(c) + r), 1e-10);
    EXPECT_TRUE(spk.gmm.weights.isApprox(ubm.weights));
    EXPECT_TRUE(spk.gmm.vars.isApprox(ubm.vars));
  }
}

TEST(MapAdapt, RelevanceLimits) {
  Rng rng(29);
  DiagGmm ubm = random_gmm(2, 2, rng);
  FeatureMatrix f = random_features("s", 50, 2, rng);

  SpeakerModel heavy = map_adapt(ubm, f, 1e12, "s");
  EXPECT_LT((heavy.gmm.means - ubm.means).cwiseAbs().maxCoeff(), 1e-8);

  // Single component: r -> 0 recovers the empirical mean.
  DiagGmm one = random_gmm(1, 2, rng);
  SpeakerModel light = map_adapt(one, f, 1e-8, "s");
  Eigen::VectorXd mean = f.frames.cast<double>().colwise().mean();
  EXPECT_LT((light.gmm.means.row(0).transpose() - mean).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(MapAdapt, EmptyFeaturesEqualsUbm) {
  Rng rng(31);
  DiagGmm ubm = random_gmm(2, 2, rng);
  FeatureMatrix f;
  f.utt_id = "empty";
  f.frames.resize(0, 2);
  SpeakerModel spk = map_adapt(ubm, f, 16.0, "s");
  EXPECT_TRUE(spk.gmm.means.isApprox(ubm.means));
}

TEST(GmmUbmScore, IdenticalModelsScoreZero) {
  Rng rng(37);
  DiagGmm ubm = random_gmm(3, 2, rng);
  SpeakerModel spk{"s", "ubm", ubm};
  FeatureMatrix test = random_features("t", 25, 2, rng);
  EXPECT_DOUBLE_EQ(gmm_ubm_score(spk, ubm, test), 0.0);
}

TEST(GmmUbmScore, SingleFrameEqualsLikelihoodDifference) {
  Rng rng(41);
  DiagGmm ubm = random_gmm(3, 2, rng);
  DiagGmm adapted = random_gmm(3, 2, rng);
  SpeakerModel spk{"s", "ubm", adapted};
  FeatureMatrix test = random_features("t", 1, 2, rng);
  Eigen::VectorXd x = test.frames.row(0).cast<double>();
  EXPECT_NEAR(gmm_ubm_score(spk, ubm, test),
              gmm_log_likelihood(adapted, x) - gmm_log_likelihood(ubm, x), 1e-12);
}

TEST(GmmUbmScore, MatchesFrameLoopOracle) {
  Rng rng(43);
  for (int i = 0; i < 20; i++) {
    DiagGmm ubm = random_gmm(3, 2, rng);
    DiagGmm adapted = random_gmm(3, 2, rng);
    SpeakerModel spk{"s", "ubm", adapted};
    FeatureMatrix test = random_features("t", 10, 2, rng);
    double acc = 0.0;
    for (int t = 0; t < 10; t++) {
      Eigen::VectorXd x = test.frames.row(t).cast<double>();
      acc += naive_log_likelihood(adapted, x) - naive_log_likelihood(ubm, x);
    }
    EXPECT_NEAR(gmm_ubm_score(spk, ubm, test), acc / 10.0, 1e-10);
  }
}

TEST(GmmUbmScore, AntisymmetricUnderModelSwap) {
  Rng rng(47);
  DiagGmm a = random_gmm(2, 3, rng);
  DiagGmm b = random_gmm(2, 3, rng);
  FeatureMatrix test = random_features("t", 15, 3, rng);
  double forward = gmm_ubm_score({"s", "u", a}, b, test);
  double backward = gmm_ubm_score({"s", "u", b}, a, test);
  EXPECT_DOUBLE_EQ(forward, -backward);
}

TEST(GmmUbmScore, EmptyTestErrors) {
  Rng rng(53);
  DiagGmm ubm = random_gmm(2, 2, rng);
  FeatureMatrix test;
  test.utt_id = "t";
  test.frames.resize(0, 2);
  EXPECT_THROW(gmm_ubm_score({"s", "u", ubm}, ubm, test), DataError);
}

TEST(DiagGmm, FinalizeValidatesInvariants) {
  DiagGmm gmm;
  gmm.weights = Eigen::VectorXd::Constant(2, 0.6);  // sums to 1.2
  gmm.means = Eigen::MatrixXd::Zero(2, 1);
  gmm.vars = Eigen::MatrixXd::Ones(2, 1);
  EXPECT_THROW(gmm.finalize(), DataError);

  gmm.weights = Eigen::VectorXd::Constant(2, 0.5);
  gmm.vars(1, 0) = 0.0;
  EXPECT_THROW(gmm.finalize(), DataError);
}
