// tests/subregion_test.cpp

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

#include "susr/subregion.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "susr/kmeans.hpp"
#include "test_util.hpp"

using namespace susr;
using susr_test::TempDir;
using susr_test::random_features;
using susr_test::random_gmm;

namespace {

FeatureMatrix constant_features(const std::string &utt, int T, int D, float value) {
  FeatureMatrix f;
  f.utt_id = utt;
  f.frames = FloatMatrix::Constant(T, D, value);
  return f;
}

double naive_gmm_log_density(const DiagGmm &gmm, const Eigen::VectorXd &x) {
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

}  // namespace

TEST(UnitEmbeddings, ConstantSegmentEqualsItsValue) {
  std::vector<FeatureMatrix> feats = {constant_features("u1", 10, 3, 1.5f)};
  AlignmentSet ali;
  ali["u1"] = {{0, 10, "aa"}};
  auto emb = unit_embeddings(feats, ali);
  ASSERT_EQ(emb.size(), 1u);
  for (int d = 0; d < 3; d++) EXPECT_NEAR(emb.at("aa")(d), 1.5, 1e-12);
}

TEST(UnitEmbeddings, FrameWeightedAcrossSegments) {
  // Unit "aa": 4 frames of value 1 and 12 frames of value 2; the embedding
  // must be the frame-weighted mean (4*1 + 12*2)/16 = 1.75, not the segment
  // mean 1.5.
  FeatureMatrix f;
  f.utt_id = "u1";
  f.frames.resize(16, 1);
  for (int t = 0; t < 16; t++) f.frames(t, 0) = t < 4 ? 1.0f : 2.0f;
  AlignmentSet ali;
  ali["u1"] = {{0, 4, "aa"}, {4, 16, "aa"}};
  auto emb = unit_embeddings({f}, ali);
  EXPECT_NEAR(emb.at("aa")(0), 1.75, 1e-12);
}

TEST(UnitEmbeddings, UnseenUnitAbsent) {
  std::vector<FeatureMatrix> feats = {constant_features("u1", 6, 2, 0.0f)};
  AlignmentSet ali;
  ali["u1"] = {{0, 3, "aa"}, {3, 6, "bb"}};
  auto emb = unit_embeddings(feats, ali);
  EXPECT_EQ(emb.count("cc"), 0u);
  EXPECT_EQ(emb.size(), 2u);
}

TEST(UnitEmbeddings, EmptyAlignmentsError) {
  std::vector<FeatureMatrix> feats = {constant_features("u1", 6, 2, 0.0f)};
  EXPECT_THROW(unit_embeddings(feats, AlignmentSet{}), DataError);
}

TEST(UnitEmbeddings, OutOfRangeSegmentErrors) {
  std::vector<FeatureMatrix> feats = {constant_features("u1", 6, 2, 0.0f)};
  AlignmentSet ali;
  ali["u1"] = {{0, 7, "aa"}};
  EXPECT_THROW(unit_embeddings(feats, ali), DataError);
}

TEST(ClusterUnits, SingletonClassesWhenCEqualsUnits) {
  std::map<std::string, Eigen::VectorXd> emb;
  for (int i = 0; i < 4; i++)
    emb["u" + std::to_string(i)] = Eigen::VectorXd::Constant(2, static_cast<double>(i));
  UnitClassMap map = cluster_units(emb, 4, 9);
  std::set<int> classes;
  for (const auto &[unit, cls] : map.mapping) classes.insert(cls);
  EXPECT_EQ(classes.size(), 4u);
}

TEST(ClusterUnits, MatchesExhaustivePartitionOracle) {
  // 1-D embeddings {0, 0.1, 10, 10.1} with C=2. The oracle enumerates all
  // 2-partitions and minimizes within-class SSE.
  std::map<std::string, Eigen::VectorXd> emb;
  std::vector<double> values = {0.0, 0.1, 10.0, 10.1};
  std::vector<std::string> names = {"a", "b", "c", "d"};
  for (int i = 0; i < 4; i++) emb[names[i]] = Eigen::VectorXd::Constant(1, values[i]);

  double best_sse = 1e300;
  int best_mask = 0;
  for (int mask = 1; mask < 15; mask++) {  // proper non-empty bipartitions
    double sum[2] = {0, 0}, sum2[2] = {0, 0};
    int count[2] = {0, 0};
    for (int i = 0; i < 4; i++) {
      int side = (mask >> i) & 1;
      sum[side] += values[i];
      sum2[side] += values[i] * values[i];
      count[side]++;
    }
    double sse = 0.0;
    for (int side = 0; side < 2; side++)
      if (count[side] > 0) sse += sum2[side] - sum[side] * sum[side] / count[side];
    if (sse < best_sse) {
      best_sse = sse;
      best_mask = mask;
    }
  }
  // Oracle: {a,b} vs {c,d} (mask 0b0011 or its complement).
  EXPECT_TRUE(best_mask == 3 || best_mask == 12);

  UnitClassMap map = cluster_units(emb, 2, 123);
  EXPECT_EQ(map.mapping.at("a"), map.mapping.at("b"));
  EXPECT_EQ(map.mapping.at("c"), map.mapping.at("d"));
  EXPECT_NE(map.mapping.at("a"), map.mapping.at("c"));
}

TEST(ClusterUnits, FewerUnitsThanClassesErrors) {
  std::map<std::string, Eigen::VectorXd> emb;
  emb["a"] = Eigen::VectorXd::Zero(2);
  EXPECT_THROW(cluster_units(emb, 2, 1), DataError);
}

TEST(ClusterUnits, KMeansObjectiveNonIncreasing) {
  Rng rng(77);
  Eigen::MatrixXd points(60, 3);
  for (int i = 0; i < 60; i++)
    for (int d = 0; d < 3; d++) points(i, d) = rng.gauss() + (i % 3) * 2.0;
  Rng krng(5);
  KMeansResult km = kmeans(points, 3, krng);
  for (std::size_t i = 1; i < km.sse_per_iter.size(); i++)
    EXPECT_LE(km.sse_per_iter[i], km.sse_per_iter[i - 1] + 1e-9);
}

TEST(ClassmapFile, PaperStyleFixtureRoundTrips) {
  // Six-class grouping of vowel-like unit labels; exercises the classmap
  // file format with a realistic inventory.
  UnitClassMap map;
  map.num_classes = 6;
  auto assign = [&](std::initializer_list<const char *> units, int cls) {
    for (const char *u : units) map.mapping[u] = cls;
  };
  assign({"a", "ao", "an", "ang", "ia", "iao", "ua"}, 0);
  assign({"e", "ei", "ai", "i", "ie", "uei", "iii"}, 1);
  assign({"iou", "ou", "u", "ong", "uo", "o"}, 2);
  assign({"v", "vn", "ve", "van", "er"}, 3);
  assign({"en", "ian", "uan", "uen", "uai", "in", "ii", "ing"}, 4);
  assign({"eng", "iang", "iong", "uang", "ueng"}, 5);

  TempDir tmp;
  write_classmap_file(tmp.file("classmap.txt"), map);
  UnitClassMap loaded = read_classmap_file(tmp.file("classmap.txt"));
  EXPECT_EQ(loaded.num_classes, 6);
  EXPECT_EQ(loaded.mapping, map.mapping);
  EXPECT_EQ(loaded.class_of("iao"), 0);
  EXPECT_EQ(loaded.class_of("ueng"), 5);
  EXPECT_EQ(loaded.class_of("zzz"), -1);
}

namespace {

// Shared fixture data: two units in two classes with clearly separated
// distributions, tiling alignments.
struct SubregionFixture {
  std::vector<FeatureMatrix> feats;
  AlignmentSet alignments;
  UnitClassMap classmap;

  explicit SubregionFixture(Rng &rng, int utts = 4, int frames_per_seg = 30) {
    classmap.num_classes = 2;
    classmap.mapping = {{"aa", 0}, {"bb", 1}};
    for (int u = 0; u < utts; u++) {
      FeatureMatrix f;
      f.utt_id = "utt" + std::to_string(u);
      f.frames.resize(2 * frames_per_seg, 2);
      for (int t = 0; t < frames_per_seg; t++) {
        f.frames(t, 0) = static_cast<float>(-4.0 + rng.gauss());
        f.frames(t, 1) = static_cast<float>(rng.gauss());
      }
      for (int t = frames_per_seg; t < 2 * frames_per_seg; t++) {
        f.frames(t, 0) = static_cast<float>(4.0 + rng.gauss());
        f.frames(t, 1) = static_cast<float>(1.0 + rng.gauss());
      }
      alignments[f.utt_id] = {{0, frames_per_seg, "aa"},
                              {frames_per_seg, 2 * frames_per_seg, "bb"}};
      feats.push_back(std::move(f));
    }
  }
};

}  // namespace

TEST(TrainSubregionUbms, SingleClassEqualsPooledUbm) {
  Rng rng(11);
  SubregionFixture fix(rng);
  UnitClassMap collapsed;
  collapsed.num_classes = 1;
  collapsed.mapping = {{"aa", 0}, {"bb", 0}};
  EmConfig cfg;
  cfg.num_iters = 4;
  cfg.seed = 2;
  SubregionUbmSet set =
      train_subregion_ubms(fix.feats, fix.alignments, collapsed, 4, cfg);

  // Pooled baseline over the same frames in the same (sorted utterance,
  // segment) order.
  FeatureMatrix pooled;
  pooled.utt_id = "pooled";
  long total = 0;
  for (const auto &[utt, segs] : fix.alignments)
    for (const auto &s : segs) total += s.end_frame - s.start_frame;
  pooled.frames.resize(total, 2);
  long row = 0;
  std::map<std::string, const FeatureMatrix *> by_utt;
  for (const auto &f : fix.feats) by_utt[f.utt_id] = &f;
  for (const auto &[utt, segs] : fix.alignments)
    for (const auto &s : segs) {
      int len = s.end_frame - s.start_frame;
      pooled.frames.middleRows(row, len) =
          by_utt.at(utt)->frames.middleRows(s.start_frame, len);
      row += len;
    }
  DiagGmm baseline = train_ubm_em({pooled}, 4, cfg).gmm;

  ASSERT_EQ(set.num_classes(), 1);
  EXPECT_TRUE(set.ubms[0].weights.isApprox(baseline.weights, 1e-12));
  EXPECT_TRUE(set.ubms[0].means.isApprox(baseline.means, 1e-12));
  EXPECT_TRUE(set.ubms[0].vars.isApprox(baseline.vars, 1e-12));
}

TEST(TrainSubregionUbms, SeparatedClassesKeepTheirMeans) {
  Rng rng(12);
  SubregionFixture fix(rng, 8, 50);
  EmConfig cfg;
  cfg.num_iters = 5;
  cfg.seed = 4;
  SubregionUbmSet set = train_subregion_ubms(fix.feats, fix.alignments, fix.classmap, 2, cfg);
  ASSERT_EQ(set.num_classes(), 2);
  double mean0 = set.ubms[0].weights.dot(set.ubms[0].means.col(0));
  double mean1 = set.ubms[1].weights.dot(set.ubms[1].means.col(0));
  EXPECT_NEAR(mean0, -4.0, 0.5);
  EXPECT_NEAR(mean1, 4.0, 0.5);
}

TEST(TrainSubregionUbms, StarvedClassErrors) {
  Rng rng(13);
  SubregionFixture fix(rng);
  UnitClassMap map;
  map.num_classes = 2;
  map.mapping = {{"aa", 0}, {"zz", 1}};  // class 1 never aligned
  EmConfig cfg;
  cfg.num_iters = 2;
  cfg.seed = 1;
  EXPECT_THROW(train_subregion_ubms(fix.feats, fix.alignments, map, 2, cfg), DataError);
}

TEST(EnrollSubregionSpeaker, NoDataEqualsUbmsAndScoresZero) {
  Rng rng(14);
  SubregionFixture fix(rng);
  EmConfig cfg;
  cfg.num_iters = 3;
  cfg.seed = 9;
  SubregionUbmSet ubms = train_subregion_ubms(fix.feats, fix.alignments, fix.classmap, 2, cfg);
  SubregionSpeakerModel spk =
      enroll_subregion_speaker(ubms, {}, AlignmentSet{}, fix.classmap, 16.0, "s");
  for (int c = 0; c < 2; c++)
    EXPECT_TRUE(spk.gmms[c].means.isApprox(ubms.ubms[c].means));

  SubregionScore score = score_subregion(spk, ubms, fix.feats[0],
                                         fix.alignments.at("utt0"), fix.classmap);
  EXPECT_DOUBLE_EQ(score.score, 0.0);
  EXPECT_EQ(score.scored_segments, 2);
}

TEST(EnrollSubregionSpeaker, OnlyTouchedClassChanges) {
  Rng rng(15);
  SubregionFixture fix(rng);
  EmConfig cfg;
  cfg.num_iters = 3;
  cfg.seed = 9;
  SubregionUbmSet ubms = train_subregion_ubms(fix.feats, fix.alignments, fix.classmap, 2, cfg);

  // Enrollment aligned only to unit bb (class 1).
  FeatureMatrix enroll = constant_features("spk", 20, 2, 3.0f);
  AlignmentSet ali;
  ali["spk"] = {{0, 20, "bb"}};
  SubregionSpeakerModel spk =
      enroll_subregion_speaker(ubms, {enroll}, ali, fix.classmap, 16.0, "spk");
  EXPECT_TRUE(spk.gmms[0].means.isApprox(ubms.ubms[0].means));
  EXPECT_FALSE(spk.gmms[1].means.isApprox(ubms.ubms[1].means));
}

TEST(EnrollSubregionSpeaker, SingleClassEqualsMapAdapt) {
  Rng rng(16);
  UnitClassMap collapsed;
  collapsed.num_classes = 1;
  collapsed.mapping = {{"aa", 0}};
  DiagGmm ubm = random_gmm(3, 2, rng);
  SubregionUbmSet ubms;
  ubms.ubms = {ubm};

  FeatureMatrix enroll = random_features("spk", 40, 2, rng);
  AlignmentSet ali;
  ali["spk"] = {{0, 40, "aa"}};
  SubregionSpeakerModel spk =
      enroll_subregion_speaker(ubms, {enroll}, ali, collapsed, 12.0, "spk");
  SpeakerModel direct = map_adapt(ubm, enroll, 12.0, "spk");
  EXPECT_TRUE(spk.gmms[0].means.isApprox(direct.gmm.means, 1e-14));
}

TEST(ScoreSubregion, SingleFrameSegmentEqualsFrameLlr) {
  Rng rng(18);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(3, 2, rng), random_gmm(3, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = {random_gmm(3, 2, rng), random_gmm(3, 2, rng)};
  UnitClassMap map;
  map.num_classes = 2;
  map.mapping = {{"aa", 0}, {"bb", 1}};

  FeatureMatrix test = random_features("t", 1, 2, rng);
  std::vector<Segment> segs = {{0, 1, "bb"}};
  Eigen::VectorXd x = test.frames.row(0).cast<double>();
  double expected = gmm_log_likelihood(spk.gmms[1], x) - gmm_log_likelihood(ubms.ubms[1], x);
  EXPECT_NEAR(score_subregion(spk, ubms, test, segs, map).score, expected, 1e-12);
}

TEST(ScoreSubregion, TwoSegmentsAverageOfSegmentLlrs) {
  Rng rng(19);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  UnitClassMap map;
  map.num_classes = 2;
  map.mapping = {{"aa", 0}, {"bb", 1}};

  FeatureMatrix test = random_features("t", 12, 2, rng);
  std::vector<Segment> segs = {{0, 5, "aa"}, {5, 12, "bb"}};

  auto segment_llr = [&](int cls, int start, int end) {
    double acc = 0.0;
    for (int t = start; t < end; t++) {
      Eigen::VectorXd x = test.frames.row(t).cast<double>();
      acc += naive_gmm_log_density(spk.gmms[cls], x) -
             naive_gmm_log_density(ubms.ubms[cls], x);
    }
    return acc / (end - start);
  };
  double a = segment_llr(0, 0, 5), b = segment_llr(1, 5, 12);
  EXPECT_NEAR(score_subregion(spk, ubms, test, segs, map).score, (a + b) / 2.0, 1e-10);

  // Raw variant: unnormalized segment log-ratios.
  double raw_a = a * 5, raw_b = b * 7;
  EXPECT_NEAR(score_subregion(spk, ubms, test, segs, map, false).score,
              (raw_a + raw_b) / 2.0, 1e-9);
}

TEST(ScoreSubregion, UnknownUnitsSkippedAndCounted) {
  Rng rng(20);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = {random_gmm(2, 2, rng)};
  UnitClassMap map;
  map.num_classes = 1;
  map.mapping = {{"aa", 0}};

  FeatureMatrix test = random_features("t", 10, 2, rng);
  std::vector<Segment> segs = {{0, 4, "aa"}, {4, 10, "??"}};
  SubregionScore score = score_subregion(spk, ubms, test, segs, map);
  EXPECT_EQ(score.scored_segments, 1);
  EXPECT_EQ(score.skipped_segments, 1);

  std::vector<Segment> all_unknown = {{0, 10, "??"}};
  EXPECT_THROW(score_subregion(spk, ubms, test, all_unknown, map), DataError);
}

TEST(ScoreSubregion, PerClassIndependence) {
  Rng rng(21);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  UnitClassMap map;
  map.num_classes = 2;
  map.mapping = {{"aa", 0}, {"bb", 1}};

  FeatureMatrix test = random_features("t", 8, 2, rng);
  std::vector<Segment> segs = {{0, 8, "aa"}};  // only class 0 is scored
  double before = score_subregion(spk, ubms, test, segs, map).score;
  spk.gmms[1].means.array() += 5.0;  // perturb the unused class
  spk.gmms[1].finalize();
  double after = score_subregion(spk, ubms, test, segs, map).score;
  EXPECT_DOUBLE_EQ(before, after);
}

TEST(ScoreSubregion, CollapsedClassmapEqualsGmmUbmScore) {
  // One class whose UBM is the pooled UBM: with equal-length segments that
  // tile the utterance, the segment-averaged score equals the frame-averaged
  // baseline score.
  Rng rng(22);
  DiagGmm pooled = random_gmm(4, 2, rng);
  DiagGmm adapted = random_gmm(4, 2, rng);
  SubregionUbmSet ubms;
  ubms.ubms = {pooled};
  SubregionSpeakerModel sub_spk;
  sub_spk.speaker_id = "s";
  sub_spk.gmms = {adapted};
  UnitClassMap map;
  map.num_classes = 1;
  map.mapping = {{"aa", 0}};

  FeatureMatrix test = random_features("t", 20, 2, rng);
  std::vector<Segment> segs = {{0, 5, "aa"}, {5, 10, "aa"}, {10, 15, "aa"}, {15, 20, "aa"}};
  double sub = score_subregion(sub_spk, ubms, test, segs, map).score;
  double base = gmm_ubm_score({"s", "u", adapted}, pooled, test);
  EXPECT_NEAR(sub, base, 1e-10);
}

TEST(ScoreSubregionSoft, OneHotSingleFrameSegmentsEqualHardScore) {
  Rng rng(23);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  UnitClassMap map;
  map.num_classes = 2;
  map.mapping = {{"aa", 0}, {"bb", 1}};

  const int T = 6;
  FeatureMatrix test = random_features("t", T, 2, rng);
  std::vector<Segment> segs;
  Eigen::MatrixXd post = Eigen::MatrixXd::Zero(T, 2);
  for (int t = 0; t < T; t++) {
    int cls = t % 2;
    segs.push_back({t, t + 1, cls == 0 ? "aa" : "bb"});
    post(t, cls) = 1.0;
  }
  double hard = score_subregion(spk, ubms, test, segs, map).score;
  double soft = score_subregion_soft(spk, ubms, test, post);
  EXPECT_NEAR(hard, soft, 1e-12);
}

TEST(ScoreSubregionSoft, SpeakerEqualsUbmScoresZero) {
  Rng rng(24);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = ubms.ubms;
  FeatureMatrix test = random_features("t", 5, 2, rng);
  Eigen::MatrixXd post(5, 2);
  for (int t = 0; t < 5; t++) {
    double p = rng.uniform(0.1, 0.9);
    post(t, 0) = p;
    post(t, 1) = 1.0 - p;
  }
  EXPECT_DOUBLE_EQ(score_subregion_soft(spk, ubms, test, post), 0.0);
}

TEST(ScoreSubregionSoft, MatchesBruteForceOracle) {
  Rng rng(25);
  for (int i = 0; i < 100; i++) {
    SubregionUbmSet ubms;
    ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
    SubregionSpeakerModel spk;
    spk.speaker_id = "s";
    spk.gmms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
    const int T = 2;
    FeatureMatrix test = random_features("t", T, 2, rng);
    Eigen::MatrixXd post(T, 2);
    for (int t = 0; t < T; t++) {
      double p = rng.uniform(0.05, 0.95);
      post(t, 0) = p;
      post(t, 1) = 1.0 - p;
    }
    double expected = 0.0;
    for (int t = 0; t < T; t++) {
      Eigen::VectorXd x = test.frames.row(t).cast<double>();
      double num = 0.0, den = 0.0;
      for (int c = 0; c < 2; c++) {
        num += post(t, c) * std::exp(naive_gmm_log_density(spk.gmms[c], x));
        den += post(t, c) * std::exp(naive_gmm_log_density(ubms.ubms[c], x));
      }
      expected += std::log(num) - std::log(den);
    }
    expected /= T;
    EXPECT_NEAR(score_subregion_soft(spk, ubms, test, post), expected, 1e-10);
  }
}

TEST(ScoreSubregionSoft, UnnormalizedRowErrors) {
  Rng rng(26);
  SubregionUbmSet ubms;
  ubms.ubms = {random_gmm(2, 2, rng), random_gmm(2, 2, rng)};
  SubregionSpeakerModel spk;
  spk.speaker_id = "s";
  spk.gmms = ubms.ubms;
  FeatureMatrix test = random_features("t", 3, 2, rng);
  Eigen::MatrixXd post = Eigen::MatrixXd::Constant(3, 2, 0.6);  // rows sum to 1.2
  EXPECT_THROW(score_subregion_soft(spk, ubms, test, post), DataError);
}

TEST(AlignmentFile, ValidatesAndRoundTrips) {
  TempDir tmp;
  AlignmentSet ali;
  ali["utt1"] = {{0, 5, "aa"}, {5, 9, "bb"}};
  ali["utt2"] = {{0, 3, "cc"}};
  write_alignment_file(tmp.file("a.ali"), ali);
  AlignmentSet loaded = read_alignment_file(tmp.file("a.ali"));
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.at("utt1")[1].unit, "bb");
  EXPECT_EQ(loaded.at("utt1")[1].start_frame, 5);

  // Overlapping segments rejected.
  std::ofstream os(tmp.file("bad.ali"));
  os << "u\t0\t5\taa\nu\t3\t8\tbb\n";
  os.close();
  EXPECT_THROW(read_alignment_file(tmp.file("bad.ali")), DataError);
}
