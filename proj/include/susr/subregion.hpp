// susr/subregion.hpp

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

#ifndef SUSR_SUBREGION_HPP
#define SUSR_SUBREGION_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "susr/common.hpp"
#include "susr/features.hpp"
#include "susr/gmm.hpp"
#include "susr/kmeans.hpp"

namespace susr {

// Half-open frame range [start_frame, end_frame) labeled with a speech unit.
struct Segment {
  int start_frame = 0;
  int end_frame = 0;
  std::string unit;
};

// utt_id -> non-overlapping, sorted segments.
using AlignmentSet = std::map<std::string, std::vector<Segment>>;

inline void validate_segments(const std::string &utt_id,
                              const std::vector<Segment> &segments,
                              int num_frames = -1) {
  int prev_end = 0;
  for (const auto &seg : segments) {
    if (seg.start_frame < 0 || seg.start_frame >= seg.end_frame)
      throw DataError("alignment for '" + utt_id + "': bad segment [" +
                      std::to_string(seg.start_frame) + ", " +
                      std::to_string(seg.end_frame) + ")");
    if (seg.start_frame < prev_end)
      throw DataError("alignment for '" + utt_id + "': overlapping or unsorted segments");
    if (num_frames >= 0 && seg.end_frame > num_frames)
      throw DataError("alignment for '" + utt_id + "': segment end " +
                      std::to_string(seg.end_frame) + " exceeds frame count " +
                      std::to_string(num_frames));
    prev_end = seg.end_frame;
  }
}

struct UnitClassMap {
  int num_classes = 0;
  std::map<std::string, int> mapping;  // unit label -> class index

  // -1 when the unit has no mapping (unknown-unit policy: skip and count).
  int class_of(const std::string &unit) const {
    auto it = mapping.find(unit);
    return it == mapping.end() ? -1 : it->second;
  }

  void validate() const {
    if (num_classes < 1) throw DataError("classmap: need at least one class");
    std::vector<int> counts(num_classes, 0);
    for (const auto &[unit, cls] : mapping) {
      if (cls < 0 || cls >= num_classes)
        throw DataError("classmap: unit '" + unit + "' has out-of-range class " +
                        std::to_string(cls));
      counts[cls]++;
    }
    for (int c = 0; c < num_classes; c++)
      if (counts[c] == 0)
        throw DataError("classmap: class " + std::to_string(c) + " is empty");
  }
};

struct SubregionUbmSet {
  std::vector<DiagGmm> ubms;  // one per class

  int num_classes() const { return static_cast<int>(ubms.size()); }
  int dim() const { return ubms.empty() ? 0 : ubms[0].dim(); }
};

struct SubregionSpeakerModel {
  std::string speaker_id;
  std::vector<DiagGmm> gmms;  // one per class

  int num_classes() const { return static_cast<int>(gmms.size()); }
};

// ---------------------------------------------------------------------------
// Unit clustering.

// Mean feature vector over all frames aligned to each distinct unit label.
// Units that never receive a frame do not appear in the output.
inline std::map<std::string, Eigen::VectorXd> unit_embeddings(
    const std::vector<FeatureMatrix> &features, const AlignmentSet &alignments) {
  if (alignments.empty()) throw DataError("unit_embeddings: empty alignment set");
  std::map<std::string, const FeatureMatrix *> by_utt;
  for (const auto &f : features) by_utt[f.utt_id] = &f;

  std::map<std::string, Eigen::VectorXd> sums;
  std::map<std::string, long> counts;
  bool any_covered = false;
  for (const auto &[utt_id, segments] : alignments) {
    auto it = by_utt.find(utt_id);
    if (it == by_utt.end()) continue;  // alignments may cover more data
    any_covered = true;
    const FeatureMatrix &f = *it->second;
    validate_segments(utt_id, segments, f.num_frames());
    for (const auto &seg : segments) {
      Eigen::VectorXd seg_sum =
          f.frames.middleRows(seg.start_frame, seg.end_frame - seg.start_frame)
              .cast<double>()
              .colwise()
              .sum();
      auto [entry, inserted] = sums.try_emplace(seg.unit, std::move(seg_sum));
      if (!inserted) entry->second += seg_sum;
      counts[seg.unit] += seg.end_frame - seg.start_frame;
    }
  }
  if (!any_covered)
    throw DataError("unit_embeddings: alignments cover none of the given features");
  std::map<std::string, Eigen::VectorXd> out;
  for (auto &[unit, sum] : sums) out[unit] = sum / static_cast<double>(counts[unit]);
  return out;
}

// K-means over unit embeddings. Deterministic given the seed; empty classes
// are repaired by stealing the point farthest from its own center.
inline UnitClassMap cluster_units(const std::map<std::string, Eigen::VectorXd> &embeddings,
                                  int num_classes, std::uint64_t seed) {
  const int n = static_cast<int>(embeddings.size());
  if (n < num_classes)
    throw DataError("cluster_units: fewer units (" + std::to_string(n) +
                    ") than classes (" + std::to_string(num_classes) + ")");
  std::vector<std::string> units;
  units.reserve(n);
  for (const auto &[unit, vec] : embeddings) units.push_back(unit);
  const int dim = static_cast<int>(embeddings.begin()->second.size());
  Eigen::MatrixXd points(n, dim);
  for (int i = 0; i < n; i++) points.row(i) = embeddings.at(units[i]);

  Rng rng(seed);
  KMeansResult km = kmeans(points, num_classes, rng);

  std::vector<int> counts(num_classes, 0);
  for (int a : km.assignments) counts[a]++;
  for (int c = 0; c < num_classes; c++) {
    while (counts[c] == 0) {
      int far = -1;
      double far_d = -1.0;
      for (int i = 0; i < n; i++) {
        if (counts[km.assignments[i]] < 2) continue;
        double d = (points.row(i) - km.centers.row(km.assignments[i])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far < 0) throw NumericalError("cluster_units: cannot repair empty class");
      counts[km.assignments[far]]--;
      km.assignments[far] = c;
      counts[c]++;
    }
  }

  UnitClassMap map;
  map.num_classes = num_classes;
  for (int i = 0; i < n; i++) map.mapping[units[i]] = km.assignments[i];
  map.validate();
  return map;
}

// ---------------------------------------------------------------------------
// Training and enrollment.

namespace detail {

// Pools frames aligned to each class, in sorted-utterance order.
inline std::vector<FeatureMatrix> pool_class_frames(
    const std::vector<FeatureMatrix> &features, const AlignmentSet &alignments,
    const UnitClassMap &classmap, int *skipped_segments = nullptr) {
  std::map<std::string, const FeatureMatrix *> by_utt;
  for (const auto &f : features) by_utt[f.utt_id] = &f;
  const int D = features.empty() ? 0 : features[0].dim();
  std::vector<long> class_frames(classmap.num_classes, 0);
  for (const auto &[utt_id, segments] : alignments) {
    auto it = by_utt.find(utt_id);
    if (it == by_utt.end()) continue;  // alignments may cover more data
    validate_segments(utt_id, segments, it->second->num_frames());
    for (const auto &seg : segments) {
      int cls = classmap.class_of(seg.unit);
      if (cls < 0) {
        if (skipped_segments != nullptr) (*skipped_segments)++;
        continue;
      }
      class_frames[cls] += seg.end_frame - seg.start_frame;
    }
  }
  std::vector<FeatureMatrix> pooled(classmap.num_classes);
  for (int c = 0; c < classmap.num_classes; c++) {
    pooled[c].utt_id = "class" + std::to_string(c);
    pooled[c].frames.resize(class_frames[c], D);
  }
  std::vector<long> row(classmap.num_classes, 0);
  for (const auto &[utt_id, segments] : alignments) {
    auto it = by_utt.find(utt_id);
    if (it == by_utt.end()) continue;
    for (const auto &seg : segments) {
      int cls = classmap.class_of(seg.unit);
      if (cls < 0) continue;
      int len = seg.end_frame - seg.start_frame;
      pooled[cls].frames.middleRows(row[cls], len) =
          it->second->frames.middleRows(seg.start_frame, len);
      row[cls] += len;
    }
  }
  return pooled;
}

}  // namespace detail

// One UBM per speech unit class, trained on the frames aligned to that class.
inline SubregionUbmSet train_subregion_ubms(const std::vector<FeatureMatrix> &features,
                                            const AlignmentSet &alignments,
                                            const UnitClassMap &classmap,
                                            int comps_per_class, const EmConfig &cfg) {
  classmap.validate();
  int skipped = 0;
  std::vector<FeatureMatrix> pooled =
      detail::pool_class_frames(features, alignments, classmap, &skipped);
  if (skipped > 0)
    log_warn("train_subregion_ubms: skipped " + std::to_string(skipped) +
             " segments with unmapped units");
  SubregionUbmSet set;
  set.ubms.reserve(classmap.num_classes);
  for (int c = 0; c < classmap.num_classes; c++) {
    if (pooled[c].num_frames() == 0)
      throw DataError("train_subregion_ubms: class " + std::to_string(c) +
                      " has no aligned frames");
    if (pooled[c].num_frames() < comps_per_class)
      throw DataError("train_subregion_ubms: class " + std::to_string(c) + " has " +
                      std::to_string(pooled[c].num_frames()) +
                      " frames, fewer than " + std::to_string(comps_per_class) +
                      " components");
    set.ubms.push_back(train_ubm_em({pooled[c]}, comps_per_class, cfg).gmm);
  }
  return set;
}

// Per-class MAP adaptation using only the speaker's frames aligned to that
// class; a class with no enrollment frames keeps its UBM.
inline SubregionSpeakerModel enroll_subregion_speaker(
    const SubregionUbmSet &ubms, const std::vector<FeatureMatrix> &features,
    const AlignmentSet &alignments, const UnitClassMap &classmap, double relevance,
    const std::string &speaker_id) {
  classmap.validate();
  if (classmap.num_classes != ubms.num_classes())
    throw DataError("enroll_subregion_speaker: classmap/UBM class count mismatch");
  std::vector<FeatureMatrix> pooled =
      detail::pool_class_frames(features, alignments, classmap);
  SubregionSpeakerModel spk;
  spk.speaker_id = speaker_id;
  spk.gmms.reserve(ubms.num_classes());
  for (int c = 0; c < ubms.num_classes(); c++) {
    if (pooled[c].num_frames() == 0) {
      spk.gmms.push_back(ubms.ubms[c]);
      spk.gmms.back().finalize();
    } else {
      spk.gmms.push_back(map_adapt(ubms.ubms[c], pooled[c], relevance, speaker_id).gmm);
    }
  }
  return spk;
}

// ---------------------------------------------------------------------------
// Scoring.

struct SubregionScore {
  double score = 0.0;
  int scored_segments = 0;
  int skipped_segments = 0;  // unknown unit labels
};

namespace detail {

inline double segment_log_like(const DiagGmm &gmm, const FloatMatrix &frames,
                               int start, int len) {
  Eigen::MatrixXd ll = gmm.component_log_likes_matrix(frames.middleRows(start, len));
  Eigen::VectorXd m = ll.rowwise().maxCoeff();
  return (((ll.colwise() - m).array().exp().rowwise().sum()).log() + m.array()).sum();
}

}  // namespace detail

// Utterance score: mean over segments of the segment LLR against the
// matching class models. With normalize_by_length (default) each segment LLR
// is divided by its frame count first; the raw variant averages the plain
// segment log-ratios.
inline SubregionScore score_subregion(const SubregionSpeakerModel &spk,
                                      const SubregionUbmSet &ubms,
                                      const FeatureMatrix &test,
                                      const std::vector<Segment> &segments,
                                      const UnitClassMap &classmap,
                                      bool normalize_by_length = true) {
  if (spk.num_classes() != ubms.num_classes())
    throw DataError("score_subregion: speaker/UBM class count mismatch");
  validate_segments(test.utt_id, segments, test.num_frames());
  SubregionScore result;
  double total = 0.0;
  for (const auto &seg : segments) {
    int cls = classmap.class_of(seg.unit);
    if (cls < 0 || cls >= ubms.num_classes()) {
      result.skipped_segments++;
      continue;
    }
    int len = seg.end_frame - seg.start_frame;
    double llr = detail::segment_log_like(spk.gmms[cls], test.frames, seg.start_frame, len) -
                 detail::segment_log_like(ubms.ubms[cls], test.frames, seg.start_frame, len);
    total += normalize_by_length ? llr / len : llr;
    result.scored_segments++;
  }
  if (result.scored_segments == 0)
    throw DataError("score_subregion: no scorable segments in '" + test.utt_id + "'");
  result.score = total / result.scored_segments;
  return result;
}

// Soft posterior-weighted score: per frame, class-posterior mixtures of the
// subregion GMMs are compared between speaker and UBM sides, averaged over
// frames.
inline double score_subregion_soft(const SubregionSpeakerModel &spk,
                                   const SubregionUbmSet &ubms,
                                   const FeatureMatrix &test,
                                   const Eigen::MatrixXd &class_posteriors) {
  const int T = test.num_frames();
  const int C = ubms.num_classes();
  if (spk.num_classes() != C)
    throw DataError("score_subregion_soft: speaker/UBM class count mismatch");
  if (class_posteriors.rows() != T || class_posteriors.cols() != C)
    throw DataError("score_subregion_soft: posterior matrix shape mismatch");
  if (T == 0) throw DataError("score_subregion_soft: empty test features");
  for (int t = 0; t < T; t++) {
    double s = class_posteriors.row(t).sum();
    if (std::abs(s - 1.0) > 1e-6)
      throw DataError("score_subregion_soft: posterior row " + std::to_string(t) +
                      " sums to " + std::to_string(s));
    if ((class_posteriors.row(t).array() < 0).any())
      throw DataError("score_subregion_soft: negative posterior in row " +
                      std::to_string(t));
  }

  auto per_class_ll = [&](const std::vector<DiagGmm> &models) {
    Eigen::MatrixXd ll(T, C);
    for (int c = 0; c < C; c++) {
      Eigen::MatrixXd cll = models[c].component_log_likes_matrix(test.frames);
      Eigen::VectorXd m = cll.rowwise().maxCoeff();
      ll.col(c) =
          ((cll.colwise() - m).array().exp().rowwise().sum()).log() + m.array();
    }
    return ll;
  };
  Eigen::MatrixXd ll_spk = per_class_ll(spk.gmms);
  Eigen::MatrixXd ll_ubm = per_class_ll(ubms.ubms);

  auto weighted_lse = [&](const Eigen::MatrixXd &ll, int t) {
    double m = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < C; c++)
      if (class_posteriors(t, c) > 0) m = std::max(m, ll(t, c));
    double acc = 0.0;
    for (int c = 0; c < C; c++)
      if (class_posteriors(t, c) > 0)
        acc += class_posteriors(t, c) * std::exp(ll(t, c) - m);
    return m + std::log(acc);
  };

  double total = 0.0;
  for (int t = 0; t < T; t++)
    total += weighted_lse(ll_spk, t) - weighted_lse(ll_ubm, t);
  return total / T;
}

// ---------------------------------------------------------------------------
// File formats.
//
// Alignment file (text): one `utt_id<TAB>start_frame<TAB>end_frame<TAB>unit`
// line per segment. Classmap file (text): header `C=<n>`, then
// `unit<TAB>class_index` lines. Subregion model files concatenate GMMM
// records behind a class-index directory header.

inline void write_alignment_file(const std::string &path, const AlignmentSet &alignments) {
  std::ofstream os = open_output(path, /*binary=*/false);
  for (const auto &[utt_id, segments] : alignments) {
    check_identifier(utt_id, "utt_id");
    for (const auto &seg : segments) {
      check_identifier(seg.unit, "unit label");
      os << utt_id << '\t' << seg.start_frame << '\t' << seg.end_frame << '\t'
         << seg.unit << '\n';
    }
  }
  if (!os) throw DataError("failed writing " + path);
}

inline AlignmentSet read_alignment_file(const std::string &path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  AlignmentSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 4)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 4 tab-separated fields");
    Segment seg;
    seg.start_frame = static_cast<int>(parse_long(fields[1], "start_frame"));
    seg.end_frame = static_cast<int>(parse_long(fields[2], "end_frame"));
    seg.unit = fields[3];
    out[fields[0]].push_back(seg);
  }
  for (const auto &[utt_id, segments] : out) validate_segments(utt_id, segments);
  return out;
}

inline void write_classmap_file(const std::string &path, const UnitClassMap &map) {
  map.validate();
  std::ofstream os = open_output(path, /*binary=*/false);
  os << "C=" << map.num_classes << '\n';
  for (const auto &[unit, cls] : map.mapping) {
    check_identifier(unit, "unit label");
    os << unit << '\t' << cls << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

inline UnitClassMap read_classmap_file(const std::string &path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::string line;
  if (!std::getline(is, line) || line.rfind("C=", 0) != 0)
    throw DataError(path + ": missing C=<n> header");
  UnitClassMap map;
  map.num_classes = static_cast<int>(parse_long(line.substr(2), "class count"));
  int lineno = 1;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected `unit<TAB>class` line");
    map.mapping[fields[0]] = static_cast<int>(parse_long(fields[1], "class index"));
  }
  map.validate();
  return map;
}

inline constexpr char kSubregionUbmMagic[9] = "SUSRSUB1";
inline constexpr char kSubregionSpeakerMagic[9] = "SUSRSUBS";

namespace detail {

inline void write_class_directory(std::ostream &os, int num_classes) {
  write_u32(os, static_cast<std::uint32_t>(num_classes));
  for (int c = 0; c < num_classes; c++) write_u32(os, static_cast<std::uint32_t>(c));
}

inline int read_class_directory(std::istream &is) {
  std::uint32_t n = read_u32(is);
  if (n == 0) throw DataError("subregion model: zero classes");
  for (std::uint32_t c = 0; c < n; c++)
    if (read_u32(is) != c) throw DataError("subregion model: bad class directory");
  return static_cast<int>(n);
}

}  // namespace detail

inline void write_subregion_ubms_file(const std::string &path, const SubregionUbmSet &set) {
  std::ofstream os = open_output(path);
  write_magic(os, kSubregionUbmMagic);
  detail::write_class_directory(os, set.num_classes());
  for (const auto &gmm : set.ubms) write_gmm_record(os, gmm);
}

inline SubregionUbmSet read_subregion_ubms_file(const std::string &path) {
  std::ifstream is = open_input(path);
  expect_magic(is, kSubregionUbmMagic);
  int n = detail::read_class_directory(is);
  SubregionUbmSet set;
  set.ubms.reserve(n);
  for (int c = 0; c < n; c++) set.ubms.push_back(read_gmm_record(is));
  return set;
}

inline void write_subregion_speaker_record(std::ostream &os,
                                           const SubregionSpeakerModel &spk) {
  check_identifier(spk.speaker_id, "speaker_id");
  write_magic(os, kSubregionSpeakerMagic);
  write_string(os, spk.speaker_id);
  detail::write_class_directory(os, spk.num_classes());
  for (const auto &gmm : spk.gmms) write_gmm_record(os, gmm);
}

inline SubregionSpeakerModel read_subregion_speaker_record(std::istream &is) {
  expect_magic(is, kSubregionSpeakerMagic);
  SubregionSpeakerModel spk;
  spk.speaker_id = read_string(is);
  int n = detail::read_class_directory(is);
  spk.gmms.reserve(n);
  for (int c = 0; c < n; c++) spk.gmms.push_back(read_gmm_record(is));
  return spk;
}

inline void write_subregion_speaker_file(const std::string &path,
                                         const std::vector<SubregionSpeakerModel> &speakers) {
  std::ofstream os = open_output(path);
  for (const auto &s : speakers) write_subregion_speaker_record(os, s);
}

inline std::vector<SubregionSpeakerModel> read_subregion_speaker_file(
    const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<SubregionSpeakerModel> out;
  while (stream_has_more(is)) out.push_back(read_subregion_speaker_record(is));
  if (out.empty()) throw DataError(path + ": no subregion speaker records");
  return out;
}

}  // namespace susr

#endif  // SUSR_SUBREGION_HPP
