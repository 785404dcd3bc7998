// susr/synthcorpus.hpp

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

#ifndef SUSR_SYNTHCORPUS_HPP
#define SUSR_SYNTHCORPUS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "susr/common.hpp"
#include "susr/eval.hpp"
#include "susr/features.hpp"
#include "susr/ivector.hpp"
#include "susr/rng.hpp"
#include "susr/subregion.hpp"

namespace susr {

// Phone-structured synthetic corpus: units belong to latent classes, each
// speaker shifts every unit mean by a private offset, frames are unit
// Gaussians around the shifted means. Two corpora generated with the same
// seed but different stream_tag values share the unit/class geometry while
// having independent speakers.
struct CorpusSpec {
  std::uint64_t seed = 1;
  int num_speakers = 20;
  int num_units = 10;
  int num_classes = 2;  // latent classes behind the units
  int min_segment_frames = 10;
  int max_segment_frames = 25;
  int enroll_frames = 3500;      // ~35 s at 100 frames/s
  int test_utt_frames = 500;
  int test_utts_per_speaker = 5;
  double speaker_shift_scale = 1.0;
  double class_separation_scale = 3.0;
  int dim = 10;
  std::string speaker_prefix = "spk";
  std::string stream_tag;

  void validate() const {
    if (num_speakers < 1 || num_units < 1 || num_classes < 1 || dim < 1 ||
        enroll_frames < 1 || test_utt_frames < 1 || test_utts_per_speaker < 1)
      throw UsageError("corpus spec: all counts must be positive");
    if (num_classes > num_units)
      throw UsageError("corpus spec: more classes than units");
    if (min_segment_frames < 1 || max_segment_frames < min_segment_frames)
      throw UsageError("corpus spec: bad segment frame range");
    if (speaker_shift_scale < 0 || class_separation_scale < 0)
      throw UsageError("corpus spec: scales must be non-negative");
  }
};

inline void to_json(nlohmann::json &j, const CorpusSpec &s) {
  j = nlohmann::json{{"seed", s.seed},
                     {"num_speakers", s.num_speakers},
                     {"num_units", s.num_units},
                     {"num_classes", s.num_classes},
                     {"min_segment_frames", s.min_segment_frames},
                     {"max_segment_frames", s.max_segment_frames},
                     {"enroll_frames", s.enroll_frames},
                     {"test_utt_frames", s.test_utt_frames},
                     {"test_utts_per_speaker", s.test_utts_per_speaker},
                     {"speaker_shift_scale", s.speaker_shift_scale},
                     {"class_separation_scale", s.class_separation_scale},
                     {"dim", s.dim},
                     {"speaker_prefix", s.speaker_prefix},
                     {"stream_tag", s.stream_tag}};
}

inline void from_json(const nlohmann::json &j, CorpusSpec &s) {
  s = CorpusSpec{};
  s.seed = j.value("seed", s.seed);
  s.num_speakers = j.value("num_speakers", s.num_speakers);
  s.num_units = j.value("num_units", s.num_units);
  s.num_classes = j.value("num_classes", s.num_classes);
  s.min_segment_frames = j.value("min_segment_frames", s.min_segment_frames);
  s.max_segment_frames = j.value("max_segment_frames", s.max_segment_frames);
  s.enroll_frames = j.value("enroll_frames", s.enroll_frames);
  s.test_utt_frames = j.value("test_utt_frames", s.test_utt_frames);
  s.test_utts_per_speaker = j.value("test_utts_per_speaker", s.test_utts_per_speaker);
  s.speaker_shift_scale = j.value("speaker_shift_scale", s.speaker_shift_scale);
  s.class_separation_scale = j.value("class_separation_scale", s.class_separation_scale);
  s.dim = j.value("dim", s.dim);
  s.speaker_prefix = j.value("speaker_prefix", s.speaker_prefix);
  s.stream_tag = j.value("stream_tag", s.stream_tag);
}

struct SynthCorpus {
  CorpusSpec spec;
  UnitClassMap truth_classmap;
  std::vector<FeatureMatrix> enroll_features;  // utt_id == speaker_id
  std::vector<FeatureMatrix> test_features;
  AlignmentSet alignments;  // enrollment and test utterances
  std::vector<PosteriorSet> enroll_posteriors;
  std::vector<PosteriorSet> test_posteriors;
  TrialSet trials;
  std::map<std::string, std::string> utt2spk;
  std::vector<std::string> speakers;
};

namespace detail {

inline std::string zero_pad(int value, int width) {
  std::string s = std::to_string(value);
  while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
  return s;
}

inline std::string unit_name(int u, int num_units) {
  int width = static_cast<int>(std::to_string(num_units - 1).size());
  return "u" + zero_pad(u, std::max(width, 2));
}

// Draws units in shuffled cycles so every unit appears with near-equal
// frequency within an utterance.
class UnitCycler {
 public:
  UnitCycler(int num_units, Rng *rng) : rng_(rng) {
    order_.resize(num_units);
    for (int i = 0; i < num_units; i++) order_[i] = i;
    pos_ = num_units;
  }

  int next() {
    if (pos_ >= order_.size()) {
      rng_->shuffle(order_);
      pos_ = 0;
    }
    return order_[pos_++];
  }

 private:
  Rng *rng_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline SynthCorpus generate_corpus(const CorpusSpec &spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.spec = spec;
  const int D = spec.dim;
  const int K = spec.num_classes;
  Rng base(spec.seed);

  // Unit/class geometry depends only on the seed, not on the stream tag.
  Rng unit_rng = base.fork("units");
  std::vector<Eigen::VectorXd> class_centers(K);
  for (int k = 0; k < K; k++) {
    class_centers[k].resize(D);
    for (int d = 0; d < D; d++) class_centers[k](d) = unit_rng.gauss();
    class_centers[k] *= spec.class_separation_scale;
  }
  std::vector<Eigen::VectorXd> unit_means(spec.num_units);
  std::vector<int> unit_class(spec.num_units);
  corpus.truth_classmap.num_classes = K;
  for (int u = 0; u < spec.num_units; u++) {
    unit_class[u] = u % K;
    unit_means[u].resize(D);
    for (int d = 0; d < D; d++) unit_means[u](d) = unit_rng.gauss();
    unit_means[u] += class_centers[unit_class[u]];
    corpus.truth_classmap.mapping[detail::unit_name(u, spec.num_units)] = unit_class[u];
  }
  corpus.truth_classmap.validate();

  // Speaker offsets come from a tag-specific stream.
  Rng speaker_rng = base.fork("speakers:" + spec.stream_tag);
  const int spk_width =
      std::max(3, static_cast<int>(std::to_string(spec.num_speakers - 1).size()));
  std::vector<std::vector<Eigen::VectorXd>> speaker_shift(spec.num_speakers);
  for (int s = 0; s < spec.num_speakers; s++) {
    corpus.speakers.push_back(spec.speaker_prefix + detail::zero_pad(s, spk_width));
    speaker_shift[s].resize(spec.num_units);
    for (int u = 0; u < spec.num_units; u++) {
      speaker_shift[s][u].resize(D);
      for (int d = 0; d < D; d++)
        speaker_shift[s][u](d) = spec.speaker_shift_scale * speaker_rng.gauss();
    }
  }

  auto synthesize_utterance = [&](int s, const std::string &utt_id, int num_frames,
                                  FeatureMatrix *feats, PosteriorSet *post) {
    Rng rng = base.fork("utt:" + spec.stream_tag + ":" + utt_id);
    detail::UnitCycler cycler(spec.num_units, &rng);
    feats->utt_id = utt_id;
    feats->frames.resize(num_frames, D);
    post->utt_id = utt_id;
    post->num_classes = K;
    post->rows.resize(num_frames);
    std::vector<Segment> segments;
    int t = 0;
    while (t < num_frames) {
      int u = cycler.next();
      int span = spec.min_segment_frames;
      if (spec.max_segment_frames > spec.min_segment_frames)
        span += static_cast<int>(
            rng.uniform_int(spec.max_segment_frames - spec.min_segment_frames + 1));
      int len = std::min(span, num_frames - t);
      Segment seg;
      seg.start_frame = t;
      seg.end_frame = t + len;
      seg.unit = detail::unit_name(u, spec.num_units);
      for (int i = 0; i < len; i++) {
        for (int d = 0; d < D; d++)
          feats->frames(t + i, d) = static_cast<float>(
              unit_means[u](d) + speaker_shift[s][u](d) + rng.gauss());
        post->rows[t + i] = {{unit_class[u], 1.0f}};
      }
      segments.push_back(std::move(seg));
      t += len;
    }
    corpus.alignments[utt_id] = std::move(segments);
  };

  for (int s = 0; s < spec.num_speakers; s++) {
    const std::string &speaker = corpus.speakers[s];
    FeatureMatrix enroll;
    PosteriorSet enroll_post;
    synthesize_utterance(s, speaker, spec.enroll_frames, &enroll, &enroll_post);
    corpus.utt2spk[speaker] = speaker;
    corpus.enroll_features.push_back(std::move(enroll));
    corpus.enroll_posteriors.push_back(std::move(enroll_post));
    for (int i = 0; i < spec.test_utts_per_speaker; i++) {
      std::string utt_id = speaker + "-t" + detail::zero_pad(i, 2);
      FeatureMatrix test;
      PosteriorSet test_post;
      synthesize_utterance(s, utt_id, spec.test_utt_frames, &test, &test_post);
      corpus.utt2spk[utt_id] = speaker;
      corpus.test_features.push_back(std::move(test));
      corpus.test_posteriors.push_back(std::move(test_post));
    }
  }

  // Every (speaker model, test utterance) pair is a trial.
  for (const auto &speaker : corpus.speakers)
    for (const auto &test : corpus.test_features)
      corpus.trials.trials.push_back(
          {speaker, test.utt_id, corpus.utt2spk.at(test.utt_id) == speaker});
  corpus.trials.validate();
  return corpus;
}

// ---------------------------------------------------------------------------
// Truncation to the first k frames (the short-utterance condition).

inline FeatureMatrix truncate_features(const FeatureMatrix &feats, int k) {
  if (k < 1) throw UsageError("truncate: k must be >= 1");
  if (feats.num_frames() == 0)
    throw DataError("truncate: utterance '" + feats.utt_id + "' has no frames");
  FeatureMatrix out;
  out.utt_id = feats.utt_id;
  out.frames = feats.frames.topRows(std::min(k, feats.num_frames()));
  return out;
}

inline std::vector<Segment> clip_segments(const std::vector<Segment> &segments, int k) {
  std::vector<Segment> out;
  for (const auto &seg : segments) {
    if (seg.start_frame >= k) break;
    Segment clipped = seg;
    clipped.end_frame = std::min(seg.end_frame, k);
    out.push_back(std::move(clipped));
  }
  return out;
}

inline PosteriorSet truncate_posteriors(const PosteriorSet &post, int k) {
  PosteriorSet out = post;
  if (static_cast<int>(out.rows.size()) > k) out.rows.resize(k);
  return out;
}

// Applies truncation to the test side of a corpus; enrollment data, trials
// and the classmap are unchanged.
inline SynthCorpus truncate_test(const SynthCorpus &corpus, int k) {
  if (k < 1) throw UsageError("truncate_test: k must be >= 1");
  SynthCorpus out = corpus;
  for (auto &f : out.test_features) {
    f = truncate_features(f, k);
    out.alignments[f.utt_id] = clip_segments(corpus.alignments.at(f.utt_id), k);
  }
  for (auto &p : out.test_posteriors) p = truncate_posteriors(p, k);
  return out;
}

// ---------------------------------------------------------------------------
// utt2spk text format: `utt_id<TAB>speaker_id` lines.

inline void write_utt2spk_file(const std::string &path,
                               const std::map<std::string, std::string> &utt2spk) {
  std::ofstream os = open_output(path, /*binary=*/false);
  for (const auto &[utt, spk] : utt2spk) {
    check_identifier(utt, "utt_id");
    check_identifier(spk, "speaker_id");
    os << utt << '\t' << spk << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

inline std::map<std::string, std::string> read_utt2spk_file(const std::string &path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 2)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected `utt<TAB>speaker`");
    out[fields[0]] = fields[1];
  }
  if (out.empty()) throw DataError(path + ": empty utt2spk");
  return out;
}

// Writes all corpus artifacts plus a manifest listing the emitted paths and
// the generating spec.
inline void write_corpus(const SynthCorpus &corpus, const std::string &dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto path = [&](const std::string &name) { return (fs::path(dir) / name).string(); };

  write_feat_file(path("enroll.feat"), corpus.enroll_features);
  write_feat_file(path("test.feat"), corpus.test_features);
  write_alignment_file(path("alignments.ali"), corpus.alignments);
  write_posterior_file(path("enroll.post"), corpus.enroll_posteriors);
  write_posterior_file(path("test.post"), corpus.test_posteriors);
  write_classmap_file(path("classmap.txt"), corpus.truth_classmap);
  write_trial_file(path("trials.txt"), corpus.trials);
  write_utt2spk_file(path("utt2spk.txt"), corpus.utt2spk);

  std::ofstream os = open_output(path("manifest.txt"), /*binary=*/false);
  nlohmann::json spec_json = corpus.spec;
  os << "spec\t" << spec_json.dump() << '\n';
  for (const char *name : {"enroll.feat", "test.feat", "alignments.ali", "enroll.post",
                           "test.post", "classmap.txt", "trials.txt", "utt2spk.txt"})
    os << "file\t" << name << '\n';
  if (!os) throw DataError("failed writing corpus manifest");
}

}  // namespace susr

#endif  // SUSR_SYNTHCORPUS_HPP
