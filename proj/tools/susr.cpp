// tools/susr.cpp

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

// Command-line front end chaining the pipeline stages. Exit codes:
// 0 success, 1 usage error, 2 data/format error, 3 numerical failure.

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "susr/susr.hpp"

namespace {

using namespace susr;

std::map<std::string, const FeatureMatrix *> index_feats(
    const std::vector<FeatureMatrix> &feats) {
  std::map<std::string, const FeatureMatrix *> out;
  for (const auto &f : feats) out[f.utt_id] = &f;
  return out;
}

std::vector<FeatureMatrix> read_feat_files(const std::vector<std::string> &paths) {
  std::vector<FeatureMatrix> out;
  for (const auto &p : paths) {
    auto part = read_feat_file(p);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

ScoreSet score_trials_parallel(const TrialSet &trials, int jobs,
                               const std::function<double(const Trial &)> &fn) {
  auto values = parallel_map<double>(trials.trials.size(), jobs, [&](std::size_t i) {
    return fn(trials.trials[i]);
  });
  ScoreSet set;
  for (std::size_t i = 0; i < values.size(); i++) {
    const Trial &t = trials.trials[i];
    set.scores[{t.model_id, t.utt_id}] = values[i];
  }
  return set;
}

// --- features ---------------------------------------------------------------

struct FeaturesExtractOpts {
  std::string wav, pcm, utt_id, out;
  double rate = 16000.0;
  MfccConfig cfg;
  bool no_deltas = false;
};

void run_features_extract(const FeaturesExtractOpts &opts) {
  if (opts.wav.empty() == opts.pcm.empty())
    throw UsageError("features extract: give exactly one of --wav or --pcm");
  std::string utt_id = opts.utt_id;
  if (utt_id.empty())
    utt_id = std::filesystem::path(opts.wav.empty() ? opts.pcm : opts.wav)
                 .stem()
                 .string();
  PcmUtterance pcm = opts.wav.empty() ? read_pcm16(opts.pcm, opts.rate, utt_id)
                                      : read_wav(opts.wav, utt_id);
  MfccConfig cfg = opts.cfg;
  cfg.use_deltas = !opts.no_deltas;
  FeatureMatrix feats = extract_features(pcm, cfg);
  write_feat_file(opts.out, {feats});
  log_info("wrote " + std::to_string(feats.num_frames()) + " x " +
           std::to_string(feats.dim()) + " features for '" + utt_id + "' to " +
           opts.out);
}

// --- synth -------------------------------------------------------------------

struct SynthGenerateOpts {
  std::string config, out_dir;
  std::uint64_t seed = 0;
  bool have_seed = false;
};

void run_synth_generate(const SynthGenerateOpts &opts) {
  CorpusSpec spec;
  if (!opts.config.empty()) {
    std::ifstream is = open_input(opts.config, /*binary=*/false);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception &e) {
      throw DataError(opts.config + ": invalid JSON: " + std::string(e.what()));
    }
    if (!j.contains("seed") && !opts.have_seed)
      throw UsageError("synth generate: corpus spec must set an explicit seed");
    j.get_to(spec);
  } else if (!opts.have_seed) {
    throw UsageError("synth generate: --seed is required without --config");
  }
  if (opts.have_seed) spec.seed = opts.seed;
  SynthCorpus corpus = generate_corpus(spec);
  write_corpus(corpus, opts.out_dir);
  log_info("wrote corpus with " + std::to_string(corpus.speakers.size()) +
           " speakers, " + std::to_string(corpus.test_features.size()) +
           " test utterances to " + opts.out_dir);
}

// --- ubm / speaker / score ----------------------------------------------------

struct UbmTrainOpts {
  std::vector<std::string> feats;
  std::string out;
  int comps = 64;
  EmConfig em;
};

void run_ubm_train(const UbmTrainOpts &opts) {
  auto feats = read_feat_files(opts.feats);
  UbmTrainResult result = train_ubm_em(feats, opts.comps, opts.em);
  write_gmm_file(opts.out, result.gmm);
  std::string lls;
  for (double v : result.avg_log_likes) lls += " " + format_score(v);
  log_info("UBM trained; per-iteration avg log-likelihood:" + lls);
}

struct SpeakerEnrollOpts {
  std::string ubm, out, ubm_id = "ubm";
  std::vector<std::string> feats;
  double relevance = 16.0;
  int jobs = 1;
};

void run_speaker_enroll(const SpeakerEnrollOpts &opts) {
  DiagGmm ubm = read_gmm_file(opts.ubm);
  auto feats = read_feat_files(opts.feats);
  std::vector<SpeakerModel> models(feats.size());
  parallel_for(feats.size(), opts.jobs, [&](std::size_t i) {
    models[i] = map_adapt(ubm, feats[i], opts.relevance, feats[i].utt_id, opts.ubm_id);
  });
  write_speaker_file(opts.out, models);
  log_info("enrolled " + std::to_string(models.size()) + " speakers to " + opts.out);
}

struct ScoreGmmUbmOpts {
  std::string speakers, ubm, trials, out;
  std::vector<std::string> feats;
  int jobs = 1;
};

void run_score_gmm_ubm(const ScoreGmmUbmOpts &opts) {
  auto speakers = read_speaker_file(opts.speakers);
  std::map<std::string, const SpeakerModel *> by_id;
  for (const auto &s : speakers) by_id[s.speaker_id] = &s;
  DiagGmm ubm = read_gmm_file(opts.ubm);
  auto feats = read_feat_files(opts.feats);
  auto by_utt = index_feats(feats);
  TrialSet trials = read_trial_file(opts.trials);
  ScoreSet set = score_trials_parallel(trials, opts.jobs, [&](const Trial &t) {
    auto spk = by_id.find(t.model_id);
    if (spk == by_id.end()) throw DataError("no speaker model '" + t.model_id + "'");
    auto utt = by_utt.find(t.utt_id);
    if (utt == by_utt.end()) throw DataError("no test features '" + t.utt_id + "'");
    return gmm_ubm_score(*spk->second, ubm, *utt->second);
  });
  set.system_id = "gmm-ubm";
  write_score_file(opts.out, set);
  log_info("scored " + std::to_string(trials.trials.size()) + " trials to " + opts.out);
}

// --- subregion ------------------------------------------------------------------

struct SubregionClusterOpts {
  std::vector<std::string> feats;
  std::string align, out;
  int classes = 6;
  std::uint64_t seed = 0;
};

void run_subregion_cluster(const SubregionClusterOpts &opts) {
  auto feats = read_feat_files(opts.feats);
  AlignmentSet alignments = read_alignment_file(opts.align);
  auto embeddings = unit_embeddings(feats, alignments);
  UnitClassMap map = cluster_units(embeddings, opts.classes, opts.seed);
  write_classmap_file(opts.out, map);
  log_info("clustered " + std::to_string(embeddings.size()) + " units into " +
           std::to_string(opts.classes) + " classes; wrote " + opts.out);
}

struct SubregionTrainOpts {
  std::vector<std::string> feats;
  std::string align, classmap, out;
  int comps_per_class = 128;
  EmConfig em;
};

void run_subregion_train(const SubregionTrainOpts &opts) {
  auto feats = read_feat_files(opts.feats);
  AlignmentSet alignments = read_alignment_file(opts.align);
  UnitClassMap map = read_classmap_file(opts.classmap);
  SubregionUbmSet set =
      train_subregion_ubms(feats, alignments, map, opts.comps_per_class, opts.em);
  write_subregion_ubms_file(opts.out, set);
  log_info("trained " + std::to_string(set.num_classes()) + " subregion UBMs to " +
           opts.out);
}

struct SubregionEnrollOpts {
  std::string ubms, align, classmap, out;
  std::vector<std::string> feats;
  double relevance = 16.0;
  int jobs = 1;
};

void run_subregion_enroll(const SubregionEnrollOpts &opts) {
  SubregionUbmSet ubms = read_subregion_ubms_file(opts.ubms);
  auto feats = read_feat_files(opts.feats);
  AlignmentSet alignments = read_alignment_file(opts.align);
  UnitClassMap map = read_classmap_file(opts.classmap);
  std::vector<SubregionSpeakerModel> models(feats.size());
  parallel_for(feats.size(), opts.jobs, [&](std::size_t i) {
    models[i] = enroll_subregion_speaker(ubms, {feats[i]}, alignments, map,
                                         opts.relevance, feats[i].utt_id);
  });
  write_subregion_speaker_file(opts.out, models);
  log_info("enrolled " + std::to_string(models.size()) + " subregion speakers to " +
           opts.out);
}

struct SubregionScoreOpts {
  std::string speakers, ubms, align, classmap, trials, out, soft_posteriors;
  std::vector<std::string> feats;
  bool raw_segment_llr = false;
  int jobs = 1;
};

void run_subregion_score(const SubregionScoreOpts &opts) {
  auto speakers = read_subregion_speaker_file(opts.speakers);
  std::map<std::string, const SubregionSpeakerModel *> by_id;
  for (const auto &s : speakers) by_id[s.speaker_id] = &s;
  SubregionUbmSet ubms = read_subregion_ubms_file(opts.ubms);
  UnitClassMap map = read_classmap_file(opts.classmap);
  auto feats = read_feat_files(opts.feats);
  auto by_utt = index_feats(feats);
  TrialSet trials = read_trial_file(opts.trials);

  ScoreSet set;
  std::atomic<long> skipped{0};
  if (opts.soft_posteriors.empty()) {
    AlignmentSet alignments = read_alignment_file(opts.align);
    set = score_trials_parallel(trials, opts.jobs, [&](const Trial &t) {
      auto spk = by_id.find(t.model_id);
      if (spk == by_id.end()) throw DataError("no speaker model '" + t.model_id + "'");
      auto utt = by_utt.find(t.utt_id);
      if (utt == by_utt.end()) throw DataError("no test features '" + t.utt_id + "'");
      auto ali = alignments.find(t.utt_id);
      if (ali == alignments.end())
        throw DataError("no alignment for '" + t.utt_id + "'");
      SubregionScore s = score_subregion(*spk->second, ubms, *utt->second, ali->second,
                                         map, !opts.raw_segment_llr);
      skipped += s.skipped_segments;
      return s.score;
    });
  } else {
    auto posts = read_posterior_file(opts.soft_posteriors);
    std::map<std::string, Eigen::MatrixXd> dense;
    for (const auto &p : posts) dense[p.utt_id] = p.to_dense();
    set = score_trials_parallel(trials, opts.jobs, [&](const Trial &t) {
      auto spk = by_id.find(t.model_id);
      if (spk == by_id.end()) throw DataError("no speaker model '" + t.model_id + "'");
      auto utt = by_utt.find(t.utt_id);
      if (utt == by_utt.end()) throw DataError("no test features '" + t.utt_id + "'");
      auto post = dense.find(t.utt_id);
      if (post == dense.end()) throw DataError("no posteriors for '" + t.utt_id + "'");
      return score_subregion_soft(*spk->second, ubms, *utt->second, post->second);
    });
  }
  set.system_id = "sbm";
  write_score_file(opts.out, set);
  if (skipped > 0)
    log_info("skipped " + std::to_string(skipped.load()) +
             " segments with unmapped units");
  log_info("scored " + std::to_string(trials.trials.size()) + " trials to " + opts.out);
}

// --- ivector ----------------------------------------------------------------------

struct IvectorStatsOpts {
  std::string ubm, posteriors, out;
  std::vector<std::string> feats;
  int jobs = 1;
};

void run_ivector_stats(const IvectorStatsOpts &opts) {
  DiagGmm ubm = read_gmm_file(opts.ubm);
  auto feats = read_feat_files(opts.feats);
  std::vector<BaumWelchStats> stats(feats.size());
  if (opts.posteriors.empty()) {
    parallel_for(feats.size(), opts.jobs, [&](std::size_t i) {
      stats[i] = accumulate_stats(ubm, feats[i]);
    });
  } else {
    auto posts = read_posterior_file(opts.posteriors);
    std::map<std::string, const PosteriorSet *> by_utt;
    for (const auto &p : posts) by_utt[p.utt_id] = &p;
    parallel_for(feats.size(), opts.jobs, [&](std::size_t i) {
      auto it = by_utt.find(feats[i].utt_id);
      if (it == by_utt.end())
        throw DataError("no posteriors for '" + feats[i].utt_id + "'");
      stats[i] = accumulate_stats_external(*it->second, ubm, feats[i]);
    });
  }
  write_stats_file(opts.out, stats);
  log_info("accumulated stats for " + std::to_string(stats.size()) +
           " utterances to " + opts.out);
}

struct IvectorTrainTOpts {
  std::string ubm, stats, out;
  int rank = 400;
  int iters = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
};

void run_ivector_train_t(const IvectorTrainTOpts &opts) {
  DiagGmm ubm = read_gmm_file(opts.ubm);
  auto stats = read_stats_file(opts.stats);
  TMatrixTrainResult result =
      train_t_matrix(stats, ubm, opts.rank, opts.iters, opts.seed, opts.jobs);
  write_extractor_file(opts.out, result.extractor);
  std::string objs;
  for (double v : result.objectives) objs += " " + format_score(v);
  log_info("T-matrix trained; per-iteration objective:" + objs);
}

struct IvectorExtractOpts {
  std::string extractor, stats, out;
  int jobs = 1;
};

void run_ivector_extract(const IvectorExtractOpts &opts) {
  IVectorExtractor ext = read_extractor_file(opts.extractor);
  auto stats = read_stats_file(opts.stats);
  std::vector<LabeledIvector> ivecs(stats.size());
  parallel_for(stats.size(), opts.jobs, [&](std::size_t i) {
    ivecs[i] = {stats[i].utt_id, extract_ivector(ext, stats[i])};
  });
  write_ivector_file(opts.out, ivecs);
  log_info("extracted " + std::to_string(ivecs.size()) + " i-vectors to " + opts.out);
}

struct IvectorScoreCosineOpts {
  std::string enroll, test, trials, out;
  int jobs = 1;
};

void run_ivector_score_cosine(const IvectorScoreCosineOpts &opts) {
  auto enroll = read_ivector_file(opts.enroll);
  auto test = read_ivector_file(opts.test);
  std::map<std::string, const Eigen::VectorXd *> by_model, by_utt;
  for (const auto &iv : enroll) by_model[iv.utt_id] = &iv.vec;
  for (const auto &iv : test) by_utt[iv.utt_id] = &iv.vec;
  TrialSet trials = read_trial_file(opts.trials);
  ScoreSet set = score_trials_parallel(trials, opts.jobs, [&](const Trial &t) {
    auto e = by_model.find(t.model_id);
    if (e == by_model.end()) throw DataError("no enrollment i-vector '" + t.model_id + "'");
    auto u = by_utt.find(t.utt_id);
    if (u == by_utt.end()) throw DataError("no test i-vector '" + t.utt_id + "'");
    return cosine_score(*e->second, *u->second);
  });
  set.system_id = "ivector-cosine";
  write_score_file(opts.out, set);
  log_info("scored " + std::to_string(trials.trials.size()) + " trials to " + opts.out);
}

// --- plda -----------------------------------------------------------------------

struct PldaTrainOpts {
  std::string ivectors, utt2spk, out;
  int iters = 10;
  bool no_length_norm = false;
};

void run_plda_train(const PldaTrainOpts &opts) {
  auto ivecs = read_ivector_file(opts.ivectors);
  auto utt2spk = read_utt2spk_file(opts.utt2spk);
  std::vector<Eigen::VectorXd> vecs;
  std::vector<std::string> labels;
  for (const auto &iv : ivecs) {
    auto it = utt2spk.find(iv.utt_id);
    if (it == utt2spk.end())
      throw DataError("utt2spk has no speaker for '" + iv.utt_id + "'");
    vecs.push_back(iv.vec);
    labels.push_back(it->second);
  }
  PldaTrainResult result = train_plda(vecs, labels, opts.iters, !opts.no_length_norm);
  write_plda_file(opts.out, result.model);
  std::string objs;
  for (double v : result.objectives) objs += " " + format_score(v);
  log_info("PLDA trained; per-iteration objective:" + objs);
}

struct PldaScoreOpts {
  std::string plda, enroll, test, trials, out;
  int jobs = 1;
};

void run_plda_score(const PldaScoreOpts &opts) {
  PldaModel model = read_plda_file(opts.plda);
  PldaScorer scorer(model);
  auto enroll = read_ivector_file(opts.enroll);
  auto test = read_ivector_file(opts.test);
  std::map<std::string, Eigen::VectorXd> by_model, by_utt;
  for (const auto &iv : enroll) by_model[iv.utt_id] = model.transform(iv.vec);
  for (const auto &iv : test) by_utt[iv.utt_id] = model.transform(iv.vec);
  TrialSet trials = read_trial_file(opts.trials);
  ScoreSet set = score_trials_parallel(trials, opts.jobs, [&](const Trial &t) {
    auto e = by_model.find(t.model_id);
    if (e == by_model.end()) throw DataError("no enrollment i-vector '" + t.model_id + "'");
    auto u = by_utt.find(t.utt_id);
    if (u == by_utt.end()) throw DataError("no test i-vector '" + t.utt_id + "'");
    return scorer.score(e->second, u->second);
  });
  set.system_id = "ivector-plda";
  write_score_file(opts.out, set);
  log_info("scored " + std::to_string(trials.trials.size()) + " trials to " + opts.out);
}

// --- fusion / eval ------------------------------------------------------------------

struct FuseOpts {
  std::string a, b, out;
  double alpha = 0.5;
  bool normalize = false;
};

void run_fuse(const FuseOpts &opts) {
  ScoreSet a = read_score_file(opts.a, "a");
  ScoreSet b = read_score_file(opts.b, "b");
  ScoreSet fused = fuse_scores(a, b, opts.alpha, opts.normalize);
  write_score_file(opts.out, fused);
  log_info("fused scores at alpha " + format_score(opts.alpha) + " to " + opts.out);
}

struct SweepAlphaOpts {
  std::string a, b, trials, out;
  double step = 0.01;
  bool normalize = false;
};

void run_sweep_alpha(const SweepAlphaOpts &opts) {
  ScoreSet a = read_score_file(opts.a, "a");
  ScoreSet b = read_score_file(opts.b, "b");
  TrialSet trials = read_trial_file(opts.trials);
  SweepResult sweep = sweep_alpha(a, b, trials, opts.step, opts.normalize);
  if (!opts.out.empty()) write_sweep_csv(opts.out, sweep);
  std::printf("best alpha %.4f eer%% %.4f\n", sweep.best_alpha, 100.0 * sweep.best_eer);
}

struct EvalOpts {
  std::string trials, scores, out;
  int points = 100;
};

void run_eval_eer(const EvalOpts &opts) {
  TrialSet trials = read_trial_file(opts.trials);
  ScoreSet scores = read_score_file(opts.scores);
  EerResult result = compute_eer(trials, scores);
  std::printf("eer%% %.4f threshold %s\n", 100.0 * result.eer,
              format_score(result.threshold).c_str());
}

void run_eval_det(const EvalOpts &opts) {
  TrialSet trials = read_trial_file(opts.trials);
  ScoreSet scores = read_score_file(opts.scores);
  DetCurve curve = det_curve(trials, scores, opts.points);
  write_det_csv(opts.out, curve);
  log_info("wrote " + std::to_string(curve.points.size()) + " DET points to " +
           opts.out);
}

// --- demo ------------------------------------------------------------------------

struct DemoOpts {
  std::string config, out_dir;
  int jobs = 0;  // 0: take from config
};

void run_demo_cmd(const DemoOpts &opts) {
  DemoConfig config = load_demo_config(opts.config);
  if (opts.jobs > 0) config.jobs = opts.jobs;
  DemoResult result = run_demo(config, opts.out_dir);
  std::printf("system          eer_long(%%)  eer_short(%%)\n");
  for (const char *system : {"gmm-ubm", "sbm", "ivector-plda", "fused"})
    std::printf("%-15s %11.2f %13.2f\n", system,
                100.0 * result.eer.at(system).at("long"),
                100.0 * result.eer.at(system).at("short"));
  std::printf("fusion alpha: long %.2f, short %.2f\n",
              result.best_alpha.at("long"), result.best_alpha.at("short"));
}

void add_em_options(CLI::App *cmd, EmConfig *em, bool with_seed = true) {
  cmd->add_option("--iters", em->num_iters, "EM iterations");
  if (with_seed)
    cmd->add_option("--seed", em->seed, "random seed")->required();
  cmd->add_option("--variance-floor-fraction", em->variance_floor_fraction,
                  "variance floor as a fraction of the global variance");
  cmd->add_option("--min-occupancy", em->min_component_occupancy,
                  "re-seed components below this soft frame count");
  cmd->add_option("--jobs", em->jobs, "worker threads");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"susr: phonetic-aware short-utterance speaker verification toolkit"};
  app.require_subcommand(1);

  // features extract
  auto *features = app.add_subcommand("features", "feature extraction");
  features->require_subcommand(1);
  {
    auto opts = std::make_shared<FeaturesExtractOpts>();
    auto *cmd = features->add_subcommand("extract",
                                         "PCM/WAV -> voiced MFCC+deltas FEAT file");
    cmd->add_option("--wav", opts->wav, "mono 16-bit PCM WAV input");
    cmd->add_option("--pcm", opts->pcm, "raw 16-bit little-endian PCM input");
    cmd->add_option("--rate", opts->rate, "sample rate for --pcm");
    cmd->add_option("--utt", opts->utt_id, "utterance id (default: file stem)");
    cmd->add_option("--out", opts->out, "output FEAT file")->required();
    cmd->add_option("--frame-len-ms", opts->cfg.frame_len_ms, "frame length, ms");
    cmd->add_option("--frame-shift-ms", opts->cfg.frame_shift_ms, "frame shift, ms");
    cmd->add_option("--num-static", opts->cfg.num_static, "static cepstra (incl. C0)");
    cmd->add_option("--mel-filters", opts->cfg.mel_filters, "mel filterbank size");
    cmd->add_flag("--cmn", opts->cfg.cepstral_mean_norm, "per-utterance cepstral mean norm");
    cmd->add_flag("--no-deltas", opts->no_deltas, "write static features only");
    cmd->add_option("--vad-offset-db", opts->cfg.vad_offset_db,
                    "VAD threshold below utterance max, dB");
    cmd->add_option("--vad-energy-floor", opts->cfg.vad_energy_floor,
                    "absolute VAD energy floor");
    cmd->callback([opts]() { run_features_extract(*opts); });
  }

  // synth generate
  auto *synth = app.add_subcommand("synth", "synthetic corpus generation");
  synth->require_subcommand(1);
  {
    auto opts = std::make_shared<SynthGenerateOpts>();
    auto *cmd = synth->add_subcommand("generate", "generate a phone-structured corpus");
    cmd->add_option("--config", opts->config, "corpus spec JSON file");
    auto *seed = cmd->add_option("--seed", opts->seed, "random seed (overrides config)");
    cmd->add_option("--out-dir", opts->out_dir, "output directory")->required();
    cmd->callback([opts, seed]() {
      opts->have_seed = seed->count() > 0;
      run_synth_generate(*opts);
    });
  }

  // ubm train
  auto *ubm = app.add_subcommand("ubm", "pooled UBM training");
  ubm->require_subcommand(1);
  {
    auto opts = std::make_shared<UbmTrainOpts>();
    auto *cmd = ubm->add_subcommand("train", "train a diagonal GMM-UBM with EM");
    cmd->add_option("--feats", opts->feats, "FEAT file(s)")->required();
    cmd->add_option("--comps", opts->comps, "Gaussian components");
    cmd->add_option("--out", opts->out, "output GMMM file")->required();
    add_em_options(cmd, &opts->em);
    cmd->callback([opts]() { run_ubm_train(*opts); });
  }

  // speaker enroll
  auto *speaker = app.add_subcommand("speaker", "speaker enrollment");
  speaker->require_subcommand(1);
  {
    auto opts = std::make_shared<SpeakerEnrollOpts>();
    auto *cmd = speaker->add_subcommand(
        "enroll", "MAP-adapt one speaker model per FEAT record (utt_id = speaker)");
    cmd->add_option("--ubm", opts->ubm, "UBM GMMM file")->required();
    cmd->add_option("--feats", opts->feats, "enrollment FEAT file(s)")->required();
    cmd->add_option("--relevance", opts->relevance, "MAP relevance factor");
    cmd->add_option("--ubm-id", opts->ubm_id, "ubm id recorded in speaker models");
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output speaker model file")->required();
    cmd->callback([opts]() { run_speaker_enroll(*opts); });
  }

  // score gmm-ubm
  auto *score = app.add_subcommand("score", "baseline scoring");
  score->require_subcommand(1);
  {
    auto opts = std::make_shared<ScoreGmmUbmOpts>();
    auto *cmd = score->add_subcommand("gmm-ubm", "per-frame average LLR scoring");
    cmd->add_option("--speakers", opts->speakers, "speaker model file")->required();
    cmd->add_option("--ubm", opts->ubm, "UBM GMMM file")->required();
    cmd->add_option("--feats", opts->feats, "test FEAT file(s)")->required();
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output score file")->required();
    cmd->callback([opts]() { run_score_gmm_ubm(*opts); });
  }

  // subregion
  auto *subregion = app.add_subcommand("subregion", "phonetic subregion system");
  subregion->require_subcommand(1);
  {
    auto opts = std::make_shared<SubregionClusterOpts>();
    auto *cmd = subregion->add_subcommand("cluster", "k-means unit clustering");
    cmd->add_option("--feats", opts->feats, "FEAT file(s)")->required();
    cmd->add_option("--align", opts->align, "alignment file")->required();
    cmd->add_option("--classes", opts->classes, "number of unit classes");
    cmd->add_option("--seed", opts->seed, "random seed")->required();
    cmd->add_option("--out", opts->out, "output classmap file")->required();
    cmd->callback([opts]() { run_subregion_cluster(*opts); });
  }
  {
    auto opts = std::make_shared<SubregionTrainOpts>();
    auto *cmd = subregion->add_subcommand("train", "train per-class subregion UBMs");
    cmd->add_option("--feats", opts->feats, "FEAT file(s)")->required();
    cmd->add_option("--align", opts->align, "alignment file")->required();
    cmd->add_option("--classmap", opts->classmap, "classmap file")->required();
    cmd->add_option("--comps-per-class", opts->comps_per_class,
                    "Gaussian components per class");
    cmd->add_option("--out", opts->out, "output subregion UBM file")->required();
    add_em_options(cmd, &opts->em);
    cmd->callback([opts]() { run_subregion_train(*opts); });
  }
  {
    auto opts = std::make_shared<SubregionEnrollOpts>();
    auto *cmd = subregion->add_subcommand(
        "enroll", "per-class MAP adaptation (one speaker per FEAT record)");
    cmd->add_option("--ubms", opts->ubms, "subregion UBM file")->required();
    cmd->add_option("--feats", opts->feats, "enrollment FEAT file(s)")->required();
    cmd->add_option("--align", opts->align, "alignment file")->required();
    cmd->add_option("--classmap", opts->classmap, "classmap file")->required();
    cmd->add_option("--relevance", opts->relevance, "MAP relevance factor");
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output subregion speaker file")->required();
    cmd->callback([opts]() { run_subregion_enroll(*opts); });
  }
  {
    auto opts = std::make_shared<SubregionScoreOpts>();
    auto *cmd = subregion->add_subcommand(
        "score", "averaged per-segment LLR scoring (or soft posterior scoring)");
    cmd->add_option("--speakers", opts->speakers, "subregion speaker file")->required();
    cmd->add_option("--ubms", opts->ubms, "subregion UBM file")->required();
    cmd->add_option("--feats", opts->feats, "test FEAT file(s)")->required();
    cmd->add_option("--align", opts->align, "alignment file (hard scoring)");
    cmd->add_option("--soft-posteriors", opts->soft_posteriors,
                    "per-frame class posterior file (soft scoring)");
    cmd->add_option("--classmap", opts->classmap, "classmap file")->required();
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_flag("--raw-segment-llr", opts->raw_segment_llr,
                  "skip per-segment length normalization");
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output score file")->required();
    cmd->callback([opts]() {
      if (opts->align.empty() && opts->soft_posteriors.empty())
        throw UsageError("subregion score: need --align or --soft-posteriors");
      run_subregion_score(*opts);
    });
  }

  // ivector
  auto *ivector = app.add_subcommand("ivector", "i-vector system");
  ivector->require_subcommand(1);
  {
    auto opts = std::make_shared<IvectorStatsOpts>();
    auto *cmd = ivector->add_subcommand("stats", "accumulate Baum-Welch statistics");
    cmd->add_option("--ubm", opts->ubm, "UBM GMMM file")->required();
    cmd->add_option("--feats", opts->feats, "FEAT file(s)")->required();
    cmd->add_option("--posteriors", opts->posteriors,
                    "external posterior file (default: UBM posteriors)");
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output stats file")->required();
    cmd->callback([opts]() { run_ivector_stats(*opts); });
  }
  {
    auto opts = std::make_shared<IvectorTrainTOpts>();
    auto *cmd = ivector->add_subcommand("train-t", "EM training of the T-matrix");
    cmd->add_option("--ubm", opts->ubm, "UBM GMMM file")->required();
    cmd->add_option("--stats", opts->stats, "stats file")->required();
    cmd->add_option("--rank", opts->rank, "i-vector dimension");
    cmd->add_option("--iters", opts->iters, "EM iterations");
    cmd->add_option("--seed", opts->seed, "random seed")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output extractor file")->required();
    cmd->callback([opts]() { run_ivector_train_t(*opts); });
  }
  {
    auto opts = std::make_shared<IvectorExtractOpts>();
    auto *cmd = ivector->add_subcommand("extract", "extract i-vectors from stats");
    cmd->add_option("--extractor", opts->extractor, "extractor file")->required();
    cmd->add_option("--stats", opts->stats, "stats file")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output i-vector file")->required();
    cmd->callback([opts]() { run_ivector_extract(*opts); });
  }
  {
    auto opts = std::make_shared<IvectorScoreCosineOpts>();
    auto *cmd = ivector->add_subcommand("score-cosine", "cosine scoring of i-vectors");
    cmd->add_option("--enroll", opts->enroll, "enrollment i-vector file")->required();
    cmd->add_option("--test", opts->test, "test i-vector file")->required();
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output score file")->required();
    cmd->callback([opts]() { run_ivector_score_cosine(*opts); });
  }

  // plda
  auto *plda = app.add_subcommand("plda", "two-covariance PLDA");
  plda->require_subcommand(1);
  {
    auto opts = std::make_shared<PldaTrainOpts>();
    auto *cmd = plda->add_subcommand("train", "EM training on labeled i-vectors");
    cmd->add_option("--ivectors", opts->ivectors, "training i-vector file")->required();
    cmd->add_option("--utt2spk", opts->utt2spk, "utt2spk label file")->required();
    cmd->add_option("--iters", opts->iters, "EM iterations");
    cmd->add_flag("--no-length-norm", opts->no_length_norm,
                  "skip i-vector length normalization");
    cmd->add_option("--out", opts->out, "output PLDA model file")->required();
    cmd->callback([opts]() { run_plda_train(*opts); });
  }
  {
    auto opts = std::make_shared<PldaScoreOpts>();
    auto *cmd = plda->add_subcommand("score", "PLDA LLR scoring");
    cmd->add_option("--plda", opts->plda, "PLDA model file")->required();
    cmd->add_option("--enroll", opts->enroll, "enrollment i-vector file")->required();
    cmd->add_option("--test", opts->test, "test i-vector file")->required();
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads");
    cmd->add_option("--out", opts->out, "output score file")->required();
    cmd->callback([opts]() { run_plda_score(*opts); });
  }

  // fuse / sweep-alpha
  {
    auto opts = std::make_shared<FuseOpts>();
    auto *cmd = app.add_subcommand("fuse", "linear score fusion alpha*a + (1-alpha)*b");
    cmd->add_option("--a", opts->a, "first score file")->required();
    cmd->add_option("--b", opts->b, "second score file")->required();
    cmd->add_option("--alpha", opts->alpha, "interpolation factor in [0,1]")->required();
    cmd->add_flag("--normalize", opts->normalize, "z-normalize each set first");
    cmd->add_option("--out", opts->out, "output score file")->required();
    cmd->callback([opts]() { run_fuse(*opts); });
  }
  {
    auto opts = std::make_shared<SweepAlphaOpts>();
    auto *cmd = app.add_subcommand("sweep-alpha", "EER sweep over the fusion grid");
    cmd->add_option("--a", opts->a, "first score file")->required();
    cmd->add_option("--b", opts->b, "second score file")->required();
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--step", opts->step, "grid step in (0,1]");
    cmd->add_flag("--normalize", opts->normalize, "z-normalize each set first");
    cmd->add_option("--out", opts->out, "output CSV (alpha,eer)");
    cmd->callback([opts]() { run_sweep_alpha(*opts); });
  }

  // eval
  auto *eval = app.add_subcommand("eval", "metrics");
  eval->require_subcommand(1);
  {
    auto opts = std::make_shared<EvalOpts>();
    auto *cmd = eval->add_subcommand("eer", "equal error rate");
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--scores", opts->scores, "score file")->required();
    cmd->callback([opts]() { run_eval_eer(*opts); });
  }
  {
    auto opts = std::make_shared<EvalOpts>();
    auto *cmd = eval->add_subcommand("det", "DET curve CSV");
    cmd->add_option("--trials", opts->trials, "trial list")->required();
    cmd->add_option("--scores", opts->scores, "score file")->required();
    cmd->add_option("--points", opts->points, "points to keep");
    cmd->add_option("--out", opts->out, "output CSV file")->required();
    cmd->callback([opts]() { run_eval_det(*opts); });
  }

  // demo
  {
    auto opts = std::make_shared<DemoOpts>();
    auto *cmd = app.add_subcommand(
        "demo", "synthetic corpus -> all systems -> fused EER table");
    cmd->add_option("--config", opts->config, "demo config JSON")->required();
    cmd->add_option("--out-dir", opts->out_dir, "output directory")->required();
    cmd->add_option("--jobs", opts->jobs, "worker threads (overrides config)");
    cmd->callback([opts]() { run_demo_cmd(*opts); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  } catch (const Error &e) {
    std::cerr << "susr: error: " << e.what() << std::endl;
    return e.exit_code();
  } catch (const std::exception &e) {
    std::cerr << "susr: internal error: " << e.what() << std::endl;
    return 3;
  }
  return 0;
}
