// susr/pipeline.hpp

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

#ifndef SUSR_PIPELINE_HPP
#define SUSR_PIPELINE_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "susr/eval.hpp"
#include "susr/gmm.hpp"
#include "susr/ivector.hpp"
#include "susr/parallel.hpp"
#include "susr/plda.hpp"
#include "susr/subregion.hpp"
#include "susr/synthcorpus.hpp"

namespace susr {

// End-to-end demo configuration: one background corpus for model training,
// one evaluation corpus for enrollment/test, and the system hyperparameters.
// Both corpora are forced onto the same seed so they share unit geometry.
struct DemoConfig {
  std::uint64_t seed = 42;
  int jobs = 1;
  CorpusSpec eval_corpus;
  CorpusSpec background_corpus;
  int short_test_frames = 50;
  int ubm_components = 64;
  int em_iters = 6;
  double relevance = 16.0;
  int subregion_classes = 2;
  int subregion_comps_per_class = 32;
  int ivector_rank = 8;
  int tmatrix_iters = 5;
  int plda_iters = 8;
  double sweep_step = 0.01;
  bool fusion_normalize = false;

  DemoConfig() {
    eval_corpus.num_speakers = 20;
    eval_corpus.num_units = 10;
    eval_corpus.num_classes = 2;
    eval_corpus.enroll_frames = 3000;
    eval_corpus.test_utt_frames = 500;
    eval_corpus.test_utts_per_speaker = 6;
    // Weak per-frame speaker evidence so that test length matters; the
    // frame noise is unit variance.
    eval_corpus.speaker_shift_scale = 0.12;
    eval_corpus.speaker_prefix = "spk";
    eval_corpus.stream_tag = "eval";

    background_corpus.num_speakers = 16;
    background_corpus.num_units = 10;
    background_corpus.num_classes = 2;
    background_corpus.enroll_frames = 400;
    background_corpus.test_utt_frames = 500;
    background_corpus.test_utts_per_speaker = 8;
    background_corpus.speaker_prefix = "bg";
    background_corpus.stream_tag = "bg";
  }

  void harmonize() {
    eval_corpus.seed = seed;
    background_corpus.seed = seed;
    eval_corpus.speaker_prefix = "spk";
    eval_corpus.stream_tag = "eval";
    background_corpus.speaker_prefix = "bg";
    background_corpus.stream_tag = "bg";
    // Shared unit geometry requires matching unit/class layouts.
    background_corpus.num_units = eval_corpus.num_units;
    background_corpus.num_classes = eval_corpus.num_classes;
    background_corpus.dim = eval_corpus.dim;
    background_corpus.class_separation_scale = eval_corpus.class_separation_scale;
    background_corpus.speaker_shift_scale = eval_corpus.speaker_shift_scale;
  }

  void validate() const {
    eval_corpus.validate();
    background_corpus.validate();
    if (short_test_frames < 1) throw UsageError("short_test_frames must be >= 1");
    if (ubm_components < 1 || subregion_comps_per_class < 1)
      throw UsageError("component counts must be >= 1");
    if (subregion_classes < 1) throw UsageError("subregion_classes must be >= 1");
    if (ivector_rank < 1) throw UsageError("ivector_rank must be >= 1");
    if (em_iters < 1 || tmatrix_iters < 1 || plda_iters < 1)
      throw UsageError("iteration counts must be >= 1");
  }
};

// The seed is mandatory in config files; everything else has defaults.
inline DemoConfig load_demo_config(const std::string &path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(path + ": invalid JSON: " + e.what());
  }
  if (!j.contains("seed"))
    throw UsageError(path + ": config must set an explicit seed");
  DemoConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.jobs = j.value("jobs", cfg.jobs);
  if (j.contains("eval_corpus")) j.at("eval_corpus").get_to(cfg.eval_corpus);
  if (j.contains("background_corpus"))
    j.at("background_corpus").get_to(cfg.background_corpus);
  cfg.short_test_frames = j.value("short_test_frames", cfg.short_test_frames);
  cfg.ubm_components = j.value("ubm_components", cfg.ubm_components);
  cfg.em_iters = j.value("em_iters", cfg.em_iters);
  cfg.relevance = j.value("relevance", cfg.relevance);
  cfg.subregion_classes = j.value("subregion_classes", cfg.subregion_classes);
  cfg.subregion_comps_per_class =
      j.value("subregion_comps_per_class", cfg.subregion_comps_per_class);
  cfg.ivector_rank = j.value("ivector_rank", cfg.ivector_rank);
  cfg.tmatrix_iters = j.value("tmatrix_iters", cfg.tmatrix_iters);
  cfg.plda_iters = j.value("plda_iters", cfg.plda_iters);
  cfg.sweep_step = j.value("sweep_step", cfg.sweep_step);
  cfg.fusion_normalize = j.value("fusion_normalize", cfg.fusion_normalize);
  cfg.harmonize();
  cfg.validate();
  return cfg;
}

struct DemoResult {
  // system -> condition ("long"/"short") -> EER fraction.
  std::map<std::string, std::map<std::string, double>> eer;
  std::map<std::string, SweepResult> sweeps;      // per condition
  std::map<std::string, double> best_alpha;       // per condition
  // system -> condition -> score file path.
  std::map<std::string, std::map<std::string, std::string>> score_files;
  TrialSet trials;
};

namespace detail {

struct TestCondition {
  std::string name;
  std::vector<FeatureMatrix> features;
  AlignmentSet alignments;  // full set with test entries clipped
  std::vector<PosteriorSet> posteriors;
};

}  // namespace detail

// Runs the full pipeline: synthetic corpora, pooled GMM-UBM baseline,
// subregion system on hard alignments, posterior-driven i-vector/PLDA
// system, and their score-level fusion, at a long and a short test length.
inline DemoResult run_demo(const DemoConfig &config_in, const std::string &out_dir) {
  DemoConfig config = config_in;
  config.harmonize();
  config.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "models");
  fs::create_directories(fs::path(out_dir) / "scores");
  auto out_path = [&](const std::string &rel) {
    return (fs::path(out_dir) / rel).string();
  };
  const int jobs = config.jobs;

  log_info("demo: generating corpora (seed " + std::to_string(config.seed) + ")");
  SynthCorpus background = generate_corpus(config.background_corpus);
  SynthCorpus eval_corpus = generate_corpus(config.eval_corpus);
  write_corpus(background, out_path("corpus/background"));
  write_corpus(eval_corpus, out_path("corpus/eval"));
  write_trial_file(out_path("trials.txt"), eval_corpus.trials);

  std::vector<detail::TestCondition> conditions;
  conditions.push_back({"long", eval_corpus.test_features, eval_corpus.alignments,
                        eval_corpus.test_posteriors});
  SynthCorpus short_corpus = truncate_test(eval_corpus, config.short_test_frames);
  conditions.push_back({"short", short_corpus.test_features, short_corpus.alignments,
                        short_corpus.test_posteriors});

  std::vector<FeatureMatrix> bg_all = background.enroll_features;
  bg_all.insert(bg_all.end(), background.test_features.begin(),
                background.test_features.end());

  EmConfig em;
  em.num_iters = config.em_iters;
  em.seed = config.seed;
  em.jobs = jobs;

  DemoResult result;
  result.trials = eval_corpus.trials;

  // --- Pooled GMM-UBM baseline -------------------------------------------
  log_info("demo: training pooled UBM (" + std::to_string(config.ubm_components) +
           " components)");
  DiagGmm ubm = train_ubm_em(bg_all, config.ubm_components, em).gmm;
  write_gmm_file(out_path("models/ubm.gmm"), ubm);

  std::map<std::string, SpeakerModel> speakers;
  {
    std::vector<SpeakerModel> models(eval_corpus.enroll_features.size());
    parallel_for(eval_corpus.enroll_features.size(), jobs, [&](std::size_t i) {
      const FeatureMatrix &f = eval_corpus.enroll_features[i];
      models[i] = map_adapt(ubm, f, config.relevance, f.utt_id);
    });
    write_speaker_file(out_path("models/speakers.gmm"), models);
    for (auto &m : models) speakers.emplace(m.speaker_id, std::move(m));
  }

  auto score_trials = [&](auto &&scorer) {
    ScoreSet set;
    auto values = parallel_map<double>(
        eval_corpus.trials.trials.size(), jobs, [&](std::size_t i) {
          const Trial &t = eval_corpus.trials.trials[i];
          return scorer(t.model_id, t.utt_id);
        });
    for (std::size_t i = 0; i < values.size(); i++) {
      const Trial &t = eval_corpus.trials.trials[i];
      set.scores[{t.model_id, t.utt_id}] = values[i];
    }
    return set;
  };

  std::map<std::string, ScoreSet> sbm_scores, plda_scores;
  for (const auto &cond : conditions) {
    std::map<std::string, const FeatureMatrix *> test_by_utt;
    for (const auto &f : cond.features) test_by_utt[f.utt_id] = &f;
    ScoreSet set = score_trials([&](const std::string &model, const std::string &utt) {
      return gmm_ubm_score(speakers.at(model), ubm, *test_by_utt.at(utt));
    });
    set.system_id = "gmm-ubm";
    std::string path = out_path("scores/gmm_ubm_" + cond.name + ".txt");
    write_score_file(path, set);
    result.score_files["gmm-ubm"][cond.name] = path;
    result.eer["gmm-ubm"][cond.name] = compute_eer(eval_corpus.trials, set).eer;
  }

  // --- Subregion system (hard alignments) --------------------------------
  log_info("demo: training subregion system (" +
           std::to_string(config.subregion_classes) + " classes)");
  auto embeddings = unit_embeddings(bg_all, background.alignments);
  UnitClassMap classmap = cluster_units(embeddings, config.subregion_classes, config.seed);
  write_classmap_file(out_path("models/classmap.txt"), classmap);
  SubregionUbmSet sub_ubms = train_subregion_ubms(
      bg_all, background.alignments, classmap, config.subregion_comps_per_class, em);
  write_subregion_ubms_file(out_path("models/subregion_ubms.gmm"), sub_ubms);

  std::map<std::string, SubregionSpeakerModel> sub_speakers;
  {
    std::vector<SubregionSpeakerModel> models(eval_corpus.enroll_features.size());
    parallel_for(eval_corpus.enroll_features.size(), jobs, [&](std::size_t i) {
      const FeatureMatrix &f = eval_corpus.enroll_features[i];
      models[i] = enroll_subregion_speaker(sub_ubms, {f}, eval_corpus.alignments,
                                           classmap, config.relevance, f.utt_id);
    });
    write_subregion_speaker_file(out_path("models/subregion_speakers.gmm"), models);
    for (auto &m : models) sub_speakers.emplace(m.speaker_id, std::move(m));
  }

  for (const auto &cond : conditions) {
    std::map<std::string, const FeatureMatrix *> test_by_utt;
    for (const auto &f : cond.features) test_by_utt[f.utt_id] = &f;
    ScoreSet set = score_trials([&](const std::string &model, const std::string &utt) {
      return score_subregion(sub_speakers.at(model), sub_ubms, *test_by_utt.at(utt),
                             cond.alignments.at(utt), classmap)
          .score;
    });
    set.system_id = "sbm";
    std::string path = out_path("scores/sbm_" + cond.name + ".txt");
    write_score_file(path, set);
    result.score_files["sbm"][cond.name] = path;
    result.eer["sbm"][cond.name] = compute_eer(eval_corpus.trials, set).eer;
    sbm_scores[cond.name] = std::move(set);
  }

  // --- Posterior-driven i-vector / PLDA system ----------------------------
  log_info("demo: training i-vector system (rank " +
           std::to_string(config.ivector_rank) + ")");
  std::vector<PosteriorSet> bg_posts = background.enroll_posteriors;
  bg_posts.insert(bg_posts.end(), background.test_posteriors.begin(),
                  background.test_posteriors.end());
  DiagGmm sup_ubm = train_supervised_ubm(bg_all, bg_posts,
                                         config.background_corpus.num_classes);
  write_gmm_file(out_path("models/supervised_ubm.gmm"), sup_ubm);

  std::map<std::string, const PosteriorSet *> bg_post_by_utt;
  for (const auto &p : bg_posts) bg_post_by_utt[p.utt_id] = &p;
  auto bg_stats = parallel_map<BaumWelchStats>(bg_all.size(), jobs, [&](std::size_t i) {
    return accumulate_stats_external(*bg_post_by_utt.at(bg_all[i].utt_id), sup_ubm,
                                     bg_all[i]);
  });
  TMatrixTrainResult tmat = train_t_matrix(bg_stats, sup_ubm, config.ivector_rank,
                                           config.tmatrix_iters, config.seed, jobs);
  write_extractor_file(out_path("models/extractor.tvm"), tmat.extractor);

  auto extract_all = [&](const std::vector<FeatureMatrix> &feats,
                         const std::vector<PosteriorSet> &posts) {
    std::map<std::string, const PosteriorSet *> by_utt;
    for (const auto &p : posts) by_utt[p.utt_id] = &p;
    return parallel_map<LabeledIvector>(feats.size(), jobs, [&](std::size_t i) {
      BaumWelchStats stats =
          accumulate_stats_external(*by_utt.at(feats[i].utt_id), sup_ubm, feats[i]);
      return LabeledIvector{feats[i].utt_id, extract_ivector(tmat.extractor, stats)};
    });
  };

  std::vector<LabeledIvector> bg_ivecs = extract_all(bg_all, bg_posts);
  write_ivector_file(out_path("models/background.ivec"), bg_ivecs);
  PldaTrainResult plda;
  {
    std::vector<Eigen::VectorXd> vecs;
    std::vector<std::string> labels;
    for (const auto &iv : bg_ivecs) {
      vecs.push_back(iv.vec);
      labels.push_back(background.utt2spk.at(iv.utt_id));
    }
    plda = train_plda(vecs, labels, config.plda_iters);
  }
  write_plda_file(out_path("models/plda.plda"), plda.model);
  PldaScorer plda_scorer(plda.model);

  std::vector<LabeledIvector> enroll_ivecs =
      extract_all(eval_corpus.enroll_features, eval_corpus.enroll_posteriors);
  write_ivector_file(out_path("models/enroll.ivec"), enroll_ivecs);
  std::map<std::string, Eigen::VectorXd> enroll_by_spk;
  for (const auto &iv : enroll_ivecs)
    enroll_by_spk[iv.utt_id] = plda.model.transform(iv.vec);

  for (const auto &cond : conditions) {
    std::vector<LabeledIvector> test_ivecs = extract_all(cond.features, cond.posteriors);
    write_ivector_file(out_path("models/test_" + cond.name + ".ivec"), test_ivecs);
    std::map<std::string, Eigen::VectorXd> test_by_utt;
    for (const auto &iv : test_ivecs) test_by_utt[iv.utt_id] = plda.model.transform(iv.vec);
    ScoreSet set = score_trials([&](const std::string &model, const std::string &utt) {
      return plda_scorer.score(enroll_by_spk.at(model), test_by_utt.at(utt));
    });
    set.system_id = "ivector-plda";
    std::string path = out_path("scores/plda_" + cond.name + ".txt");
    write_score_file(path, set);
    result.score_files["ivector-plda"][cond.name] = path;
    result.eer["ivector-plda"][cond.name] = compute_eer(eval_corpus.trials, set).eer;
    plda_scores[cond.name] = std::move(set);
  }

  // --- Score-level fusion --------------------------------------------------
  for (const auto &cond : conditions) {
    SweepResult sweep = sweep_alpha(plda_scores[cond.name], sbm_scores[cond.name],
                                    eval_corpus.trials, config.sweep_step,
                                    config.fusion_normalize);
    write_sweep_csv(out_path("scores/sweep_" + cond.name + ".csv"), sweep);
    ScoreSet fused = fuse_scores(plda_scores[cond.name], sbm_scores[cond.name],
                                 sweep.best_alpha, config.fusion_normalize);
    fused.system_id = "fused";
    std::string path = out_path("scores/fused_" + cond.name + ".txt");
    write_score_file(path, fused);
    result.score_files["fused"][cond.name] = path;
    result.eer["fused"][cond.name] = compute_eer(eval_corpus.trials, fused).eer;
    result.best_alpha[cond.name] = sweep.best_alpha;
    result.sweeps[cond.name] = std::move(sweep);
  }

  // --- Results table --------------------------------------------------------
  {
    std::ofstream os = open_output(out_path("results.txt"), /*binary=*/false);
    char buf[128];
    os << "system          eer_long(%)  eer_short(%)\n";
    for (const char *system : {"gmm-ubm", "sbm", "ivector-plda", "fused"}) {
      std::snprintf(buf, sizeof(buf), "%-15s %11.2f %13.2f\n", system,
                    100.0 * result.eer.at(system).at("long"),
                    100.0 * result.eer.at(system).at("short"));
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "fusion alpha: long %.2f, short %.2f\n",
                  result.best_alpha.at("long"), result.best_alpha.at("short"));
    os << buf;
    if (!os) throw DataError("failed writing results table");
  }
  return result;
}

}  // namespace susr

#endif  // SUSR_PIPELINE_HPP
