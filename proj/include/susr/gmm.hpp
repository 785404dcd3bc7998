// susr/gmm.hpp

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

#ifndef SUSR_GMM_HPP
#define SUSR_GMM_HPP

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "susr/common.hpp"
#include "susr/features.hpp"
#include "susr/kmeans.hpp"
#include "susr/parallel.hpp"
#include "susr/rng.hpp"

namespace susr {

struct EmConfig {
  int num_iters = 10;
  std::uint64_t seed = 0;
  double variance_floor_fraction = 1e-3;
  double min_component_occupancy = 1.0;
  int jobs = 1;
  // k-means initialization: subsample cap and Lloyd iterations.
  int init_subsample = 20000;
  int init_kmeans_iters = 10;

  void validate() const {
    if (num_iters < 1) throw UsageError("num_iters must be >= 1");
    if (variance_floor_fraction <= 0)
      throw UsageError("variance_floor_fraction must be positive");
  }
};

// Diagonal-covariance GMM; doubles as UBM and speaker model. Mutate the
// public fields freely, then call finalize() before evaluating densities.
struct DiagGmm {
  Eigen::VectorXd weights;  // C, sums to 1
  Eigen::MatrixXd means;    // C x D
  Eigen::MatrixXd vars;     // C x D, strictly positive

  int num_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(means.cols()); }

  void finalize() {
    const int C = num_components();
    const int D = dim();
    if (C < 1 || means.rows() != C || vars.rows() != C || vars.cols() != D)
      throw DataError("DiagGmm: inconsistent shapes");
    if (std::abs(weights.sum() - 1.0) > 1e-10)
      throw DataError("DiagGmm: weights do not sum to 1");
    if ((weights.array() < 0).any()) throw DataError("DiagGmm: negative weight");
    if ((vars.array() <= 0).any()) throw DataError("DiagGmm: non-positive variance");
    inv_vars_ = vars.array().inverse();
    means_inv_vars_ = means.array() * inv_vars_.array();
    gconsts_.resize(C);
    const double log2pi = std::log(2.0 * std::numbers::pi);
    for (int c = 0; c < C; c++) {
      double acc = std::log(std::max(weights(c), 1e-300));
      for (int d = 0; d < D; d++)
        acc -= 0.5 * (log2pi + std::log(vars(c, d)) +
                      means(c, d) * means(c, d) * inv_vars_(c, d));
      gconsts_(c) = acc;
    }
    finalized_ = true;
  }

  // Per-component log w_c + log N(x; mu_c, var_c).
  Eigen::VectorXd component_log_likes(const Eigen::Ref<const Eigen::VectorXd> &frame) const {
    check_frame(frame);
    Eigen::VectorXd ll = gconsts_;
    ll.noalias() += means_inv_vars_ * frame;
    ll.noalias() -= 0.5 * (inv_vars_ * frame.cwiseProduct(frame));
    return ll;
  }

  // T x C matrix of per-frame, per-component weighted log densities.
  Eigen::MatrixXd component_log_likes_matrix(const FloatMatrix &frames) const {
    if (!finalized_) throw DataError("DiagGmm: finalize() not called");
    if (frames.cols() != dim())
      throw DataError("DiagGmm: frame dim " + std::to_string(frames.cols()) +
                      " != model dim " + std::to_string(dim()));
    Eigen::MatrixXd x = frames.cast<double>();
    Eigen::MatrixXd ll = x * means_inv_vars_.transpose();
    ll.noalias() -= 0.5 * (x.array().square().matrix() * inv_vars_.transpose());
    ll.rowwise() += gconsts_.transpose();
    return ll;
  }

  double log_likelihood(const Eigen::Ref<const Eigen::VectorXd> &frame) const {
    Eigen::VectorXd ll = component_log_likes(frame);
    double m = ll.maxCoeff();
    return m + std::log((ll.array() - m).exp().sum());
  }

  Eigen::VectorXd posteriors(const Eigen::Ref<const Eigen::VectorXd> &frame) const {
    Eigen::VectorXd ll = component_log_likes(frame);
    double m = ll.maxCoeff();
    Eigen::VectorXd p = (ll.array() - m).exp();
    return p / p.sum();
  }

 private:
  void check_frame(const Eigen::Ref<const Eigen::VectorXd> &frame) const {
    if (!finalized_) throw DataError("DiagGmm: finalize() not called");
    if (frame.size() != dim())
      throw DataError("DiagGmm: frame dim " + std::to_string(frame.size()) +
                      " != model dim " + std::to_string(dim()));
  }

  Eigen::MatrixXd inv_vars_;
  Eigen::MatrixXd means_inv_vars_;
  Eigen::VectorXd gconsts_;
  bool finalized_ = false;
};

struct SpeakerModel {
  std::string speaker_id;
  std::string ubm_id;
  DiagGmm gmm;
};

inline double gmm_log_likelihood(const DiagGmm &gmm,
                                 const Eigen::Ref<const Eigen::VectorXd> &frame) {
  return gmm.log_likelihood(frame);
}

inline Eigen::VectorXd frame_posteriors(const DiagGmm &gmm,
                                        const Eigen::Ref<const Eigen::VectorXd> &frame) {
  return gmm.posteriors(frame);
}

namespace detail {

// Row-wise posteriors with the per-utterance total log-likelihood.
inline Eigen::MatrixXd posterior_matrix(const DiagGmm &gmm, const FloatMatrix &frames,
                                        double *total_log_like = nullptr) {
  Eigen::MatrixXd ll = gmm.component_log_likes_matrix(frames);
  Eigen::VectorXd row_max = ll.rowwise().maxCoeff();
  Eigen::MatrixXd p = (ll.colwise() - row_max).array().exp();
  Eigen::VectorXd row_sum = p.rowwise().sum();
  if (total_log_like != nullptr)
    *total_log_like = (row_sum.array().log() + row_max.array()).sum();
  return p.array().colwise() / row_sum.array();
}

struct EmAccumulator {
  double log_like = 0.0;
  Eigen::VectorXd occupancy;    // C
  Eigen::MatrixXd weighted_x;   // C x D
  Eigen::MatrixXd weighted_x2;  // C x D
};

inline EmAccumulator accumulate_em(const DiagGmm &gmm, const FloatMatrix &frames) {
  EmAccumulator acc;
  Eigen::MatrixXd gamma = posterior_matrix(gmm, frames, &acc.log_like);
  Eigen::MatrixXd x = frames.cast<double>();
  acc.occupancy = gamma.colwise().sum();
  acc.weighted_x = gamma.transpose() * x;
  acc.weighted_x2 = gamma.transpose() * x.array().square().matrix();
  return acc;
}

}  // namespace detail

struct UbmTrainResult {
  DiagGmm gmm;
  // Mean per-frame data log-likelihood at the start of each iteration;
  // non-decreasing by the EM guarantee.
  std::vector<double> avg_log_likes;
  int reseeded_components = 0;
};

// Standard diagonal-GMM EM with seeded k-means++ initialization. Variance
// floor is variance_floor_fraction times the global per-dimension variance;
// components starved below min_component_occupancy are re-seeded at a random
// training frame.
inline UbmTrainResult train_ubm_em(const std::vector<FeatureMatrix> &features,
                                   int num_components, const EmConfig &cfg) {
  cfg.validate();
  if (num_components < 1) throw UsageError("need at least one component");
  if (features.empty()) throw DataError("train_ubm_em: no training features");
  const int D = features[0].dim();
  std::size_t total_frames = 0;
  for (const auto &f : features) {
    if (f.dim() != D) throw DataError("train_ubm_em: inconsistent feature dims");
    total_frames += static_cast<std::size_t>(f.num_frames());
  }
  if (total_frames < static_cast<std::size_t>(num_components))
    throw DataError("train_ubm_em: fewer frames (" + std::to_string(total_frames) +
                    ") than components (" + std::to_string(num_components) + ")");

  // Global mean/variance for the floor and for re-seeded components.
  Eigen::VectorXd gsum = Eigen::VectorXd::Zero(D), gsum2 = Eigen::VectorXd::Zero(D);
  for (const auto &f : features) {
    Eigen::MatrixXd x = f.frames.cast<double>();
    gsum += x.colwise().sum();
    gsum2 += x.array().square().matrix().colwise().sum();
  }
  Eigen::VectorXd gmean = gsum / static_cast<double>(total_frames);
  Eigen::VectorXd gvar =
      (gsum2 / static_cast<double>(total_frames) - gmean.array().square().matrix())
          .cwiseMax(1e-10);
  Eigen::VectorXd var_floor = (cfg.variance_floor_fraction * gvar).cwiseMax(1e-10);

  // Seeded k-means on a deterministic stride subsample.
  Rng rng(cfg.seed);
  std::size_t sub_n = std::min<std::size_t>(total_frames, cfg.init_subsample);
  Eigen::MatrixXd sub(sub_n, D);
  {
    std::vector<std::pair<const FeatureMatrix *, int>> index;
    index.reserve(total_frames);
    for (const auto &f : features)
      for (int t = 0; t < f.num_frames(); t++) index.emplace_back(&f, t);
    for (std::size_t i = 0; i < sub_n; i++) {
      std::size_t pick = i * total_frames / sub_n;
      sub.row(i) = index[pick].first->frames.row(index[pick].second).cast<double>();
    }
  }
  KMeansResult km = kmeans(sub, num_components, rng, cfg.init_kmeans_iters);

  UbmTrainResult result;
  DiagGmm &gmm = result.gmm;
  gmm.weights = Eigen::VectorXd::Constant(num_components, 1.0 / num_components);
  gmm.means = km.centers;
  gmm.vars = gvar.transpose().replicate(num_components, 1);
  gmm.finalize();

  for (int iter = 0; iter < cfg.num_iters; iter++) {
    auto accs = parallel_map<detail::EmAccumulator>(
        features.size(), cfg.jobs,
        [&](std::size_t u) { return detail::accumulate_em(gmm, features[u].frames); });
    double total_ll = 0.0;
    Eigen::VectorXd occ = Eigen::VectorXd::Zero(num_components);
    Eigen::MatrixXd wx = Eigen::MatrixXd::Zero(num_components, D);
    Eigen::MatrixXd wx2 = Eigen::MatrixXd::Zero(num_components, D);
    for (const auto &acc : accs) {  // fixed utterance order
      total_ll += acc.log_like;
      occ += acc.occupancy;
      wx += acc.weighted_x;
      wx2 += acc.weighted_x2;
    }
    result.avg_log_likes.push_back(total_ll / static_cast<double>(total_frames));

    for (int c = 0; c < num_components; c++) {
      if (occ(c) < cfg.min_component_occupancy) {
        // Starved component: re-seed at a random training frame.
        std::size_t pick = rng.uniform_index(total_frames);
        std::size_t seen = 0;
        for (const auto &f : features) {
          if (pick < seen + static_cast<std::size_t>(f.num_frames())) {
            gmm.means.row(c) = f.frames.row(static_cast<int>(pick - seen)).cast<double>();
            break;
          }
          seen += static_cast<std::size_t>(f.num_frames());
        }
        gmm.vars.row(c) = gvar;
        gmm.weights(c) = 1.0 / static_cast<double>(total_frames);
        result.reseeded_components++;
        log_warn("EM iteration " + std::to_string(iter) + ": component " +
                 std::to_string(c) + " starved (occupancy " + std::to_string(occ(c)) +
                 "), re-seeded");
        continue;
      }
      gmm.weights(c) = occ(c) / static_cast<double>(total_frames);
      gmm.means.row(c) = wx.row(c) / occ(c);
      gmm.vars.row(c) =
          (wx2.row(c) / occ(c) - gmm.means.row(c).array().square().matrix())
              .cwiseMax(var_floor.transpose());
    }
    gmm.weights /= gmm.weights.sum();
    gmm.finalize();
  }
  return result;
}

// Mean-only MAP adaptation: mu'_c = (sum_t gamma_t(c) x_t + r mu_c) / (n_c + r).
// Weights and variances are copied from the UBM.
inline SpeakerModel map_adapt(const DiagGmm &ubm, const FeatureMatrix &features,
                              double relevance, const std::string &speaker_id,
                              const std::string &ubm_id = "ubm") {
  if (relevance <= 0) throw UsageError("MAP relevance factor must be positive");
  SpeakerModel spk;
  spk.speaker_id = speaker_id;
  spk.ubm_id = ubm_id;
  spk.gmm = ubm;
  if (features.num_frames() == 0) {
    log_warn("MAP adaptation for '" + speaker_id +
             "' got no frames; model equals the UBM");
    spk.gmm.finalize();
    return spk;
  }
  Eigen::MatrixXd gamma = detail::posterior_matrix(ubm, features.frames);
  Eigen::MatrixXd x = features.frames.cast<double>();
  Eigen::VectorXd occ = gamma.colwise().sum();
  Eigen::MatrixXd wx = gamma.transpose() * x;
  for (int c = 0; c < ubm.num_components(); c++)
    spk.gmm.means.row(c) =
        (wx.row(c) + relevance * ubm.means.row(c)) / (occ(c) + relevance);
  spk.gmm.finalize();
  return spk;
}

// Per-frame average log likelihood ratio against the UBM; the baseline
// verification score.
inline double gmm_ubm_score(const SpeakerModel &spk, const DiagGmm &ubm,
                            const FeatureMatrix &test) {
  if (test.num_frames() == 0)
    throw DataError("gmm_ubm_score: empty test features for '" + test.utt_id + "'");
  Eigen::MatrixXd ll_spk = spk.gmm.component_log_likes_matrix(test.frames);
  Eigen::MatrixXd ll_ubm = ubm.component_log_likes_matrix(test.frames);
  auto row_lse = [](const Eigen::MatrixXd &ll) -> Eigen::VectorXd {
    Eigen::VectorXd m = ll.rowwise().maxCoeff();
    return ((ll.colwise() - m).array().exp().rowwise().sum()).log().matrix() + m;
  };
  return (row_lse(ll_spk) - row_lse(ll_ubm)).mean();
}

// ---------------------------------------------------------------------------
// GMMM binary format: magic "SUSRGMM1", u32 C, u32 D, then weights, means,
// vars as little-endian f64 arrays (row-major). Speaker model records wrap a
// GMMM record with speaker_id and ubm_id fields.

inline constexpr char kGmmMagic[9] = "SUSRGMM1";
inline constexpr char kSpeakerMagic[9] = "SUSRSPK1";

inline void write_gmm_record(std::ostream &os, const DiagGmm &gmm) {
  write_magic(os, kGmmMagic);
  write_u32(os, static_cast<std::uint32_t>(gmm.num_components()));
  write_u32(os, static_cast<std::uint32_t>(gmm.dim()));
  for (int c = 0; c < gmm.num_components(); c++) write_f64(os, gmm.weights(c));
  for (int c = 0; c < gmm.num_components(); c++)
    for (int d = 0; d < gmm.dim(); d++) write_f64(os, gmm.means(c, d));
  for (int c = 0; c < gmm.num_components(); c++)
    for (int d = 0; d < gmm.dim(); d++) write_f64(os, gmm.vars(c, d));
}

inline DiagGmm read_gmm_record(std::istream &is) {
  expect_magic(is, kGmmMagic);
  std::uint32_t C = read_u32(is);
  std::uint32_t D = read_u32(is);
  if (C == 0 || D == 0) throw DataError("GMMM record with zero dimensions");
  DiagGmm gmm;
  gmm.weights.resize(C);
  gmm.means.resize(C, D);
  gmm.vars.resize(C, D);
  for (std::uint32_t c = 0; c < C; c++) gmm.weights(c) = read_f64(is);
  for (std::uint32_t c = 0; c < C; c++)
    for (std::uint32_t d = 0; d < D; d++) gmm.means(c, d) = read_f64(is);
  for (std::uint32_t c = 0; c < C; c++)
    for (std::uint32_t d = 0; d < D; d++) gmm.vars(c, d) = read_f64(is);
  gmm.finalize();
  return gmm;
}

inline void write_gmm_file(const std::string &path, const DiagGmm &gmm) {
  std::ofstream os = open_output(path);
  write_gmm_record(os, gmm);
}

inline DiagGmm read_gmm_file(const std::string &path) {
  std::ifstream is = open_input(path);
  return read_gmm_record(is);
}

inline void write_speaker_record(std::ostream &os, const SpeakerModel &spk) {
  check_identifier(spk.speaker_id, "speaker_id");
  check_identifier(spk.ubm_id, "ubm_id");
  write_magic(os, kSpeakerMagic);
  write_string(os, spk.speaker_id);
  write_string(os, spk.ubm_id);
  write_gmm_record(os, spk.gmm);
}

inline SpeakerModel read_speaker_record(std::istream &is) {
  expect_magic(is, kSpeakerMagic);
  SpeakerModel spk;
  spk.speaker_id = read_string(is);
  spk.ubm_id = read_string(is);
  spk.gmm = read_gmm_record(is);
  return spk;
}

inline void write_speaker_file(const std::string &path,
                               const std::vector<SpeakerModel> &speakers) {
  std::ofstream os = open_output(path);
  for (const auto &s : speakers) write_speaker_record(os, s);
}

inline std::vector<SpeakerModel> read_speaker_file(const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<SpeakerModel> out;
  while (stream_has_more(is)) out.push_back(read_speaker_record(is));
  if (out.empty()) throw DataError(path + ": no speaker records");
  return out;
}

}  // namespace susr

#endif  // SUSR_GMM_HPP
