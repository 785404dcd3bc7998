// susr/ivector.hpp

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

#ifndef SUSR_IVECTOR_HPP
#define SUSR_IVECTOR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "susr/common.hpp"
#include "susr/features.hpp"
#include "susr/gmm.hpp"
#include "susr/parallel.hpp"
#include "susr/rng.hpp"

namespace susr {

// External per-frame class posteriors ("DNN-style" supervision). Rows are
// sparse (class_index, probability) pairs; pruned tails are renormalized on
// load so each row sums to 1.
struct PosteriorSet {
  std::string utt_id;
  int num_classes = 0;
  std::vector<std::vector<std::pair<int, float>>> rows;

  int num_frames() const { return static_cast<int>(rows.size()); }

  void validate() const {
    for (std::size_t t = 0; t < rows.size(); t++) {
      double sum = 0.0;
      for (const auto &[cls, p] : rows[t]) {
        if (cls < 0 || cls >= num_classes)
          throw DataError("posterior row " + std::to_string(t) + " of '" + utt_id +
                          "': class index " + std::to_string(cls) + " out of range");
        if (p < 0) throw DataError("negative posterior in '" + utt_id + "'");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-4)
        throw DataError("posterior row " + std::to_string(t) + " of '" + utt_id +
                        "' sums to " + std::to_string(sum));
    }
  }

  void renormalize() {
    for (auto &row : rows) {
      double sum = 0.0;
      for (const auto &[cls, p] : row) sum += p;
      if (sum <= 0) throw DataError("posterior row with zero mass in '" + utt_id + "'");
      for (auto &[cls, p] : row) p = static_cast<float>(p / sum);
    }
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(num_frames(), num_classes);
    for (int t = 0; t < num_frames(); t++)
      for (const auto &[cls, p] : rows[t]) dense(t, cls) += p;
    return dense;
  }
};

// Zeroth/first-order sufficient statistics of one utterance. The first-order
// part is centered on the UBM means.
struct BaumWelchStats {
  std::string utt_id;
  Eigen::VectorXd occupancy;    // N, length C
  Eigen::MatrixXd first_order;  // F, C x D

  int num_components() const { return static_cast<int>(occupancy.size()); }
  int dim() const { return static_cast<int>(first_order.cols()); }
};

inline BaumWelchStats accumulate_stats(const DiagGmm &ubm, const FeatureMatrix &features) {
  if (features.num_frames() == 0)
    throw DataError("accumulate_stats: empty features for '" + features.utt_id + "'");
  Eigen::MatrixXd gamma = detail::posterior_matrix(ubm, features.frames);
  Eigen::MatrixXd x = features.frames.cast<double>();
  BaumWelchStats stats;
  stats.utt_id = features.utt_id;
  stats.occupancy = gamma.colwise().sum();
  stats.first_order = gamma.transpose() * x;
  stats.first_order -= stats.occupancy.asDiagonal() * ubm.means;
  return stats;
}

// Same statistics with the frame posteriors read from an external set
// instead of the UBM.
inline BaumWelchStats accumulate_stats_external(const PosteriorSet &posteriors,
                                                const DiagGmm &ubm,
                                                const FeatureMatrix &features) {
  if (features.num_frames() == 0)
    throw DataError("accumulate_stats_external: empty features for '" +
                    features.utt_id + "'");
  if (posteriors.num_frames() != features.num_frames())
    throw DataError("accumulate_stats_external: posterior frames (" +
                    std::to_string(posteriors.num_frames()) + ") != feature frames (" +
                    std::to_string(features.num_frames()) + ") for '" +
                    features.utt_id + "'");
  if (posteriors.num_classes != ubm.num_components())
    throw DataError("accumulate_stats_external: posterior classes (" +
                    std::to_string(posteriors.num_classes) + ") != UBM components (" +
                    std::to_string(ubm.num_components()) + ")");
  const int C = ubm.num_components();
  const int D = ubm.dim();
  BaumWelchStats stats;
  stats.utt_id = features.utt_id;
  stats.occupancy = Eigen::VectorXd::Zero(C);
  stats.first_order = Eigen::MatrixXd::Zero(C, D);
  for (int t = 0; t < features.num_frames(); t++) {
    Eigen::VectorXd x = features.frames.row(t).cast<double>();
    for (const auto &[cls, p] : posteriors.rows[t]) {
      stats.occupancy(cls) += p;
      stats.first_order.row(cls) += p * (x - ubm.means.row(cls).transpose()).transpose();
    }
  }
  return stats;
}

// Single-pass supervised UBM: component k is the posterior-weighted mean and
// variance of class k. No EM; the posteriors define the assignment.
inline DiagGmm train_supervised_ubm(const std::vector<FeatureMatrix> &features,
                                    const std::vector<PosteriorSet> &posteriors,
                                    int num_classes,
                                    double variance_floor_fraction = 1e-3,
                                    double min_occupancy = 1.0) {
  if (features.empty()) throw DataError("train_supervised_ubm: no training data");
  std::map<std::string, const PosteriorSet *> by_utt;
  for (const auto &p : posteriors) by_utt[p.utt_id] = &p;
  const int D = features[0].dim();
  Eigen::VectorXd occ = Eigen::VectorXd::Zero(num_classes);
  Eigen::MatrixXd wx = Eigen::MatrixXd::Zero(num_classes, D);
  Eigen::MatrixXd wx2 = Eigen::MatrixXd::Zero(num_classes, D);
  Eigen::VectorXd gsum = Eigen::VectorXd::Zero(D), gsum2 = Eigen::VectorXd::Zero(D);
  double total = 0.0;
  for (const auto &f : features) {
    auto it = by_utt.find(f.utt_id);
    if (it == by_utt.end())
      throw DataError("train_supervised_ubm: no posteriors for '" + f.utt_id + "'");
    const PosteriorSet &post = *it->second;
    if (post.num_classes != num_classes)
      throw DataError("train_supervised_ubm: class count mismatch for '" + f.utt_id + "'");
    if (post.num_frames() != f.num_frames())
      throw DataError("train_supervised_ubm: frame count mismatch for '" + f.utt_id + "'");
    for (int t = 0; t < f.num_frames(); t++) {
      Eigen::VectorXd x = f.frames.row(t).cast<double>();
      gsum += x;
      gsum2 += x.cwiseProduct(x);
      total += 1.0;
      for (const auto &[cls, p] : post.rows[t]) {
        occ(cls) += p;
        wx.row(cls) += p * x.transpose();
        wx2.row(cls) += p * x.cwiseProduct(x).transpose();
      }
    }
  }
  Eigen::VectorXd gmean = gsum / total;
  Eigen::VectorXd gvar = (gsum2 / total - gmean.array().square().matrix()).cwiseMax(1e-10);
  Eigen::VectorXd var_floor = (variance_floor_fraction * gvar).cwiseMax(1e-10);

  DiagGmm ubm;
  ubm.weights.resize(num_classes);
  ubm.means.resize(num_classes, D);
  ubm.vars.resize(num_classes, D);
  for (int k = 0; k < num_classes; k++) {
    if (occ(k) < min_occupancy)
      throw DataError("train_supervised_ubm: class " + std::to_string(k) +
                      " starved (occupancy " + std::to_string(occ(k)) + ")");
    ubm.weights(k) = occ(k);
    ubm.means.row(k) = wx.row(k) / occ(k);
    ubm.vars.row(k) = (wx2.row(k) / occ(k) - ubm.means.row(k).array().square().matrix())
                          .cwiseMax(var_floor.transpose());
  }
  ubm.weights /= ubm.weights.sum();
  ubm.finalize();
  return ubm;
}

// Total-variability model: supervector offset M - m = T w with a standard
// normal prior on w. T is stored per component as D x R blocks.
class IVectorExtractor {
 public:
  IVectorExtractor() = default;
  IVectorExtractor(const DiagGmm &ubm, std::vector<Eigen::MatrixXd> basis)
      : ubm_(ubm), basis_(std::move(basis)) {
    refresh();
  }

  const DiagGmm &ubm() const { return ubm_; }
  const std::vector<Eigen::MatrixXd> &basis() const { return basis_; }
  int rank() const { return basis_.empty() ? 0 : static_cast<int>(basis_[0].cols()); }
  int num_components() const { return static_cast<int>(basis_.size()); }

  void set_basis(std::vector<Eigen::MatrixXd> basis) {
    basis_ = std::move(basis);
    refresh();
  }

  struct Posterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;
    // Marginal log-likelihood term -0.5 log|L| + 0.5 a^T L^{-1} a; summed
    // over utterances this is the EM objective up to a T-independent
    // constant.
    double objective = 0.0;
  };

  Posterior posterior(const BaumWelchStats &stats) const {
    const int R = rank();
    if (stats.num_components() != num_components() || stats.dim() != ubm_.dim())
      throw DataError("i-vector extractor: stats shape mismatch");
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(R, R);
    Eigen::VectorXd linear = Eigen::VectorXd::Zero(R);
    for (int c = 0; c < num_components(); c++) {
      precision.noalias() += stats.occupancy(c) * tt_sig_inv_t_[c];
      linear.noalias() += tt_sig_inv_[c] * stats.first_order.row(c).transpose();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      throw NumericalError("i-vector posterior precision not positive definite");
    Posterior post;
    post.mean = llt.solve(linear);
    post.covariance = llt.solve(Eigen::MatrixXd::Identity(R, R));
    double logdet = 0.0;
    for (int i = 0; i < R; i++) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    post.objective = -0.5 * logdet + 0.5 * linear.dot(post.mean);
    return post;
  }

 private:
  void refresh() {
    const int C = num_components();
    tt_sig_inv_.resize(C);
    tt_sig_inv_t_.resize(C);
    for (int c = 0; c < C; c++) {
      Eigen::VectorXd inv_var = ubm_.vars.row(c).cwiseInverse();
      tt_sig_inv_[c] = basis_[c].transpose() * inv_var.asDiagonal();
      tt_sig_inv_t_[c] = tt_sig_inv_[c] * basis_[c];
    }
  }

  DiagGmm ubm_;
  std::vector<Eigen::MatrixXd> basis_;          // C blocks, D x R
  std::vector<Eigen::MatrixXd> tt_sig_inv_;     // C blocks, R x D
  std::vector<Eigen::MatrixXd> tt_sig_inv_t_;   // C blocks, R x R
};

// Posterior mean of the latent variable: w = L^{-1} T^T Sigma^{-1} F.
inline Eigen::VectorXd extract_ivector(const IVectorExtractor &extractor,
                                       const BaumWelchStats &stats) {
  return extractor.posterior(stats).mean;
}

struct TMatrixTrainResult {
  IVectorExtractor extractor;
  // Per-iteration marginal log-likelihood (up to a constant); non-decreasing.
  std::vector<double> objectives;
};

// EM for the total-variability matrix. E-step computes per-utterance E[w],
// E[ww^T]; M-step solves T_c = (sum_u F_{u,c} E[w]^T)(sum_u N_{u,c} E[ww^T])^{-1}.
inline TMatrixTrainResult train_t_matrix(const std::vector<BaumWelchStats> &stats,
                                         const DiagGmm &ubm, int rank, int num_iters,
                                         std::uint64_t seed, int jobs = 1) {
  if (rank < 1) throw UsageError("i-vector rank must be >= 1");
  if (num_iters < 1) throw UsageError("num_iters must be >= 1");
  const int C = ubm.num_components();
  const int D = ubm.dim();
  bool any_nonzero = false;
  for (const auto &s : stats) {
    if (s.num_components() != C || s.dim() != D)
      throw DataError("train_t_matrix: stats shape mismatch for '" + s.utt_id + "'");
    if (s.occupancy.sum() > 0) any_nonzero = true;
  }
  if (!any_nonzero) throw DataError("train_t_matrix: no stats with nonzero occupancy");

  Rng rng(seed);
  std::vector<Eigen::MatrixXd> basis(C);
  for (int c = 0; c < C; c++) {
    basis[c].resize(D, rank);
    for (int d = 0; d < D; d++)
      for (int r = 0; r < rank; r++) basis[c](d, r) = 0.1 * rng.gauss();
  }

  TMatrixTrainResult result;
  result.extractor = IVectorExtractor(ubm, std::move(basis));
  for (int iter = 0; iter < num_iters; iter++) {
    struct UttAccum {
      double objective = 0.0;
      Eigen::MatrixXd ew_outer;         // R x R, scaled later per component
      Eigen::VectorXd mean;             // R
    };
    auto posts = parallel_map<IVectorExtractor::Posterior>(
        stats.size(), jobs,
        [&](std::size_t u) { return result.extractor.posterior(stats[u]); });

    double objective = 0.0;
    std::vector<Eigen::MatrixXd> quad(C, Eigen::MatrixXd::Zero(rank, rank));
    std::vector<Eigen::MatrixXd> lin(C, Eigen::MatrixXd::Zero(D, rank));
    for (std::size_t u = 0; u < stats.size(); u++) {  // fixed utterance order
      objective += posts[u].objective;
      Eigen::MatrixXd eww =
          posts[u].covariance + posts[u].mean * posts[u].mean.transpose();
      for (int c = 0; c < C; c++) {
        quad[c].noalias() += stats[u].occupancy(c) * eww;
        lin[c].noalias() += stats[u].first_order.row(c).transpose() *
                            posts[u].mean.transpose();
      }
    }
    result.objectives.push_back(objective);

    std::vector<Eigen::MatrixXd> new_basis(C);
    for (int c = 0; c < C; c++) {
      Eigen::LLT<Eigen::MatrixXd> llt(quad[c]);
      if (llt.info() != Eigen::Success) {
        log_warn("train_t_matrix: singular M-step system for component " +
                 std::to_string(c) + ", regularizing");
        quad[c] += 1e-8 * Eigen::MatrixXd::Identity(rank, rank);
        llt.compute(quad[c]);
        if (llt.info() != Eigen::Success)
          throw NumericalError("train_t_matrix: M-step system not invertible");
      }
      new_basis[c] = llt.solve(lin[c].transpose()).transpose();
    }
    result.extractor.set_basis(std::move(new_basis));
  }
  return result;
}

inline double cosine_score(const Eigen::Ref<const Eigen::VectorXd> &a,
                           const Eigen::Ref<const Eigen::VectorXd> &b) {
  if (a.size() != b.size()) throw DataError("cosine_score: dimension mismatch");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DataError("cosine_score: zero vector");
  return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// File formats.

// Posterior file: magic "SUSRPOST", u32 version=1, utt_id, u32 T, u32 K,
// then per frame u16 n, n x (u32 class_index, f32 prob).
inline constexpr char kPosteriorMagic[9] = "SUSRPOST";

inline void write_posterior_record(std::ostream &os, const PosteriorSet &post) {
  check_identifier(post.utt_id, "utt_id");
  write_magic(os, kPosteriorMagic);
  write_u32(os, 1);
  write_string(os, post.utt_id);
  write_u32(os, static_cast<std::uint32_t>(post.num_frames()));
  write_u32(os, static_cast<std::uint32_t>(post.num_classes));
  for (const auto &row : post.rows) {
    if (row.size() > 0xffff) throw DataError("posterior row too wide");
    write_u16(os, static_cast<std::uint16_t>(row.size()));
    for (const auto &[cls, p] : row) {
      write_u32(os, static_cast<std::uint32_t>(cls));
      write_f32(os, p);
    }
  }
}

inline PosteriorSet read_posterior_record(std::istream &is) {
  expect_magic(is, kPosteriorMagic);
  std::uint32_t version = read_u32(is);
  if (version != 1)
    throw DataError("unsupported posterior file version " + std::to_string(version));
  PosteriorSet post;
  post.utt_id = read_string(is);
  std::uint32_t T = read_u32(is);
  post.num_classes = static_cast<int>(read_u32(is));
  post.rows.resize(T);
  for (std::uint32_t t = 0; t < T; t++) {
    std::uint16_t n = read_u16(is);
    post.rows[t].reserve(n);
    for (std::uint16_t i = 0; i < n; i++) {
      int cls = static_cast<int>(read_u32(is));
      float p = read_f32(is);
      post.rows[t].emplace_back(cls, p);
    }
  }
  post.validate();
  post.renormalize();
  return post;
}

inline void write_posterior_file(const std::string &path,
                                 const std::vector<PosteriorSet> &posts) {
  std::ofstream os = open_output(path);
  for (const auto &p : posts) write_posterior_record(os, p);
}

inline std::vector<PosteriorSet> read_posterior_file(const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<PosteriorSet> out;
  while (stream_has_more(is)) out.push_back(read_posterior_record(is));
  if (out.empty()) throw DataError(path + ": no posterior records");
  return out;
}

// i-vector file: magic "SUSRIVEC", utt_id, u32 R, R x f64.
inline constexpr char kIvectorMagic[9] = "SUSRIVEC";

struct LabeledIvector {
  std::string utt_id;
  Eigen::VectorXd vec;
};

inline void write_ivector_record(std::ostream &os, const LabeledIvector &iv) {
  check_identifier(iv.utt_id, "utt_id");
  write_magic(os, kIvectorMagic);
  write_string(os, iv.utt_id);
  write_u32(os, static_cast<std::uint32_t>(iv.vec.size()));
  for (int i = 0; i < iv.vec.size(); i++) write_f64(os, iv.vec(i));
}

inline LabeledIvector read_ivector_record(std::istream &is) {
  expect_magic(is, kIvectorMagic);
  LabeledIvector iv;
  iv.utt_id = read_string(is);
  std::uint32_t R = read_u32(is);
  iv.vec.resize(R);
  for (std::uint32_t i = 0; i < R; i++) iv.vec(i) = read_f64(is);
  return iv;
}

inline void write_ivector_file(const std::string &path,
                               const std::vector<LabeledIvector> &ivs) {
  std::ofstream os = open_output(path);
  for (const auto &iv : ivs) write_ivector_record(os, iv);
}

inline std::vector<LabeledIvector> read_ivector_file(const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<LabeledIvector> out;
  while (stream_has_more(is)) out.push_back(read_ivector_record(is));
  if (out.empty()) throw DataError(path + ": no i-vector records");
  return out;
}

// Baum-Welch stats record: magic "SUSRBWST", utt_id, u32 C, u32 D, N, F (f64).
inline constexpr char kStatsMagic[9] = "SUSRBWST";

inline void write_stats_record(std::ostream &os, const BaumWelchStats &stats) {
  check_identifier(stats.utt_id, "utt_id");
  write_magic(os, kStatsMagic);
  write_string(os, stats.utt_id);
  write_u32(os, static_cast<std::uint32_t>(stats.num_components()));
  write_u32(os, static_cast<std::uint32_t>(stats.dim()));
  for (int c = 0; c < stats.num_components(); c++) write_f64(os, stats.occupancy(c));
  for (int c = 0; c < stats.num_components(); c++)
    for (int d = 0; d < stats.dim(); d++) write_f64(os, stats.first_order(c, d));
}

inline BaumWelchStats read_stats_record(std::istream &is) {
  expect_magic(is, kStatsMagic);
  BaumWelchStats stats;
  stats.utt_id = read_string(is);
  std::uint32_t C = read_u32(is);
  std::uint32_t D = read_u32(is);
  stats.occupancy.resize(C);
  stats.first_order.resize(C, D);
  for (std::uint32_t c = 0; c < C; c++) stats.occupancy(c) = read_f64(is);
  for (std::uint32_t c = 0; c < C; c++)
    for (std::uint32_t d = 0; d < D; d++) stats.first_order(c, d) = read_f64(is);
  return stats;
}

inline void write_stats_file(const std::string &path,
                             const std::vector<BaumWelchStats> &stats) {
  std::ofstream os = open_output(path);
  for (const auto &s : stats) write_stats_record(os, s);
}

inline std::vector<BaumWelchStats> read_stats_file(const std::string &path) {
  std::ifstream is = open_input(path);
  std::vector<BaumWelchStats> out;
  while (stream_has_more(is)) out.push_back(read_stats_record(is));
  if (out.empty()) throw DataError(path + ": no stats records");
  return out;
}

// Extractor file: magic "SUSRTVM1", embedded GMMM record (the UBM), u32 R,
// then C blocks of D x R f64 row-major.
inline constexpr char kExtractorMagic[9] = "SUSRTVM1";

inline void write_extractor_file(const std::string &path, const IVectorExtractor &ext) {
  std::ofstream os = open_output(path);
  write_magic(os, kExtractorMagic);
  write_gmm_record(os, ext.ubm());
  write_u32(os, static_cast<std::uint32_t>(ext.rank()));
  for (const auto &block : ext.basis())
    for (int d = 0; d < block.rows(); d++)
      for (int r = 0; r < block.cols(); r++) write_f64(os, block(d, r));
}

inline IVectorExtractor read_extractor_file(const std::string &path) {
  std::ifstream is = open_input(path);
  expect_magic(is, kExtractorMagic);
  DiagGmm ubm = read_gmm_record(is);
  std::uint32_t R = read_u32(is);
  if (R == 0) throw DataError(path + ": zero i-vector rank");
  std::vector<Eigen::MatrixXd> basis(ubm.num_components());
  for (auto &block : basis) {
    block.resize(ubm.dim(), R);
    for (int d = 0; d < ubm.dim(); d++)
      for (std::uint32_t r = 0; r < R; r++) block(d, r) = read_f64(is);
  }
  return IVectorExtractor(ubm, std::move(basis));
}

}  // namespace susr

#endif  // SUSR_IVECTOR_HPP
