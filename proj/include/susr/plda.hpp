// susr/plda.hpp

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

#ifndef SUSR_PLDA_HPP
#define SUSR_PLDA_HPP

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "susr/common.hpp"

namespace susr {

// Two-covariance PLDA: speaker mean y ~ N(mu, B), observation x ~ N(y, W).
// When length_norm is set, vectors are centered on norm_mean and projected to
// the unit sphere before training/scoring (apply via transform()).
struct PldaModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd between;  // B
  Eigen::MatrixXd within;   // W
  bool length_norm = false;
  Eigen::VectorXd norm_mean;

  int rank() const { return static_cast<int>(mu.size()); }

  Eigen::VectorXd transform(const Eigen::Ref<const Eigen::VectorXd> &x) const {
    if (!length_norm) return x;
    if (x.size() != norm_mean.size())
      throw DataError("PLDA transform: dimension mismatch");
    Eigen::VectorXd centered = x - norm_mean;
    double n = centered.norm();
    return n > 1e-12 ? Eigen::VectorXd(centered / n) : centered;
  }

  void validate() const {
    const int R = rank();
    if (R < 1 || between.rows() != R || between.cols() != R || within.rows() != R ||
        within.cols() != R)
      throw DataError("PLDA model: inconsistent shapes");
    if (!between.isApprox(between.transpose(), 1e-8) ||
        !within.isApprox(within.transpose(), 1e-8))
      throw DataError("PLDA model: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(between);
    if (eb.eigenvalues().minCoeff() < -1e-8)
      throw DataError("PLDA model: between-speaker covariance not PSD");
    Eigen::LLT<Eigen::MatrixXd> lw(within);
    if (lw.info() != Eigen::Success)
      throw DataError("PLDA model: within-speaker covariance not positive definite");
  }
};

namespace detail {

struct GaussianEvaluator {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_norm;  // -0.5 (k log 2pi + logdet)

  explicit GaussianEvaluator(const Eigen::MatrixXd &cov) : llt(cov) {
    if (llt.info() != Eigen::Success)
      throw NumericalError("covariance not positive definite");
    double logdet = 0.0;
    for (int i = 0; i < cov.rows(); i++) logdet += 2.0 * std::log(llt.matrixL()(i, i));
    log_norm = -0.5 * (cov.rows() * std::log(2.0 * std::numbers::pi) + logdet);
  }

  double log_density(const Eigen::VectorXd &centered) const {
    return log_norm - 0.5 * centered.dot(llt.solve(centered));
  }
};

}  // namespace detail

// Same/different-speaker LLR on already-transformed vectors:
// log N([e;t]; [mu;mu], [[B+W, B],[B, B+W]]) - log N(e;.) - log N(t;.).
// The joint term is evaluated through the sum/difference decomposition of
// the block covariance ([[A,B],[B,A]] splits into A+B on e+t and A-B on
// e-t), which makes the score exactly symmetric in (enroll, test).
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model)
      : mu_(model.mu),
        marginal_(model.between + model.within),
        sum_part_(model.within + 2.0 * model.between),
        diff_part_(model.within) {}

  double score(const Eigen::Ref<const Eigen::VectorXd> &enroll,
               const Eigen::Ref<const Eigen::VectorXd> &test) const {
    const int R = static_cast<int>(mu_.size());
    if (enroll.size() != R || test.size() != R)
      throw DataError("plda_score: dimension mismatch");
    Eigen::VectorXd e = enroll - mu_, t = test - mu_;
    Eigen::VectorXd sum = e + t, diff = e - t;
    double joint = sum_part_.log_norm + diff_part_.log_norm -
                   0.25 * (sum.dot(sum_part_.llt.solve(sum)) +
                           diff.dot(diff_part_.llt.solve(diff)));
    return joint - (marginal_.log_density(e) + marginal_.log_density(t));
  }

 private:
  Eigen::VectorXd mu_;
  detail::GaussianEvaluator marginal_;   // B + W
  detail::GaussianEvaluator sum_part_;   // W + 2B, acts on e + t
  detail::GaussianEvaluator diff_part_;  // W, acts on e - t
};

inline double plda_score(const PldaModel &model,
                         const Eigen::Ref<const Eigen::VectorXd> &enroll,
                         const Eigen::Ref<const Eigen::VectorXd> &test) {
  return PldaScorer(model).score(enroll, test);
}

struct PldaTrainResult {
  PldaModel model;
  // Total marginal log-likelihood at the start of each iteration.
  std::vector<double> objectives;
};

// EM for the two-covariance model. Vectors are length-normalized first
// (unless disabled); training data should contain multiple sessions for at
// least one speaker, otherwise B and W are only identifiable as a sum.
inline PldaTrainResult train_plda(const std::vector<Eigen::VectorXd> &ivectors,
                                  const std::vector<std::string> &speaker_labels,
                                  int num_iters, bool length_norm = true) {
  if (ivectors.size() != speaker_labels.size())
    throw DataError("train_plda: label/vector count mismatch");
  if (ivectors.empty()) throw DataError("train_plda: no training vectors");
  if (num_iters < 1) throw UsageError("num_iters must be >= 1");
  const int R = static_cast<int>(ivectors[0].size());
  const int N = static_cast<int>(ivectors.size());

  PldaTrainResult result;
  PldaModel &model = result.model;
  model.length_norm = length_norm;
  model.norm_mean = Eigen::VectorXd::Zero(R);
  if (length_norm) {
    for (const auto &x : ivectors) model.norm_mean += x;
    model.norm_mean /= N;
  }
  std::vector<Eigen::VectorXd> data(N);
  for (int i = 0; i < N; i++) {
    if (ivectors[i].size() != R) throw DataError("train_plda: inconsistent dims");
    data[i] = model.transform(ivectors[i]);
  }

  std::map<std::string, std::vector<int>> by_speaker;
  for (int i = 0; i < N; i++) by_speaker[speaker_labels[i]].push_back(i);
  const int S = static_cast<int>(by_speaker.size());
  if (S < 2) throw DataError("train_plda: need at least two speakers");
  bool multi_session = false;
  for (const auto &[spk, idx] : by_speaker)
    if (idx.size() >= 2) multi_session = true;
  if (!multi_session)
    log_warn("train_plda: no speaker has multiple sessions; only B+W is "
             "identifiable and the B/W split follows the initialization");

  // Moment-based initialization.
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(R);
  for (const auto &x : data) mean += x;
  mean /= N;
  Eigen::MatrixXd total_cov = Eigen::MatrixXd::Zero(R, R);
  for (const auto &x : data) total_cov += (x - mean) * (x - mean).transpose();
  total_cov /= N;
  double cov_scale = std::max(total_cov.trace() / R, 1e-8);

  model.mu = mean;
  Eigen::MatrixXd between = Eigen::MatrixXd::Zero(R, R);
  Eigen::MatrixXd within = Eigen::MatrixXd::Zero(R, R);
  int within_count = 0;
  for (const auto &[spk, idx] : by_speaker) {
    Eigen::VectorXd smean = Eigen::VectorXd::Zero(R);
    for (int i : idx) smean += data[i];
    smean /= static_cast<double>(idx.size());
    between += (smean - mean) * (smean - mean).transpose();
    for (int i : idx) {
      within += (data[i] - smean) * (data[i] - smean).transpose();
      within_count++;
    }
  }
  between /= S;
  if (multi_session) {
    within /= std::max(within_count - S, 1);
  } else {
    between = 0.5 * total_cov;
    within = 0.5 * total_cov;
  }
  model.between = between + 1e-4 * cov_scale * Eigen::MatrixXd::Identity(R, R);
  model.within = within + 1e-4 * cov_scale * Eigen::MatrixXd::Identity(R, R);

  for (int iter = 0; iter < num_iters; iter++) {
    Eigen::LLT<Eigen::MatrixXd> llt_b(model.between);
    Eigen::LLT<Eigen::MatrixXd> llt_w(model.within);
    if (llt_b.info() != Eigen::Success || llt_w.info() != Eigen::Success)
      throw NumericalError("train_plda: covariance became non-PD");
    Eigen::MatrixXd b_inv = llt_b.solve(Eigen::MatrixXd::Identity(R, R));
    Eigen::MatrixXd w_inv = llt_w.solve(Eigen::MatrixXd::Identity(R, R));
    auto logdet = [](const Eigen::LLT<Eigen::MatrixXd> &llt, int n) {
      double v = 0.0;
      for (int i = 0; i < n; i++) v += 2.0 * std::log(llt.matrixL()(i, i));
      return v;
    };
    double logdet_b = logdet(llt_b, R), logdet_w = logdet(llt_w, R);

    double objective = 0.0;
    Eigen::VectorXd mu_acc = Eigen::VectorXd::Zero(R);
    std::vector<Eigen::VectorXd> post_means(S);
    std::vector<Eigen::MatrixXd> post_covs(S);
    int s_idx = 0;
    for (const auto &[spk, idx] : by_speaker) {
      const int n = static_cast<int>(idx.size());
      Eigen::MatrixXd precision = b_inv + n * w_inv;
      Eigen::LLT<Eigen::MatrixXd> llt_p(precision);
      Eigen::VectorXd zsum = Eigen::VectorXd::Zero(R);
      double quad = 0.0;
      for (int i : idx) {
        Eigen::VectorXd z = data[i] - model.mu;
        zsum += z;
        quad += z.dot(w_inv * z);
      }
      Eigen::VectorXd b_vec = w_inv * zsum;
      Eigen::VectorXd y_centered = llt_p.solve(b_vec);
      objective += -0.5 * n * R * std::log(2.0 * std::numbers::pi) -
                   0.5 * (logdet_b + n * logdet_w + logdet(llt_p, R)) -
                   0.5 * (quad - b_vec.dot(y_centered));
      post_means[s_idx] = model.mu + y_centered;
      post_covs[s_idx] = llt_p.solve(Eigen::MatrixXd::Identity(R, R));
      mu_acc += post_means[s_idx];
      s_idx++;
    }
    result.objectives.push_back(objective);

    // M-step.
    Eigen::VectorXd new_mu = mu_acc / S;
    Eigen::MatrixXd new_b = Eigen::MatrixXd::Zero(R, R);
    Eigen::MatrixXd new_w = Eigen::MatrixXd::Zero(R, R);
    s_idx = 0;
    for (const auto &[spk, idx] : by_speaker) {
      new_b += post_covs[s_idx] +
               (post_means[s_idx] - new_mu) * (post_means[s_idx] - new_mu).transpose();
      for (int i : idx)
        new_w += post_covs[s_idx] +
                 (data[i] - post_means[s_idx]) * (data[i] - post_means[s_idx]).transpose();
      s_idx++;
    }
    model.mu = new_mu;
    model.between = new_b / S;
    model.within = new_w / N;

    // Keep W invertible on degenerate data.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(model.within);
    double min_eig = ew.eigenvalues().minCoeff();
    if (min_eig < 1e-8) {
      model.within += (1e-8 - min_eig + 1e-12) * Eigen::MatrixXd::Identity(R, R);
      log_warn("train_plda: floored within-speaker covariance (min eigenvalue " +
               std::to_string(min_eig) + ")");
    }
  }
  model.validate();
  return result;
}

// PLDA model file: magic "SUSRPLDA", u32 R, u32 length_norm, norm_mean, mu,
// B, W as little-endian f64 arrays (row-major).
inline constexpr char kPldaMagic[9] = "SUSRPLDA";

inline void write_plda_file(const std::string &path, const PldaModel &model) {
  std::ofstream os = open_output(path);
  write_magic(os, kPldaMagic);
  const int R = model.rank();
  write_u32(os, static_cast<std::uint32_t>(R));
  write_u32(os, model.length_norm ? 1 : 0);
  Eigen::VectorXd norm_mean =
      model.norm_mean.size() == R ? model.norm_mean : Eigen::VectorXd::Zero(R);
  for (int i = 0; i < R; i++) write_f64(os, norm_mean(i));
  for (int i = 0; i < R; i++) write_f64(os, model.mu(i));
  for (int i = 0; i < R; i++)
    for (int j = 0; j < R; j++) write_f64(os, model.between(i, j));
  for (int i = 0; i < R; i++)
    for (int j = 0; j < R; j++) write_f64(os, model.within(i, j));
}

inline PldaModel read_plda_file(const std::string &path) {
  std::ifstream is = open_input(path);
  expect_magic(is, kPldaMagic);
  std::uint32_t R = read_u32(is);
  if (R == 0) throw DataError(path + ": zero PLDA rank");
  PldaModel model;
  model.length_norm = read_u32(is) != 0;
  model.norm_mean.resize(R);
  model.mu.resize(R);
  model.between.resize(R, R);
  model.within.resize(R, R);
  for (std::uint32_t i = 0; i < R; i++) model.norm_mean(i) = read_f64(is);
  for (std::uint32_t i = 0; i < R; i++) model.mu(i) = read_f64(is);
  for (std::uint32_t i = 0; i < R; i++)
    for (std::uint32_t j = 0; j < R; j++) model.between(i, j) = read_f64(is);
  for (std::uint32_t i = 0; i < R; i++)
    for (std::uint32_t j = 0; j < R; j++) model.within(i, j) = read_f64(is);
  model.validate();
  return model;
}

}  // namespace susr

#endif  // SUSR_PLDA_HPP
