// susr/eval.hpp

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

#ifndef SUSR_EVAL_HPP
#define SUSR_EVAL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "susr/common.hpp"

namespace susr {

// One verification decision: (enrolled model, test utterance, label).
struct Trial {
  std::string model_id;
  std::string utt_id;
  bool is_target = false;
};

struct TrialSet {
  std::vector<Trial> trials;

  void validate() const {
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto &t : trials)
      if (!seen.emplace(t.model_id, t.utt_id).second)
        throw DataError("duplicate trial (" + t.model_id + ", " + t.utt_id + ")");
  }
};

using TrialKey = std::pair<std::string, std::string>;

struct ScoreSet {
  std::string system_id;
  std::map<TrialKey, double> scores;

  double at(const std::string &model_id, const std::string &utt_id) const {
    auto it = scores.find({model_id, utt_id});
    if (it == scores.end())
      throw DataError("score set '" + system_id + "' missing trial (" + model_id +
                      ", " + utt_id + ")");
    if (std::isnan(it->second))
      throw DataError("NaN score for trial (" + model_id + ", " + utt_id + ")");
    return it->second;
  }
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

struct DetPoint {
  double threshold = 0.0;
  double false_alarm_rate = 0.0;
  double miss_rate = 0.0;
};

struct DetCurve {
  std::vector<DetPoint> points;  // ordered by increasing threshold
};

namespace detail {

inline void split_by_label(const TrialSet &trials, const ScoreSet &scores,
                           std::vector<double> *target, std::vector<double> *nontarget) {
  for (const auto &t : trials.trials)
    (t.is_target ? target : nontarget)->push_back(scores.at(t.model_id, t.utt_id));
  if (target->empty()) throw DataError("trial set has no target trials");
  if (nontarget->empty()) throw DataError("trial set has no non-target trials");
}

// Error rates over all distinct thresholds plus one virtual threshold above
// the maximum (FAR 0, FRR 1). Accept iff score >= threshold.
struct ErrorProfile {
  std::vector<double> thresholds;
  std::vector<double> far;  // P(score >= t | non-target), non-increasing
  std::vector<double> frr;  // P(score <  t | target), non-decreasing
};

inline ErrorProfile error_profile(std::vector<double> target, std::vector<double> nontarget) {
  std::sort(target.begin(), target.end());
  std::sort(nontarget.begin(), nontarget.end());
  ErrorProfile prof;
  prof.thresholds.reserve(target.size() + nontarget.size() + 1);
  for (double s : target) prof.thresholds.push_back(s);
  for (double s : nontarget) prof.thresholds.push_back(s);
  std::sort(prof.thresholds.begin(), prof.thresholds.end());
  prof.thresholds.erase(std::unique(prof.thresholds.begin(), prof.thresholds.end()),
                        prof.thresholds.end());
  prof.thresholds.push_back(prof.thresholds.back() + 1.0);

  const double nt = static_cast<double>(target.size());
  const double nn = static_cast<double>(nontarget.size());
  for (double t : prof.thresholds) {
    auto below_tar = std::lower_bound(target.begin(), target.end(), t) - target.begin();
    auto below_non = std::lower_bound(nontarget.begin(), nontarget.end(), t) -
                     nontarget.begin();
    prof.far.push_back((nn - static_cast<double>(below_non)) / nn);
    prof.frr.push_back(static_cast<double>(below_tar) / nt);
  }
  return prof;
}

}  // namespace detail

// EER with linear interpolation between the thresholds bracketing the
// FAR/FRR crossing.
inline EerResult compute_eer(const TrialSet &trials, const ScoreSet &scores) {
  std::vector<double> target, nontarget;
  detail::split_by_label(trials, scores, &target, &nontarget);
  detail::ErrorProfile prof = detail::error_profile(std::move(target), std::move(nontarget));
  for (std::size_t i = 0; i < prof.thresholds.size(); i++) {
    double d = prof.far[i] - prof.frr[i];
    if (d > 0) continue;
    if (d == 0.0 || i == 0)
      return {prof.far[i], prof.thresholds[i]};
    double d_prev = prof.far[i - 1] - prof.frr[i - 1];
    double lambda = d_prev / (d_prev - d);
    return {prof.far[i - 1] + lambda * (prof.far[i] - prof.far[i - 1]),
            prof.thresholds[i - 1] +
                lambda * (prof.thresholds[i] - prof.thresholds[i - 1])};
  }
  throw NumericalError("compute_eer: no FAR/FRR crossing found");
}

// Monotone staircase of (threshold, FAR, FRR), downsampled to num_points by
// even index selection (first and last always kept).
inline DetCurve det_curve(const TrialSet &trials, const ScoreSet &scores, int num_points) {
  if (num_points < 2) throw UsageError("det_curve: need at least 2 points");
  std::vector<double> target, nontarget;
  detail::split_by_label(trials, scores, &target, &nontarget);
  detail::ErrorProfile prof = detail::error_profile(std::move(target), std::move(nontarget));
  const int n = static_cast<int>(prof.thresholds.size());
  DetCurve curve;
  if (n <= num_points) {
    for (int i = 0; i < n; i++)
      curve.points.push_back({prof.thresholds[i], prof.far[i], prof.frr[i]});
  } else {
    for (int k = 0; k < num_points; k++) {
      int i = static_cast<int>(static_cast<long long>(k) * (n - 1) / (num_points - 1));
      curve.points.push_back({prof.thresholds[i], prof.far[i], prof.frr[i]});
    }
  }
  return curve;
}

// Linear fusion alpha*a + (1-alpha)*b. With normalize set, each set is
// z-normalized over its own score pool first (the paper's fusion is raw).
inline ScoreSet fuse_scores(const ScoreSet &a, const ScoreSet &b, double alpha,
                            bool normalize = false) {
  if (alpha < 0.0 || alpha > 1.0) throw UsageError("fusion alpha must be in [0, 1]");
  if (a.scores.size() != b.scores.size())
    throw DataError("fuse_scores: trial key mismatch between '" + a.system_id +
                    "' and '" + b.system_id + "'");
  for (const auto &[key, v] : a.scores)
    if (b.scores.find(key) == b.scores.end())
      throw DataError("fuse_scores: trial (" + key.first + ", " + key.second +
                      ") missing from '" + b.system_id + "'");

  auto norm_params = [](const ScoreSet &s) {
    double mean = 0.0;
    for (const auto &[k, v] : s.scores) mean += v;
    mean /= static_cast<double>(s.scores.size());
    double var = 0.0;
    for (const auto &[k, v] : s.scores) var += (v - mean) * (v - mean);
    double stddev = std::sqrt(var / static_cast<double>(s.scores.size()));
    return std::make_pair(mean, stddev > 0 ? stddev : 1.0);
  };
  double a_mean = 0.0, a_std = 1.0, b_mean = 0.0, b_std = 1.0;
  if (normalize) {
    std::tie(a_mean, a_std) = norm_params(a);
    std::tie(b_mean, b_std) = norm_params(b);
  }

  ScoreSet fused;
  fused.system_id = "fused";
  for (const auto &[key, va] : a.scores) {
    double vb = b.scores.at(key);
    double na = normalize ? (va - a_mean) / a_std : va;
    double nb = normalize ? (vb - b_mean) / b_std : vb;
    fused.scores[key] = alpha * na + (1.0 - alpha) * nb;
  }
  return fused;
}

struct SweepResult {
  std::vector<std::pair<double, double>> points;  // (alpha, eer)
  double best_alpha = 0.0;
  double best_eer = 1.0;
};

// EER of the fused scores on the grid {0, step, ..., 1}; ties in the argmin
// go to the larger alpha.
inline SweepResult sweep_alpha(const ScoreSet &a, const ScoreSet &b,
                               const TrialSet &trials, double grid_step,
                               bool normalize = false) {
  if (grid_step <= 0.0 || grid_step > 1.0)
    throw UsageError("sweep_alpha: grid_step must be in (0, 1]");
  std::vector<double> alphas;
  for (int k = 0;; k++) {
    double alpha = k * grid_step;
    if (alpha >= 1.0 - 1e-12) break;
    alphas.push_back(alpha);
  }
  alphas.push_back(1.0);

  SweepResult result;
  for (double alpha : alphas) {
    double eer = compute_eer(trials, fuse_scores(a, b, alpha, normalize)).eer;
    result.points.emplace_back(alpha, eer);
    if (eer <= result.best_eer) {  // ascending grid: <= keeps the largest alpha
      result.best_eer = eer;
      result.best_alpha = alpha;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Text formats. Trial file: `model_id<TAB>utt_id<TAB>target|nontarget`.
// Score file: `model_id<TAB>utt_id<TAB>score` with '.' decimal and no
// exponent for |score| < 1e6.

inline std::string format_score(double v) {
  if (std::isnan(v) || std::isinf(v)) throw DataError("cannot format non-finite score");
  char buf[64];
  if (std::abs(v) < 1e6)
    std::snprintf(buf, sizeof(buf), "%.6f", v);
  else
    std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_trial_file(const std::string &path, const TrialSet &trials) {
  trials.validate();
  std::ofstream os = open_output(path, /*binary=*/false);
  for (const auto &t : trials.trials) {
    check_identifier(t.model_id, "model_id");
    check_identifier(t.utt_id, "utt_id");
    os << t.model_id << '\t' << t.utt_id << '\t'
       << (t.is_target ? "target" : "nontarget") << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

inline TrialSet read_trial_file(const std::string &path) {
  std::ifstream is = open_input(path, /*binary=*/false);
  TrialSet out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 3)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected `model<TAB>utt<TAB>target|nontarget`");
    Trial t;
    t.model_id = fields[0];
    t.utt_id = fields[1];
    if (fields[2] == "target")
      t.is_target = true;
    else if (fields[2] == "nontarget")
      t.is_target = false;
    else
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": trial label must be 'target' or 'nontarget', got '" +
                      fields[2] + "'");
    out.trials.push_back(std::move(t));
  }
  out.validate();
  return out;
}

inline void write_score_file(const std::string &path, const ScoreSet &scores) {
  std::ofstream os = open_output(path, /*binary=*/false);
  for (const auto &[key, v] : scores.scores) {
    check_identifier(key.first, "model_id");
    check_identifier(key.second, "utt_id");
    os << key.first << '\t' << key.second << '\t' << format_score(v) << '\n';
  }
  if (!os) throw DataError("failed writing " + path);
}

inline ScoreSet read_score_file(const std::string &path, const std::string &system_id = "") {
  std::ifstream is = open_input(path, /*binary=*/false);
  ScoreSet out;
  out.system_id = system_id.empty() ? path : system_id;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    lineno++;
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 3)
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected `model<TAB>utt<TAB>score`");
    double v = parse_double(fields[2], "score");
    if (std::isnan(v))
      throw DataError(path + ":" + std::to_string(lineno) + ": NaN score");
    if (!out.scores.emplace(TrialKey{fields[0], fields[1]}, v).second)
      throw DataError(path + ":" + std::to_string(lineno) + ": duplicate trial key");
  }
  if (out.scores.empty()) throw DataError(path + ": no scores");
  return out;
}

inline void write_det_csv(const std::string &path, const DetCurve &curve) {
  std::ofstream os = open_output(path, /*binary=*/false);
  os << "threshold,far,frr\n";
  for (const auto &p : curve.points)
    os << format_score(p.threshold) << ',' << format_score(p.false_alarm_rate) << ','
       << format_score(p.miss_rate) << '\n';
  if (!os) throw DataError("failed writing " + path);
}

inline void write_sweep_csv(const std::string &path, const SweepResult &sweep) {
  std::ofstream os = open_output(path, /*binary=*/false);
  os << "alpha,eer\n";
  for (const auto &[alpha, eer] : sweep.points)
    os << format_score(alpha) << ',' << format_score(eer) << '\n';
  if (!os) throw DataError("failed writing " + path);
}

}  // namespace susr

#endif  // SUSR_EVAL_HPP
