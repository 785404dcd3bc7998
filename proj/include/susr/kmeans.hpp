// susr/kmeans.hpp

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

#ifndef SUSR_KMEANS_HPP
#define SUSR_KMEANS_HPP

#include <Eigen/Dense>
#include <limits>
#include <vector>

#include "susr/common.hpp"
#include "susr/rng.hpp"

namespace susr {

struct KMeansResult {
  Eigen::MatrixXd centers;          // k x D
  std::vector<int> assignments;     // per point, in [0, k)
  std::vector<double> sse_per_iter; // within-cluster SSE after each assignment pass
};

// Lloyd's algorithm with k-means++ seeding. Ties in nearest-center go to the
// lowest center index; a cluster that empties is re-seeded with the point
// farthest from its own center. Runs until assignments converge or max_iters.
inline KMeansResult kmeans(const Eigen::MatrixXd &points, int k, Rng &rng,
                           int max_iters = 100) {
  const int n = static_cast<int>(points.rows());
  const int dim = static_cast<int>(points.cols());
  if (k < 1) throw UsageError("kmeans: k must be >= 1");
  if (n < k)
    throw DataError("kmeans: fewer points (" + std::to_string(n) +
                    ") than clusters (" + std::to_string(k) + ")");

  KMeansResult result;
  result.centers.resize(k, dim);

  // k-means++ seeding.
  std::vector<double> dist2(n, std::numeric_limits<double>::infinity());
  int first = static_cast<int>(rng.uniform_index(n));
  result.centers.row(0) = points.row(first);
  for (int c = 1; c < k; c++) {
    double total = 0.0;
    for (int i = 0; i < n; i++) {
      double d = (points.row(i) - result.centers.row(c - 1)).squaredNorm();
      dist2[i] = std::min(dist2[i], d);
      total += dist2[i];
    }
    int chosen = n - 1;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      double acc = 0.0;
      for (int i = 0; i < n; i++) {
        acc += dist2[i];
        if (acc >= target) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = static_cast<int>(rng.uniform_index(n));
    }
    result.centers.row(c) = points.row(chosen);
  }

  result.assignments.assign(n, -1);
  std::vector<int> counts(k);
  for (int iter = 0; iter < max_iters; iter++) {
    // Assignment pass.
    bool changed = false;
    double sse = 0.0;
    for (int i = 0; i < n; i++) {
      int best = 0;
      double best_d = (points.row(i) - result.centers.row(0)).squaredNorm();
      for (int c = 1; c < k; c++) {
        double d = (points.row(i) - result.centers.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      sse += best_d;
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
    }
    result.sse_per_iter.push_back(sse);
    if (!changed) break;

    // Update pass.
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, dim);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; i++) {
      sums.row(result.assignments[i]) += points.row(i);
      counts[result.assignments[i]]++;
    }
    for (int c = 0; c < k; c++) {
      if (counts[c] > 0) {
        result.centers.row(c) = sums.row(c) / counts[c];
      } else {
        // Re-seed with the point farthest from its assigned center.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; i++) {
          double d = (points.row(i) -
                      result.centers.row(result.assignments[i])).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        result.centers.row(c) = points.row(far);
      }
    }
  }
  return result;
}

}  // namespace susr

#endif  // SUSR_KMEANS_HPP
