// Copyright 2026 The GRIDS Authors
//
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

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "grids/embedding_store.hpp"
#include "grids/lid.hpp"

namespace grids {

/// Fold index per item; items sharing a group key always share a fold.
struct FoldAssignment {
  std::size_t n_folds = 0;
  std::vector<std::size_t> fold;
};

inline constexpr std::size_t kDefaultFolds = 5;

/// Greedy balanced grouped assignment: groups are visited by descending
/// size (ties by key) and each goes to the currently smallest fold. Ties
/// between equally small folds follow a seed-driven permutation of the fold
/// labels. Throws InputError when there are fewer groups than folds.
FoldAssignment assign_folds(std::span<const std::string> group_keys, std::size_t n_folds = kDefaultFolds,
                            std::uint64_t seed = 0);

struct LogisticOptions {
  double lambda = 1.0;  // L2 strength on the weights; the bias is unpenalized
  double gradient_tolerance = 1e-8;
  int max_iterations = 1000;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Maximises the L2-penalised log-likelihood
///   sum_i [y_i z_i - log(1 + e^{z_i})] - lambda/2 ||w||^2,  z = Xw + b
/// by damped Newton iterations from zero. Rows of `features` are samples,
/// labels are 0/1. Throws InputError when only one class is present.
LogisticModel train_logistic(const Eigen::MatrixXd& features, std::span<const int> labels,
                             const LogisticOptions& options = {});

/// Posterior of the positive class per row. Throws InputError on a dimension mismatch.
std::vector<double> score(const LogisticModel& model, const Eigen::MatrixXd& features);

/// Column statistics from training rows; constant columns use divisor 1.
struct FeatureScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;
  static FeatureScaler fit(const Eigen::MatrixXd& train);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
};

/// Mann-Whitney AUROC with mid-ranks for ties.
double auroc(std::span<const double> scores, std::span<const int> labels);
/// Average precision: sum over descending unique thresholds of (R_i - R_{i-1}) P_i.
double auprc(std::span<const double> scores, std::span<const int> labels);
/// FPR at the largest threshold whose TPR reaches `tpr_target` (tied scores
/// are admitted together).
double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels, double tpr_target = 0.95);

struct DetectionTask {
  std::string model_id;
  Perturbation attack = Perturbation::pgd_mse;
  int snr_db = 0;
  std::vector<LidFeatureVector> positives;  // adversarial
  std::vector<LidFeatureVector> negatives;  // pooled benign noise at the same SNR
  double success_rate = std::numeric_limits<double>::quiet_NaN();  // carried into the report
};

struct DetectionReport {
  double auroc = 0.0;
  double auprc = 0.0;
  double fpr_at_tpr95 = 0.0;
  double success_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t positives = 0;
  std::size_t negatives = 0;
  // Out-of-fold scores in task order (positives first, then negatives).
  std::vector<double> scores;
  std::vector<int> labels;
  std::vector<std::string> groups;
  FoldAssignment folds;
};

struct DetectionOptions {
  std::size_t n_folds = kDefaultFolds;
  LogisticOptions logistic;
};

/// Grouped K-fold cross-validation: per fold, standardize with training
/// statistics, fit, score the held-out fold; metrics come from the
/// concatenated out-of-fold scores.
DetectionReport run_detection(const DetectionTask& task, std::uint64_t seed = 0, const DetectionOptions& options = {});

}  // namespace grids
