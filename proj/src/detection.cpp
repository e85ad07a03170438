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

#include "grids/detection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "grids/errors.hpp"

namespace grids {

FoldAssignment assign_folds(std::span<const std::string> group_keys, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw InputError("need at least 2 folds");
  std::map<std::string, std::size_t> counts;
  for (const auto& key : group_keys) ++counts[key];
  if (counts.size() < n_folds) {
    throw InputError("grouped cross-validation needs at least " + std::to_string(n_folds) + " distinct groups, got " +
                     std::to_string(counts.size()));
  }

  std::vector<std::pair<std::string, std::size_t>> groups(counts.begin(), counts.end());
  std::ranges::stable_sort(groups, [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::size_t> rank(n_folds);
  std::iota(rank.begin(), rank.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(rank.begin(), rank.end(), rng);

  std::vector<std::size_t> size(n_folds, 0);
  std::map<std::string, std::size_t> group_fold;
  for (const auto& [key, count] : groups) {
    std::size_t best = 0;
    for (std::size_t f = 1; f < n_folds; ++f) {
      if (size[f] < size[best] || (size[f] == size[best] && rank[f] < rank[best])) best = f;
    }
    size[best] += count;
    group_fold[key] = best;
  }

  FoldAssignment out;
  out.n_folds = n_folds;
  out.fold.reserve(group_keys.size());
  for (const auto& key : group_keys) out.fold.push_back(group_fold.at(key));
  return out;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Negative penalised log-likelihood.
double objective(const Eigen::MatrixXd& x, std::span<const int> y, const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double f = 0.5 * lambda * w.squaredNorm();
  for (Eigen::Index i = 0; i < z.size(); ++i) f += softplus(z[i]) - y[static_cast<std::size_t>(i)] * z[i];
  return f;
}

void check_two_classes(std::span<const int> labels, const char* what) {
  bool pos = false, neg = false;
  for (int l : labels) {
    if (l == 1) pos = true;
    else if (l == 0) neg = true;
    else throw InputError(std::string(what) + ": labels must be 0 or 1");
  }
  if (!pos || !neg) throw InputError(std::string(what) + " needs both classes present");
}

}  // namespace

LogisticModel train_logistic(const Eigen::MatrixXd& x, std::span<const int> labels, const LogisticOptions& options) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw InputError("train_logistic: rows and labels differ");
  check_two_classes(labels, "logistic regression training");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(p);
  m.bias = 0.0;
  double f = objective(x, labels, m.weights, m.bias, options.lambda);
  for (int it = 0;; ++it) {
    const Eigen::VectorXd z = (x * m.weights).array() + m.bias;
    Eigen::VectorXd resid(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = sigmoid(z[i]);
      resid[i] = s - labels[static_cast<std::size_t>(i)];
      curv[i] = s * (1.0 - s);
    }
    Eigen::VectorXd grad(p + 1);
    grad.head(p) = x.transpose() * resid + options.lambda * m.weights;
    grad[p] = resid.sum();
    m.gradient_norm = grad.norm();
    m.iterations = it;
    if (m.gradient_norm <= options.gradient_tolerance || it >= options.max_iterations) break;

    Eigen::MatrixXd hess(p + 1, p + 1);
    const Eigen::MatrixXd xw = x.array().colwise() * curv.array();
    hess.topLeftCorner(p, p) = x.transpose() * xw;
    hess.topLeftCorner(p, p).diagonal().array() += options.lambda;
    hess.block(0, p, p, 1) = xw.colwise().sum().transpose();
    hess.block(p, 0, 1, p) = xw.colwise().sum();
    hess(p, p) = curv.sum();
    // Saturated scores make the bias curvature vanish; keep the system solvable.
    hess(p, p) += 1e-12;

    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    double t = 1.0;
    Eigen::VectorXd w_new;
    double b_new = 0.0;
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      w_new = m.weights - t * step.head(p);
      b_new = m.bias - t * step[p];
      f_new = objective(x, labels, w_new, b_new, options.lambda);
      if (f_new <= f - 1e-4 * t * grad.dot(step)) break;
    }
    if (!(f_new <= f)) break;  // no further progress at machine precision
    m.weights = w_new;
    m.bias = b_new;
    f = f_new;
  }
  return m;
}

std::vector<double> score(const LogisticModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.weights.size()) {
    throw InputError("score: feature dimension " + std::to_string(features.cols()) + ", model expects " +
                     std::to_string(model.weights.size()));
  }
  const Eigen::VectorXd z = (features * model.weights).array() + model.bias;
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(z[i]);
  return out;
}

FeatureScaler FeatureScaler::fit(const Eigen::MatrixXd& train) {
  FeatureScaler s;
  s.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(train.rows())).sqrt().transpose();
  for (Eigen::Index c = 0; c < s.scale.size(); ++c) {
    if (!(s.scale[c] > 1e-12)) s.scale[c] = 1.0;
  }
  return s;
}

Eigen::MatrixXd FeatureScaler::apply(const Eigen::MatrixXd& x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

namespace {

struct ThresholdSweep {
  // Cumulative counts at each descending unique threshold.
  std::vector<std::size_t> tp, fp;
  std::size_t positives = 0, negatives = 0;
};

ThresholdSweep sweep_thresholds(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ThresholdSweep s;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (labels[order[i]] == 1) ++tp;
    else ++fp;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[order[i]]) {
      s.tp.push_back(tp);
      s.fp.push_back(fp);
    }
  }
  s.positives = tp;
  s.negatives = fp;
  return s;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw InputError("scores and labels differ in length");
  check_two_classes(labels, "AUROC");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        pos_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(scores.size() - n_pos);
  const double np = static_cast<double>(n_pos);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg);
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
  const ThresholdSweep s = sweep_thresholds(scores, labels);
  if (s.positives == 0) throw InputError("AUPRC needs at least one positive");
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < s.tp.size(); ++i) {
    const double recall = static_cast<double>(s.tp[i]) / static_cast<double>(s.positives);
    const double precision = static_cast<double>(s.tp[i]) / static_cast<double>(s.tp[i] + s.fp[i]);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double fpr_at_tpr(std::span<const double> scores, std::span<const int> labels, double tpr_target) {
  check_two_classes(labels, "FPR at TPR");
  const ThresholdSweep s = sweep_thresholds(scores, labels);
  for (std::size_t i = 0; i < s.tp.size(); ++i) {
    if (static_cast<double>(s.tp[i]) >= tpr_target * static_cast<double>(s.positives)) {
      return static_cast<double>(s.fp[i]) / static_cast<double>(s.negatives);
    }
  }
  return 1.0;
}

DetectionReport run_detection(const DetectionTask& task, std::uint64_t seed, const DetectionOptions& options) {
  if (task.positives.empty() || task.negatives.empty()) {
    throw InputError("detection task " + task.model_id + "/" + std::string(to_string(task.attack)) + "/" +
                     std::to_string(task.snr_db) + " needs both positives and negatives");
  }
  DetectionReport rep;
  rep.positives = task.positives.size();
  rep.negatives = task.negatives.size();
  rep.success_rate = task.success_rate;
  const std::size_t n = rep.positives + rep.negatives;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kLayerCount));
  std::size_t row = 0;
  for (const auto* set : {&task.positives, &task.negatives}) {
    const int label = set == &task.positives ? 1 : 0;
    for (const auto& v : *set) {
      for (std::size_t l = 0; l < kLayerCount; ++l) x(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(l)) = v.values[l];
      rep.labels.push_back(label);
      rep.groups.push_back(v.normalized_id);
      ++row;
    }
  }
  rep.folds = assign_folds(rep.groups, options.n_folds, seed);
  rep.scores.assign(n, 0.0);

  for (std::size_t f = 0; f < options.n_folds; ++f) {
    std::vector<Eigen::Index> train, test;
    std::set<std::string> train_groups;
    for (std::size_t i = 0; i < n; ++i) {
      if (rep.folds.fold[i] == f) {
        test.push_back(static_cast<Eigen::Index>(i));
      } else {
        train.push_back(static_cast<Eigen::Index>(i));
        train_groups.insert(rep.groups[i]);
      }
    }
    for (Eigen::Index i : test) {
      if (train_groups.count(rep.groups[static_cast<std::size_t>(i)])) {
        throw ComputationError("group '" + rep.groups[static_cast<std::size_t>(i)] + "' leaks into fold " +
                               std::to_string(f) + " training data");
      }
    }
    const Eigen::MatrixXd x_train = x(train, Eigen::all);
    std::vector<int> y_train;
    for (Eigen::Index i : train) y_train.push_back(rep.labels[static_cast<std::size_t>(i)]);
    try {
      check_two_classes(y_train, "fold training data");
    } catch (const InputError& e) {
      throw ComputationError("fold " + std::to_string(f) + ": " + e.what());
    }
    const FeatureScaler scaler = FeatureScaler::fit(x_train);
    const LogisticModel model = train_logistic(scaler.apply(x_train), y_train, options.logistic);
    const std::vector<double> s = score(model, scaler.apply(x(test, Eigen::all)));
    for (std::size_t t = 0; t < test.size(); ++t) rep.scores[static_cast<std::size_t>(test[t])] = s[t];
  }

  rep.auroc = auroc(rep.scores, rep.labels);
  rep.auprc = auprc(rep.scores, rep.labels);
  rep.fpr_at_tpr95 = fpr_at_tpr(rep.scores, rep.labels, 0.95);
  return rep;
}

}  // namespace grids
