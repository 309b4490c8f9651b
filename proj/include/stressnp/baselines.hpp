#pragma once

// General (non-personalised) classifiers and min-max scaling.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "json.hpp"
#include "stressnp/features.hpp"

namespace stressnp {

struct ScalerParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;
};

ScalerParams scaler_fit(const RowMatrix& x_train);
/// x' = 2 (x - min) / (max - min) - 1, constant columns map to 0, no clipping.
RowMatrix scaler_apply(const ScalerParams& p, const RowMatrix& x);

// ---------------------------------------------------------------------------
// L1-penalised logistic regression

struct LassoOptions {
  double C = 1.0;
  double rel_tol = 1e-9;
  int max_iter = 100000;
};

struct LassoModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double C = 1.0;
  int iterations = 0;
};

/// ||w||_1 + C * sum log(1 + exp(-yt (w.x + b))), yt in {-1, +1}.
double lasso_objective(const Eigen::VectorXd& w, double b, const RowMatrix& x,
                       const Eigen::VectorXd& y, double C);

/// Accelerated proximal gradient with backtracking and function-value
/// restarts; the bias is not penalised. Throws ValidationError on
/// non-finite input.
LassoModel lasso_train(const RowMatrix& x, const Eigen::VectorXd& y,
                       const LassoOptions& opts = {});
Eigen::VectorXd lasso_proba(const LassoModel& m, const RowMatrix& x);

// ---------------------------------------------------------------------------
// RBF support vector machine

struct SvmOptions {
  double C = 1.0;
  double gamma = 0.0;  // <= 0 selects 1 / n_features
  double tol = 1e-3;
  int platt_folds = 3;
  std::uint64_t seed = 0;
  bool probability = true;
};

struct SvmModel {
  RowMatrix support_vectors;
  Eigen::VectorXd dual_coef;  // alpha_i * yt_i
  double bias = 0.0;
  double gamma = 0.0;
  double C = 1.0;
  double platt_a = 0.0;
  double platt_b = 0.0;
};

struct SmoResult {
  Eigen::VectorXd alpha;
  double bias = 0.0;
  int iterations = 0;
};

double rbf_kernel(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                  const Eigen::Ref<const Eigen::RowVectorXd>& b, double gamma);

/// Soft-margin dual by SMO with second-order working-set selection.
/// `yt` holds labels in {-1, +1}; returns alpha in [0, C].
SmoResult smo_solve(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& yt,
                    double C, double tol);

/// Platt sigmoid P(y=1|f) = 1 / (1 + exp(A f + B)) fitted by Newton's method
/// with regularised targets.
std::pair<double, double> platt_fit(const Eigen::VectorXd& decision,
                                    const Eigen::VectorXd& y);

/// Throws ParameterError when only one class is present.
SvmModel svm_train(const RowMatrix& x, const Eigen::VectorXd& y,
                   const SvmOptions& opts = {});
Eigen::VectorXd svm_decision(const SvmModel& m, const RowMatrix& x);
Eigen::VectorXd svm_proba(const SvmModel& m, const RowMatrix& x);

// ---------------------------------------------------------------------------
// k-nearest neighbours

struct KnnModel {
  RowMatrix x;
  Eigen::VectorXd y;
  int k = 20;
};

/// Throws ParameterError for an empty training set or k outside [1, n].
KnnModel knn_fit(const RowMatrix& x, const Eigen::VectorXd& y, int k = 20);
/// Fraction of positives among the k nearest rows (Euclidean); distance
/// ties go to the lower training index.
Eigen::VectorXd knn_proba(const KnnModel& m, const RowMatrix& x);

// ---------------------------------------------------------------------------
// Serialisation

using GeneralModel = std::variant<LassoModel, SvmModel, KnnModel>;

nlohmann::json to_json(const GeneralModel& m, const ScalerParams* scaler = nullptr);
GeneralModel general_model_from_json(const nlohmann::json& j);
Eigen::VectorXd predict_proba(const GeneralModel& m, const RowMatrix& x);

}  // namespace stressnp
