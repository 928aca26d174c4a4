#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "ttop/outcome.hpp"

namespace ttop {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr int kNumCovariates = 4;
inline constexpr int kNumBaselineFeatures = 8;  // 1, t, 2TTO, 3TTO, x_b, x_p, hand, home
inline constexpr int kNumTimes = 27;

inline constexpr std::array<std::string_view, kNumCovariates> kCovariateNames = {"x_b", "x_p", "hand", "home"};

/// Covariate vector x = (x_b, x_p, hand, home). x_b and x_p are logit
/// batter and pitcher quality.
struct PlateState {
  double x_b = 0.0;
  double x_p = 0.0;
  int hand = 0;
  int home = 0;

  Eigen::Vector4d vec() const { return {x_b, x_p, static_cast<double>(hand), static_cast<double>(home)}; }
};

inline int second_time_indicator(int t) { return (t >= 10 && t <= 18) ? 1 : 0; }
inline int third_time_indicator(int t) { return (t >= 19 && t <= 27) ? 1 : 0; }

enum class ModelVariant { BaselineConstrained, BaselineDiffuse, Indicator, Hierarchical };

std::string_view variant_name(ModelVariant v);
ModelVariant parse_variant(std::string_view name);

struct ModelSpec {
  ModelVariant variant = ModelVariant::BaselineConstrained;
  int n_pitchers = 0;  // hierarchical group sizes
  int n_batters = 0;
  double half_t_dof = 7.0;
  double half_t_scale = 1.0;
  double diffuse_variance = 25.0;
};

/// Flat parameter layout shared by the natural (constrained) and the
/// unconstrained vector of a variant. Offsets are -1 for absent blocks.
struct ParamLayout {
  Index size = 0;
  Index alpha0 = -1, alpha1 = -1, beta2 = -1, beta3 = -1;
  Index eta = -1;        // eta + 4*k + j
  Index alpha_t = -1;    // alpha_t + 27*k + (t-1)
  Index sigma2 = -1;     // sigma2 + 6*c + k, c = 0..3
  Index u_pitcher = -1;  // u_pitcher + 6*P*c + P*k + p, c = 0 (alpha0), 1 (alpha1)
  Index u_batter = -1;   // u_batter + 6*B*c + B*k + b, c = 0 (beta2), 1 (beta3)
  int n_pitchers = 0;
  int n_batters = 0;
  std::vector<std::string> names;

  static ParamLayout make(const ModelSpec& spec, bool with_names = true);
};

/// Design row for one plate appearance. Baseline variants give
/// (1, t, 2TTO, 3TTO, x_b, x_p, hand, home); the indicator variant gives 27
/// one-hot t columns followed by the covariates.
VectorXd design_row(int t, const PlateState& state, ModelVariant variant);

struct Observation {
  int t = 1;
  PlateState x;
  Outcome y = Outcome::Out;
  int pitcher = 0;
  int batter = 0;
  int game = 0;
};

/// Immutable column-oriented view of a set of observations.
class Dataset {
 public:
  explicit Dataset(std::span<const Observation> obs);

  Index size() const { return design_.rows(); }
  const MatrixXd& design() const { return design_; }          // n x 8
  const MatrixXd& outcome_onehot() const { return onehot_; }  // n x 6, non-out categories
  const MatrixXd& design_outcome_cross() const { return xty_; }  // design^T * onehot, 8 x 6
  const VectorXi& t() const { return t_; }
  const VectorXi& outcome() const { return y_; }
  const VectorXi& pitcher() const { return pitcher_; }
  const VectorXi& batter() const { return batter_; }
  int n_pitchers() const { return n_pitchers_; }
  int n_batters() const { return n_batters_; }

 private:
  MatrixXd design_;
  MatrixXd onehot_;
  MatrixXd xty_;
  VectorXi t_, y_, pitcher_, batter_;
  int n_pitchers_ = 0;
  int n_batters_ = 0;
};

/// Baseline coefficients in natural units, one column per non-out outcome.
struct BaselineCoefficients {
  Eigen::Matrix<double, 1, kNumNonOut> alpha0 = Eigen::Matrix<double, 1, kNumNonOut>::Zero();
  Eigen::Matrix<double, 1, kNumNonOut> alpha1 = Eigen::Matrix<double, 1, kNumNonOut>::Zero();
  Eigen::Matrix<double, 1, kNumNonOut> beta2 = Eigen::Matrix<double, 1, kNumNonOut>::Zero();
  Eigen::Matrix<double, 1, kNumNonOut> beta3 = Eigen::Matrix<double, 1, kNumNonOut>::Zero();
  Eigen::Matrix<double, kNumCovariates, kNumNonOut> eta = Eigen::Matrix<double, kNumCovariates, kNumNonOut>::Zero();

  /// Natural parameter vector for a baseline variant (length 48).
  VectorXd to_natural() const;
  static BaselineCoefficients from_natural(const VectorXd& natural);
};

/// Per-t additive linear predictor (27 x 6) plus the covariate coefficients;
/// enough to evaluate outcome probabilities at any (t, x). Hierarchical
/// variants use the hypermeans.
struct TimeProfile {
  Eigen::Matrix<double, kNumTimes, kNumNonOut> time_effect;
  Eigen::Matrix<double, kNumCovariates, kNumNonOut> eta;
};

TimeProfile time_profile(const VectorXd& natural, const ModelSpec& spec);

/// Softmax over (0, eta_2..eta_7): category 1 is the reference with
/// linear predictor fixed at zero.
template <typename Scalar>
Eigen::Matrix<Scalar, kNumOutcomes, 1> softmax_with_reference(const Eigen::Matrix<Scalar, kNumNonOut, 1>& lin) {
  using std::exp;
  const Scalar m = std::max(Scalar(0), lin.maxCoeff());
  Eigen::Matrix<Scalar, kNumOutcomes, 1> p;
  p[0] = exp(-m);
  for (int k = 0; k < kNumNonOut; ++k) p[k + 1] = exp(lin[k] - m);
  return p / p.sum();
}

Eigen::Matrix<double, kNumOutcomes, 1> category_probabilities(const TimeProfile& profile, int t,
                                                               const PlateState& state);

Eigen::Matrix<double, kNumOutcomes, 1> category_probabilities(const VectorXd& natural, int t,
                                                               const PlateState& state, const ModelSpec& spec);

/// Natural parameters from unconstrained ones and back.
VectorXd constrain(const VectorXd& unconstrained, const ModelSpec& spec);
VectorXd unconstrain(const VectorXd& natural, const ModelSpec& spec);

/// Log-likelihood at natural parameters; `grad` (if non-null) receives the
/// gradient with respect to the natural parameters.
double log_likelihood(const VectorXd& natural, const Dataset& data, const ModelSpec& spec,
                      VectorXd* grad = nullptr);

/// Log prior density of the unconstrained parameters, including the
/// log-Jacobian of the positivity transforms.
double log_prior(const VectorXd& unconstrained, const ModelSpec& spec, VectorXd* grad = nullptr);

double log_posterior_and_grad(const VectorXd& unconstrained, const Dataset& data, const ModelSpec& spec,
                              VectorXd& grad);

/// Per-row outcome probabilities (n x 7) at natural parameters.
MatrixXd outcome_probabilities(const VectorXd& natural, const Dataset& data, const ModelSpec& spec);

/// Posterior in unconstrained space, in the shape the sampler expects.
/// Log posterior in the sampler's coordinates. For the baseline variants
/// these replace alpha0, beta2, beta3 with the linear predictor's level at
/// the middle batter of each time through the order (t = 5, 14, 23) and the
/// data's mean covariates, which removes most of their coupling with the
/// slope and with eta. The map has unit Jacobian; other variants sample the
/// model's unconstrained vector directly.
class PosteriorTarget {
 public:
  PosteriorTarget(const Dataset& data, ModelSpec spec);

  Index dim() const { return layout_.size; }
  double log_density_grad(const VectorXd& w, VectorXd& grad) const;
  VectorXd constrain(const VectorXd& w) const { return ttop::constrain(to_unconstrained(w), spec_); }
  const std::vector<std::string>& param_names() const { return layout_.names; }
  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }

  /// Sampler coordinates to the model's unconstrained vector and back.
  VectorXd to_unconstrained(const VectorXd& w) const;
  VectorXd from_unconstrained(const VectorXd& u) const;

 private:
  bool centered() const;

  const Dataset* data_;
  Eigen::Matrix<double, kNumCovariates, 1> x_mean_;
  ModelSpec spec_;
  ParamLayout layout_;
};

}  // namespace ttop
