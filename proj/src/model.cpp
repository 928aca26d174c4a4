#include "ttop/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ttop/errors.hpp"

namespace ttop {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

double normal_lpdf(double x, double variance) {
  return -kLogSqrt2Pi - 0.5 * std::log(variance) - 0.5 * x * x / variance;
}

/// log of the half-Student-t density (positive support) with scale s.
double half_t_lpdf(double x, double dof, double scale) {
  const double z = x / scale;
  return std::numbers::ln2 + std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi) - std::log(scale) - 0.5 * (dof + 1.0) * std::log1p(z * z / dof);
}

void check_layout(const VectorXd& v, const ParamLayout& layout) {
  if (v.size() != layout.size)
    throw ArgumentError("parameter vector has length " + std::to_string(v.size()) + ", layout expects " +
                        std::to_string(layout.size));
}

void check_finite(const VectorXd& v) {
  for (Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) throw EvaluationError("non-finite parameter at index " + std::to_string(i), int(i));
}

std::string outcome_tag(int k) { return std::string(kOutcomeCodes[k + 1]); }

void linear_predictor(const VectorXd& v, const Dataset& data, const ModelSpec& spec, const ParamLayout& l,
                      MatrixXd& lin) {
  const Index n = data.size();
  const MatrixXd& X = data.design();
  const auto& t = data.t();
  Eigen::Matrix<double, kNumCovariates, kNumNonOut> eta;
  for (int k = 0; k < kNumNonOut; ++k) eta.col(k) = v.segment<4>(l.eta + 4 * k);

  lin.resize(n, kNumNonOut);
  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
    case ModelVariant::BaselineDiffuse: {
      Eigen::Matrix<double, kNumBaselineFeatures, kNumNonOut> coef;
      coef.row(0) = v.segment<6>(l.alpha0).transpose();
      coef.row(1) = v.segment<6>(l.alpha1).transpose();
      coef.row(2) = v.segment<6>(l.beta2).transpose();
      coef.row(3) = v.segment<6>(l.beta3).transpose();
      coef.bottomRows<4>() = eta;
      lin.noalias() = X * coef;
      break;
    }
    case ModelVariant::Indicator: {
      lin.noalias() = X.rightCols<4>() * eta;
      for (Index i = 0; i < n; ++i)
        for (int k = 0; k < kNumNonOut; ++k) lin(i, k) += v[l.alpha_t + kNumTimes * k + t[i] - 1];
      break;
    }
    case ModelVariant::Hierarchical: {
      lin.noalias() = X.rightCols<4>() * eta;
      const Index P = l.n_pitchers, B = l.n_batters;
      const auto& pid = data.pitcher();
      const auto& bid = data.batter();
      for (Index i = 0; i < n; ++i)
        for (int k = 0; k < kNumNonOut; ++k)
          lin(i, k) += v[l.u_pitcher + P * k + pid[i]] + v[l.u_pitcher + 6 * P + P * k + pid[i]] * t[i] +
                       v[l.u_batter + B * k + bid[i]] * X(i, 2) + v[l.u_batter + 6 * B + B * k + bid[i]] * X(i, 3);
      break;
    }
  }
}

/// Per-thread buffers so repeated evaluations on the same data do not
/// allocate (and page-fault) fresh n x 6 matrices every call.
struct Workspace {
  MatrixXd lin, expo, resid;
  VectorXd denom;
};

Workspace& workspace() {
  thread_local Workspace ws;
  return ws;
}

}  // namespace

std::string_view variant_name(ModelVariant v) {
  switch (v) {
    case ModelVariant::BaselineConstrained: return "baseline";
    case ModelVariant::BaselineDiffuse: return "diffuse";
    case ModelVariant::Indicator: return "indicator";
    case ModelVariant::Hierarchical: return "hierarchical";
  }
  return "?";
}

ModelVariant parse_variant(std::string_view name) {
  if (name == "baseline" || name == "baseline_constrained") return ModelVariant::BaselineConstrained;
  if (name == "diffuse" || name == "baseline_diffuse") return ModelVariant::BaselineDiffuse;
  if (name == "indicator") return ModelVariant::Indicator;
  if (name == "hierarchical") return ModelVariant::Hierarchical;
  throw ArgumentError("unknown model variant '" + std::string(name) + "'");
}

ParamLayout ParamLayout::make(const ModelSpec& spec, bool with_names) {
  ParamLayout l;
  Index count = 0;
  auto add = [&](auto&& make_name) {
    if (with_names) l.names.push_back(make_name());
    ++count;
  };
  auto block = [&](const char* base) {
    const Index off = count;
    for (int k = 0; k < kNumNonOut; ++k) add([&] { return std::string(base) + "[" + outcome_tag(k) + "]"; });
    return off;
  };
  auto eta_block = [&] {
    const Index off = count;
    for (int k = 0; k < kNumNonOut; ++k)
      for (int j = 0; j < kNumCovariates; ++j)
        add([&] { return "eta[" + outcome_tag(k) + "][" + std::string(kCovariateNames[j]) + "]"; });
    return off;
  };

  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
    case ModelVariant::BaselineDiffuse:
      l.alpha0 = block("alpha0");
      l.alpha1 = block("alpha1");
      l.beta2 = block("beta2");
      l.beta3 = block("beta3");
      l.eta = eta_block();
      break;
    case ModelVariant::Indicator:
      l.alpha_t = 0;
      for (int k = 0; k < kNumNonOut; ++k)
        for (int t = 1; t <= kNumTimes; ++t)
          add([&] { return "alpha_t[" + outcome_tag(k) + "][" + std::to_string(t) + "]"; });
      l.eta = eta_block();
      break;
    case ModelVariant::Hierarchical: {
      if (spec.n_pitchers < 1 || spec.n_batters < 1)
        throw ArgumentError("hierarchical model needs at least one pitcher and one batter");
      l.n_pitchers = spec.n_pitchers;
      l.n_batters = spec.n_batters;
      l.alpha0 = block("alpha0");
      l.alpha1 = block("alpha1");
      l.beta2 = block("beta2");
      l.beta3 = block("beta3");
      l.eta = eta_block();
      l.sigma2 = count;
      for (int c = 0; c < 4; ++c)
        for (int k = 0; k < kNumNonOut; ++k)
          add([&] { return "sigma2[" + std::to_string(c) + "][" + outcome_tag(k) + "]"; });
      l.u_pitcher = count;
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < kNumNonOut; ++k)
          for (int p = 0; p < spec.n_pitchers; ++p)
            add([&] {
              return "u_pitcher[" + std::to_string(c) + "][" + outcome_tag(k) + "][" + std::to_string(p) + "]";
            });
      l.u_batter = count;
      for (int c = 2; c < 4; ++c)
        for (int k = 0; k < kNumNonOut; ++k)
          for (int b = 0; b < spec.n_batters; ++b)
            add([&] {
              return "u_batter[" + std::to_string(c) + "][" + outcome_tag(k) + "][" + std::to_string(b) + "]";
            });
      break;
    }
  }
  l.size = count;
  return l;
}

VectorXd design_row(int t, const PlateState& state, ModelVariant variant) {
  if (t < 1 || t > kNumTimes) throw ArgumentError("batter sequence number t=" + std::to_string(t) + " outside 1..27");
  if (variant == ModelVariant::Indicator) {
    VectorXd row = VectorXd::Zero(kNumTimes + kNumCovariates);
    row[t - 1] = 1.0;
    row.tail<kNumCovariates>() = state.vec();
    return row;
  }
  VectorXd row(kNumBaselineFeatures);
  row << 1.0, t, second_time_indicator(t), third_time_indicator(t), state.x_b, state.x_p, state.hand, state.home;
  return row;
}

Dataset::Dataset(std::span<const Observation> obs) {
  const auto n = static_cast<Index>(obs.size());
  design_.resize(n, kNumBaselineFeatures);
  onehot_ = MatrixXd::Zero(n, kNumNonOut);
  t_.resize(n);
  y_.resize(n);
  pitcher_.resize(n);
  batter_.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& o = obs[i];
    design_.row(i) = design_row(o.t, o.x, ModelVariant::BaselineConstrained).transpose();
    t_[i] = o.t;
    y_[i] = index(o.y);
    if (o.y != Outcome::Out) onehot_(i, index(o.y) - 1) = 1.0;
    if (o.pitcher < 0 || o.batter < 0) throw ArgumentError("negative player index");
    pitcher_[i] = o.pitcher;
    batter_[i] = o.batter;
    n_pitchers_ = std::max(n_pitchers_, o.pitcher + 1);
    n_batters_ = std::max(n_batters_, o.batter + 1);
  }
  xty_ = design_.transpose() * onehot_;
}

VectorXd BaselineCoefficients::to_natural() const {
  VectorXd v(48);
  v.segment<6>(0) = alpha0.transpose();
  v.segment<6>(6) = alpha1.transpose();
  v.segment<6>(12) = beta2.transpose();
  v.segment<6>(18) = beta3.transpose();
  for (int k = 0; k < kNumNonOut; ++k) v.segment<4>(24 + 4 * k) = eta.col(k);
  return v;
}

BaselineCoefficients BaselineCoefficients::from_natural(const VectorXd& v) {
  if (v.size() < 48) throw ArgumentError("baseline coefficient vector too short");
  BaselineCoefficients c;
  c.alpha0 = v.segment<6>(0).transpose();
  c.alpha1 = v.segment<6>(6).transpose();
  c.beta2 = v.segment<6>(12).transpose();
  c.beta3 = v.segment<6>(18).transpose();
  for (int k = 0; k < kNumNonOut; ++k) c.eta.col(k) = v.segment<4>(24 + 4 * k);
  return c;
}

TimeProfile time_profile(const VectorXd& natural, const ModelSpec& spec) {
  const ParamLayout layout = ParamLayout::make(spec, false);
  check_layout(natural, layout);
  TimeProfile prof;
  for (int k = 0; k < kNumNonOut; ++k) prof.eta.col(k) = natural.segment<4>(layout.eta + 4 * k);
  if (spec.variant == ModelVariant::Indicator) {
    for (int k = 0; k < kNumNonOut; ++k) prof.time_effect.col(k) = natural.segment<kNumTimes>(layout.alpha_t + kNumTimes * k);
    return prof;
  }
  for (int t = 1; t <= kNumTimes; ++t)
    for (int k = 0; k < kNumNonOut; ++k)
      prof.time_effect(t - 1, k) = natural[layout.alpha0 + k] + natural[layout.alpha1 + k] * t +
                                   natural[layout.beta2 + k] * second_time_indicator(t) +
                                   natural[layout.beta3 + k] * third_time_indicator(t);
  return prof;
}

Eigen::Matrix<double, kNumOutcomes, 1> category_probabilities(const TimeProfile& profile, int t,
                                                               const PlateState& state) {
  if (t < 1 || t > kNumTimes) throw ArgumentError("batter sequence number t=" + std::to_string(t) + " outside 1..27");
  const Eigen::Matrix<double, kNumNonOut, 1> lin =
      profile.time_effect.row(t - 1).transpose() + profile.eta.transpose() * state.vec();
  return softmax_with_reference<double>(lin);
}

Eigen::Matrix<double, kNumOutcomes, 1> category_probabilities(const VectorXd& natural, int t,
                                                               const PlateState& state, const ModelSpec& spec) {
  return category_probabilities(time_profile(natural, spec), t, state);
}

VectorXd constrain(const VectorXd& u, const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(u, l);
  VectorXd v = u;
  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
      v.segment<6>(l.alpha1) = u.segment<6>(l.alpha1).array().exp();
      break;
    case ModelVariant::BaselineDiffuse:
    case ModelVariant::Indicator:
      break;
    case ModelVariant::Hierarchical: {
      v.segment<24>(l.sigma2) = u.segment<24>(l.sigma2).array().exp();
      const Index P = l.n_pitchers, B = l.n_batters;
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < kNumNonOut; ++k) {
          const double mu = u[(c == 0 ? l.alpha0 : l.alpha1) + k];
          const double sd = std::sqrt(v[l.sigma2 + 6 * c + k]);
          v.segment(l.u_pitcher + 6 * P * c + P * k, P).array() =
              mu + sd * u.segment(l.u_pitcher + 6 * P * c + P * k, P).array();
        }
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < kNumNonOut; ++k) {
          const double mu = u[(c == 0 ? l.beta2 : l.beta3) + k];
          const double sd = std::sqrt(v[l.sigma2 + 6 * (c + 2) + k]);
          v.segment(l.u_batter + 6 * B * c + B * k, B).array() =
              mu + sd * u.segment(l.u_batter + 6 * B * c + B * k, B).array();
        }
      break;
    }
  }
  return v;
}

VectorXd unconstrain(const VectorXd& v, const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(v, l);
  VectorXd u = v;
  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
      if ((v.segment<6>(l.alpha1).array() <= 0.0).any()) throw DomainError("alpha1 must be positive");
      u.segment<6>(l.alpha1) = v.segment<6>(l.alpha1).array().log();
      break;
    case ModelVariant::BaselineDiffuse:
    case ModelVariant::Indicator:
      break;
    case ModelVariant::Hierarchical: {
      if ((v.segment<24>(l.sigma2).array() <= 0.0).any()) throw DomainError("variances must be positive");
      u.segment<24>(l.sigma2) = v.segment<24>(l.sigma2).array().log();
      const Index P = l.n_pitchers, B = l.n_batters;
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < kNumNonOut; ++k) {
          const double mu = v[(c == 0 ? l.alpha0 : l.alpha1) + k];
          const double sd = std::sqrt(v[l.sigma2 + 6 * c + k]);
          u.segment(l.u_pitcher + 6 * P * c + P * k, P).array() =
              (v.segment(l.u_pitcher + 6 * P * c + P * k, P).array() - mu) / sd;
        }
      for (int c = 0; c < 2; ++c)
        for (int k = 0; k < kNumNonOut; ++k) {
          const double mu = v[(c == 0 ? l.beta2 : l.beta3) + k];
          const double sd = std::sqrt(v[l.sigma2 + 6 * (c + 2) + k]);
          u.segment(l.u_batter + 6 * B * c + B * k, B).array() =
              (v.segment(l.u_batter + 6 * B * c + B * k, B).array() - mu) / sd;
        }
      break;
    }
  }
  return u;
}

double log_likelihood(const VectorXd& v, const Dataset& data, const ModelSpec& spec, VectorXd* grad) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(v, l);
  check_finite(v);
  const Index n = data.size();
  if (n == 0) throw ArgumentError("log-likelihood of empty data");
  if (spec.variant == ModelVariant::Hierarchical &&
      (data.n_pitchers() > l.n_pitchers || data.n_batters() > l.n_batters))
    throw ArgumentError("data references more players than the hierarchical layout holds");

  const MatrixXd& X = data.design();
  const auto& t = data.t();
  Workspace& ws = workspace();
  MatrixXd& lin = ws.lin;
  linear_predictor(v, data, spec, l, lin);

  // Without large predictors exp cannot overflow and the reference term
  // keeps the denominator >= 1, so the max shift is only needed beyond that.
  const bool baseline = spec.variant == ModelVariant::BaselineConstrained || spec.variant == ModelVariant::BaselineDiffuse;
  const MatrixXd& onehot = data.outcome_onehot();
  MatrixXd& expo = ws.expo;
  VectorXd& denom = ws.denom;
  double ll = 0.0;
  if (lin.maxCoeff() <= 300.0) {
    expo.resize(n, kNumNonOut);
    expo.array() = lin.array().exp();
    denom.setOnes(n);
    for (int k = 0; k < kNumNonOut; ++k) denom += expo.col(k);
    ll = -denom.array().log().sum();
  } else {
    const VectorXd m = lin.rowwise().maxCoeff().cwiseMax(0.0);
    expo = (lin - m.replicate(1, kNumNonOut)).array().exp().matrix();
    denom = expo.rowwise().sum() + (-m).array().exp().matrix();
    ll = -(m.array() + denom.array().log()).sum();
  }
  Eigen::Matrix<double, kNumBaselineFeatures, kNumNonOut> coef;
  if (baseline) {
    coef.row(0) = v.segment<6>(l.alpha0).transpose();
    coef.row(1) = v.segment<6>(l.alpha1).transpose();
    coef.row(2) = v.segment<6>(l.beta2).transpose();
    coef.row(3) = v.segment<6>(l.beta3).transpose();
    for (int k = 0; k < kNumNonOut; ++k) coef.col(k).tail<4>() = v.segment<4>(l.eta + 4 * k);
    ll += (data.design_outcome_cross().array() * coef.array()).sum();
  } else {
    ll += (onehot.array() * lin.array()).sum();
  }
  if (!std::isfinite(ll)) throw EvaluationError("non-finite log-likelihood");
  if (!grad) return ll;

  // probabilities of the non-out categories; residual is onehot minus these
  expo.array().colwise() /= denom.array();
  grad->setZero(l.size);
  VectorXd& g = *grad;
  Eigen::Matrix<double, kNumCovariates, kNumNonOut> g_eta;
  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
    case ModelVariant::BaselineDiffuse: {
      Eigen::Matrix<double, kNumBaselineFeatures, kNumNonOut> gc = data.design_outcome_cross();
      gc.noalias() -= X.transpose() * expo;
      g.segment<6>(l.alpha0) = gc.row(0).transpose();
      g.segment<6>(l.alpha1) = gc.row(1).transpose();
      g.segment<6>(l.beta2) = gc.row(2).transpose();
      g.segment<6>(l.beta3) = gc.row(3).transpose();
      g_eta = gc.bottomRows<4>();
      break;
    }
    case ModelVariant::Indicator: {
      MatrixXd& resid = ws.resid;
      resid = onehot - expo;
      g_eta = X.rightCols<4>().transpose() * resid;
      for (Index i = 0; i < n; ++i)
        for (int k = 0; k < kNumNonOut; ++k) g[l.alpha_t + kNumTimes * k + t[i] - 1] += resid(i, k);
      break;
    }
    case ModelVariant::Hierarchical: {
      MatrixXd& resid = ws.resid;
      resid = onehot - expo;
      g_eta = X.rightCols<4>().transpose() * resid;
      const Index P = l.n_pitchers, B = l.n_batters;
      const auto& pid = data.pitcher();
      const auto& bid = data.batter();
      for (Index i = 0; i < n; ++i)
        for (int k = 0; k < kNumNonOut; ++k) {
          const double r = resid(i, k);
          g[l.u_pitcher + P * k + pid[i]] += r;
          g[l.u_pitcher + 6 * P + P * k + pid[i]] += r * t[i];
          g[l.u_batter + B * k + bid[i]] += r * X(i, 2);
          g[l.u_batter + 6 * B + B * k + bid[i]] += r * X(i, 3);
        }
      break;
    }
  }
  for (int k = 0; k < kNumNonOut; ++k) g.segment<4>(l.eta + 4 * k) = g_eta.col(k);
  for (Index i = 0; i < g.size(); ++i)
    if (!std::isfinite(g[i])) throw EvaluationError("non-finite likelihood gradient at index " + std::to_string(i), int(i));
  return ll;
}

double log_prior(const VectorXd& u, const ModelSpec& spec, VectorXd* grad) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(u, l);
  if (grad) grad->setZero(l.size);
  double lp = 0.0;
  auto normal_range = [&](Index off, Index len, double variance) {
    for (Index i = off; i < off + len; ++i) {
      lp += normal_lpdf(u[i], variance);
      if (grad) (*grad)[i] -= u[i] / variance;
    }
  };

  switch (spec.variant) {
    case ModelVariant::BaselineConstrained: {
      normal_range(l.alpha0, 6, 1.0);
      normal_range(l.beta2, 6, 1.0);
      normal_range(l.beta3, 6, 1.0);
      normal_range(l.eta, 24, 1.0);
      const double nu = spec.half_t_dof, s2 = spec.half_t_scale * spec.half_t_scale;
      for (Index i = l.alpha1; i < l.alpha1 + 6; ++i) {
        const double a = std::exp(u[i]);
        lp += half_t_lpdf(a, nu, spec.half_t_scale) + u[i];
        if (grad) (*grad)[i] += 1.0 - (nu + 1.0) * a * a / (nu * s2 + a * a);
      }
      break;
    }
    case ModelVariant::BaselineDiffuse:
      normal_range(0, l.size, spec.diffuse_variance);
      break;
    case ModelVariant::Indicator:
      normal_range(0, l.size, 1.0);
      break;
    case ModelVariant::Hierarchical: {
      normal_range(l.alpha0, 24, spec.diffuse_variance);  // four hypermean blocks are contiguous
      normal_range(l.eta, 24, 1.0);
      for (Index i = l.sigma2; i < l.sigma2 + 24; ++i) {
        const double s = std::exp(u[i]);
        lp += std::numbers::ln2 + normal_lpdf(s, 1.0) + u[i];
        if (grad) (*grad)[i] += 1.0 - s * s;
      }
      normal_range(l.u_pitcher, l.size - l.u_pitcher, 1.0);
      break;
    }
  }
  return lp;
}

double log_posterior_and_grad(const VectorXd& u, const Dataset& data, const ModelSpec& spec, VectorXd& grad) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(u, l);
  check_finite(u);
  const VectorXd v = constrain(u, spec);
  VectorXd g_nat;
  const double ll = log_likelihood(v, data, spec, &g_nat);
  VectorXd g_prior;
  const double lp = log_prior(u, spec, &g_prior);

  // chain rule from natural to unconstrained coordinates
  grad = g_nat;
  switch (spec.variant) {
    case ModelVariant::BaselineConstrained:
      grad.segment<6>(l.alpha1).array() *= v.segment<6>(l.alpha1).array();
      break;
    case ModelVariant::BaselineDiffuse:
    case ModelVariant::Indicator:
      break;
    case ModelVariant::Hierarchical: {
      const Index P = l.n_pitchers, B = l.n_batters;
      auto pull = [&](Index hyper, Index var, Index eff, Index len) {
        const double sd = std::sqrt(v[var]);
        const auto g_eff = g_nat.segment(eff, len);
        grad[hyper] += g_eff.sum();
        grad[var] += 0.5 * sd * g_eff.dot(u.segment(eff, len));
        grad.segment(eff, len) = sd * g_eff;
      };
      for (int k = 0; k < kNumNonOut; ++k) {
        pull(l.alpha0 + k, l.sigma2 + k, l.u_pitcher + P * k, P);
        pull(l.alpha1 + k, l.sigma2 + 6 + k, l.u_pitcher + 6 * P + P * k, P);
        pull(l.beta2 + k, l.sigma2 + 12 + k, l.u_batter + B * k, B);
        pull(l.beta3 + k, l.sigma2 + 18 + k, l.u_batter + 6 * B + B * k, B);
      }
      break;
    }
  }
  grad += g_prior;
  const double value = ll + lp;
  if (!std::isfinite(value)) throw EvaluationError("non-finite log posterior");
  for (Index i = 0; i < grad.size(); ++i)
    if (!std::isfinite(grad[i])) throw EvaluationError("non-finite gradient at index " + std::to_string(i), int(i));
  return value;
}

MatrixXd outcome_probabilities(const VectorXd& natural, const Dataset& data, const ModelSpec& spec) {
  const ParamLayout l = ParamLayout::make(spec, false);
  check_layout(natural, l);
  MatrixXd lin;
  linear_predictor(natural, data, spec, l, lin);
  MatrixXd p(data.size(), kNumOutcomes);
  const VectorXd m = lin.rowwise().maxCoeff().cwiseMax(0.0);
  p.col(0) = (-m).array().exp();
  p.rightCols<kNumNonOut>() = (lin - m.replicate(1, kNumNonOut)).array().exp().matrix();
  const VectorXd denom = p.rowwise().sum();
  return p.array().colwise() / denom.array();
}

PosteriorTarget::PosteriorTarget(const Dataset& data, ModelSpec spec)
    : data_(&data), spec_(spec), layout_(ParamLayout::make(spec_)) {
  if (data.size() == 0) throw ArgumentError("posterior over empty data");
  x_mean_ = data.design().rightCols<kNumCovariates>().colwise().mean().transpose();
}

namespace {
constexpr double kMid1 = 5.0, kMid2 = 14.0, kMid3 = 23.0;
}

bool PosteriorTarget::centered() const {
  return spec_.variant == ModelVariant::BaselineConstrained || spec_.variant == ModelVariant::BaselineDiffuse;
}

VectorXd PosteriorTarget::to_unconstrained(const VectorXd& w) const {
  check_layout(w, layout_);
  if (!centered()) return w;
  const bool log_slope = spec_.variant == ModelVariant::BaselineConstrained;
  VectorXd u = w;
  for (int k = 0; k < kNumNonOut; ++k) {
    const double a1 = log_slope ? std::exp(w[layout_.alpha1 + k]) : w[layout_.alpha1 + k];
    const double m1 = w[layout_.alpha0 + k], m2 = w[layout_.beta2 + k], m3 = w[layout_.beta3 + k];
    const double xe = x_mean_.dot(w.segment<kNumCovariates>(layout_.eta + kNumCovariates * k));
    u[layout_.alpha0 + k] = m1 - kMid1 * a1 - xe;
    u[layout_.beta2 + k] = m2 - m1 - (kMid2 - kMid1) * a1;
    u[layout_.beta3 + k] = m3 - m1 - (kMid3 - kMid1) * a1;
  }
  return u;
}

VectorXd PosteriorTarget::from_unconstrained(const VectorXd& u) const {
  check_layout(u, layout_);
  if (!centered()) return u;
  const bool log_slope = spec_.variant == ModelVariant::BaselineConstrained;
  VectorXd w = u;
  for (int k = 0; k < kNumNonOut; ++k) {
    const double a1 = log_slope ? std::exp(u[layout_.alpha1 + k]) : u[layout_.alpha1 + k];
    const double xe = x_mean_.dot(u.segment<kNumCovariates>(layout_.eta + kNumCovariates * k));
    const double m1 = u[layout_.alpha0 + k] + kMid1 * a1 + xe;
    w[layout_.alpha0 + k] = m1;
    w[layout_.beta2 + k] = u[layout_.beta2 + k] + m1 + (kMid2 - kMid1) * a1;
    w[layout_.beta3 + k] = u[layout_.beta3 + k] + m1 + (kMid3 - kMid1) * a1;
  }
  return w;
}

double PosteriorTarget::log_density_grad(const VectorXd& w, VectorXd& grad) const {
  if (!centered()) return log_posterior_and_grad(w, *data_, spec_, grad);
  VectorXd g;
  const double lp = log_posterior_and_grad(to_unconstrained(w), *data_, spec_, g);
  const bool log_slope = spec_.variant == ModelVariant::BaselineConstrained;
  grad = g;
  for (int k = 0; k < kNumNonOut; ++k) {
    const double a1 = log_slope ? std::exp(w[layout_.alpha1 + k]) : 1.0;
    const double g0 = g[layout_.alpha0 + k], g2 = g[layout_.beta2 + k], g3 = g[layout_.beta3 + k];
    grad[layout_.alpha0 + k] = g0 - g2 - g3;
    grad[layout_.alpha1 + k] -= a1 * (kMid1 * g0 + (kMid2 - kMid1) * g2 + (kMid3 - kMid1) * g3);
    grad.segment<kNumCovariates>(layout_.eta + kNumCovariates * k) -= g0 * x_mean_;
  }
  return lp;
}

}  // namespace ttop
