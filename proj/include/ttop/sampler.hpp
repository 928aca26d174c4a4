#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ttop/errors.hpp"

namespace ttop {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class MetricKind { Diagonal, Dense };

struct SamplerConfig {
  int n_chains = 4;
  int n_iter = 1500;  // per chain, warmup included
  int n_warmup = 750;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  MetricKind metric = MetricKind::Diagonal;
  int threads = 0;  // 0: one worker per chain

  void validate() const;
};

struct InitStrategy {
  double radius = 2.0;                // uniform(-radius, radius) per coordinate
  std::optional<VectorXd> point;      // start every chain here instead
  int max_tries = 100;
};

struct ChainStats {
  std::vector<double> accept_stat;  // kept iterations only
  std::vector<int> tree_depth;
  std::vector<int> n_leapfrog;
  std::vector<char> divergent;
  double step_size = 0.0;
  VectorXd inv_metric_diag;
};

struct ParamDiagnostics {
  double rhat = 1.0;
  double ess = 0.0;
  bool zero_variance = false;
};

/// Retained (post-warmup) draws in constrained space, one matrix per chain
/// with shape n_kept x n_params.
struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<MatrixXd> chains;
  std::vector<ChainStats> stats;
  std::vector<ParamDiagnostics> diagnostics;
  std::size_t divergences = 0;
  double divergence_rate = 0.0;
  double treedepth_saturation = 0.0;
  std::vector<std::string> warnings;

  Index n_chains() const { return static_cast<Index>(chains.size()); }
  Index n_kept() const { return chains.empty() ? 0 : chains.front().rows(); }
  Index n_params() const { return chains.empty() ? 0 : chains.front().cols(); }
  Index n_total() const { return n_chains() * n_kept(); }

  /// All chains stacked: (n_chains * n_kept) x n_params, chain-major.
  MatrixXd pooled() const;
  /// Column index for a parameter name; throws if absent.
  Index index_of(const std::string& name) const;
  double max_rhat() const;
  double min_ess() const;
  bool any_zero_variance() const;
};

/// Split-R-hat of one parameter across chains (each chain halved).
/// Zero total variance gives 1 with the flag set.
ParamDiagnostics split_rhat(std::span<const VectorXd> chains);

/// Autocorrelation ESS with Geyer's initial monotone sequence, combined
/// across chains. Bounded above by the number of draws.
ParamDiagnostics effective_sample_size(std::span<const VectorXd> chains);

/// Per-parameter split-R-hat / ESS of a draw set.
std::vector<ParamDiagnostics> rhat(const PosteriorDraws& draws);
std::vector<ParamDiagnostics> ess(const PosteriorDraws& draws);

/// Fills draws.diagnostics, divergence and tree-depth summaries and warnings.
void summarize(PosteriorDraws& draws, int max_tree_depth);

/// Draws CSV: one column per parameter, then `chain` and `iter` (1-based,
/// post-warmup).
void write_draws_csv(const std::filesystem::path& path, const PosteriorDraws& draws);
/// Reads a draws CSV; diagnostics are recomputed when there are at least two
/// chains with four draws each.
PosteriorDraws read_draws_csv(const std::filesystem::path& path);

/// `{<param>: {rhat, ess}, ..., divergences}`.
void write_diagnostics_json(const std::filesystem::path& path, const PosteriorDraws& draws);

namespace detail {

std::mt19937_64 chain_rng(std::uint64_t seed, int chain);

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

/// Euclidean metric: diagonal or dense inverse mass matrix.
class Metric {
 public:
  Metric(MetricKind kind, Index dim) : kind_(kind) {
    if (kind_ == MetricKind::Diagonal)
      set_diagonal(VectorXd::Ones(dim));
    else
      set_dense(MatrixXd::Identity(dim, dim));
  }

  void set_diagonal(const VectorXd& inv_mass) {
    inv_diag_ = inv_mass;
    sqrt_diag_ = inv_mass.cwiseSqrt();
  }

  void set_dense(const MatrixXd& inv_mass) {
    inv_dense_ = inv_mass;
    chol_ = inv_mass.llt().matrixL();
    inv_diag_ = inv_mass.diagonal();
  }

  MetricKind kind() const { return kind_; }
  const VectorXd& inv_diagonal() const { return inv_diag_; }

  VectorXd velocity(const VectorXd& p) const {
    if (kind_ == MetricKind::Diagonal) return inv_diag_.cwiseProduct(p);
    return inv_dense_ * p;
  }

  double kinetic(const VectorXd& p) const { return 0.5 * p.dot(velocity(p)); }

  template <typename Rng>
  VectorXd sample_momentum(Rng& rng) const {
    std::normal_distribution<double> normal;
    VectorXd w(inv_diag_.size());
    for (Index i = 0; i < w.size(); ++i) w[i] = normal(rng);
    if (kind_ == MetricKind::Diagonal) return w.cwiseQuotient(sqrt_diag_);
    // p = L^-T w has covariance (L L^T)^-1, the mass matrix
    return chol_.transpose().triangularView<Eigen::Upper>().solve(w);
  }

 private:
  MetricKind kind_;
  VectorXd inv_diag_, sqrt_diag_;
  MatrixXd inv_dense_, chol_;
};

/// Windowed warmup schedule (fast initial buffer, doubling slow windows,
/// fast terminal buffer).
class WindowSchedule {
 public:
  explicit WindowSchedule(int n_warmup) : n_warmup_(n_warmup) {
    if (n_warmup < 20) {
      enabled_ = false;
      return;
    }
    if (init_buffer_ + base_window_ + term_buffer_ > n_warmup) {
      init_buffer_ = static_cast<int>(0.15 * n_warmup);
      term_buffer_ = static_cast<int>(0.1 * n_warmup);
      base_window_ = n_warmup - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  bool in_window() const {
    return enabled_ && counter_ >= init_buffer_ && counter_ < n_warmup_ - term_buffer_ && counter_ != n_warmup_;
  }
  bool window_end() const { return enabled_ && counter_ == next_window_ && counter_ != n_warmup_; }

  void advance() {
    if (window_end()) compute_next_window();
    ++counter_;
  }

 private:
  void compute_next_window() {
    if (next_window_ == n_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != n_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= n_warmup_ - term_buffer_) next_window_ = n_warmup_ - term_buffer_ - 1;
    }
  }

  int n_warmup_;
  bool enabled_ = true;
  int init_buffer_ = 75, term_buffer_ = 50, base_window_ = 25;
  int window_size_ = 0, next_window_ = 0, counter_ = 0;
};

/// Dual-averaging step size adaptation.
class StepSizeAdapter {
 public:
  explicit StepSizeAdapter(double delta) : delta_(delta) {}
  void restart(double step) {
    mu_ = std::log(10.0 * step);
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }
  double learn(double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / gamma_;
    const double x_eta = std::pow(static_cast<double>(counter_), -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    return std::exp(x);
  }
  double final_step() const { return std::exp(x_bar_); }

 private:
  double delta_;
  double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
  int counter_ = 0;
  double gamma_ = 0.05, kappa_ = 0.75, t0_ = 10.0;
};

/// Running mean and (co)variance (Welford).
class MomentEstimator {
 public:
  MomentEstimator(Index dim, bool dense) : dense_(dense), mean_(VectorXd::Zero(dim)), m2_(VectorXd::Zero(dim)) {
    if (dense_) m2_dense_ = MatrixXd::Zero(dim, dim);
  }
  void add(const VectorXd& q) {
    ++n_;
    const VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    const VectorXd delta2 = q - mean_;
    if (dense_)
      m2_dense_.noalias() += delta * delta2.transpose();
    else
      m2_ += delta.cwiseProduct(delta2);
  }
  std::size_t count() const { return n_; }
  VectorXd variance() const { return m2_ / static_cast<double>(n_ - 1); }
  MatrixXd covariance() const { return m2_dense_ / static_cast<double>(n_ - 1); }
  void restart() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
    if (dense_) m2_dense_.setZero();
  }

 private:
  bool dense_;
  std::size_t n_ = 0;
  VectorXd mean_, m2_;
  MatrixXd m2_dense_;
};

struct PhasePoint {
  VectorXd q, p, g;
  double logp = 0.0;
};

struct TransitionInfo {
  double accept_stat = 0.0;
  int depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

/// No-U-turn sampler with multinomial selection along the trajectory and the
/// generalized (p-sharp) termination criterion.
template <typename Target, typename Rng>
class Nuts {
 public:
  Nuts(const Target& target, Metric metric, Rng& rng, int max_depth)
      : target_(target), metric_(std::move(metric)), rng_(rng), max_depth_(max_depth) {}

  Metric& metric() { return metric_; }
  double step_size = 1.0;

  bool evaluate(PhasePoint& z) const {
    try {
      z.logp = target_.log_density_grad(z.q, z.g);
      return std::isfinite(z.logp) && z.g.allFinite();
    } catch (const EvaluationError&) {
      z.logp = -std::numeric_limits<double>::infinity();
      return false;
    }
  }

  double hamiltonian(const PhasePoint& z) const {
    const double h = -z.logp + metric_.kinetic(z.p);
    return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
  }

  void leapfrog(PhasePoint& z, double eps) const {
    z.p += 0.5 * eps * z.g;
    z.q += eps * metric_.velocity(z.p);
    if (!evaluate(z)) return;
    z.p += 0.5 * eps * z.g;
  }

  void init_step_size(const PhasePoint& z0) {
    if (!(step_size > 0.0) || step_size > 1e7 || std::isnan(step_size)) return;
    PhasePoint z = z0;
    z.p = metric_.sample_momentum(rng_);
    double h0 = hamiltonian(z);
    leapfrog(z, step_size);
    double delta_h = h0 - hamiltonian(z);
    const int direction = delta_h > std::log(0.8) ? 1 : -1;
    while (true) {
      z = z0;
      z.p = metric_.sample_momentum(rng_);
      h0 = hamiltonian(z);
      leapfrog(z, step_size);
      delta_h = h0 - hamiltonian(z);
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
      if (step_size > 1e7) throw Error("step size search diverged to a huge value; posterior may be improper");
      if (step_size == 0.0) throw Error("step size search collapsed to zero");
    }
  }

  TransitionInfo transition(PhasePoint& z) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    z.p = metric_.sample_momentum(rng_);
    const double h0 = hamiltonian(z);

    PhasePoint z_fwd = z, z_bck = z, z_sample = z, z_propose = z;
    VectorXd p_sharp = metric_.velocity(z.p);
    VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp, p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp;
    VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp, p_bck_bck = z.p, p_sharp_bck_bck = p_sharp;
    VectorXd rho = z.p;
    double log_sum_weight = 0.0;

    TransitionInfo info;
    double sum_metro = 0.0;
    const Index dim = z.q.size();
    while (info.depth < max_depth_) {
      VectorXd rho_fwd = VectorXd::Zero(dim), rho_bck = VectorXd::Zero(dim);
      double lsw_subtree = -std::numeric_limits<double>::infinity();
      bool valid = false;
      if (unif(rng_) > 0.5) {
        PhasePoint cur = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(info.depth, cur, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck,
                           p_fwd_fwd, h0, 1.0, info, lsw_subtree, sum_metro);
        z_fwd = std::move(cur);
      } else {
        PhasePoint cur = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(info.depth, cur, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd,
                           p_bck_bck, h0, -1.0, info, lsw_subtree, sum_metro);
        z_bck = std::move(cur);
      }
      if (!valid) break;
      ++info.depth;

      if (lsw_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (unif(rng_) < std::exp(lsw_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }
    info.accept_stat = info.n_leapfrog > 0 ? sum_metro / info.n_leapfrog : 0.0;
    z = std::move(z_sample);
    return info;
  }

 private:
  static bool criterion(const VectorXd& p_sharp_minus, const VectorXd& p_sharp_plus, const VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0 && p_sharp_minus.dot(rho) > 0;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, VectorXd& p_sharp_beg, VectorXd& p_sharp_end,
                  VectorXd& rho, VectorXd& p_beg, VectorXd& p_end, double h0, double sign, TransitionInfo& info,
                  double& log_sum_weight, double& sum_metro) {
    if (depth == 0) {
      leapfrog(z, sign * step_size);
      ++info.n_leapfrog;
      const double h = hamiltonian(z);
      if (h - h0 > 1000.0) info.divergent = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro += h0 - h > 0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = metric_.velocity(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !info.divergent;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const Index dim = z.q.size();

    double lsw_init = -std::numeric_limits<double>::infinity();
    VectorXd p_init_end(dim), p_sharp_init_end(dim), rho_init = VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    info, lsw_init, sum_metro))
      return false;

    PhasePoint z_propose_final = z;
    double lsw_final = -std::numeric_limits<double>::infinity();
    VectorXd p_final_beg(dim), p_sharp_final_beg(dim), rho_final = VectorXd::Zero(dim);
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0,
                    sign, info, lsw_final, sum_metro))
      return false;

    const double lsw_subtree = log_sum_exp(lsw_init, lsw_final);
    log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);
    if (lsw_final > lsw_subtree) {
      z_propose = z_propose_final;
    } else if (unif(rng_) < std::exp(lsw_final - lsw_subtree)) {
      z_propose = z_propose_final;
    }

    const VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  const Target& target_;
  Metric metric_;
  Rng& rng_;
  int max_depth_;
};

template <typename Target>
void run_chain(const Target& target, const SamplerConfig& cfg, const InitStrategy& init, int chain,
               MatrixXd& out, ChainStats& stats) {
  auto rng = chain_rng(cfg.seed, chain);
  const Index dim = target.dim();
  Nuts<Target, std::mt19937_64> nuts(target, Metric(cfg.metric, dim), rng, cfg.max_tree_depth);

  PhasePoint z;
  z.q.resize(dim);
  z.g.resize(dim);
  bool ok = false;
  std::uniform_real_distribution<double> jitter(-init.radius, init.radius);
  for (int attempt = 0; attempt < init.max_tries && !ok; ++attempt) {
    if (init.point && attempt == 0)
      z.q = *init.point;
    else if (init.point)
      for (Index i = 0; i < dim; ++i) z.q[i] = (*init.point)[i] + 0.1 * jitter(rng);
    else
      for (Index i = 0; i < dim; ++i) z.q[i] = jitter(rng);
    ok = nuts.evaluate(z);
  }
  if (!ok)
    throw Error("chain " + std::to_string(chain) + ": non-finite target at initialization after " +
                std::to_string(init.max_tries) + " attempts");

  z.p = VectorXd::Zero(dim);
  nuts.step_size = 1.0;
  nuts.init_step_size(z);
  StepSizeAdapter stepper(cfg.target_accept);
  stepper.restart(nuts.step_size);
  WindowSchedule schedule(cfg.n_warmup);
  MomentEstimator moments(dim, cfg.metric == MetricKind::Dense);

  const int n_keep = cfg.n_iter - cfg.n_warmup;
  out.resize(n_keep, dim);
  stats = ChainStats{};
  for (int it = 0; it < cfg.n_iter; ++it) {
    const TransitionInfo info = nuts.transition(z);
    if (it < cfg.n_warmup) {
      nuts.step_size = stepper.learn(info.accept_stat);
      bool update = false;
      if (schedule.in_window()) moments.add(z.q);
      if (schedule.window_end()) {
        const double n = static_cast<double>(moments.count());
        if (cfg.metric == MetricKind::Dense) {
          MatrixXd cov = (n / (n + 5.0)) * moments.covariance();
          cov.diagonal().array() += 1e-3 * (5.0 / (n + 5.0));
          nuts.metric().set_dense(cov);
        } else {
          VectorXd var = (n / (n + 5.0)) * moments.variance();
          var.array() += 1e-3 * (5.0 / (n + 5.0));
          nuts.metric().set_diagonal(var);
        }
        moments.restart();
        update = true;
      }
      schedule.advance();
      if (update) {
        nuts.init_step_size(z);
        stepper.restart(nuts.step_size);
      }
      if (it == cfg.n_warmup - 1) nuts.step_size = stepper.final_step();
      continue;
    }
    const int k = it - cfg.n_warmup;
    out.row(k) = target.constrain(z.q).transpose();
    stats.accept_stat.push_back(info.accept_stat);
    stats.tree_depth.push_back(info.depth);
    stats.n_leapfrog.push_back(info.n_leapfrog);
    stats.divergent.push_back(info.divergent ? 1 : 0);
  }
  stats.step_size = nuts.step_size;
  stats.inv_metric_diag = nuts.metric().inv_diagonal();
}

}  // namespace detail

/// Runs cfg.n_chains independent chains (concurrently, up to cfg.threads at
/// a time). `target` must provide dim(), log_density_grad(u, grad),
/// constrain(u) and param_names(), and be safe to call concurrently.
template <typename Target>
PosteriorDraws sample(const Target& target, const SamplerConfig& cfg, const InitStrategy& init = {}) {
  cfg.validate();
  PosteriorDraws draws;
  draws.names = target.param_names();
  draws.chains.resize(cfg.n_chains);
  draws.stats.resize(cfg.n_chains);

  const int workers = cfg.threads > 0 ? std::min(cfg.threads, cfg.n_chains) : cfg.n_chains;
  std::vector<std::exception_ptr> errors(cfg.n_chains);
  auto run = [&](int c) {
    try {
      detail::run_chain(target, cfg, init, c, draws.chains[c], draws.stats[c]);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (int c = 0; c < cfg.n_chains; ++c) run(c);
  } else {
    for (int start = 0; start < cfg.n_chains; start += workers) {
      std::vector<std::thread> pool;
      for (int c = start; c < std::min(cfg.n_chains, start + workers); ++c) pool.emplace_back(run, c);
      for (auto& th : pool) th.join();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  if (cfg.n_chains >= 2 && cfg.n_iter - cfg.n_warmup >= 4) summarize(draws, cfg.max_tree_depth);
  return draws;
}

}  // namespace ttop
