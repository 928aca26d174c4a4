#include "ttop/sampler.hpp"

#include <algorithm>
#include <numeric>

namespace ttop {

void SamplerConfig::validate() const {
  if (n_chains < 1) throw ArgumentError("need at least one chain");
  if (n_warmup < 0 || n_warmup >= n_iter) throw ArgumentError("n_warmup must be in [0, n_iter)");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ArgumentError("target_accept must be in (0,1)");
  if (max_tree_depth < 1) throw ArgumentError("max_tree_depth must be positive");
  if (threads < 0) throw ArgumentError("threads must be non-negative");
}

MatrixXd PosteriorDraws::pooled() const {
  MatrixXd out(n_total(), n_params());
  for (Index c = 0; c < n_chains(); ++c) out.middleRows(c * n_kept(), n_kept()) = chains[c];
  return out;
}

Index PosteriorDraws::index_of(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw ArgumentError("no parameter named '" + name + "'");
  return static_cast<Index>(it - names.begin());
}

double PosteriorDraws::max_rhat() const {
  double m = 1.0;
  for (const auto& d : diagnostics) m = std::max(m, d.rhat);
  return m;
}

double PosteriorDraws::min_ess() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& d : diagnostics) m = std::min(m, d.ess);
  return m;
}

bool PosteriorDraws::any_zero_variance() const {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const auto& d) { return d.zero_variance; });
}

namespace {

void check_chains(std::span<const VectorXd> chains) {
  if (chains.size() < 2) throw DiagnosticError("split-R-hat and ESS need at least two chains");
  const Index n = chains.front().size();
  if (n < 4) throw DiagnosticError("split-R-hat and ESS need at least four draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw DiagnosticError("chains have different lengths");
}

/// Each chain cut into two halves; an odd middle draw is dropped.
std::vector<VectorXd> split_halves(std::span<const VectorXd> chains) {
  std::vector<VectorXd> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const Index half = c.size() / 2;
    out.emplace_back(c.head(half));
    out.emplace_back(c.tail(half));
  }
  return out;
}

bool constant(std::span<const VectorXd> chains) {
  const double v0 = chains.front()[0];
  for (const auto& c : chains)
    if ((c.array() != v0).any()) return false;
  return true;
}

double variance(const VectorXd& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

/// Biased autocovariance at one lag.
double autocov(const VectorXd& x, double m, Index lag) {
  const Index n = x.size();
  double s = 0.0;
  for (Index i = 0; i + lag < n; ++i) s += (x[i] - m) * (x[i + lag] - m);
  return s / static_cast<double>(n);
}

}  // namespace

ParamDiagnostics split_rhat(std::span<const VectorXd> chains) {
  check_chains(chains);
  if (constant(chains)) return {1.0, static_cast<double>(chains.size() * chains.front().size()), true};
  const auto halves = split_halves(chains);
  const auto m = static_cast<Index>(halves.size());
  const double n = static_cast<double>(halves.front().size());
  VectorXd means(m), vars(m);
  for (Index j = 0; j < m; ++j) {
    means[j] = halves[j].mean();
    vars[j] = variance(halves[j]);
  }
  const double w = vars.mean();
  const double b_over_n = variance(means);
  ParamDiagnostics d;
  if (w <= 0.0) {
    d.rhat = std::numeric_limits<double>::infinity();
    return d;
  }
  d.rhat = std::sqrt(((n - 1.0) / n * w + b_over_n) / w);
  return d;
}

ParamDiagnostics effective_sample_size(std::span<const VectorXd> chains) {
  check_chains(chains);
  const double n_total = static_cast<double>(chains.size() * chains.front().size());
  if (constant(chains)) return {1.0, n_total, true};
  const auto halves = split_halves(chains);
  const auto m = static_cast<Index>(halves.size());
  const Index n = halves.front().size();

  VectorXd means(m), chain_var(m);
  for (Index j = 0; j < m; ++j) {
    means[j] = halves[j].mean();
    chain_var[j] = autocov(halves[j], means[j], 0) * n / (n - 1.0);
  }
  const double mean_var = chain_var.mean();
  double var_plus = mean_var * (n - 1.0) / n;
  if (m > 1) var_plus += variance(means);
  ParamDiagnostics d;
  if (!(var_plus > 0.0)) {
    d.ess = n_total;
    d.zero_variance = true;
    return d;
  }

  auto mean_acov = [&](Index lag) {
    double s = 0.0;
    for (Index j = 0; j < m; ++j) s += autocov(halves[j], means[j], lag);
    return s / static_cast<double>(m);
  };

  // Geyer's initial positive sequence on paired autocorrelations
  std::vector<double> rho(n + 1, 0.0);
  double rho_even = 1.0;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[0] = rho_even;
  rho[1] = rho_odd;
  Index t = 1;
  while (t < n - 5 && rho_even + rho_odd > 0.0) {
    rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const Index max_t = t;
  if (rho_even > 0.0) rho[max_t + 1] = rho_even;

  // monotone sequence
  for (t = 1; t <= max_t - 4; t += 2) {
    if (rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]) {
      rho[t + 1] = 0.5 * (rho[t - 1] + rho[t]);
      rho[t + 2] = rho[t + 1];
    }
  }
  const double draws = static_cast<double>(m * n);
  double tau = -1.0 + 2.0 * std::accumulate(rho.begin(), rho.begin() + max_t + 1, 0.0) + rho[max_t + 1];
  tau = std::max(tau, 1.0 / std::log10(draws));
  d.ess = std::min(draws / tau, n_total);
  return d;
}

namespace {

std::vector<VectorXd> param_chains(const PosteriorDraws& draws, Index p) {
  std::vector<VectorXd> out;
  out.reserve(draws.chains.size());
  for (const auto& c : draws.chains) out.emplace_back(c.col(p));
  return out;
}

}  // namespace

std::vector<ParamDiagnostics> rhat(const PosteriorDraws& draws) {
  std::vector<ParamDiagnostics> out;
  for (Index p = 0; p < draws.n_params(); ++p) out.push_back(split_rhat(param_chains(draws, p)));
  return out;
}

std::vector<ParamDiagnostics> ess(const PosteriorDraws& draws) {
  std::vector<ParamDiagnostics> out;
  for (Index p = 0; p < draws.n_params(); ++p) out.push_back(effective_sample_size(param_chains(draws, p)));
  return out;
}

void summarize(PosteriorDraws& draws, int max_tree_depth) {
  draws.diagnostics.clear();
  for (Index p = 0; p < draws.n_params(); ++p) {
    const auto chains = param_chains(draws, p);
    const ParamDiagnostics r = split_rhat(chains);
    const ParamDiagnostics e = effective_sample_size(chains);
    draws.diagnostics.push_back({r.rhat, e.ess, r.zero_variance || e.zero_variance});
  }
  std::size_t div = 0, saturated = 0, total = 0;
  for (const auto& s : draws.stats) {
    for (char d : s.divergent) div += d ? 1 : 0;
    for (int depth : s.tree_depth) saturated += depth >= max_tree_depth ? 1 : 0;
    total += s.divergent.size();
  }
  draws.divergences = div;
  draws.divergence_rate = total ? static_cast<double>(div) / total : 0.0;
  draws.treedepth_saturation = total ? static_cast<double>(saturated) / total : 0.0;

  draws.warnings.clear();
  if (div > 0) draws.warnings.push_back(std::to_string(div) + " divergent transitions after warmup");
  if (draws.treedepth_saturation > 0.05)
    draws.warnings.push_back("tree depth saturated in " + std::to_string(saturated) + " of " + std::to_string(total) +
                             " transitions");
  for (Index p = 0; p < draws.n_params(); ++p) {
    const auto& d = draws.diagnostics[p];
    const std::string& name = p < static_cast<Index>(draws.names.size()) ? draws.names[p] : std::to_string(p);
    if (d.zero_variance) draws.warnings.push_back(name + ": zero variance across all draws");
    if (d.rhat >= 1.1) draws.warnings.push_back(name + ": split R-hat " + std::to_string(d.rhat));
  }
}

namespace detail {

std::mt19937_64 chain_rng(std::uint64_t seed, int chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x7470u};
  return std::mt19937_64(seq);
}

}  // namespace detail

}  // namespace ttop
