#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ttop/data_ingest.hpp"

namespace ttop {

/// tau: within-season PA-level wOBA standard deviation.
/// nu: season-to-season standard deviation of a player's mean wOBA.
struct QualityHyperparams {
  double tau = 0.5;
  double nu = 0.05;

  void validate() const;
};

/// Normal-normal running state of one player's quality within a season.
struct QualityState {
  std::string player_id;
  double theta0 = 0.0;
  double sum_x = 0.0;
  int j = 0;
  double theta_hat = 0.0;
};

/// Posterior mean (tau^-2 sum_x + nu^-2 theta0) / (j tau^-2 + nu^-2).
double quality_posterior_mean(double theta0, double sum_x, int j, const QualityHyperparams& hp);

QualityState initial_quality(std::string player_id, double theta0);

/// Folds one more observed PA wOBA into the state; returns the new state.
QualityState update(const QualityState& state, double x_new, const QualityHyperparams& hp);

/// Bounds applied to theta_hat before the logit transform.
inline constexpr double kQualityClampLo = 0.001;
inline constexpr double kQualityClampHi = 0.999;

double quality_logit(double theta_hat);

enum class Role { Batter, Pitcher };

/// Prior mean for a player. Non-rookies take their previous-season mean;
/// rookies take the median over `non_rookie_means`.
double prior_mean(const std::string& player_id, const std::unordered_map<std::string, double>& non_rookie_means,
                  bool rookie);

/// Previous-season mean PA wOBA per player, by role.
struct PriorTable {
  std::unordered_map<std::string, double> batter;
  std::unordered_map<std::string, double> pitcher;

  const std::unordered_map<std::string, double>& of(Role r) const { return r == Role::Batter ? batter : pitcher; }
  std::unordered_map<std::string, double>& of(Role r) { return r == Role::Batter ? batter : pitcher; }
};

/// For every player active in `season`, the mean event wOBA of the latest
/// earlier season in which they have at least one PA.
PriorTable previous_season_priors(std::span<const PlateAppearance> all_pas, int season);

/// CSV `player_id,role,prev_mean_woba` with role in {batter,pitcher}.
PriorTable read_priors_csv(const std::filesystem::path& path);

struct QualityCovariates {
  double theta_b = 0.0;  // running estimate before this PA
  double theta_p = 0.0;
  double x_b = 0.0;      // logit(theta_b), clamped
  double x_p = 0.0;
};

struct QualityOptions {
  QualityHyperparams hp;
  /// Used when a role has no non-rookie pool to take a median from.
  double fallback_prior = 0.315;
};

/// Quality covariates for each PA, using only strictly earlier PAs of the
/// same season. `pas` must be sorted by order_key. Priors are looked up by
/// season; seasons missing from `priors` treat every player as a rookie.
std::vector<QualityCovariates> attach_quality_covariates(std::span<const PlateAppearance> pas,
                                                         const std::map<int, PriorTable>& priors,
                                                         const QualityOptions& opts = {});

/// PA wOBA values of one player in one season.
struct PlayerSeason {
  std::string player_id;
  Role role = Role::Batter;
  int season = 0;
  std::vector<double> woba;
};

std::vector<PlayerSeason> build_history(std::span<const PlateAppearance> pas);

struct HyperparamReport {
  double nu_batter_median = 0.0;
  double nu_pitcher_median = 0.0;
  double tau_batter_median = 0.0;
  double tau_pitcher_median = 0.0;
  std::size_t nu_batters = 0, nu_pitchers = 0;    // players with >= 2 seasons
  std::size_t tau_batters = 0, tau_pitchers = 0;  // player-seasons with >= 2 PAs
  QualityHyperparams hp;
};

/// nu: mean over roles of the median per-player SD of season means.
/// tau: mean over roles of the median per-player-season SD of PA wOBA.
HyperparamReport estimate_hyperparams(std::span<const PlayerSeason> history);

}  // namespace ttop
