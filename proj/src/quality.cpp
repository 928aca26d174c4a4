#include "ttop/quality.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "ttop/errors.hpp"
#include "ttop/stats.hpp"

namespace ttop {

void QualityHyperparams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ArgumentError("tau must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ArgumentError("nu must be positive");
}

double quality_posterior_mean(double theta0, double sum_x, int j, const QualityHyperparams& hp) {
  const double prec_obs = 1.0 / (hp.tau * hp.tau);
  const double prec_prior = 1.0 / (hp.nu * hp.nu);
  return (prec_obs * sum_x + prec_prior * theta0) / (j * prec_obs + prec_prior);
}

QualityState initial_quality(std::string player_id, double theta0) {
  return QualityState{std::move(player_id), theta0, 0.0, 0, theta0};
}

QualityState update(const QualityState& state, double x_new, const QualityHyperparams& hp) {
  QualityState next = state;
  next.sum_x += x_new;
  next.j += 1;
  next.theta_hat = quality_posterior_mean(next.theta0, next.sum_x, next.j, hp);
  return next;
}

double quality_logit(double theta_hat) {
  if (!std::isfinite(theta_hat)) throw DomainError("non-finite quality estimate");
  return logit(std::clamp(theta_hat, kQualityClampLo, kQualityClampHi));
}

double prior_mean(const std::string& player_id, const std::unordered_map<std::string, double>& non_rookie_means,
                  bool rookie) {
  if (!rookie) {
    const auto it = non_rookie_means.find(player_id);
    if (it == non_rookie_means.end())
      throw ValidationError("player " + player_id + " has no previous-season mean; mark as rookie");
    return it->second;
  }
  if (non_rookie_means.empty()) throw ArgumentError("rookie prior needs a non-empty non-rookie pool");
  std::vector<double> v;
  v.reserve(non_rookie_means.size());
  for (const auto& [id, m] : non_rookie_means) v.push_back(m);
  return median(std::move(v));
}

PriorTable previous_season_priors(std::span<const PlateAppearance> all_pas, int season) {
  // role -> player -> season -> (sum, count)
  std::map<std::string, std::map<int, std::pair<double, int>>> bat, pit;
  std::set<std::string> active_bat, active_pit;
  for (const auto& pa : all_pas) {
    if (pa.season == season) {
      active_bat.insert(pa.batter_id);
      active_pit.insert(pa.pitcher_id);
    } else if (pa.season < season) {
      auto& b = bat[pa.batter_id][pa.season];
      b.first += pa.event_woba;
      ++b.second;
      auto& p = pit[pa.pitcher_id][pa.season];
      p.first += pa.event_woba;
      ++p.second;
    }
  }
  PriorTable table;
  auto fill = [](const auto& hist, const std::set<std::string>& active, auto& dest) {
    for (const auto& id : active) {
      const auto it = hist.find(id);
      if (it == hist.end() || it->second.empty()) continue;
      const auto& [sum, n] = it->second.rbegin()->second;  // latest earlier season
      dest[id] = sum / n;
    }
  };
  fill(bat, active_bat, table.batter);
  fill(pit, active_pit, table.pitcher);
  return table;
}

PriorTable read_priors_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open priors file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("priors file has no header");
  PriorTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ValidationError("priors line " + std::to_string(line_no) + ": need 3 fields");
    const std::string id = line.substr(0, c1);
    const std::string role = line.substr(c1 + 1, c2 - c1 - 1);
    double v = 0.0;
    const char* b = line.data() + c2 + 1;
    const char* e = line.data() + line.size();
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e)
      throw ValidationError("priors line " + std::to_string(line_no) + ": bad prev_mean_woba");
    if (role == "batter")
      table.batter[id] = v;
    else if (role == "pitcher")
      table.pitcher[id] = v;
    else
      throw ValidationError("priors line " + std::to_string(line_no) + ": unknown role '" + role + "'");
  }
  return table;
}

std::vector<QualityCovariates> attach_quality_covariates(std::span<const PlateAppearance> pas,
                                                         const std::map<int, PriorTable>& priors,
                                                         const QualityOptions& opts) {
  opts.hp.validate();
  for (std::size_t i = 1; i < pas.size(); ++i)
    if (pas[i].order_key() < pas[i - 1].order_key())
      throw ArgumentError("plate appearances must be sorted by order key");

  // Non-rookie pools restricted to players active in each season.
  struct SeasonPools {
    std::unordered_map<std::string, double> batter, pitcher;
    double rookie_batter = 0.0, rookie_pitcher = 0.0;
  };
  std::map<int, SeasonPools> pools;
  for (const auto& pa : pas) {
    auto [it, inserted] = pools.try_emplace(pa.season);
    auto& pool = it->second;
    const auto pr = priors.find(pa.season);
    if (pr == priors.end()) continue;
    if (auto b = pr->second.batter.find(pa.batter_id); b != pr->second.batter.end()) pool.batter[b->first] = b->second;
    if (auto p = pr->second.pitcher.find(pa.pitcher_id); p != pr->second.pitcher.end())
      pool.pitcher[p->first] = p->second;
  }
  for (auto& [season, pool] : pools) {
    pool.rookie_batter = pool.batter.empty() ? opts.fallback_prior : prior_mean("", pool.batter, true);
    pool.rookie_pitcher = pool.pitcher.empty() ? opts.fallback_prior : prior_mean("", pool.pitcher, true);
  }

  std::map<std::pair<int, std::string>, QualityState> batters, pitchers;
  auto state_for = [&](auto& states, int season, const std::string& id, const auto& pool, double rookie_prior)
      -> QualityState& {
    auto [it, inserted] = states.try_emplace({season, id});
    if (inserted) {
      const bool rookie = !pool.contains(id);
      it->second = initial_quality(id, rookie ? rookie_prior : prior_mean(id, pool, false));
    }
    return it->second;
  };

  std::vector<QualityCovariates> out;
  out.reserve(pas.size());
  for (const auto& pa : pas) {
    const auto& pool = pools.at(pa.season);
    QualityState& b = state_for(batters, pa.season, pa.batter_id, pool.batter, pool.rookie_batter);
    QualityState& p = state_for(pitchers, pa.season, pa.pitcher_id, pool.pitcher, pool.rookie_pitcher);
    QualityCovariates c;
    c.theta_b = b.theta_hat;
    c.theta_p = p.theta_hat;
    c.x_b = quality_logit(c.theta_b);
    c.x_p = quality_logit(c.theta_p);
    out.push_back(c);
    b = update(b, pa.event_woba, opts.hp);
    p = update(p, pa.event_woba, opts.hp);
  }
  return out;
}

std::vector<PlayerSeason> build_history(std::span<const PlateAppearance> pas) {
  std::map<std::tuple<int, std::string, int>, std::vector<double>> grouped;
  for (const auto& pa : pas) {
    grouped[{0, pa.batter_id, pa.season}].push_back(pa.event_woba);
    grouped[{1, pa.pitcher_id, pa.season}].push_back(pa.event_woba);
  }
  std::vector<PlayerSeason> out;
  out.reserve(grouped.size());
  for (auto& [key, woba] : grouped) {
    const auto& [role, id, season] = key;
    out.push_back(PlayerSeason{id, role == 0 ? Role::Batter : Role::Pitcher, season, std::move(woba)});
  }
  return out;
}

HyperparamReport estimate_hyperparams(std::span<const PlayerSeason> history) {
  std::map<std::pair<int, std::string>, std::vector<double>> season_means;
  std::vector<double> tau_sd[2];
  for (const auto& ps : history) {
    if (ps.woba.empty()) continue;
    const int r = ps.role == Role::Batter ? 0 : 1;
    season_means[{r, ps.player_id}].push_back(mean(std::span<const double>(ps.woba)));
    if (ps.woba.size() >= 2) tau_sd[r].push_back(sample_sd(std::span<const double>(ps.woba)));
  }
  std::vector<double> nu_sd[2];
  for (const auto& [key, means] : season_means)
    if (means.size() >= 2) nu_sd[key.first].push_back(sample_sd(std::span<const double>(means)));

  if (nu_sd[0].empty() || nu_sd[1].empty() || tau_sd[0].empty() || tau_sd[1].empty())
    throw ValidationError(
        "insufficient history: need at least one batter and one pitcher with two or more seasons, "
        "and at least one batter-season and one pitcher-season with two or more plate appearances");

  HyperparamReport rep;
  rep.nu_batters = nu_sd[0].size();
  rep.nu_pitchers = nu_sd[1].size();
  rep.tau_batters = tau_sd[0].size();
  rep.tau_pitchers = tau_sd[1].size();
  rep.nu_batter_median = median(nu_sd[0]);
  rep.nu_pitcher_median = median(nu_sd[1]);
  rep.tau_batter_median = median(tau_sd[0]);
  rep.tau_pitcher_median = median(tau_sd[1]);
  rep.hp.nu = 0.5 * (rep.nu_batter_median + rep.nu_pitcher_median);
  rep.hp.tau = 0.5 * (rep.tau_batter_median + rep.tau_pitcher_median);
  if (!(rep.hp.nu > 0.0)) throw ValidationError("degenerate variance: estimated nu is zero");
  if (!(rep.hp.tau > 0.0)) throw ValidationError("degenerate variance: estimated tau is zero");
  return rep;
}

}  // namespace ttop
