#include "ttop/pipeline.hpp"

#include <set>
#include <unordered_map>
#include <unordered_set>

#include "ttop/errors.hpp"

namespace ttop {
namespace {

int intern(std::unordered_map<std::string, int>& index, std::vector<std::string>& ids, const std::string& id) {
  auto [it, inserted] = index.try_emplace(id, static_cast<int>(ids.size()));
  if (inserted) ids.push_back(id);
  return it->second;
}

std::string game_key(const PlateAppearance& pa) { return pa.game_id + '\x1f' + pa.pitcher_id; }

}  // namespace

int only_season(std::span<const PlateAppearance> pas) {
  std::set<int> seasons;
  for (const auto& pa : pas) seasons.insert(pa.season);
  if (seasons.empty()) throw ValidationError("no plate appearances");
  if (seasons.size() > 1) throw ArgumentError("data holds several seasons; choose one with --season");
  return *seasons.begin();
}

SeasonData prepare_season(std::span<const PlateAppearance> all, const PipelineOptions& opts) {
  std::vector<PlateAppearance> season_pas;
  for (const auto& pa : all)
    if (pa.season == opts.season) season_pas.push_back(pa);
  if (season_pas.empty()) throw ValidationError("no plate appearances in season " + std::to_string(opts.season));

  std::map<int, PriorTable> priors;
  priors[opts.season] = opts.priors ? *opts.priors : previous_season_priors(all, opts.season);
  const auto quality = attach_quality_covariates(season_pas, priors, opts.quality);

  const auto games = group_games(season_pas);
  const auto truncated = truncate_selection_bias(games);
  std::unordered_set<std::string> kept;
  for (const auto& g : truncated.games) kept.insert(g.game_id + '\x1f' + g.pitcher_id);

  SeasonData out;
  out.season = opts.season;
  out.truncation = truncated.summary;
  std::unordered_map<std::string, int> pitchers, batters, game_index;
  std::vector<std::string> game_ids;
  for (std::size_t i = 0; i < season_pas.size(); ++i) {
    const auto& pa = season_pas[i];
    if (!pa.is_starter || !kept.contains(game_key(pa))) continue;
    if (filter_analysis_set(std::span<const PlateAppearance>(&pa, 1)).empty()) continue;
    Observation o;
    o.t = pa.t;
    o.x = PlateState{quality[i].x_b, quality[i].x_p, pa.hand_match(), pa.home ? 1 : 0};
    o.y = pa.outcome;
    o.pitcher = intern(pitchers, out.pitcher_ids, pa.pitcher_id);
    o.batter = intern(batters, out.batter_ids, pa.batter_id);
    o.game = intern(game_index, game_ids, game_key(pa));
    out.obs.push_back(o);
    out.pas.push_back(pa);
    out.quality.push_back(quality[i]);
  }
  if (out.obs.empty()) throw ValidationError("no analysis plate appearances left in season " + std::to_string(opts.season));
  out.n_games = game_ids.size();
  for (const auto& o : out.obs) {
    out.mean_x_b += o.x.x_b;
    out.mean_x_p += o.x.x_p;
  }
  out.mean_x_b /= static_cast<double>(out.obs.size());
  out.mean_x_p /= static_cast<double>(out.obs.size());
  return out;
}

}  // namespace ttop
