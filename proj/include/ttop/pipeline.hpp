#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttop/data_ingest.hpp"
#include "ttop/model.hpp"
#include "ttop/quality.hpp"

namespace ttop {

struct PipelineOptions {
  int season = 0;
  /// Replaces the previous-season priors computed from the input.
  std::optional<PriorTable> priors;
  QualityOptions quality;
};

/// One season turned into model observations.
struct SeasonData {
  int season = 0;
  std::vector<Observation> obs;
  std::vector<PlateAppearance> pas;          // analysis rows, aligned with obs
  std::vector<QualityCovariates> quality;    // aligned with obs
  TruncationSummary truncation;
  std::vector<std::string> pitcher_ids;      // index -> id
  std::vector<std::string> batter_ids;
  std::size_t n_games = 0;
  double mean_x_b = 0.0, mean_x_p = 0.0;
};

/// Quality covariates over every PA of the season (earlier PAs only), then
/// selection-bias truncation on starter games, then the analysis filter.
/// `all` must be sorted by order_key and may contain earlier seasons, which
/// feed the priors.
SeasonData prepare_season(std::span<const PlateAppearance> all, const PipelineOptions& opts);

/// The single season present in `pas`; throws when there are several.
int only_season(std::span<const PlateAppearance> pas);

}  // namespace ttop
