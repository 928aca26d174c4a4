#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "ttop/outcome.hpp"

namespace ttop {

enum class Hand : char { L = 'L', R = 'R', S = 'S' };

inline constexpr int kMaxBatterSequence = 27;
inline constexpr int kThirdTimeStart = 19;

/// One batter-pitcher event as it appears in the input table.
struct PlateAppearance {
  std::string game_id;
  int season = 0;
  std::string date;  // ISO yyyy-mm-dd, sorts lexicographically
  int pa_index = 0;  // within-game ordering
  std::string pitcher_id;
  std::string batter_id;
  bool is_starter = false;
  int t = 0;
  Outcome outcome = Outcome::Out;
  Hand bat_hand = Hand::R;
  Hand pit_hand = Hand::R;
  bool home = false;
  double event_woba = 0.0;

  int hand_match() const { return bat_hand == pit_hand ? 1 : 0; }
  auto order_key() const { return std::tie(season, date, game_id, pa_index); }

  bool operator==(const PlateAppearance&) const = default;
};

struct YearRange {
  int first;
  int last;
  bool contains(int y) const { return y >= first && y <= last; }
};

struct ParseIssue {
  std::size_t line;
  std::string message;
};

struct ParseReport {
  std::size_t rows_read = 0;
  std::size_t rows_valid = 0;
  std::size_t rows_skipped = 0;       // rejected rows
  std::size_t starter_t_beyond = 0;   // starter rows with t > 27, kept for exit analysis
  std::size_t woba_mismatches = 0;    // event_woba differing from the configured weight
  std::vector<ParseIssue> issues;
};

inline constexpr const char* kPlateAppearanceHeader =
    "game_id,season,date,pa_index,pitcher_id,batter_id,is_starter,t,outcome,bat_hand,pit_hand,home,"
    "event_woba";

/// Reads a plate-appearance CSV. Rows with unknown codes or malformed fields
/// are skipped and recorded in the report. event_woba is normalised to the
/// weight of the row's outcome. Output is sorted by order_key.
std::vector<PlateAppearance> parse_plate_appearances(const std::filesystem::path& path,
                                                     std::optional<YearRange> seasons = std::nullopt,
                                                     ParseReport* report = nullptr,
                                                     const OutcomeWeights& weights = {});

std::vector<PlateAppearance> read_plate_appearances(std::istream& in,
                                                    std::optional<YearRange> seasons = std::nullopt,
                                                    ParseReport* report = nullptr,
                                                    const OutcomeWeights& weights = {});

void write_plate_appearances(std::ostream& out, std::span<const PlateAppearance> pas);

/// Starting-pitcher plate appearances in the first three times through the
/// order, with switch hitters (and switch pitchers) removed.
std::vector<PlateAppearance> filter_analysis_set(std::span<const PlateAppearance> pas);

/// A starting pitcher's appearance in one game.
struct GameRecord {
  std::string game_id;
  std::string pitcher_id;
  std::vector<PlateAppearance> pas;  // strictly increasing t
  int t_max = 0;
};

/// Groups starter plate appearances by (game_id, pitcher_id), preserving
/// first-appearance order of the games.
std::vector<GameRecord> group_games(std::span<const PlateAppearance> pas);

std::vector<PlateAppearance> flatten_games(std::span<const GameRecord> games);

struct TruncationSummary {
  std::size_t games_before = 0;
  std::size_t games_after = 0;
  double fraction_removed = 0.0;
};

struct TruncationResult {
  std::vector<GameRecord> games;
  TruncationSummary summary;
};

/// Drops every game whose starter was pulled before the third time through
/// the order (t_max < 19).
TruncationResult truncate_selection_bias(std::span<const GameRecord> games);

enum class ExitBinning { PitcherQuality, MeanGameWoba };

double mean_game_woba(const GameRecord& game);

struct ExitHistogram {
  std::vector<std::string> labels;
  std::vector<double> cuts;                      // n_bins + 1 edges, type-7 quantiles
  std::vector<std::vector<std::size_t>> members; // game indices per bin
  std::vector<std::map<int, std::size_t>> counts;  // t_exit -> count per bin
};

/// Bins games into n_bins evenly sized quantiles of `values` (one per game)
/// and counts exit batter sequence numbers per bin.
ExitHistogram exit_histogram(std::span<const GameRecord> games, std::span<const double> values,
                             int n_bins);

/// CSV `bin_label,t_exit,count`.
void write_exit_histogram(std::ostream& out, const ExitHistogram& hist);

}  // namespace ttop
