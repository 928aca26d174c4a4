#include "ttop/data_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ttop/csv.hpp"
#include "ttop/errors.hpp"
#include "ttop/stats.hpp"

namespace ttop {
namespace {

constexpr std::array<std::string_view, 13> kColumns = {
    "game_id", "season", "date", "pa_index", "pitcher_id", "batter_id", "is_starter",
    "t",       "outcome", "bat_hand", "pit_hand", "home", "event_woba"};

bool parse_bool(std::string_view s, bool& out) {
  if (s == "1" || s == "true" || s == "TRUE" || s == "T") {
    out = true;
    return true;
  }
  if (s == "0" || s == "false" || s == "FALSE" || s == "F") {
    out = false;
    return true;
  }
  return false;
}

bool parse_hand(std::string_view s, Hand& out) {
  if (s.size() != 1) return false;
  switch (s[0]) {
    case 'L': out = Hand::L; return true;
    case 'R': out = Hand::R; return true;
    case 'S': out = Hand::S; return true;
    default: return false;
  }
}

}  // namespace

std::vector<PlateAppearance> read_plate_appearances(std::istream& in, std::optional<YearRange> seasons,
                                                    ParseReport* report, const OutcomeWeights& weights) {
  ParseReport local;
  ParseReport& rep = report ? *report : local;
  rep = ParseReport{};

  std::string line;
  if (!std::getline(in, line)) throw ValidationError("missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::array<int, kColumns.size()> pos;
  pos.fill(-1);
  const auto header = split_row(line);
  for (std::size_t i = 0; i < header.size(); ++i)
    for (std::size_t c = 0; c < kColumns.size(); ++c)
      if (header[i] == kColumns[c]) pos[c] = static_cast<int>(i);
  for (std::size_t c = 0; c < kColumns.size(); ++c)
    if (pos[c] < 0) throw ValidationError("missing column '" + std::string(kColumns[c]) + "'");

  std::vector<PlateAppearance> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++rep.rows_read;

    const auto fields = split_row(line);
    auto reject = [&](const std::string& msg) {
      ++rep.rows_skipped;
      rep.issues.push_back({line_no, msg});
    };
    if (fields.size() != header.size()) {
      reject("expected " + std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    auto f = [&](int c) { return fields[pos[c]]; };

    PlateAppearance pa;
    pa.game_id = std::string(f(0));
    pa.date = std::string(f(2));
    pa.pitcher_id = std::string(f(4));
    pa.batter_id = std::string(f(5));
    if (!parse_number(f(1), pa.season)) { reject("bad season '" + std::string(f(1)) + "'"); continue; }
    if (!parse_number(f(3), pa.pa_index)) { reject("bad pa_index '" + std::string(f(3)) + "'"); continue; }
    if (!parse_bool(f(6), pa.is_starter)) { reject("bad is_starter '" + std::string(f(6)) + "'"); continue; }
    if (!parse_number(f(7), pa.t)) { reject("bad t '" + std::string(f(7)) + "'"); continue; }
    const auto outcome = parse_outcome(f(8));
    if (!outcome) { reject("unknown outcome code '" + std::string(f(8)) + "'"); continue; }
    pa.outcome = *outcome;
    if (!parse_hand(f(9), pa.bat_hand)) { reject("unknown bat_hand '" + std::string(f(9)) + "'"); continue; }
    if (!parse_hand(f(10), pa.pit_hand)) { reject("unknown pit_hand '" + std::string(f(10)) + "'"); continue; }
    if (!parse_bool(f(11), pa.home)) { reject("bad home '" + std::string(f(11)) + "'"); continue; }
    double woba = 0.0;
    if (!parse_number(f(12), woba)) { reject("bad event_woba '" + std::string(f(12)) + "'"); continue; }
    if (pa.game_id.empty() || pa.pitcher_id.empty() || pa.batter_id.empty()) {
      reject("empty identifier");
      continue;
    }
    if (pa.t < 1) { reject("t=" + std::to_string(pa.t) + " below 1"); continue; }
    if (pa.is_starter && pa.t > kMaxBatterSequence) {
      ++rep.starter_t_beyond;
      rep.issues.push_back({line_no, "starter row with t=" + std::to_string(pa.t) +
                                         " beyond the third time through the order"});
    }
    if (seasons && !seasons->contains(pa.season)) continue;

    // accept raw weights or wOBA points
    const double w = weights[pa.outcome];
    if (std::abs(woba - w) > 5e-3 && std::abs(woba - 1000.0 * w) > 5.0) ++rep.woba_mismatches;
    pa.event_woba = w;

    out.push_back(std::move(pa));
  }
  rep.rows_valid = out.size();

  std::stable_sort(out.begin(), out.end(),
                   [](const PlateAppearance& a, const PlateAppearance& b) { return a.order_key() < b.order_key(); });
  return out;
}

std::vector<PlateAppearance> parse_plate_appearances(const std::filesystem::path& path,
                                                     std::optional<YearRange> seasons, ParseReport* report,
                                                     const OutcomeWeights& weights) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plate-appearance file '" + path.string() + "'");
  return read_plate_appearances(in, seasons, report, weights);
}

void write_plate_appearances(std::ostream& out, std::span<const PlateAppearance> pas) {
  out << kPlateAppearanceHeader << '\n';
  for (const auto& pa : pas) {
    out << pa.game_id << ',' << pa.season << ',' << pa.date << ',' << pa.pa_index << ',' << pa.pitcher_id << ','
        << pa.batter_id << ',' << (pa.is_starter ? 1 : 0) << ',' << pa.t << ',' << outcome_code(pa.outcome) << ','
        << static_cast<char>(pa.bat_hand) << ',' << static_cast<char>(pa.pit_hand) << ',' << (pa.home ? 1 : 0)
        << ',' << format_double(pa.event_woba) << '\n';
  }
}

std::vector<PlateAppearance> filter_analysis_set(std::span<const PlateAppearance> pas) {
  std::vector<PlateAppearance> out;
  out.reserve(pas.size());
  for (const auto& pa : pas) {
    if (!pa.is_starter) continue;
    if (pa.t < 1 || pa.t > kMaxBatterSequence) continue;
    if (pa.bat_hand == Hand::S || pa.pit_hand == Hand::S) continue;
    out.push_back(pa);
  }
  return out;
}

std::vector<GameRecord> group_games(std::span<const PlateAppearance> pas) {
  std::vector<GameRecord> games;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& pa : pas) {
    if (!pa.is_starter) continue;
    const std::string key = pa.game_id + '\x1f' + pa.pitcher_id;
    auto [it, inserted] = slot.try_emplace(key, games.size());
    if (inserted) games.push_back(GameRecord{pa.game_id, pa.pitcher_id, {}, 0});
    games[it->second].pas.push_back(pa);
  }
  for (auto& g : games) {
    std::stable_sort(g.pas.begin(), g.pas.end(),
                     [](const PlateAppearance& a, const PlateAppearance& b) { return a.t < b.t; });
    for (std::size_t i = 1; i < g.pas.size(); ++i)
      if (g.pas[i].t == g.pas[i - 1].t)
        throw ValidationError("game " + g.game_id + " pitcher " + g.pitcher_id + " repeats t=" +
                              std::to_string(g.pas[i].t));
    g.t_max = g.pas.empty() ? 0 : g.pas.back().t;
  }
  return games;
}

std::vector<PlateAppearance> flatten_games(std::span<const GameRecord> games) {
  std::vector<PlateAppearance> out;
  for (const auto& g : games) out.insert(out.end(), g.pas.begin(), g.pas.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const PlateAppearance& a, const PlateAppearance& b) { return a.order_key() < b.order_key(); });
  return out;
}

TruncationResult truncate_selection_bias(std::span<const GameRecord> games) {
  TruncationResult res;
  for (const auto& g : games)
    if (g.t_max >= kThirdTimeStart) res.games.push_back(g);
  res.summary.games_before = games.size();
  res.summary.games_after = res.games.size();
  res.summary.fraction_removed =
      games.empty() ? 0.0 : 1.0 - static_cast<double>(res.games.size()) / static_cast<double>(games.size());
  return res;
}

double mean_game_woba(const GameRecord& game) {
  if (game.pas.empty()) throw ArgumentError("game " + game.game_id + " has no plate appearances");
  double s = 0.0;
  for (const auto& pa : game.pas) s += pa.event_woba;
  return s / static_cast<double>(game.pas.size());
}

ExitHistogram exit_histogram(std::span<const GameRecord> games, std::span<const double> values, int n_bins) {
  if (n_bins < 1) throw ArgumentError("n_bins must be at least 1");
  if (values.size() != games.size()) throw ArgumentError("one binning value per game required");
  if (games.empty()) throw ArgumentError("exit histogram of zero games");

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  if (distinct < static_cast<std::size_t>(n_bins))
    throw ArgumentError("degenerate bins: " + std::to_string(distinct) + " distinct values for " +
                        std::to_string(n_bins) + " bins");
  sorted.assign(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  ExitHistogram h;
  for (int b = 0; b <= n_bins; ++b)
    h.cuts.push_back(quantile_sorted(std::span<const double>(sorted), static_cast<double>(b) / n_bins));
  h.members.resize(n_bins);
  h.counts.resize(n_bins);
  for (int b = 0; b < n_bins; ++b) {
    std::ostringstream label;
    label.precision(4);
    label << 'Q' << (b + 1) << '[' << h.cuts[b] << ';' << h.cuts[b + 1] << ']';
    h.labels.push_back(label.str());
  }
  for (std::size_t g = 0; g < games.size(); ++g) {
    // values equal to an interior cut go to the lower bin
    int bin = 0;
    for (int c = 1; c < n_bins; ++c)
      if (values[g] > h.cuts[c]) bin = c;
    h.members[bin].push_back(g);
    ++h.counts[bin][games[g].t_max];
  }
  return h;
}

void write_exit_histogram(std::ostream& out, const ExitHistogram& hist) {
  out << "bin_label,t_exit,count\n";
  for (std::size_t b = 0; b < hist.labels.size(); ++b)
    for (const auto& [t, n] : hist.counts[b]) out << hist.labels[b] << ',' << t << ',' << n << '\n';
}

}  // namespace ttop
