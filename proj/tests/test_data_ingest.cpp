#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "ttop/data_ingest.hpp"
#include "ttop/errors.hpp"

using namespace ttop;

namespace {

std::string header() { return std::string(kPlateAppearanceHeader) + "\n"; }

std::string row(const std::string& game, int t, const std::string& outcome, const std::string& bat = "L",
                const std::string& pit = "R", int starter = 1, const std::string& date = "2017-04-02",
                const std::string& pitcher = "p1", const std::string& batter = "b1", double woba = -1.0) {
  std::ostringstream s;
  s << game << ",2017," << date << ',' << t << ',' << pitcher << ',' << batter << ',' << starter << ',' << t << ','
    << outcome << ',' << bat << ',' << pit << ",1," << (woba < 0 ? 0.0 : woba) << '\n';
  return s.str();
}

std::vector<PlateAppearance> parse(const std::string& csv, ParseReport* rep = nullptr) {
  std::istringstream in(csv);
  return read_plate_appearances(in, std::nullopt, rep);
}

GameRecord game_with_tmax(const std::string& id, int t_max, double woba = 0.0) {
  GameRecord g;
  g.game_id = id;
  g.pitcher_id = "p" + id;
  for (int t = 1; t <= t_max; ++t) {
    PlateAppearance pa;
    pa.game_id = id;
    pa.pitcher_id = g.pitcher_id;
    pa.t = t;
    pa.is_starter = true;
    pa.event_woba = woba;
    g.pas.push_back(pa);
  }
  g.t_max = t_max;
  return g;
}

}  // namespace

TEST_CASE("home run row maps fields directly") {
  const auto pas = parse(header() + row("g1", 19, "HR", "L", "R"));
  REQUIRE(pas.size() == 1);
  CHECK(pas[0].outcome == Outcome::HR);
  CHECK(pas[0].t == 19);
  CHECK(pas[0].hand_match() == 0);
  CHECK(pas[0].event_woba == doctest::Approx(1.940));
}

TEST_CASE("empty file with header gives no rows and no issues") {
  ParseReport rep;
  const auto pas = parse(header(), &rep);
  CHECK(pas.empty());
  CHECK(rep.rows_skipped == 0);
  CHECK(rep.issues.empty());
}

TEST_CASE("unknown outcome code skips the row and logs it") {
  ParseReport rep;
  const auto pas = parse(header() + row("g1", 1, "IBB") + row("g1", 2, "1B"), &rep);
  CHECK(pas.size() == 1);
  CHECK(rep.rows_skipped == 1);
  REQUIRE(rep.issues.size() == 1);
  CHECK(rep.issues[0].line == 2);
}

TEST_CASE("missing column is a validation error") {
  std::istringstream in("game_id,season\n");
  CHECK_THROWS_AS(read_plate_appearances(in), ValidationError);
}

TEST_CASE("missing file is an I/O error") {
  CHECK_THROWS_AS(parse_plate_appearances("/nonexistent/pa.csv"), IoError);
}

TEST_CASE("rows are sorted by date then within-game index") {
  const auto pas =
      parse(header() + row("g2", 1, "OUT", "L", "R", 1, "2017-05-01") + row("g1", 2, "OUT") + row("g1", 1, "1B"));
  REQUIRE(pas.size() == 3);
  CHECK(pas[0].game_id == "g1");
  CHECK(pas[0].t == 1);
  CHECK(pas[1].t == 2);
  CHECK(pas[2].game_id == "g2");
}

TEST_CASE("event wOBA is normalized to the outcome weight") {
  ParseReport rep;
  const auto pas = parse(header() + row("g1", 1, "2B", "L", "R", 1, "2017-04-02", "p1", "b1", 1.25), &rep);
  CHECK(pas[0].event_woba == doctest::Approx(1.217));
  CHECK(rep.woba_mismatches == 1);
}

TEST_CASE("parse, write, parse round-trips") {
  const std::string csv = header() + row("g1", 1, "OUT") + row("g1", 2, "UBB", "R", "R") + row("g1", 3, "3B", "S");
  const auto a = parse(csv);
  std::ostringstream out;
  write_plate_appearances(out, a);
  const auto b = parse(out.str());
  CHECK(a == b);
}

TEST_CASE("analysis filter") {
  const auto pas = parse(header() + row("g1", 9, "OUT", "R", "R") + row("g1", 28, "OUT") + row("g1", 10, "OUT", "S") +
                         row("g1", 11, "OUT", "L", "R", 0));
  const auto f = filter_analysis_set(pas);
  REQUIRE(f.size() == 1);
  CHECK(f[0].t == 9);
  CHECK(f[0].hand_match() == 1);
  CHECK(filter_analysis_set(f) == f);
}

TEST_CASE("grouping keeps t strictly increasing and rejects repeats") {
  auto pas = parse(header() + row("g1", 2, "OUT") + row("g1", 1, "OUT") + row("g2", 1, "OUT"));
  const auto games = group_games(pas);
  REQUIRE(games.size() == 2);
  CHECK(games[0].t_max == 2);
  CHECK(games[0].pas[0].t == 1);
  pas.push_back(pas.front());
  CHECK_THROWS_AS(group_games(pas), ValidationError);
}

TEST_CASE("selection-bias truncation boundary") {
  const std::vector<GameRecord> games = {game_with_tmax("a", 18), game_with_tmax("b", 19), game_with_tmax("c", 25)};
  const auto res = truncate_selection_bias(games);
  REQUIRE(res.games.size() == 2);
  CHECK(res.games[0].game_id == "b");
  CHECK(res.summary.games_before == 3);
  CHECK(res.summary.games_after == 2);
  CHECK(res.summary.fraction_removed == doctest::Approx(1.0 / 3.0));
  for (const auto& g : res.games) {
    CHECK(std::any_of(g.pas.begin(), g.pas.end(), [](const auto& pa) { return pa.t >= 19; }));
    const auto it = std::find_if(games.begin(), games.end(), [&](const auto& o) { return o.game_id == g.game_id; });
    CHECK(it->pas == g.pas);
  }
}

TEST_CASE("single-bin exit histogram holds every game") {
  std::vector<GameRecord> games;
  std::vector<double> values;
  for (int t = 10; t <= 15; ++t) {
    games.push_back(game_with_tmax("g" + std::to_string(t), t, 0.1 * t));
    values.push_back(mean_game_woba(games.back()));
  }
  const auto h = exit_histogram(games, values, 1);
  REQUIRE(h.counts.size() == 1);
  CHECK(h.counts[0].size() == 6);
  for (int t = 10; t <= 15; ++t) CHECK(h.counts[0].at(t) == 1);
}

TEST_CASE("two-bin exit histogram splits at the median") {
  // 12 games with shuffled binning values; the six smallest values form bin 1
  const std::vector<double> values = {0.31, 0.25, 0.40, 0.29, 0.36, 0.22, 0.33, 0.27, 0.38, 0.30, 0.35, 0.24};
  std::vector<GameRecord> games;
  for (int g = 0; g < 12; ++g) games.push_back(game_with_tmax(std::to_string(g), 15 + g));
  const auto h = exit_histogram(games, values, 2);

  std::vector<std::size_t> order(12);
  for (std::size_t i = 0; i < 12; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<std::size_t> low(order.begin(), order.begin() + 6), high(order.begin() + 6, order.end());
  std::sort(low.begin(), low.end());
  std::sort(high.begin(), high.end());
  CHECK(h.members[0] == low);
  CHECK(h.members[1] == high);
  CHECK(h.cuts[1] == doctest::Approx(0.305));
}

TEST_CASE("exit histogram argument errors") {
  std::vector<GameRecord> games = {game_with_tmax("a", 20), game_with_tmax("b", 21)};
  const std::vector<double> same = {0.3, 0.3};
  CHECK_THROWS_AS(exit_histogram(games, same, 0), ArgumentError);
  CHECK_THROWS_WITH_AS(exit_histogram(games, same, 2), doctest::Contains("degenerate"), ArgumentError);
}

TEST_CASE("exit histogram CSV layout") {
  std::vector<GameRecord> games = {game_with_tmax("a", 20), game_with_tmax("b", 20)};
  const std::vector<double> v = {0.1, 0.2};
  std::ostringstream out;
  write_exit_histogram(out, exit_histogram(games, v, 1));
  CHECK(out.str().rfind("bin_label,t_exit,count\n", 0) == 0);
  CHECK(out.str().find(",20,2\n") != std::string::npos);
}
