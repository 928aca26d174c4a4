#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ttop/errors.hpp"
#include "ttop/quality.hpp"
#include "ttop/stats.hpp"

using namespace ttop;

namespace {

PlateAppearance pa(int season, const std::string& date, int idx, const std::string& pitcher, const std::string& batter,
                   double woba) {
  PlateAppearance p;
  p.game_id = date + pitcher;
  p.season = season;
  p.date = date;
  p.pa_index = idx;
  p.pitcher_id = pitcher;
  p.batter_id = batter;
  p.is_starter = true;
  p.t = idx;
  p.event_woba = woba;
  return p;
}

// closed form written out separately from the library
double oracle_theta(double theta0, double sum_x, int j, double tau, double nu) {
  const double a = j / (tau * tau);
  const double b = 1.0 / (nu * nu);
  const double mean_x = j > 0 ? sum_x / j : 0.0;
  return (a * mean_x + b * theta0) / (a + b);
}

}  // namespace

TEST_CASE("first update from the league median") {
  const QualityHyperparams hp;
  const auto s = update(initial_quality("b", 0.315), 0.870, hp);
  CHECK(s.j == 1);
  CHECK(s.theta_hat == doctest::Approx((4 * 0.870 + 400 * 0.315) / 404.0).epsilon(1e-14));
  CHECK(std::round(s.theta_hat * 1e5) / 1e5 == doctest::Approx(0.32050));
}

TEST_CASE("no observations gives the prior mean") {
  CHECK(initial_quality("b", 0.315).theta_hat == 0.315);
  CHECK(quality_posterior_mean(0.315, 0.0, 0, QualityHyperparams{}) == 0.315);
}

TEST_CASE("many identical observations concentrate on the data") {
  const QualityHyperparams hp;
  auto s = initial_quality("b", 0.315);
  for (int i = 0; i < 10000; ++i) s = update(s, 0.400, hp);
  CHECK(std::abs(s.theta_hat - 0.400) < 0.001);
}

TEST_CASE("sequential updates equal the closed form") {
  std::mt19937_64 rng(5);
  std::discrete_distribution<int> pick({67.6, 7.8, 0.9, 14.9, 4.8, 0.45, 3.5});
  const OutcomeWeights w;
  for (double tau : {0.5, 0.3}) {
    for (double nu : {0.05, 0.02}) {
      const QualityHyperparams hp{tau, nu};
      auto s = initial_quality("b", 0.3);
      double sum = 0.0;
      for (int j = 1; j <= 700; ++j) {
        const double x = w[pick(rng)];
        sum += x;
        s = update(s, x, hp);
        const double closed = oracle_theta(0.3, sum, j, tau, nu);
        CHECK(std::abs(s.theta_hat - closed) <= 1e-12 * std::abs(closed));
      }
    }
  }
}

TEST_CASE("estimate is a convex combination and monotone in the sum") {
  const QualityHyperparams hp;
  const double lo = quality_posterior_mean(0.3, 1.0, 5, hp);
  const double hi = quality_posterior_mean(0.3, 1.1, 5, hp);
  CHECK(hi > lo);
  const double wprior = (1 / (hp.nu * hp.nu)) / (5 / (hp.tau * hp.tau) + 1 / (hp.nu * hp.nu));
  CHECK(lo == doctest::Approx(wprior * 0.3 + (1 - wprior) * 0.2));
}

TEST_CASE("prior means for veterans and rookies") {
  const std::unordered_map<std::string, double> three = {{"a", 0.30}, {"b", 0.32}, {"c", 0.36}};
  const std::unordered_map<std::string, double> two = {{"a", 0.30}, {"b", 0.34}};
  CHECK(prior_mean("c", three, false) == 0.36);
  CHECK(prior_mean("x", three, true) == doctest::Approx(0.32));
  std::vector<double> v = {0.34, 0.30};
  std::sort(v.begin(), v.end());
  CHECK(prior_mean("x", two, true) == doctest::Approx(0.5 * (v[0] + v[1])));
  CHECK_THROWS_AS(prior_mean("x", two, false), ValidationError);
  CHECK_THROWS_AS(prior_mean("x", {}, true), ArgumentError);
}

TEST_CASE("covariates use only earlier plate appearances") {
  const std::vector<PlateAppearance> pas = {pa(2017, "2017-04-01", 1, "p", "b", 0.0),
                                            pa(2017, "2017-04-01", 2, "p", "b", 0.0),
                                            pa(2017, "2017-04-01", 3, "p", "b", 0.870)};
  std::map<int, PriorTable> priors;
  priors[2017].batter["b"] = 0.33;
  priors[2017].pitcher["p"] = 0.30;
  const auto cov = attach_quality_covariates(pas, priors);
  REQUIRE(cov.size() == 3);
  CHECK(cov[0].x_b == doctest::Approx(logit(0.33)));
  CHECK(cov[0].theta_p == 0.30);
  CHECK(cov[2].theta_b == doctest::Approx(oracle_theta(0.33, 0.0, 2, 0.5, 0.05)).epsilon(1e-14));
  CHECK(cov[2].theta_p == doctest::Approx(oracle_theta(0.30, 0.0, 2, 0.5, 0.05)).epsilon(1e-14));

  // changing later outcomes never moves earlier covariates
  auto changed = pas;
  changed[2].event_woba = 1.940;
  changed[1].event_woba = 0.690;
  const auto cov2 = attach_quality_covariates(changed, priors);
  CHECK(cov2[0].x_b == cov[0].x_b);
  CHECK(cov2[1].x_b == cov[1].x_b);
}

TEST_CASE("rookies take the median of active non-rookies of their role") {
  const std::vector<PlateAppearance> pas = {pa(2018, "2018-04-01", 1, "p1", "b1", 0.0),
                                            pa(2018, "2018-04-01", 2, "p1", "b2", 0.0),
                                            pa(2018, "2018-04-01", 3, "p1", "b3", 0.0),
                                            pa(2018, "2018-04-02", 1, "p2", "rookie", 0.0)};
  std::map<int, PriorTable> priors;
  priors[2018].batter = {{"b1", 0.30}, {"b2", 0.34}, {"b3", 0.40}, {"retired", 0.10}};
  priors[2018].pitcher = {{"p1", 0.28}};
  const auto cov = attach_quality_covariates(pas, priors);
  CHECK(cov[3].theta_b == doctest::Approx(0.34));
  CHECK(cov[3].theta_p == doctest::Approx(0.28));
}

TEST_CASE("previous-season priors use the latest earlier season") {
  const std::vector<PlateAppearance> pas = {pa(2015, "2015-05-01", 1, "p", "b", 0.9),
                                            pa(2016, "2016-05-01", 1, "p", "b", 0.0),
                                            pa(2016, "2016-05-01", 2, "p", "b", 0.690),
                                            pa(2018, "2018-05-01", 1, "p", "b", 0.0)};
  const auto t = previous_season_priors(pas, 2018);
  CHECK(t.batter.at("b") == doctest::Approx(0.345));
  CHECK(t.pitcher.at("p") == doctest::Approx(0.345));
}

TEST_CASE("logit clamp guards the boundary") {
  CHECK(quality_logit(0.0) == doctest::Approx(logit(0.001)));
  CHECK(quality_logit(1.0) == doctest::Approx(logit(0.999)));
  CHECK_THROWS_AS(quality_logit(std::nan("")), DomainError);
}

TEST_CASE("hyperparameters from two synthetic players") {
  // season means differ by 0.04*sqrt(2) and 0.06*sqrt(2), so the per-player
  // SDs of season means are 0.04 and 0.06
  const double db = 0.04 * std::sqrt(2.0), dp = 0.06 * std::sqrt(2.0);
  std::vector<PlayerSeason> h;
  h.push_back({"b", Role::Batter, 2015, {0.2, 0.4}});
  h.push_back({"b", Role::Batter, 2016, {0.2 + db, 0.4 + db}});
  h.push_back({"p", Role::Pitcher, 2015, {0.2, 0.4}});
  h.push_back({"p", Role::Pitcher, 2016, {0.2 + dp, 0.4 + dp}});
  const auto rep = estimate_hyperparams(h);
  CHECK(rep.nu_batter_median == doctest::Approx(0.04));
  CHECK(rep.nu_pitcher_median == doctest::Approx(0.06));
  CHECK(rep.hp.nu == doctest::Approx(0.05));
  CHECK(rep.tau_batters == 2);
  CHECK(rep.hp.tau == doctest::Approx(std::sqrt(0.02)));

  const std::vector<PlayerSeason> one_season(h.begin(), h.begin() + 1);
  CHECK_THROWS_WITH_AS(estimate_hyperparams(one_season), doctest::Contains("insufficient history"), ValidationError);
}

TEST_CASE("constant histories are rejected as degenerate") {
  std::vector<PlayerSeason> h;
  for (int s = 0; s < 2; ++s) {
    h.push_back({"b", Role::Batter, 2015 + s, {0.3, 0.3}});
    h.push_back({"p", Role::Pitcher, 2015 + s, {0.3, 0.3}});
  }
  CHECK_THROWS_WITH_AS(estimate_hyperparams(h), doctest::Contains("degenerate variance"), ValidationError);
}
