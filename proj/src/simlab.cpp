#include "ttop/simlab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "json.hpp"
#include "ttop/csv.hpp"
#include "ttop/errors.hpp"
#include "ttop/stats.hpp"

namespace ttop {
namespace {

constexpr double kProbFloor = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent seed for (purpose, index) under a master seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose, std::uint64_t index) {
  return splitmix64(splitmix64(splitmix64(seed) ^ purpose) ^ index);
}

enum : std::uint64_t { kGenerate = 1, kSplit = 2, kSample = 3, kFolds = 4 };

double clamped_logit(double q) { return logit(std::clamp(q, 0.001, 0.999)); }

std::string pad(int v, int width) {
  std::string s = std::to_string(v);
  return s.size() >= static_cast<std::size_t>(width) ? s : std::string(width - s.size(), '0') + s;
}

bool is_beta(const std::string& name) { return name.rfind("beta2[", 0) == 0 || name.rfind("beta3[", 0) == 0; }

}  // namespace

GeneratingParams GeneratingParams::study(int study) {
  if (study < 1 || study > 3) throw ArgumentError("study must be 1, 2 or 3");
  GeneratingParams g;
  auto& c = g.coef;
  c.alpha0 << -0.601, -1.804, -0.475, -0.943, -1.510, -0.565;
  c.alpha1 << 0.00271, 0.0122, 0.00354, 0.00635, 0.0223, 0.00926;
  c.eta.row(0) << 0.865, 1.408, 0.371, 0.856, 1.399, 1.525;
  c.eta.row(1) << 1.128, 1.987, 1.050, 1.472, 3.286, 1.850;
  c.eta.row(2) << -0.201, 0.166, -0.0164, -0.0420, -0.462, -0.0958;
  c.eta.row(3) << 0.0792, -0.0776, 0.0245, -0.00103, 0.107, 0.0230;
  if (study == 2) {
    c.beta2 << 2.0 / 65, 0.0, 4.0 / 65, 2.0 / 65, 0.0, 2.0 / 65;
    c.beta3 << 1.0 / 15, 0.0, 2.0 / 15, 1.0 / 15, 0.0, 1.0 / 15;
  } else if (study == 3) {
    c.beta3 << 0.1, 0.1, 0.3, 0.1, 0.1, 0.15;
  }
  return g;
}

SimStudyConfig SimStudyConfig::desk(int study) {
  SimStudyConfig c;
  c.study = study;
  c.sampler.n_iter = 500;
  c.sampler.n_warmup = 250;
  return c;
}

SimStudyConfig SimStudyConfig::paper(int study) {
  SimStudyConfig c;
  c.study = study;
  c.n_seasons = 25;
  c.games_per_season = 4860;
  return c;
}

void SimStudyConfig::validate() const {
  if (study < 1 || study > 3) throw ArgumentError("study must be 1, 2 or 3");
  if (n_seasons < 1) throw ArgumentError("n_seasons must be positive");
  if (games_per_season < 2) throw ArgumentError("games_per_season must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must be in (0,1)");
  if (threads < 1) throw ArgumentError("threads must be positive");
  const auto& cm = covariates;
  if (!(cm.batter_sd >= 0.0) || !(cm.pitcher_sd >= 0.0)) throw ArgumentError("quality sd must be non-negative");
  if (!(cm.p_hand_match >= 0.0 && cm.p_hand_match <= 1.0) || !(cm.p_batter_home >= 0.0 && cm.p_batter_home <= 1.0))
    throw ArgumentError("covariate rates must be probabilities");
  sampler.validate();
}

SimSeason generate_season(const SimStudyConfig& cfg, const GeneratingParams& gen, int season_index) {
  cfg.validate();
  std::mt19937_64 rng(derive_seed(cfg.seed, kGenerate, static_cast<std::uint64_t>(season_index)));
  std::normal_distribution<double> bat_q(cfg.covariates.batter_mean, cfg.covariates.batter_sd);
  std::normal_distribution<double> pit_q(cfg.covariates.pitcher_mean, cfg.covariates.pitcher_sd);
  std::bernoulli_distribution hand(cfg.covariates.p_hand_match);
  std::bernoulli_distribution home(cfg.covariates.p_batter_home);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const ModelSpec spec;
  const TimeProfile prof = time_profile(gen.natural(), spec);
  const OutcomeWeights weights;

  SimSeason s;
  s.season = season_index;
  s.obs.reserve(static_cast<std::size_t>(cfg.games_per_season) * kNumTimes);
  s.pas.reserve(s.obs.capacity());
  for (int g = 0; g < cfg.games_per_season; ++g) {
    const double x_p = clamped_logit(pit_q(rng));
    const int batter_home = home(rng) ? 1 : 0;
    std::array<double, 9> x_b;
    std::array<int, 9> match;
    for (int slot = 0; slot < 9; ++slot) {
      x_b[slot] = clamped_logit(bat_q(rng));
      match[slot] = hand(rng) ? 1 : 0;
    }
    const std::string game_id = "S" + pad(season_index + 1, 3) + "G" + pad(g + 1, 5);
    for (int t = 1; t <= kNumTimes; ++t) {
      const int slot = (t - 1) % 9;
      Observation o;
      o.t = t;
      o.x = PlateState{x_b[slot], x_p, match[slot], batter_home};
      const ProbVector p = category_probabilities(prof, t, o.x);
      const double u = unif(rng);
      double acc = 0.0;
      int k = kNumOutcomes - 1;
      for (int j = 0; j < kNumOutcomes; ++j) {
        acc += p[j];
        if (u < acc) {
          k = j;
          break;
        }
      }
      o.y = static_cast<Outcome>(k);
      o.pitcher = g;
      o.batter = 9 * g + slot;
      o.game = g;
      s.obs.push_back(o);

      PlateAppearance pa;
      pa.game_id = game_id;
      pa.season = season_index + 1;
      pa.date = "2019-01-01";
      pa.pa_index = t;
      pa.pitcher_id = "P" + pad(g + 1, 5);
      pa.batter_id = "B" + pad(g + 1, 5) + "_" + std::to_string(slot + 1);
      pa.is_starter = true;
      pa.t = t;
      pa.outcome = o.y;
      pa.pit_hand = Hand::R;
      pa.bat_hand = match[slot] ? Hand::R : Hand::L;
      pa.home = batter_home == 1;
      pa.event_woba = weights[o.y];
      s.pas.push_back(std::move(pa));
    }
  }
  return s;
}

GameSplit split_by_game(std::span<const Observation> obs, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ArgumentError("train_fraction must be in (0,1)");
  std::vector<int> games;
  {
    std::set<int> seen;
    for (const auto& o : obs) seen.insert(o.game);
    games.assign(seen.begin(), seen.end());
  }
  std::mt19937_64 rng(seed);
  std::shuffle(games.begin(), games.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(games.size())));
  const std::set<int> train_games(games.begin(), games.begin() + static_cast<std::ptrdiff_t>(n_train));
  GameSplit split;
  for (const auto& o : obs) (train_games.contains(o.game) ? split.train : split.test).push_back(o);
  return split;
}

CrossEntropy cross_entropy(const ProbFn& probs, std::span<const Observation> test) {
  if (test.empty()) throw ArgumentError("cross-entropy of an empty test set");
  CrossEntropy ce;
  double acc = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    double p = probs(i)[index(test[i].y)];
    if (!(p >= kProbFloor)) {
      p = kProbFloor;
      ++ce.clamped;
    }
    acc -= std::log(p);
  }
  ce.loss = acc / static_cast<double>(test.size());
  return ce;
}

CrossEntropy cross_entropy(const MatrixXd& probs, std::span<const Observation> test) {
  if (probs.rows() != static_cast<Index>(test.size()) || probs.cols() != kNumOutcomes)
    throw ArgumentError("probability matrix does not match the test set");
  return cross_entropy([&](std::size_t i) -> ProbVector { return probs.row(static_cast<Index>(i)).transpose(); },
                       test);
}

ProbVector base_rate_baseline(std::span<const Observation> train) {
  if (train.empty()) throw ArgumentError("base rates of an empty training set");
  ProbVector p = ProbVector::Zero();
  for (const auto& o : train) p[index(o.y)] += 1.0;
  return p / static_cast<double>(train.size());
}

MatrixXd posterior_mean_probabilities(const PosteriorDraws& draws, const ModelSpec& spec, const Dataset& data) {
  if (draws.n_total() == 0) throw ArgumentError("posterior draws are empty");
  MatrixXd acc = MatrixXd::Zero(data.size(), kNumOutcomes);
  for (const auto& chain : draws.chains)
    for (Index i = 0; i < chain.rows(); ++i) acc += outcome_probabilities(chain.row(i).transpose(), data, spec);
  return acc / static_cast<double>(draws.n_total());
}

namespace {

SeasonResult fit_season(const SimStudyConfig& cfg, const GeneratingParams& gen, int season_index,
                        const std::optional<std::filesystem::path>& dir) {
  const SimSeason season = generate_season(cfg, gen, season_index);
  const GameSplit split = split_by_game(season.obs, cfg.train_fraction,
                                        derive_seed(cfg.seed, kSplit, static_cast<std::uint64_t>(season_index)));
  const Dataset train(split.train);
  const Dataset test(split.test);
  const ModelSpec spec;
  const PosteriorTarget target(train, spec);
  SamplerConfig sc = cfg.sampler;
  sc.seed = derive_seed(cfg.seed, kSample, static_cast<std::uint64_t>(season_index));
  const PosteriorDraws draws = sample(target, sc);

  SeasonResult r;
  r.season = season_index;
  r.n_train = split.train.size();
  r.n_test = split.test.size();
  r.max_rhat = draws.max_rhat();
  r.min_ess = draws.min_ess();
  r.divergences = draws.divergences;
  r.zero_variance = draws.any_zero_variance();
  r.warnings = draws.warnings;
  r.excluded = !(r.max_rhat < cfg.rhat_exclusion);
  if (r.excluded)
    r.warnings.push_back("season " + std::to_string(season_index + 1) + " excluded: split R-hat " +
                         std::to_string(r.max_rhat));

  const VectorXd truth = gen.natural();
  const MatrixXd pooled = draws.pooled();
  r.covered.resize(static_cast<std::size_t>(pooled.cols()));
  for (Index p = 0; p < pooled.cols(); ++p) {
    const VectorXd col = pooled.col(p);
    const auto ci = credible_interval(std::span<const double>(col.data(), col.size()), 0.95);
    r.covered[p] = (truth[p] >= ci.first && truth[p] <= ci.second) ? 1 : 0;
  }

  const CrossEntropy model_ce = cross_entropy(posterior_mean_probabilities(draws, spec, test), split.test);
  const ProbVector base = base_rate_baseline(split.train);
  const CrossEntropy base_ce = cross_entropy([&](std::size_t) { return base; }, split.test);
  r.ce_model = model_ce.loss;
  r.ce_baserate = base_ce.loss;
  r.ce_clamped = model_ce.clamped + base_ce.clamped;

  const PlateState ref = sim_reference_state();
  const VectorXd d12 = tto_mean_diff(draws, spec, ref, TtoPair::OneTwo);
  const VectorXd d23 = tto_mean_diff(draws, spec, ref, TtoPair::TwoThree);
  r.d12 = summarize_samples(std::span<const double>(d12.data(), d12.size()));
  r.d23 = summarize_samples(std::span<const double>(d23.data(), d23.size()));
  r.d12_ci = {r.d12.q025, r.d12.q975};
  r.d23_ci = {r.d23.q025, r.d23.q975};
  r.trajectory = trajectory(draws, spec, ref);

  if (dir) {
    const auto sdir = *dir / ("season_" + pad(season_index + 1, 3));
    std::filesystem::create_directories(sdir);
    write_draws_csv(sdir / "draws.csv", draws);
    write_diagnostics_json(sdir / "diagnostics.json", draws);
    {
      std::ofstream pas(sdir / "plate_appearances.csv");
      write_plate_appearances(pas, season.pas);
      if (!pas) throw IoError("cannot write " + (sdir / "plate_appearances.csv").string());
    }
    write_trajectory_csv(sdir / "trajectory.csv", r.trajectory);
    write_samples_csv(sdir / "d12.csv", "d12", d12);
    write_samples_csv(sdir / "d23.csv", "d23", d23);
  }
  return r;
}

}  // namespace

SeasonResult run_season(const SimStudyConfig& cfg, const GeneratingParams& gen, int season_index) {
  cfg.validate();
  return fit_season(cfg, gen, season_index, std::nullopt);
}

StudyReport run_study(const SimStudyConfig& cfg, const std::optional<std::filesystem::path>& run_dir) {
  cfg.validate();
  const GeneratingParams gen = GeneratingParams::study(cfg.study);
  const ModelSpec spec;

  StudyReport rep;
  rep.study = cfg.study;
  rep.n_seasons = cfg.n_seasons;
  rep.param_names = ParamLayout::make(spec).names;
  const VectorXd truth = gen.natural();
  const PlateState ref = sim_reference_state();
  rep.truth_d12 = tto_mean_diff(truth, spec, ref, TtoPair::OneTwo);
  rep.truth_d23 = tto_mean_diff(truth, spec, ref, TtoPair::TwoThree);
  for (int t = 1; t <= kNumTimes; ++t) rep.truth_xwoba[t - 1] = xwoba(truth, t, ref, spec);

  rep.seasons.resize(static_cast<std::size_t>(cfg.n_seasons));
  std::vector<std::exception_ptr> errors(rep.seasons.size());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int s = next++; s < cfg.n_seasons; s = next++) {
      try {
        rep.seasons[s] = fit_season(cfg, gen, s, run_dir);
      } catch (const std::exception& e) {
        errors[s] = std::make_exception_ptr(Error("season " + std::to_string(s + 1) + ": " + e.what()));
      }
    }
  };
  const int workers = std::min(cfg.threads, cfg.n_seasons);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  const std::size_t n_params = rep.param_names.size();
  rep.per_param_coverage.assign(n_params, 0.0);
  std::size_t accepted = 0, beta_hits = 0, beta_trials = 0, all_hits = 0;
  double ce_m = 0.0, ce_b = 0.0;
  for (const auto& s : rep.seasons) {
    ce_m += s.ce_model;
    ce_b += s.ce_baserate;
    for (const auto& w : s.warnings) rep.warnings.push_back("season " + std::to_string(s.season + 1) + ": " + w);
    if (s.excluded) {
      rep.excluded_seasons.push_back(s.season + 1);
      continue;
    }
    ++accepted;
    for (std::size_t p = 0; p < n_params; ++p) {
      rep.per_param_coverage[p] += s.covered[p];
      all_hits += s.covered[p];
      if (is_beta(rep.param_names[p])) {
        beta_hits += s.covered[p];
        ++beta_trials;
      }
    }
  }
  rep.mean_ce_model = ce_m / static_cast<double>(rep.seasons.size());
  rep.mean_ce_baserate = ce_b / static_cast<double>(rep.seasons.size());
  if (accepted > 0) {
    for (auto& c : rep.per_param_coverage) c /= static_cast<double>(accepted);
    rep.coverage_all = static_cast<double>(all_hits) / static_cast<double>(accepted * n_params);
    rep.coverage_beta = static_cast<double>(beta_hits) / static_cast<double>(beta_trials);
  } else {
    rep.warnings.push_back("every season was excluded; coverage undefined");
    rep.coverage_all = rep.coverage_beta = std::nan("");
  }

  if (run_dir) {
    write_study_report_json(*run_dir / "report.json", rep);
    write_study_bands_csv(*run_dir / "bands.csv", rep);
  }
  return rep;
}

void write_study_report_json(const std::filesystem::path& path, const StudyReport& rep) {
  nlohmann::ordered_json j;
  j["study"] = rep.study;
  j["n_seasons"] = rep.n_seasons;
  j["coverage_all"] = rep.coverage_all;
  j["coverage_beta"] = rep.coverage_beta;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (std::size_t p = 0; p < rep.param_names.size(); ++p) per[rep.param_names[p]] = rep.per_param_coverage[p];
  j["per_param_coverage"] = per;
  j["mean_ce_model"] = rep.mean_ce_model;
  j["mean_ce_baserate"] = rep.mean_ce_baserate;
  j["excluded_seasons"] = rep.excluded_seasons;
  j["truth"] = {{"d12", rep.truth_d12}, {"d23", rep.truth_d23}};
  nlohmann::ordered_json seasons = nlohmann::ordered_json::array();
  for (const auto& s : rep.seasons) {
    seasons.push_back({{"season", s.season + 1},
                       {"excluded", s.excluded},
                       {"max_rhat", s.max_rhat},
                       {"min_ess", s.min_ess},
                       {"divergences", s.divergences},
                       {"zero_variance", s.zero_variance},
                       {"ce_model", s.ce_model},
                       {"ce_baserate", s.ce_baserate},
                       {"d12", {{"mean", s.d12.mean}, {"lo", s.d12_ci.first}, {"hi", s.d12_ci.second}}},
                       {"d23", {{"mean", s.d23.mean}, {"lo", s.d23_ci.first}, {"hi", s.d23_ci.second}}}});
  }
  j["seasons"] = seasons;
  j["warnings"] = rep.warnings;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

void write_study_bands_csv(const std::filesystem::path& path, const StudyReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "season,t,truth,mean,q025,q975\n";
  for (const auto& s : rep.seasons)
    for (int t = 0; t < kNumTimes; ++t) {
      const auto& b = s.trajectory.by_t[t];
      out << s.season + 1 << ',' << t + 1 << ',' << format_double(rep.truth_xwoba[t]) << ',' << format_double(b.mean)
          << ',' << format_double(b.q025) << ',' << format_double(b.q975) << '\n';
    }
}

CvReport kfold_cv(std::span<const Observation> obs, int k, const ModelSpec& spec_in, const SamplerConfig& sampler,
                  std::uint64_t seed) {
  if (k < 2) throw ArgumentError("k-fold cross-validation needs k >= 2");
  std::vector<int> games;
  {
    std::set<int> seen;
    for (const auto& o : obs) seen.insert(o.game);
    games.assign(seen.begin(), seen.end());
  }
  if (static_cast<int>(games.size()) < k)
    throw ArgumentError("only " + std::to_string(games.size()) + " games for " + std::to_string(k) + " folds");
  std::mt19937_64 rng(derive_seed(seed, kFolds, 0));
  std::shuffle(games.begin(), games.end(), rng);
  std::map<int, int> fold_of;
  for (std::size_t i = 0; i < games.size(); ++i) fold_of[games[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

  ModelSpec spec = spec_in;
  if (spec.variant == ModelVariant::Hierarchical) {
    const Dataset all(obs);
    spec.n_pitchers = std::max(spec.n_pitchers, all.n_pitchers());
    spec.n_batters = std::max(spec.n_batters, all.n_batters());
  }

  CvReport rep;
  double wm = 0.0, wb = 0.0;
  std::size_t n_test_total = 0;
  for (int f = 0; f < k; ++f) {
    std::vector<Observation> train, test;
    for (const auto& o : obs) (fold_of.at(o.game) == f ? test : train).push_back(o);
    if (train.size() < 2 || test.empty()) throw ArgumentError("fold " + std::to_string(f + 1) + " is too small to fit");
    const Dataset dtrain(train), dtest(test);
    const PosteriorTarget target(dtrain, spec);
    SamplerConfig sc = sampler;
    sc.seed = derive_seed(seed, kSample, static_cast<std::uint64_t>(f));
    PosteriorDraws draws;
    try {
      draws = sample(target, sc);
    } catch (const std::exception& e) {
      throw Error("fold " + std::to_string(f + 1) + ": " + e.what());
    }
    CvFold fold;
    fold.fold = f + 1;
    fold.n_train = train.size();
    fold.n_test = test.size();
    fold.ce_model = cross_entropy(posterior_mean_probabilities(draws, spec, dtest), test).loss;
    const ProbVector base = base_rate_baseline(train);
    fold.ce_baserate = cross_entropy([&](std::size_t) { return base; }, test).loss;
    fold.max_rhat = draws.diagnostics.empty() ? std::nan("") : draws.max_rhat();
    wm += fold.ce_model * static_cast<double>(test.size());
    wb += fold.ce_baserate * static_cast<double>(test.size());
    n_test_total += test.size();
    rep.folds.push_back(fold);
  }
  rep.ce_model = wm / static_cast<double>(n_test_total);
  rep.ce_baserate = wb / static_cast<double>(n_test_total);
  return rep;
}

void write_cv_csv(const std::filesystem::path& path, const CvReport& rep) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "fold,n_train,n_test,ce_model,ce_baserate,max_rhat\n";
  for (const auto& f : rep.folds)
    out << f.fold << ',' << f.n_train << ',' << f.n_test << ',' << format_double(f.ce_model) << ','
        << format_double(f.ce_baserate) << ',' << format_double(f.max_rhat) << '\n';
  out << "all,,," << format_double(rep.ce_model) << ',' << format_double(rep.ce_baserate) << ",\n";
}

}  // namespace ttop
