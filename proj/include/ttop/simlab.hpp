#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttop/data_ingest.hpp"
#include "ttop/model.hpp"
#include "ttop/posterior.hpp"
#include "ttop/sampler.hpp"

namespace ttop {

/// Distribution of per-game covariates in simulated seasons. Qualities are
/// drawn on the wOBA scale and logit-transformed.
struct CovariateModel {
  double batter_mean = 0.315;
  double batter_sd = 0.0415;
  double pitcher_mean = 0.315;
  double pitcher_sd = 0.0367;
  double p_hand_match = 0.45;
  double p_batter_home = 0.5;
};

struct GeneratingParams {
  BaselineCoefficients coef;

  /// Generating values of study 1, 2 or 3.
  static GeneratingParams study(int study);
  VectorXd natural() const { return coef.to_natural(); }
};

struct SimStudyConfig {
  int study = 1;
  int n_seasons = 20;
  int games_per_season = 1000;
  std::uint64_t seed = 1;
  double train_fraction = 0.8;
  CovariateModel covariates;
  SamplerConfig sampler;
  int threads = 1;               // seasons fitted concurrently
  double rhat_exclusion = 1.2;   // seasons at or above are excluded

  static SimStudyConfig desk(int study);
  static SimStudyConfig paper(int study);
  void validate() const;
};

/// One simulated season. Observations carry the generating covariates and a
/// 0-based game index; `pas` is the same data in the input CSV layout.
struct SimSeason {
  int season = 0;
  std::vector<Observation> obs;
  std::vector<PlateAppearance> pas;
};

SimSeason generate_season(const SimStudyConfig& cfg, const GeneratingParams& gen, int season_index);

struct GameSplit {
  std::vector<Observation> train, test;
};

/// Partition by game: a random round(fraction * games) of the games train.
GameSplit split_by_game(std::span<const Observation> obs, double train_fraction, std::uint64_t seed);

using ProbFn = std::function<ProbVector(std::size_t row)>;

struct CrossEntropy {
  double loss = 0.0;
  std::size_t clamped = 0;  // realized outcomes predicted with probability < 1e-12
};

/// Mean negative log probability of the realized outcomes (natural log);
/// `probs(i)` predicts row i of `test`.
CrossEntropy cross_entropy(const ProbFn& probs, std::span<const Observation> test);
/// Same, with one row of `probs` (n x 7) per test observation.
CrossEntropy cross_entropy(const MatrixXd& probs, std::span<const Observation> test);

/// Empirical outcome frequencies of `train`.
ProbVector base_rate_baseline(std::span<const Observation> train);

/// Posterior-mean predicted probabilities (average of per-draw probability
/// vectors), n x 7.
MatrixXd posterior_mean_probabilities(const PosteriorDraws& draws, const ModelSpec& spec, const Dataset& data);

struct SeasonResult {
  int season = 0;
  bool excluded = false;
  double max_rhat = 0.0;
  double min_ess = 0.0;
  std::size_t divergences = 0;
  bool zero_variance = false;
  std::vector<char> covered;  // per parameter, 95% interval holds the generating value
  double ce_model = 0.0, ce_baserate = 0.0;
  std::size_t ce_clamped = 0;
  IntervalSummary d12, d23;
  std::pair<double, double> d12_ci, d23_ci;
  TrajectorySummary trajectory;  // at the simulation reference state
  std::vector<std::string> warnings;
  std::size_t n_train = 0, n_test = 0;
};

struct StudyReport {
  int study = 0;
  int n_seasons = 0;
  std::vector<std::string> param_names;
  double coverage_all = 0.0;
  double coverage_beta = 0.0;
  std::vector<double> per_param_coverage;
  double mean_ce_model = 0.0;
  double mean_ce_baserate = 0.0;
  std::vector<int> excluded_seasons;
  std::vector<SeasonResult> seasons;
  double truth_d12 = 0.0, truth_d23 = 0.0;
  std::array<double, kNumTimes> truth_xwoba{};
  std::vector<std::string> warnings;
};

/// Fits one season (train part) and scores it against the generating values.
SeasonResult run_season(const SimStudyConfig& cfg, const GeneratingParams& gen, int season_index);

/// All seasons of a study, `cfg.threads` at a time. When `run_dir` is given,
/// per-season artifacts are written below it.
StudyReport run_study(const SimStudyConfig& cfg, const std::optional<std::filesystem::path>& run_dir = std::nullopt);

void write_study_report_json(const std::filesystem::path& path, const StudyReport& report);
/// Truth curve and posterior bands of every season: season,t,truth,mean,q025,q975.
void write_study_bands_csv(const std::filesystem::path& path, const StudyReport& report);

struct CvFold {
  int fold = 0;
  std::size_t n_train = 0, n_test = 0;
  double ce_model = 0.0, ce_baserate = 0.0;
  double max_rhat = 0.0;
};

struct CvReport {
  std::vector<CvFold> folds;
  double ce_model = 0.0;  // test-size weighted mean over folds
  double ce_baserate = 0.0;
};

/// k-fold cross-validation with folds made of whole games.
CvReport kfold_cv(std::span<const Observation> obs, int k, const ModelSpec& spec, const SamplerConfig& sampler,
                  std::uint64_t seed);

void write_cv_csv(const std::filesystem::path& path, const CvReport& report);

}  // namespace ttop
