#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "ttop/model.hpp"
#include "ttop/outcome.hpp"
#include "ttop/sampler.hpp"

namespace ttop {

using ProbVector = Eigen::Matrix<double, kNumOutcomes, 1>;
/// Outcome probabilities for t = 1..27 (rows) at one state.
using ProbPath = Eigen::Matrix<double, kNumTimes, kNumOutcomes>;

/// Expected wOBA in wOBA points: 1000 * <w, p>.
double xwoba(const ProbVector& probs, const OutcomeWeights& weights = {});
double xwoba(const VectorXd& natural, int t, const PlateState& state, const ModelSpec& spec,
             const OutcomeWeights& weights = {});

ProbPath probability_path(const VectorXd& natural, const ModelSpec& spec, const PlateState& state);

/// Reference state (logit .315, logit .315, 1, 0) used for simulated seasons.
PlateState sim_reference_state();
/// Reference state (mean x_b, mean x_p, 1, 0) used for observed seasons.
PlateState data_mean_state(double mean_x_b, double mean_x_p);

enum class TtoPair { OneTwo, TwoThree };

/// First t of the earlier TTO of the pair; the later TTO starts 9 after.
inline int tto_start(TtoPair pair) { return pair == TtoPair::OneTwo ? 1 : 10; }

struct IntervalSummary {
  double mean = 0.0;
  double q25 = 0.0, q75 = 0.0;
  double q025 = 0.0, q975 = 0.0;
};

IntervalSummary summarize_samples(std::span<const double> samples);

struct TrajectorySummary {
  std::array<IntervalSummary, kNumTimes> by_t;
  /// xwOBA averaged within each TTO, then summarized across draws.
  std::array<IntervalSummary, 3> by_tto;
};

/// xwOBA(t, state) per draw: (n_draws x 27).
MatrixXd xwoba_paths(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state,
                     const OutcomeWeights& weights = {});

TrajectorySummary trajectory(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state,
                             const OutcomeWeights& weights = {});

/// (1/9) sum_t [xwOBA(t+9) - xwOBA(t)] over the earlier TTO of the pair.
double tto_mean_diff(const VectorXd& natural, const ModelSpec& spec, const PlateState& state, TtoPair pair,
                     const OutcomeWeights& weights = {});
VectorXd tto_mean_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, TtoPair pair,
                       const OutcomeWeights& weights = {});

/// Mean probability of outcome k in the later TTO minus the earlier one.
double outcome_prob_diff(const VectorXd& natural, const ModelSpec& spec, const PlateState& state, Outcome k,
                         TtoPair pair);
VectorXd outcome_prob_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, Outcome k,
                           TtoPair pair);

/// 1000 * w_k times outcome_prob_diff.
VectorXd outcome_xwoba_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, Outcome k,
                            TtoPair pair, const OutcomeWeights& weights = {});

enum class TableAxis { HandHome, Quality };

struct TableLevel {
  std::string label;
  double value = 0.0;
};

struct TableCell {
  std::string row_level, col_level;
  double mean = 0.0;
  double two_sd = 0.0;
  double q025 = 0.0, q975 = 0.0;
};

/// Per draw, xwOBA averaged over t = 1..27, then posterior mean and twice
/// the posterior sd per cell. HandHome: rows set hand, columns set home, x_b
/// and x_p come from `base`. Quality: rows set x_b, columns set x_p, hand and
/// home come from `base`.
std::vector<TableCell> averaged_xwoba_table(const PosteriorDraws& draws, const ModelSpec& spec, TableAxis axis,
                                            const PlateState& base, std::span<const TableLevel> rows,
                                            std::span<const TableLevel> cols, const OutcomeWeights& weights = {});

/// Central interval at type-7 quantiles (1-level)/2 and 1-(1-level)/2.
std::pair<double, double> credible_interval(std::span<const double> samples, double level);

void write_trajectory_csv(const std::filesystem::path& path, const TrajectorySummary& summary);
void write_table_csv(const std::filesystem::path& path, std::span<const TableCell> cells);
void write_samples_csv(const std::filesystem::path& path, const std::string& column, const VectorXd& samples);

}  // namespace ttop
