#include "ttop/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ttop/csv.hpp"
#include "ttop/errors.hpp"
#include "ttop/stats.hpp"

namespace ttop {
namespace {

void check_draws(const PosteriorDraws& draws) {
  if (draws.n_total() == 0) throw ArgumentError("posterior draws are empty");
}

VectorXd natural_draw(const PosteriorDraws& draws, Index i) {
  const Index c = i / draws.n_kept();
  return draws.chains[c].row(i % draws.n_kept()).transpose();
}

double sd(const VectorXd& x) {
  if (x.size() < 2) return 0.0;
  return std::sqrt((x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1));
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

double xwoba(const ProbVector& probs, const OutcomeWeights& weights) { return 1000.0 * weights.w.dot(probs); }

double xwoba(const VectorXd& natural, int t, const PlateState& state, const ModelSpec& spec,
             const OutcomeWeights& weights) {
  return xwoba(category_probabilities(natural, t, state, spec), weights);
}

ProbPath probability_path(const VectorXd& natural, const ModelSpec& spec, const PlateState& state) {
  const TimeProfile prof = time_profile(natural, spec);
  ProbPath out;
  for (int t = 1; t <= kNumTimes; ++t) out.row(t - 1) = category_probabilities(prof, t, state).transpose();
  return out;
}

PlateState sim_reference_state() { return PlateState{logit(0.315), logit(0.315), 1, 0}; }

PlateState data_mean_state(double mean_x_b, double mean_x_p) { return PlateState{mean_x_b, mean_x_p, 1, 0}; }

IntervalSummary summarize_samples(std::span<const double> samples) {
  if (samples.empty()) throw ArgumentError("no samples to summarize");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const std::span<const double> sorted(s);
  IntervalSummary out;
  out.mean = mean(samples);
  out.q25 = quantile_sorted(sorted, 0.25);
  out.q75 = quantile_sorted(sorted, 0.75);
  out.q025 = quantile_sorted(sorted, 0.025);
  out.q975 = quantile_sorted(sorted, 0.975);
  return out;
}

MatrixXd xwoba_paths(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state,
                     const OutcomeWeights& weights) {
  check_draws(draws);
  MatrixXd out(draws.n_total(), kNumTimes);
  for (Index i = 0; i < draws.n_total(); ++i)
    out.row(i) = 1000.0 * (probability_path(natural_draw(draws, i), spec, state) * weights.w).transpose();
  return out;
}

TrajectorySummary trajectory(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state,
                             const OutcomeWeights& weights) {
  const MatrixXd paths = xwoba_paths(draws, spec, state, weights);
  TrajectorySummary out;
  for (int t = 0; t < kNumTimes; ++t) {
    const VectorXd col = paths.col(t);
    out.by_t[t] = summarize_samples(std::span<const double>(col.data(), col.size()));
  }
  for (int tto = 0; tto < 3; ++tto) {
    const VectorXd avg = paths.middleCols(9 * tto, 9).rowwise().mean();
    out.by_tto[tto] = summarize_samples(std::span<const double>(avg.data(), avg.size()));
  }
  return out;
}

double tto_mean_diff(const VectorXd& natural, const ModelSpec& spec, const PlateState& state, TtoPair pair,
                     const OutcomeWeights& weights) {
  const ProbPath path = probability_path(natural, spec, state);
  const int s = tto_start(pair) - 1;
  double acc = 0.0;
  for (int t = s; t < s + 9; ++t) acc += xwoba(path.row(t + 9).transpose(), weights) - xwoba(path.row(t).transpose(), weights);
  return acc / 9.0;
}

VectorXd tto_mean_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, TtoPair pair,
                       const OutcomeWeights& weights) {
  check_draws(draws);
  VectorXd out(draws.n_total());
  for (Index i = 0; i < out.size(); ++i) out[i] = tto_mean_diff(natural_draw(draws, i), spec, state, pair, weights);
  return out;
}

double outcome_prob_diff(const VectorXd& natural, const ModelSpec& spec, const PlateState& state, Outcome k,
                         TtoPair pair) {
  const ProbPath path = probability_path(natural, spec, state);
  const int s = tto_start(pair) - 1;
  const int col = index(k);
  return path.col(col).segment<9>(s + 9).mean() - path.col(col).segment<9>(s).mean();
}

VectorXd outcome_prob_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, Outcome k,
                           TtoPair pair) {
  check_draws(draws);
  VectorXd out(draws.n_total());
  for (Index i = 0; i < out.size(); ++i) out[i] = outcome_prob_diff(natural_draw(draws, i), spec, state, k, pair);
  return out;
}

VectorXd outcome_xwoba_diff(const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& state, Outcome k,
                            TtoPair pair, const OutcomeWeights& weights) {
  return 1000.0 * weights[k] * outcome_prob_diff(draws, spec, state, k, pair);
}

std::vector<TableCell> averaged_xwoba_table(const PosteriorDraws& draws, const ModelSpec& spec, TableAxis axis,
                                            const PlateState& base, std::span<const TableLevel> rows,
                                            std::span<const TableLevel> cols, const OutcomeWeights& weights) {
  check_draws(draws);
  if (rows.empty() || cols.empty()) throw ArgumentError("table needs at least one row and one column level");
  std::vector<TableCell> cells;
  for (const auto& r : rows)
    for (const auto& c : cols) {
      PlateState s = base;
      if (axis == TableAxis::HandHome) {
        s.hand = static_cast<int>(r.value);
        s.home = static_cast<int>(c.value);
      } else {
        s.x_b = r.value;
        s.x_p = c.value;
      }
      const VectorXd avg = xwoba_paths(draws, spec, s, weights).rowwise().mean();
      const auto ci = credible_interval(std::span<const double>(avg.data(), avg.size()), 0.95);
      cells.push_back(TableCell{r.label, c.label, avg.mean(), 2.0 * sd(avg), ci.first, ci.second});
    }
  return cells;
}

std::pair<double, double> credible_interval(std::span<const double> samples, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("credible level must be in (0,1)");
  if (samples.size() < 2) throw ArgumentError("credible interval needs at least two samples");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double tail = 0.5 * (1.0 - level);
  return {quantile_sorted(std::span<const double>(s), tail), quantile_sorted(std::span<const double>(s), 1.0 - tail)};
}

void write_trajectory_csv(const std::filesystem::path& path, const TrajectorySummary& summary) {
  auto out = open_out(path);
  out << "t,mean,q25,q75,q025,q975\n";
  for (int t = 0; t < kNumTimes; ++t) {
    const auto& s = summary.by_t[t];
    out << t + 1 << ',' << format_double(s.mean) << ',' << format_double(s.q25) << ',' << format_double(s.q75) << ','
        << format_double(s.q025) << ',' << format_double(s.q975) << '\n';
  }
}

void write_table_csv(const std::filesystem::path& path, std::span<const TableCell> cells) {
  auto out = open_out(path);
  out << "row_level,col_level,mean,two_sd\n";
  for (const auto& c : cells)
    out << c.row_level << ',' << c.col_level << ',' << format_double(c.mean) << ',' << format_double(c.two_sd) << '\n';
}

void write_samples_csv(const std::filesystem::path& path, const std::string& column, const VectorXd& samples) {
  auto out = open_out(path);
  out << column << '\n';
  for (Index i = 0; i < samples.size(); ++i) out << format_double(samples[i]) << '\n';
}

}  // namespace ttop
