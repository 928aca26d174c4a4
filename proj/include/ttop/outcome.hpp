#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ttop {

/// Plate appearance outcome. OUT is the reference category of the
/// multinomial model; the remaining six carry their own linear predictor.
enum class Outcome : int { Out = 0, UBB = 1, HBP = 2, Single = 3, Double = 4, Triple = 5, HR = 6 };

inline constexpr int kNumOutcomes = 7;
inline constexpr int kNumNonOut = 6;

inline constexpr std::array<std::string_view, kNumOutcomes> kOutcomeCodes = {
    "OUT", "UBB", "HBP", "1B", "2B", "3B", "HR"};

inline constexpr int index(Outcome o) { return static_cast<int>(o); }

inline std::string_view outcome_code(Outcome o) { return kOutcomeCodes[index(o)]; }

inline std::optional<Outcome> parse_outcome(std::string_view code) {
  for (int k = 0; k < kNumOutcomes; ++k)
    if (kOutcomeCodes[k] == code) return static_cast<Outcome>(k);
  return std::nullopt;
}

/// wOBA weights indexed by outcome. Defaults are the 2019 league weights.
struct OutcomeWeights {
  Eigen::Matrix<double, kNumOutcomes, 1> w;

  OutcomeWeights() { w << 0.0, 0.690, 0.719, 0.870, 1.217, 1.529, 1.940; }
  explicit OutcomeWeights(const Eigen::Matrix<double, kNumOutcomes, 1>& weights) : w(weights) {}

  double operator[](Outcome o) const { return w[index(o)]; }
  double operator[](int k) const { return w[k]; }
};

}  // namespace ttop
