#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "ttop/csv.hpp"
#include "ttop/data_ingest.hpp"
#include "ttop/errors.hpp"
#include "ttop/pipeline.hpp"
#include "ttop/posterior.hpp"
#include "ttop/quality.hpp"
#include "ttop/sampler.hpp"
#include "ttop/simlab.hpp"
#include "ttop/stats.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace ttop;

namespace {

constexpr int kExitError = 1;
constexpr int kExitDiagnostics = 3;

/// Error tagged with the pipeline stage it came from.
struct StageError : Error {
  StageError(const std::string& stage, const std::string& what) : Error(stage + ": " + what) {}
};

template <typename F>
auto stage(const std::string& name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct Globals {
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
  std::string config;
  bool force = false;
  std::string weights;
};

struct SamplerFlags {
  int chains = 4;
  int iters = 1500;
  int warmup = 750;
  std::string metric = "diag";
  double target_accept = 0.8;
  int max_depth = 10;

  SamplerConfig make(std::uint64_t seed, int threads) const {
    SamplerConfig c;
    c.n_chains = chains;
    c.n_iter = iters;
    c.n_warmup = warmup;
    c.seed = seed;
    c.target_accept = target_accept;
    c.max_tree_depth = max_depth;
    c.metric = metric == "dense" ? MetricKind::Dense : MetricKind::Diagonal;
    c.threads = threads;
    c.validate();
    return c;
  }
};

// iters and warmup 0 take the scale preset
SamplerFlags preset_sampler_flags() {
  SamplerFlags s;
  s.iters = 0;
  s.warmup = 0;
  return s;
}

void add_sampler_flags(CLI::App* app, SamplerFlags& s) {
  app->add_option("--chains", s.chains, "MCMC chains")->capture_default_str();
  app->add_option("--iters", s.iters, "iterations per chain, warmup included")->capture_default_str();
  app->add_option("--warmup", s.warmup, "warmup iterations per chain")->capture_default_str();
  app->add_option("--metric", s.metric, "mass matrix")->check(CLI::IsMember({"diag", "dense"}))->capture_default_str();
  app->add_option("--target-accept", s.target_accept, "step size adaptation target")->capture_default_str();
  app->add_option("--max-depth", s.max_depth, "maximum tree depth")->capture_default_str();
}

OutcomeWeights parse_weights(const std::string& text) {
  if (text.empty()) return {};
  const auto parts = split_row(text);
  if (parts.size() != kNumOutcomes) throw ArgumentError("--weights needs 7 comma-separated values");
  Eigen::Matrix<double, kNumOutcomes, 1> w;
  for (int k = 0; k < kNumOutcomes; ++k) {
    if (!parse_number(parts[k], w[k])) throw ArgumentError("--weights: bad number '" + std::string(parts[k]) + "'");
  }
  return OutcomeWeights(w);
}

PlateState parse_state(const std::string& text) {
  const auto parts = split_row(text);
  if (parts.size() != 4) throw ArgumentError("--state needs xb,xp,hand,home");
  double v[4];
  for (int i = 0; i < 4; ++i) {
    if (!parse_number(parts[i], v[i])) throw ArgumentError("--state: bad number '" + std::string(parts[i]) + "'");
  }
  for (int i = 2; i < 4; ++i)
    if (v[i] != 0.0 && v[i] != 1.0) throw ArgumentError("--state: hand and home must be 0 or 1");
  return PlateState{v[0], v[1], static_cast<int>(v[2]), static_cast<int>(v[3])};
}

// ---------------------------------------------------------------------------
// config file merging and persistence

/// Appends `--key value` for config entries whose flag is absent from argv.
std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(name);
    if (name == "config") {
      if (eq != std::string::npos)
        path = a.substr(eq + 1);
      else if (i + 1 < args.size())
        path = args[i + 1];
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const std::exception& e) {
    throw ValidationError("config file " + path + ": " + e.what());
  }
  if (!cfg.is_object()) throw ValidationError("config file " + path + " must hold a flat JSON object");
  for (const auto& [key, value] : cfg.items()) {
    if (key == "config" || given.contains(key)) continue;
    const std::string flag = "--" + key;
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back(flag);
    } else if (value.is_string()) {
      args.push_back(flag);
      args.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      args.push_back(flag);
      args.push_back(value.dump());
    } else {
      throw ValidationError("config key '" + key + "' must be a string, number or boolean");
    }
  }
  return args;
}

/// Effective flag values of `app` and its chosen subcommands, in
/// declaration order. Output and config paths are left out so that runs
/// into different directories give identical files.
json effective_config(const CLI::App& app) {
  json j;
  std::string command;
  std::vector<const CLI::App*> chain = {&app};
  for (const CLI::App* a = &app;;) {
    const auto subs = a->get_subcommands();
    if (subs.empty()) break;
    a = subs.front();
    chain.push_back(a);
    command += (command.empty() ? "" : " ") + a->get_name();
  }
  j["command"] = command;
  for (const CLI::App* a : chain) {
    for (const CLI::Option* opt : a->get_options()) {
      const std::string name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config" || name == "out" || name == "force") continue;
      if (opt->count() > 0) {
        const auto& r = opt->results();
        if (opt->get_type_size() == 0 || opt->get_expected_min() == 0)
          j[name] = true;
        else
          j[name] = r.size() == 1 ? r.front() : "";
      } else if (!opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return json::parse(in);
}

/// Output directory built under a temporary name and renamed on commit.
class RunDir {
 public:
  RunDir(const fs::path& target, bool force) : target_(target) {
    if (target_.empty()) throw ArgumentError("--out is required");
    if (fs::exists(target_) && !force)
      throw IoError("output directory " + target_.string() + " exists (use --force to replace it)");
    tmp_ = target_;
    tmp_ += ".partial-" + std::to_string(::getpid());
    fs::remove_all(tmp_);
    fs::create_directories(tmp_);
    started_ = std::chrono::steady_clock::now();
  }
  ~RunDir() {
    std::error_code ec;
    if (!committed_) fs::remove_all(tmp_, ec);
  }

  const fs::path& path() const { return tmp_; }

  void commit(const std::string& command) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    std::ofstream log(tmp_ / "timing.log");
    log << "command " << command << "\nfinished " << stamp << "\nruntime_s " << secs << "\nout " << target_.string()
        << '\n';
    log.close();
    if (fs::exists(target_)) fs::remove_all(target_);
    if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
    fs::rename(tmp_, target_);
    committed_ = true;
  }

 private:
  fs::path target_, tmp_;
  bool committed_ = false;
  std::chrono::steady_clock::time_point started_;
};

// ---------------------------------------------------------------------------
// fits on disk

struct LoadedFit {
  ModelSpec spec;
  PosteriorDraws draws;
  json meta;
};

LoadedFit load_fit(const fs::path& dir) {
  if (!fs::exists(dir / "fit.json") || !fs::exists(dir / "draws.csv"))
    throw IoError("no fit found in " + dir.string());
  LoadedFit f;
  f.meta = read_json(dir / "fit.json");
  f.spec.variant = parse_variant(f.meta.at("model").get<std::string>());
  if (f.spec.variant == ModelVariant::Hierarchical) {
    f.spec.n_pitchers = f.meta.at("n_pitchers").get<int>();
    f.spec.n_batters = f.meta.at("n_batters").get<int>();
  }
  f.draws = read_draws_csv(dir / "draws.csv");
  if (f.draws.n_params() != ParamLayout::make(f.spec, false).size)
    throw ValidationError("draws in " + dir.string() + " do not match the recorded model");
  return f;
}

PlateState choose_state(const std::string& preset, const std::string& state, const json& meta) {
  if (!state.empty()) return parse_state(state);
  if (preset == "sim-median") return sim_reference_state();
  return data_mean_state(meta.at("mean_x_b").get<double>(), meta.at("mean_x_p").get<double>());
}

json state_json(const PlateState& s) { return json{{"x_b", s.x_b}, {"x_p", s.x_p}, {"hand", s.hand}, {"home", s.home}}; }

json interval_json(const IntervalSummary& s) {
  return json{{"mean", s.mean}, {"q25", s.q25}, {"q75", s.q75}, {"q025", s.q025}, {"q975", s.q975}};
}

std::vector<PlateAppearance> load_pas(const std::string& path, ParseReport& report, const OutcomeWeights& w) {
  return stage("parse", [&] { return parse_plate_appearances(path, std::nullopt, &report, w); });
}

std::optional<PriorTable> load_priors(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return stage("priors", [&] { return read_priors_csv(path); });
}

json parse_json(const ParseReport& r) {
  return json{{"rows_read", r.rows_read},
              {"rows_valid", r.rows_valid},
              {"rows_skipped", r.rows_skipped},
              {"starter_t_beyond", r.starter_t_beyond},
              {"woba_mismatches", r.woba_mismatches}};
}

int worker_threads(int threads) {
  if (threads > 0) return threads;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

// ---------------------------------------------------------------------------
// commands

struct FitFlags {
  std::string data, priors, model = "baseline";
  int season = 0;
  double tau = 0.5, nu = 0.05;
  SamplerFlags sampler;
};

void write_fit_summary(const fs::path& path, const PosteriorDraws& draws, const ModelSpec& spec, const PlateState& s) {
  std::ofstream out(path);
  out << "model " << variant_name(spec.variant) << ", " << draws.n_chains() << " chains x " << draws.n_kept()
      << " draws\n\n";
  out << "parameter                mean      sd    q2.5   q97.5    rhat     ess\n";
  const MatrixXd all = draws.pooled();
  char line[160];
  for (Index p = 0; p < draws.n_params(); ++p) {
    const std::string& name = draws.names[p];
    if (name.rfind("beta", 0) != 0 && name.rfind("alpha_t", 0) != 0) continue;
    const VectorXd col = all.col(p);
    const std::span<const double> v(col.data(), col.size());
    const auto ci = credible_interval(v, 0.95);
    std::snprintf(line, sizeof line, "%-20s %8.4f %7.4f %7.4f %7.4f %7.3f %7.0f\n", name.c_str(), mean(v),
                  sample_sd(v), ci.first, ci.second, draws.diagnostics.empty() ? 1.0 : draws.diagnostics[p].rhat,
                  draws.diagnostics.empty() ? 0.0 : draws.diagnostics[p].ess);
    out << line;
  }
  out << "\nTTO differences at x = (" << s.x_b << ", " << s.x_p << ", " << s.hand << ", " << s.home
      << "), wOBA points\n";
  for (TtoPair pair : {TtoPair::OneTwo, TtoPair::TwoThree}) {
    const VectorXd d = tto_mean_diff(draws, spec, s, pair);
    const auto sum = summarize_samples(std::span<const double>(d.data(), d.size()));
    std::snprintf(line, sizeof line, "%s  mean %7.2f  95%% [%7.2f, %7.2f]\n", pair == TtoPair::OneTwo ? "D12" : "D23",
                  sum.mean, sum.q025, sum.q975);
    out << line;
  }
  for (const auto& w : draws.warnings) out << "warning: " << w << '\n';
}

int cmd_fit(const CLI::App& app, const Globals& g, const FitFlags& f) {
  const OutcomeWeights weights = parse_weights(g.weights);
  RunDir run(g.out, g.force);
  ParseReport report;
  const auto all = load_pas(f.data, report, weights);
  const int season = f.season != 0 ? f.season : stage("parse", [&] { return only_season(all); });

  PipelineOptions po;
  po.season = season;
  po.priors = load_priors(f.priors);
  po.quality.hp = QualityHyperparams{f.tau, f.nu};
  const SeasonData sd = stage("quality", [&] { return prepare_season(all, po); });

  ModelSpec spec;
  spec.variant = stage("model", [&] { return parse_variant(f.model); });
  if (spec.variant == ModelVariant::Hierarchical) {
    spec.n_pitchers = static_cast<int>(sd.pitcher_ids.size());
    spec.n_batters = static_cast<int>(sd.batter_ids.size());
  }
  const SamplerConfig sc = stage("sampler", [&] { return f.sampler.make(g.seed, g.threads); });
  const Dataset data(sd.obs);
  const PosteriorTarget target(data, spec);
  const PosteriorDraws draws = stage("fit", [&] { return sample(target, sc); });

  const fs::path dir = run.path();
  write_json(dir / "config.json", effective_config(app));
  write_draws_csv(dir / "draws.csv", draws);
  write_diagnostics_json(dir / "diagnostics.json", draws);
  const PlateState ref = data_mean_state(sd.mean_x_b, sd.mean_x_p);
  write_fit_summary(dir / "summary.txt", draws, spec, ref);
  if (spec.variant == ModelVariant::Hierarchical) {
    std::ofstream players(dir / "players.csv");
    players << "role,index,player_id\n";
    for (std::size_t i = 0; i < sd.pitcher_ids.size(); ++i) players << "pitcher," << i << ',' << sd.pitcher_ids[i] << '\n';
    for (std::size_t i = 0; i < sd.batter_ids.size(); ++i) players << "batter," << i << ',' << sd.batter_ids[i] << '\n';
  }

  json meta;
  meta["model"] = std::string(variant_name(spec.variant));
  meta["season"] = season;
  meta["n_pitchers"] = sd.pitcher_ids.size();
  meta["n_batters"] = sd.batter_ids.size();
  meta["n_obs"] = sd.obs.size();
  meta["n_games"] = sd.n_games;
  meta["mean_x_b"] = sd.mean_x_b;
  meta["mean_x_p"] = sd.mean_x_p;
  meta["reference_state"] = state_json(ref);
  meta["tau"] = f.tau;
  meta["nu"] = f.nu;
  meta["parse"] = parse_json(report);
  meta["truncation"] = json{{"games_before", sd.truncation.games_before},
                            {"games_after", sd.truncation.games_after},
                            {"fraction_removed", sd.truncation.fraction_removed}};
  json steps = json::array();
  for (const auto& st : draws.stats) steps.push_back(st.step_size);
  meta["step_size"] = steps;
  meta["divergences"] = draws.divergences;
  meta["treedepth_saturation"] = draws.treedepth_saturation;
  meta["max_rhat"] = draws.diagnostics.empty() ? 1.0 : draws.max_rhat();
  meta["min_ess"] = draws.diagnostics.empty() ? 0.0 : draws.min_ess();
  meta["warnings"] = draws.warnings;
  write_json(dir / "fit.json", meta);
  run.commit("fit");

  for (const auto& w : draws.warnings) std::cerr << "warning: " << w << '\n';
  const bool failed = !draws.diagnostics.empty() && (draws.max_rhat() >= 1.1 || draws.any_zero_variance());
  std::cout << "fit written to " << g.out << '\n';
  return failed ? kExitDiagnostics : 0;
}

struct TrajectoryFlags {
  std::string fit, preset = "data-mean", state;
};

void write_tto_csv(const fs::path& path, const TrajectorySummary& s) {
  std::ofstream out(path);
  out << "tto,mean,q25,q75,q025,q975\n";
  for (int k = 0; k < 3; ++k) {
    const auto& v = s.by_tto[k];
    out << k + 1 << ',' << format_double(v.mean) << ',' << format_double(v.q25) << ',' << format_double(v.q75) << ','
        << format_double(v.q025) << ',' << format_double(v.q975) << '\n';
  }
}

int cmd_trajectory(const CLI::App& app, const Globals& g, const TrajectoryFlags& f) {
  const OutcomeWeights weights = parse_weights(g.weights);
  const LoadedFit fit = stage("load", [&] { return load_fit(f.fit); });
  const PlateState s = choose_state(f.preset, f.state, fit.meta);
  RunDir run(g.out, g.force);
  const auto tr = trajectory(fit.draws, fit.spec, s, weights);
  write_json(run.path() / "config.json", effective_config(app));
  write_trajectory_csv(run.path() / "trajectory.csv", tr);
  write_tto_csv(run.path() / "tto.csv", tr);
  write_json(run.path() / "state.json", state_json(s));
  run.commit("trajectory");
  std::cout << "trajectory written to " << g.out << '\n';
  return 0;
}

struct SimulateFlags {
  int study = 1;
  std::string scale = "desk";
  int seasons = 0, games = 0;
  SamplerFlags sampler = preset_sampler_flags();
};

int cmd_simulate(const CLI::App& app, const Globals& g, const SimulateFlags& f) {
  SimStudyConfig cfg = f.scale == "paper" ? SimStudyConfig::paper(f.study) : SimStudyConfig::desk(f.study);
  if (f.seasons > 0) cfg.n_seasons = f.seasons;
  if (f.games > 0) cfg.games_per_season = f.games;
  cfg.seed = g.seed;
  SamplerFlags sf = f.sampler;
  if (sf.iters == 0) sf.iters = cfg.sampler.n_iter;
  if (sf.warmup == 0) sf.warmup = cfg.sampler.n_warmup;
  cfg.sampler = sf.make(g.seed, 1);
  cfg.threads = worker_threads(g.threads);
  cfg.validate();

  RunDir run(g.out, g.force);
  const fs::path study_dir = run.path() / ("study" + std::to_string(f.study) + "-seed" + std::to_string(g.seed));
  fs::create_directories(study_dir);
  write_json(run.path() / "config.json", effective_config(app));
  const StudyReport rep = stage("simulate", [&] { return run_study(cfg, study_dir); });

  std::ofstream truth(study_dir / "truth.csv");
  truth << "t,xwoba\n";
  for (int t = 0; t < kNumTimes; ++t) truth << t + 1 << ',' << format_double(rep.truth_xwoba[t]) << '\n';
  truth.close();
  run.commit("simulate");

  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "study " << f.study << ": coverage all " << rep.coverage_all << ", beta " << rep.coverage_beta
            << ", cross-entropy model " << rep.mean_ce_model << " vs base rates " << rep.mean_ce_baserate << '\n';
  return 0;
}

struct EvaluateFlags {
  std::string data, priors, model = "baseline";
  int season = 0, folds = 5, sim_study = 0, games = 1000;
  double tau = 0.5, nu = 0.05;
  SamplerFlags sampler;
};

int cmd_evaluate(const CLI::App& app, const Globals& g, const EvaluateFlags& f) {
  if (f.data.empty() == (f.sim_study == 0)) throw ArgumentError("give exactly one of --data and --sim-study");
  std::vector<Observation> obs;
  if (f.sim_study != 0) {
    auto cfg = SimStudyConfig::desk(f.sim_study);
    cfg.games_per_season = f.games;
    cfg.seed = g.seed;
    obs = stage("simulate", [&] { return generate_season(cfg, GeneratingParams::study(f.sim_study), 0).obs; });
  } else {
    ParseReport report;
    const auto all = load_pas(f.data, report, parse_weights(g.weights));
    PipelineOptions po;
    po.season = f.season != 0 ? f.season : stage("parse", [&] { return only_season(all); });
    po.priors = load_priors(f.priors);
    po.quality.hp = QualityHyperparams{f.tau, f.nu};
    obs = stage("quality", [&] { return prepare_season(all, po).obs; });
  }
  ModelSpec spec;
  spec.variant = parse_variant(f.model);
  const SamplerConfig sc = f.sampler.make(g.seed, g.threads);
  RunDir run(g.out, g.force);
  const CvReport rep = stage("evaluate", [&] { return kfold_cv(obs, f.folds, spec, sc, g.seed); });
  write_json(run.path() / "config.json", effective_config(app));
  write_cv_csv(run.path() / "cv.csv", rep);
  write_json(run.path() / "cv.json", json{{"folds", f.folds},
                                          {"ce_model", rep.ce_model},
                                          {"ce_baserate", rep.ce_baserate},
                                          {"model_minus_baserate", rep.ce_model - rep.ce_baserate}});
  run.commit("evaluate");
  std::cout << "cross-entropy model " << rep.ce_model << " vs base rates " << rep.ce_baserate << '\n';
  return 0;
}

struct ExitHistFlags {
  std::string data, priors, bin_by = "pitcher-quality";
  int season = 0, bins = 6;
  double tau = 0.5, nu = 0.05;
};

int cmd_exit_hist(const CLI::App& app, const Globals& g, const ExitHistFlags& f) {
  ParseReport report;
  const auto all = load_pas(f.data, report, parse_weights(g.weights));
  const int season = f.season != 0 ? f.season : stage("parse", [&] { return only_season(all); });
  std::vector<PlateAppearance> pas;
  for (const auto& pa : all)
    if (pa.season == season) pas.push_back(pa);
  if (pas.empty()) throw StageError("parse", "no plate appearances in season " + std::to_string(season));

  // exits are counted over all starter PAs, so no t cap and no truncation
  const auto games = stage("group", [&] { return group_games(pas); });
  std::vector<double> values;
  if (f.bin_by == "game-woba") {
    for (const auto& gm : games) values.push_back(mean_game_woba(gm));
  } else {
    std::map<int, PriorTable> priors;
    const auto given = load_priors(f.priors);
    priors[season] = given ? *given : previous_season_priors(all, season);
    QualityOptions qo;
    qo.hp = QualityHyperparams{f.tau, f.nu};
    const auto cov = stage("quality", [&] { return attach_quality_covariates(pas, priors, qo); });
    // pitcher quality entering the game: the estimate at the starter's first PA
    std::map<std::pair<std::string, std::string>, double> first;
    for (std::size_t i = 0; i < pas.size(); ++i)
      if (pas[i].is_starter) first.try_emplace({pas[i].game_id, pas[i].pitcher_id}, cov[i].theta_p);
    for (const auto& gm : games) values.push_back(first.at({gm.game_id, gm.pitcher_id}));
  }
  const auto hist = stage("report", [&] { return exit_histogram(games, values, f.bins); });
  RunDir run(g.out, g.force);
  write_json(run.path() / "config.json", effective_config(app));
  std::ofstream out(run.path() / "exit_hist.csv");
  write_exit_histogram(out, hist);
  out.close();
  run.commit("report exit-hist");
  std::cout << "exit histogram written to " << g.out << '\n';
  return 0;
}

struct TtoDiffFlags {
  std::string fit, pair = "12", scale = "xwoba", outcome, preset = "data-mean", state;
};

int cmd_tto_diff(const CLI::App& app, const Globals& g, const TtoDiffFlags& f) {
  const OutcomeWeights weights = parse_weights(g.weights);
  const LoadedFit fit = stage("load", [&] { return load_fit(f.fit); });
  const PlateState s = choose_state(f.preset, f.state, fit.meta);
  const TtoPair pair = f.pair == "12" ? TtoPair::OneTwo : TtoPair::TwoThree;
  std::optional<Outcome> k;
  if (!f.outcome.empty()) {
    k = parse_outcome(f.outcome);
    if (!k) throw ArgumentError("unknown outcome '" + f.outcome + "'");
  }
  if (f.scale == "probability" && !k) throw ArgumentError("--scale probability needs --outcome");

  VectorXd d;
  std::string column = "D" + f.pair;
  if (!k) {
    d = tto_mean_diff(fit.draws, fit.spec, s, pair, weights);
  } else if (f.scale == "probability") {
    d = outcome_prob_diff(fit.draws, fit.spec, s, *k, pair);
    column += "_" + f.outcome;
  } else {
    d = outcome_xwoba_diff(fit.draws, fit.spec, s, *k, pair, weights);
    column += "_xwoba_" + f.outcome;
  }
  const std::span<const double> v(d.data(), d.size());
  const auto sum = summarize_samples(v);
  const double positive = static_cast<double>((d.array() > 0.0).count()) / static_cast<double>(d.size());

  RunDir run(g.out, g.force);
  write_json(run.path() / "config.json", effective_config(app));
  write_samples_csv(run.path() / "tto_diff.csv", column, d);
  json j{{"statistic", column}, {"scale", f.scale}, {"state", state_json(s)}, {"n_draws", d.size()}};
  j["summary"] = interval_json(sum);
  j["reference"] = json{{"mean", sum.mean}, {"zero", 0.0}};
  j["prob_positive"] = positive;
  write_json(run.path() / "tto_diff.json", j);
  run.commit("report tto-diff");
  std::cout << column << " mean " << sum.mean << " 95% [" << sum.q025 << ", " << sum.q975 << "]\n";
  return 0;
}

void add_quality_flags(CLI::App* app, std::string& priors, double& tau, double& nu) {
  app->add_option("--priors", priors, "previous-season means CSV (player_id,role,prev_mean_woba)");
  app->add_option("--tau", tau, "within-season PA wOBA sd")->capture_default_str();
  app->add_option("--nu", nu, "season-to-season sd of mean wOBA")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian analysis of within-game pitcher decline"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0: one per chain or core)")->capture_default_str();
  app.add_option("--out", g.out, "output directory");
  app.add_option("--config", g.config, "flat JSON file of flag values");
  app.add_flag("--force", g.force, "replace an existing output directory");
  app.add_option("--weights", g.weights, "seven outcome weights OUT,UBB,HBP,1B,2B,3B,HR");

  FitFlags fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to one season of plate appearances");
  fit_cmd->add_option("--data", fit.data, "plate appearance CSV")->required();
  fit_cmd->add_option("--season", fit.season, "season to fit (default: the only one present)");
  fit_cmd->add_option("--model", fit.model, "model variant")
      ->check(CLI::IsMember({"baseline", "diffuse", "indicator", "hierarchical"}))
      ->capture_default_str();
  add_quality_flags(fit_cmd, fit.priors, fit.tau, fit.nu);
  add_sampler_flags(fit_cmd, fit.sampler);

  TrajectoryFlags traj;
  auto* traj_cmd = app.add_subcommand("trajectory", "posterior xwOBA trajectory of a fit");
  traj_cmd->add_option("--fit", traj.fit, "fit directory")->required();
  traj_cmd->add_option("--preset", traj.preset, "reference state")
      ->check(CLI::IsMember({"data-mean", "sim-median"}))
      ->capture_default_str();
  traj_cmd->add_option("--state", traj.state, "explicit state xb,xp,hand,home");

  SimulateFlags sim;
  auto* sim_cmd = app.add_subcommand("simulate", "simulation study");
  sim_cmd->add_option("--study", sim.study, "generating regime")->check(CLI::Range(1, 3))->capture_default_str();
  sim_cmd->add_option("--scale", sim.scale, "desk (20 x 1000 games) or paper (25 x 4860)")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  sim_cmd->add_option("--seasons", sim.seasons, "override the number of seasons");
  sim_cmd->add_option("--games", sim.games, "override games per season");
  add_sampler_flags(sim_cmd, sim.sampler);

  EvaluateFlags ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "k-fold cross-validated cross-entropy");
  ev_cmd->add_option("--data", ev.data, "plate appearance CSV");
  ev_cmd->add_option("--season", ev.season, "season (default: the only one present)");
  ev_cmd->add_option("--sim-study", ev.sim_study, "use one simulated season of this study")->check(CLI::Range(1, 3));
  ev_cmd->add_option("--games", ev.games, "games in the simulated season")->capture_default_str();
  ev_cmd->add_option("--folds", ev.folds, "number of folds")->capture_default_str();
  ev_cmd->add_option("--model", ev.model, "model variant")
      ->check(CLI::IsMember({"baseline", "diffuse", "indicator", "hierarchical"}))
      ->capture_default_str();
  add_quality_flags(ev_cmd, ev.priors, ev.tau, ev.nu);
  add_sampler_flags(ev_cmd, ev.sampler);

  auto* rep_cmd = app.add_subcommand("report", "report data for figures");
  rep_cmd->require_subcommand(1);
  rep_cmd->fallthrough();
  ExitHistFlags eh;
  auto* eh_cmd = rep_cmd->add_subcommand("exit-hist", "exit batter sequence histograms by bin");
  eh_cmd->add_option("--data", eh.data, "plate appearance CSV")->required();
  eh_cmd->add_option("--season", eh.season, "season (default: the only one present)");
  eh_cmd->add_option("--bin-by", eh.bin_by, "binning variable")
      ->check(CLI::IsMember({"pitcher-quality", "game-woba"}))
      ->capture_default_str();
  eh_cmd->add_option("--bins", eh.bins, "number of quantile bins")->capture_default_str();
  add_quality_flags(eh_cmd, eh.priors, eh.tau, eh.nu);
  TtoDiffFlags td;
  auto* td_cmd = rep_cmd->add_subcommand("tto-diff", "per-draw TTO difference samples");
  td_cmd->add_option("--fit", td.fit, "fit directory")->required();
  td_cmd->add_option("--pair", td.pair, "12 or 23")->check(CLI::IsMember({"12", "23"}))->capture_default_str();
  td_cmd->add_option("--scale", td.scale, "xwoba or probability")
      ->check(CLI::IsMember({"xwoba", "probability"}))
      ->capture_default_str();
  td_cmd->add_option("--outcome", td.outcome, "outcome code for per-outcome differences");
  td_cmd->add_option("--preset", td.preset, "reference state")
      ->check(CLI::IsMember({"data-mean", "sim-median"}))
      ->capture_default_str();
  td_cmd->add_option("--state", td.state, "explicit state xb,xp,hand,home");

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(std::move(args));
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (*fit_cmd) return cmd_fit(app, g, fit);
    if (*traj_cmd) return cmd_trajectory(app, g, traj);
    if (*sim_cmd) return cmd_simulate(app, g, sim);
    if (*ev_cmd) return cmd_evaluate(app, g, ev);
    if (*eh_cmd) return cmd_exit_hist(app, g, eh);
    if (*td_cmd) return cmd_tto_diff(app, g, td);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
