// Copyright 2026 The Pref Arena Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pref-arena: ingest, fit, leaderboard, simulate, serve, decompose.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pref_arena/core.hpp"
#include "pref_arena/decompose.hpp"
#include "pref_arena/error.hpp"
#include "pref_arena/io.hpp"
#include "pref_arena/sampler.hpp"
#include "pref_arena/scoring.hpp"
#include "pref_arena/service.hpp"
#include "pref_arena/simulator.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUnconverged = 2;
constexpr double kRhatGate = 1.05;

struct Globals {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<std::string> metrics;
  std::string country_mix;
  int chains = 4;
  int draws = 1000;
  int warmup = 1000;
};

std::string file_stem(const std::string& name) {
  std::string stem;
  for (unsigned char c : name) {
    stem += std::isalnum(c) || c == '-' || c == '_' ? static_cast<char>(c) : '_';
  }
  return stem;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw arena::Error(arena::ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

arena::Dataset load_dataset(const std::string& input, const std::string& mapping) {
  arena::IngestOptions options;
  if (!mapping.empty()) options.mapping = arena::FieldMapping::load(mapping);
  return arena::ingest_dataset(fs::path(input), options);
}

std::vector<std::string> selected_metrics(const Globals& globals,
                                          const std::vector<std::string>& available,
                                          bool allow_unobserved = false) {
  if (globals.metrics.empty()) return available;
  for (const auto& metric : globals.metrics) {
    if (!allow_unobserved &&
        std::find(available.begin(), available.end(), metric) == available.end()) {
      throw arena::Error(arena::ErrorCode::kConfigError, "unknown metric '" + metric + "'");
    }
  }
  return globals.metrics;
}

int run_ingest(const Globals& globals, const std::string& input,
               const std::string& mapping) {
  const arena::Dataset dataset = load_dataset(input, mapping);
  fs::create_directories(globals.out);
  auto out = open_output(fs::path(globals.out) / "dataset.jsonl");
  arena::export_dataset(dataset, out);
  std::cout << dataset.records.size() << " records, " << dataset.models.size()
            << " models, " << dataset.metrics.size() << " metrics";
  for (arena::Axis axis : arena::kAllAxes) {
    std::cout << ", " << dataset.group_index(axis).size() << " "
              << arena::axis_name(axis) << " groups";
  }
  std::cout << "\n";
  return 0;
}

int run_fit(const Globals& globals, const std::string& input,
            const std::string& mapping, bool allow_prior) {
  const arena::Dataset dataset = load_dataset(input, mapping);
  if (dataset.records.empty() && !allow_prior) {
    throw arena::Error(arena::ErrorCode::kConfigError,
                       "dataset is empty; pass --allow-prior to sample the prior");
  }
  if (dataset.models.size() < 2) {
    throw arena::Error(arena::ErrorCode::kConfigError,
                       "no models to fit: the dataset names fewer than 2 models");
  }
  const auto metrics = selected_metrics(globals, dataset.metrics.labels(), allow_prior);
  if (metrics.empty()) {
    throw arena::Error(arena::ErrorCode::kConfigError, "no metrics to fit");
  }
  arena::SamplerConfig config;
  config.n_chains = globals.chains;
  config.n_draws = globals.draws;
  config.n_warmup = globals.warmup;
  config.seed = globals.seed;
  fs::create_directories(globals.out);
  int status = 0;
  for (const auto& metric : metrics) {
    spdlog::info("fitting metric '{}'", metric);
    const arena::PosteriorDraws draws = arena::fit_metric(dataset, metric, config);
    {
      auto out = open_output(fs::path(globals.out) / ("draws_" + file_stem(metric) + ".jsonl"));
      arena::write_draws(draws, out);
    }
    const arena::Diagnostics diagnostics = arena::compute_diagnostics(draws);
    {
      auto out = open_output(fs::path(globals.out) /
                             ("diagnostics_" + file_stem(metric) + ".json"));
      out << arena::diagnostics_json(diagnostics, metric).dump(2) << "\n";
    }
    std::cout << metric << ": max R-hat " << arena::format_number(diagnostics.max_rhat(), 4)
              << ", min ESS " << arena::format_number(diagnostics.min_ess(), 1)
              << ", divergences " << diagnostics.divergence_count << "\n";
    if (!(diagnostics.max_rhat() <= kRhatGate)) {
      spdlog::error("metric '{}' did not converge (R-hat {} > {})", metric,
                    diagnostics.max_rhat(), kRhatGate);
      status = kExitUnconverged;
    }
  }
  return status;
}

std::vector<arena::PosteriorDraws> load_all_draws(const Globals& globals,
                                                  const std::string& draws_dir) {
  std::vector<fs::path> files;
  if (fs::is_directory(draws_dir)) {
    for (const auto& entry : fs::directory_iterator(draws_dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("draws_", 0) == 0 && entry.path().extension() == ".jsonl") {
        files.push_back(entry.path());
      }
    }
  } else if (fs::exists(draws_dir)) {
    files.push_back(draws_dir);
  }
  std::sort(files.begin(), files.end());
  std::vector<arena::PosteriorDraws> all;
  for (const auto& file : files) {
    arena::PosteriorDraws draws = arena::read_draws(file);
    if (!globals.metrics.empty() &&
        std::find(globals.metrics.begin(), globals.metrics.end(), draws.metric) ==
            globals.metrics.end()) {
      continue;
    }
    all.push_back(std::move(draws));
  }
  if (all.empty()) {
    throw arena::Error(arena::ErrorCode::kMissingDraws, "no draw files found in " + draws_dir);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.metric < b.metric;
  });
  return all;
}

void write_decompositions(const arena::Dataset& dataset,
                          const std::optional<std::string>& metric,
                          arena::CellWeighting weighting, double min_count,
                          const fs::path& out_dir) {
  static const std::pair<arena::Axis, arena::Axis> kPairs[] = {
      {arena::Axis::kAge, arena::Axis::kEthnicity},
      {arena::Axis::kAge, arena::Axis::kPolitics},
      {arena::Axis::kEthnicity, arena::Axis::kPolitics}};
  std::vector<arena::DecompositionSummaryRow> summary;
  for (arena::Country country : arena::kAllCountries) {
    for (const auto& [row_axis, col_axis] : kPairs) {
      arena::RateTable table =
          arena::tie_rate_table(dataset, row_axis, col_axis, country, metric);
      for (const auto& [i, j] : table.empty_cells()) {
        spdlog::warn("{} {} x {}: empty cell ({}, {})", arena::country_name(country),
                     arena::axis_name(row_axis), arena::axis_name(col_axis),
                     table.row_groups[i], table.col_groups[j]);
      }
      table = arena::drop_sparse(table, min_count);
      if (table.row_groups.size() < 2 || table.col_groups.size() < 2) {
        spdlog::warn("{} {} x {}: too few populated groups, skipped",
                     arena::country_name(country), arena::axis_name(row_axis),
                     arena::axis_name(col_axis));
        continue;
      }
      const arena::DecompositionResult result = arena::anova_decompose(table, weighting);
      const std::string stem = "decomposition_" +
                               std::string(arena::country_name(country)) + "_" +
                               std::string(arena::axis_name(row_axis)) + "_" +
                               std::string(arena::axis_name(col_axis));
      const std::pair<arena::DecompositionPanel, const char*> panels[] = {
          {arena::DecompositionPanel::kObserved, "_observed.csv"},
          {arena::DecompositionPanel::kAdditive, "_additive.csv"},
          {arena::DecompositionPanel::kInteraction, "_interaction.csv"}};
      for (const auto& [panel, suffix] : panels) {
        auto out = open_output(out_dir / (stem + suffix));
        arena::write_decomposition_panel(table, result, panel, out);
      }
      summary.push_back({country, std::move(table), result});
    }
  }
  auto out = open_output(out_dir / "decomposition_summary.csv");
  arena::write_decomposition_summary(summary, out);
}

int run_leaderboard(const Globals& globals, const std::string& draws_dir,
                    const std::string& census_path, const std::string& input,
                    const std::string& mapping) {
  const auto all = load_all_draws(globals, draws_dir.empty() ? globals.out : draws_dir);
  std::optional<arena::CensusTable> census;
  if (!census_path.empty()) census = arena::load_census(census_path);
  arena::CountryMix mix;
  if (!globals.country_mix.empty()) {
    mix = arena::parse_country_mix(globals.country_mix);
  } else if (census) {
    mix = census->default_mix();
  }
  if (!census) {
    spdlog::warn("no census supplied; reporting baseline skills without demographic effects");
  }

  fs::create_directories(globals.out);
  arena::MetricLeaderboards boards;
  std::vector<std::pair<arena::MetricRef, arena::RankShiftReport>> shifts;
  for (const auto& draws : all) {
    if (census) census->validate(draws.group_labels);
    if (census) {
      boards.push_back({draws.metric, "combined", arena::leaderboard(draws, *census, mix)});
      for (const auto& [country, entry] : census->countries) {
        boards.push_back({draws.metric, std::string(arena::country_name(country)),
                          arena::leaderboard(draws, *census, {{country, 1.0}})});
      }
    } else {
      boards.push_back({draws.metric, "baseline", arena::baseline_leaderboard(draws)});
    }
    for (arena::Axis axis : arena::kAllAxes) {
      if (draws.spec.n_groups[arena::axis_slot(axis)] >= 2) {
        shifts.emplace_back(draws.metric, arena::rank_shift_report(draws, axis));
      }
    }
  }
  {
    auto out = open_output(fs::path(globals.out) / "leaderboard.md");
    out << "# Leaderboard\n\n";
    for (const auto& board : boards) {
      arena::write_leaderboard_md(board.entries, board.metric + " (" + board.scope + ")", out);
      out << "\n";
    }
  }
  {
    auto out = open_output(fs::path(globals.out) / "leaderboard.csv");
    arena::write_leaderboard_csv(boards, out);
  }
  {
    auto out = open_output(fs::path(globals.out) / "rank_shift.csv");
    arena::write_rank_shift_csv(shifts, out);
  }
  if (!input.empty()) {
    const arena::Dataset dataset = load_dataset(input, mapping);
    std::vector<arena::TieRateReport> rows;
    for (auto grouping : {arena::TieGrouping::kByMetric, arena::TieGrouping::kByAgeGroup,
                          arena::TieGrouping::kByMetricAndAge}) {
      auto part = arena::empirical_tie_rates(dataset, grouping);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    auto out = open_output(fs::path(globals.out) / "tie_rates.csv");
    arena::write_tie_rates_csv(rows, out);
    write_decompositions(dataset, std::nullopt, arena::CellWeighting::kUnweighted, 1.0,
                         globals.out);
  }
  for (const auto& board : boards) {
    if (board.scope != "combined" && board.scope != "baseline") continue;
    std::cout << "## " << board.metric << "\n";
    arena::write_leaderboard_md(board.entries, "", std::cout);
  }
  return 0;
}

ordered_json truth_json(const arena::GroundTruth& truth) {
  ordered_json doc;
  doc["models"] = truth.design.models;
  doc["metrics"] = truth.design.metrics;
  doc["alpha"] = truth.alpha;
  ordered_json metrics = ordered_json::array();
  for (std::size_t k = 0; k < truth.design.metrics.size(); ++k) {
    ordered_json entry;
    entry["metric"] = truth.design.metrics[k];
    std::vector<double> theta(truth.theta_star.rows());
    for (Eigen::Index i = 0; i < truth.theta_star.rows(); ++i) {
      theta[i] = truth.theta_star(i, k);
    }
    entry["theta"] = theta;
    entry["nu"] = truth.nu_star[k];
    ordered_json tau;
    for (arena::Axis axis : arena::kAllAxes) {
      tau[std::string(arena::axis_name(axis))] =
          truth.tau_star(static_cast<Eigen::Index>(k), arena::axis_slot(axis));
    }
    entry["tau"] = std::move(tau);
    metrics.push_back(std::move(entry));
  }
  doc["truth"] = std::move(metrics);
  return doc;
}

ordered_json census_json(const arena::CensusTable& census) {
  ordered_json doc;
  for (const auto& [country, entry] : census.countries) {
    ordered_json item;
    item["population"] = entry.population;
    for (arena::Axis axis : arena::kAllAxes) {
      ordered_json weights = ordered_json::object();
      for (const auto& [label, weight] : entry.axes[arena::axis_slot(axis)]) {
        weights[arena::unqualify_group(country, axis, label)] = weight;
      }
      item[std::string(arena::axis_name(axis))] = std::move(weights);
    }
    doc[std::string(arena::country_name(country))] = std::move(item);
  }
  return doc;
}

struct SimulateOptions {
  int models = 6;
  int comparisons = 20000;
  std::string pairing = "uniform";
  std::string population = "uniform";
  double tie_rate = 0.25;
  double heterogeneity = 0.2;
};

int run_simulate(const Globals& globals, const SimulateOptions& options) {
  std::mt19937_64 rng(globals.seed);
  const arena::StudyDesign design = arena::StudyDesign::desk_scale(options.models);
  arena::GroundTruth truth = arena::sample_ground_truth(
      design, {options.heterogeneity, options.heterogeneity, options.heterogeneity},
      {1.0}, rng);
  truth.nu_star[0] = arena::calibrate_nu(truth.theta_star.col(0), options.tie_rate);
  const arena::PopulationSpec population =
      options.population == "skewed" ? arena::PopulationSpec::skewed(design)
                                     : arena::PopulationSpec::uniform(design);
  const arena::Pairing pairing = options.pairing == "adaptive" ? arena::Pairing::kAdaptive
                                                               : arena::Pairing::kUniform;
  const arena::Dataset dataset =
      arena::run_campaign(truth, population, pairing, options.comparisons, rng);
  fs::create_directories(globals.out);
  {
    auto out = open_output(fs::path(globals.out) / "dataset.jsonl");
    arena::export_dataset(dataset, out);
  }
  {
    auto out = open_output(fs::path(globals.out) / "truth.json");
    out << truth_json(truth).dump(2) << "\n";
  }
  {
    auto out = open_output(fs::path(globals.out) / "census.json");
    out << census_json(arena::PopulationSpec::uniform(design).as_census()).dump(2) << "\n";
  }
  std::cout << dataset.records.size() << " simulated comparisons written to "
            << globals.out << "\n";
  return 0;
}

struct ServeOptions {
  std::string listen = "127.0.0.1:8080";
  std::string log_dir = "event-log";
  std::string tournaments;
  std::vector<std::string> strata;
  std::vector<std::string> models;
  arena::MatchConfig match;
};

arena::HttpFrontEnd* g_front_end = nullptr;

void handle_signal(int) {
  if (g_front_end != nullptr) g_front_end->stop();
}

int run_serve(const Globals& globals, ServeOptions options) {
  if (const char* env = std::getenv("PREF_ARENA_LISTEN")) options.listen = env;
  if (const char* env = std::getenv("PREF_ARENA_LOG_DIR")) options.log_dir = env;
  arena::ServiceConfig config;
  config.log_dir = options.log_dir;
  config.match = options.match;
  config.seed = globals.seed;
  if (!options.tournaments.empty()) {
    std::ifstream in(options.tournaments);
    if (!in) throw arena::Error(arena::ErrorCode::kConfigError, "cannot read " + options.tournaments);
    const auto doc = nlohmann::json::parse(in);
    for (const auto& [stratum, models] : doc.items()) {
      config.strata[stratum] = models.get<std::vector<std::string>>();
    }
  }
  for (const auto& stratum : options.strata) config.strata[stratum] = options.models;
  if (config.strata.empty()) {
    throw arena::Error(arena::ErrorCode::kConfigError,
                       "no tournaments configured (use --tournaments or --strata/--models)");
  }
  const auto colon = options.listen.rfind(':');
  if (colon == std::string::npos) {
    throw arena::Error(arena::ErrorCode::kConfigError, "listen address must be host:port");
  }
  const std::string host = options.listen.substr(0, colon);
  const int port = std::stoi(options.listen.substr(colon + 1));
  arena::TournamentService service(config);
  arena::HttpFrontEnd front_end(service);
  g_front_end = &front_end;
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  spdlog::info("serving {} tournaments on {}", config.strata.size(), options.listen);
  front_end.listen(host, port);
  g_front_end = nullptr;
  return 0;
}

int run_decompose(const Globals& globals, const std::string& input,
                  const std::string& mapping, const std::string& weighting,
                  double min_count) {
  const arena::Dataset dataset = load_dataset(input, mapping);
  if (globals.metrics.size() > 1) {
    throw arena::Error(arena::ErrorCode::kConfigError, "decompose takes at most one metric");
  }
  std::optional<std::string> metric;
  if (!globals.metrics.empty()) metric = globals.metrics.front();
  fs::create_directories(globals.out);
  write_decompositions(dataset, metric,
                       weighting == "counts" ? arena::CellWeighting::kCountWeighted
                                             : arena::CellWeighting::kUnweighted,
                       min_count, globals.out);
  std::ifstream summary(fs::path(globals.out) / "decomposition_summary.csv");
  std::cout << summary.rdbuf();
  return 0;
}

void configure_logging() {
  auto logger = spdlog::stderr_color_mt("pref-arena");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* level = std::getenv("PREF_ARENA_LOG")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Post-stratified Bayesian leaderboards for pairwise preference arenas"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file with option defaults");

  Globals globals;
  std::string metrics;
  app.add_option("--seed", globals.seed, "Random seed");
  app.add_option("--out", globals.out, "Output directory");
  app.add_option("--metrics", metrics, "Comma-separated metrics (default: all)");
  app.add_option("--country-mix", globals.country_mix, "Country weights, e.g. US=0.5,UK=0.5");
  app.add_option("--chains", globals.chains, "HMC chains")->check(CLI::PositiveNumber);
  app.add_option("--draws", globals.draws, "Post-warmup draws per chain")
      ->check(CLI::PositiveNumber);
  app.add_option("--warmup", globals.warmup, "Warmup iterations per chain")
      ->check(CLI::NonNegativeNumber);

  std::string input;
  std::string mapping;
  auto* ingest = app.add_subcommand("ingest", "Validate a dataset and write it canonically");
  auto* fit = app.add_subcommand("fit", "Sample the posterior per metric");
  auto* board = app.add_subcommand("leaderboard", "Write leaderboard and heterogeneity reports");
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic campaign");
  auto* serve = app.add_subcommand("serve", "Run the tournament HTTP service");
  auto* decompose = app.add_subcommand("decompose", "Tie-rate interaction decomposition");
  for (auto* sub : {ingest, fit, board, decompose}) {
    sub->add_option("--mapping", mapping, "Field-mapping JSON for non-canonical input");
  }
  for (auto* sub : {ingest, fit, decompose}) {
    sub->add_option("--input", input, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  }
  for (auto* sub : {ingest, fit, board, simulate, serve, decompose}) sub->fallthrough();

  bool allow_prior = false;
  fit->add_flag("--allow-prior", allow_prior, "Fit --metrics entries with no records as the prior");

  std::string draws_dir;
  std::string census;
  board->add_option("--draws-dir", draws_dir, "Directory or file of draws (default: --out)");
  board->add_option("--census", census, "Census JSON")->check(CLI::ExistingFile);
  board->add_option("--input", input, "Dataset JSONL for tie-rate and decomposition reports")
      ->check(CLI::ExistingFile);

  SimulateOptions sim;
  simulate->add_option("--models", sim.models, "Number of models")->check(CLI::Range(2, 1000));
  simulate->add_option("--comparisons", sim.comparisons, "Rater sessions")
      ->check(CLI::NonNegativeNumber);
  simulate->add_option("--pairing", sim.pairing, "uniform or adaptive")
      ->check(CLI::IsMember({"uniform", "adaptive"}));
  simulate->add_option("--population", sim.population, "uniform or skewed")
      ->check(CLI::IsMember({"uniform", "skewed"}));
  simulate->add_option("--tie-rate", sim.tie_rate, "Target tie rate")->check(CLI::Range(0.01, 0.99));
  simulate->add_option("--heterogeneity", sim.heterogeneity, "True tau on every axis")
      ->check(CLI::NonNegativeNumber);

  ServeOptions srv;
  std::string strata;
  std::string models;
  serve->add_option("--listen", srv.listen, "host:port (env PREF_ARENA_LISTEN)");
  serve->add_option("--log-dir", srv.log_dir, "Event-log directory (env PREF_ARENA_LOG_DIR)");
  serve->add_option("--tournaments", srv.tournaments, "JSON {stratum: [models]}");
  serve->add_option("--strata", strata, "Comma-separated strata sharing --models");
  serve->add_option("--models", models, "Comma-separated models");
  serve->add_option("--mu0", srv.match.mu0);
  serve->add_option("--sigma0", srv.match.sigma0);
  serve->add_option("--beta", srv.match.perf_beta);
  serve->add_option("--dyn-tau", srv.match.dyn_tau);
  serve->add_option("--p-draw", srv.match.p_draw);
  serve->add_option("--explore", srv.match.exploration_eps);

  std::string weighting = "unweighted";
  double min_count = 1.0;
  decompose->add_option("--weighting", weighting, "unweighted or counts")
      ->check(CLI::IsMember({"unweighted", "counts"}));
  decompose->add_option("--min-count", min_count, "Drop groups with sparser cells");

  CLI11_PARSE(app, argc, argv);
  globals.metrics = split_list(metrics);
  srv.strata = split_list(strata);
  srv.models = split_list(models);

  try {
    if (*ingest) return run_ingest(globals, input, mapping);
    if (*fit) return run_fit(globals, input, mapping, allow_prior);
    if (*board) return run_leaderboard(globals, draws_dir, census, input, mapping);
    if (*simulate) return run_simulate(globals, sim);
    if (*serve) return run_serve(globals, srv);
    if (*decompose) return run_decompose(globals, input, mapping, weighting, min_count);
  } catch (const arena::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
