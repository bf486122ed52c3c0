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

#include "pref_arena/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "pref_arena/error.hpp"
#include "pref_arena/stats.hpp"

namespace arena {
namespace {

std::string pad_index(int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(0, width - digits.size(), '0');
  }
  return digits;
}

template <typename Map>
const std::string& sample_label(const Map& distribution, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  const std::string* last = nullptr;
  for (const auto& [label, probability] : distribution) {
    last = &label;
    if (u < probability) return label;
    u -= probability;
  }
  return *last;
}

}  // namespace

StudyDesign StudyDesign::desk_scale(int n_models) {
  StudyDesign design;
  for (int i = 0; i < n_models; ++i) {
    design.models.push_back("model-" + pad_index(i, 2));
  }
  design.metrics = {"overall"};
  design.groups[axis_slot(Axis::kAge)] = {"18-34", "35-54", "55+"};
  design.groups[axis_slot(Axis::kEthnicity)] = {
      "UK:Asian", "UK:Black", "UK:White", "US:Asian", "US:Hispanic", "US:White"};
  design.groups[axis_slot(Axis::kPolitics)] = {
      "UK:Conservative", "UK:Labour",    "UK:Reform UK",
      "US:Democrat",     "US:Independent", "US:Republican"};
  for (auto& labels : design.groups) std::sort(labels.begin(), labels.end());
  return design;
}

ModelSpec StudyDesign::model_spec() const {
  ModelSpec spec;
  spec.n_models = static_cast<int>(models.size());
  for (int slot = 0; slot < kNumAxes; ++slot) {
    spec.n_groups[slot] = static_cast<int>(groups[slot].size());
  }
  return spec;
}

int GroundTruth::metric_position(const MetricRef& metric) const {
  auto it = std::find(design.metrics.begin(), design.metrics.end(), metric);
  if (it == design.metrics.end()) {
    throw Error(ErrorCode::kIndexOutOfRange, "unknown metric " + metric);
  }
  return static_cast<int>(it - design.metrics.begin());
}

DrawSnapshot GroundTruth::snapshot(int metric) const {
  DrawSnapshot draw;
  draw.theta = theta_star.col(metric);
  draw.adjust = u_star.at(metric);
  draw.tau = tau_star.row(metric).transpose();
  draw.nu = nu_star[metric];
  return draw;
}

PosteriorDraws GroundTruth::as_draws(int metric) const {
  PosteriorDraws draws;
  draws.spec = design.model_spec();
  draws.spec.alpha = alpha;
  draws.metric = design.metrics.at(metric);
  draws.model_labels = design.models;
  draws.group_labels = design.groups;
  draws.n_chains = 1;
  draws.n_draws_per_chain = 1;
  draws.draws.push_back(snapshot(metric));
  return draws;
}

GroundTruth sample_ground_truth(const StudyDesign& design,
                                const std::array<double, kNumAxes>& heterogeneity,
                                const std::vector<double>& nu_star,
                                std::mt19937_64& rng, double theta_sd) {
  const ModelSpec spec = design.model_spec();
  spec.validate();
  if (nu_star.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "need at least one nu*");
  }
  const int n = spec.n_models;
  const int metrics = static_cast<int>(design.metrics.size());
  std::normal_distribution<double> normal(0.0, 1.0);

  GroundTruth truth;
  truth.design = design;
  truth.theta_star.resize(n, metrics);
  truth.tau_star.resize(metrics, kNumAxes);
  truth.nu_star.resize(metrics);
  for (int k = 0; k < metrics; ++k) {
    Eigen::VectorXd theta(n);
    for (int i = 0; i < n; ++i) theta[i] = theta_sd * normal(rng);
    truth.theta_star.col(k) = theta.array() - theta.mean();
    std::array<Eigen::MatrixXd, kNumAxes> adjust;
    for (int slot = 0; slot < kNumAxes; ++slot) {
      Eigen::MatrixXd raw(n, spec.n_groups[slot]);
      for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = normal(rng);
      adjust[slot] = centered_adjustments(raw, heterogeneity[slot]);
      truth.tau_star(k, slot) = heterogeneity[slot];
    }
    truth.u_star.push_back(std::move(adjust));
    truth.nu_star[k] = nu_star[std::min<std::size_t>(k, nu_star.size() - 1)];
    if (!(truth.nu_star[k] > 0.0)) {
      throw Error(ErrorCode::kNonPositiveNu, "nu* must be positive");
    }
  }
  return truth;
}

double calibrate_nu(const Eigen::VectorXd& theta, double target_tie_rate) {
  if (!(target_tie_rate > 0.0 && target_tie_rate < 1.0) || theta.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "tie-rate target must be in (0,1) with >= 2 models");
  }
  auto tie_rate = [&](double log_nu) {
    double sum = 0.0;
    int pairs = 0;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      for (Eigen::Index j = i + 1; j < theta.size(); ++j) {
        sum += outcome_probs_log_nu(theta[i] - theta[j], log_nu).p_t;
        ++pairs;
      }
    }
    return sum / pairs;
  };
  double lo = -30.0;
  double hi = 30.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (tie_rate(mid) < target_tie_rate) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::exp(0.5 * (lo + hi));
}

PopulationSpec PopulationSpec::uniform(const StudyDesign& design) {
  PopulationSpec population;
  for (Country country : kAllCountries) {
    population.country_share[country] = 0.5;
    auto& axes = population.membership[country];
    for (Axis axis : kAllAxes) {
      std::vector<std::string> own;
      for (const auto& label : design.groups[axis_slot(axis)]) {
        auto owner = group_country(label);
        if (axis == Axis::kAge || (owner && *owner == country)) own.push_back(label);
      }
      for (const auto& label : own) {
        axes[axis_slot(axis)][label] = 1.0 / static_cast<double>(own.size());
      }
    }
  }
  return population;
}

PopulationSpec PopulationSpec::skewed(const StudyDesign& design) {
  PopulationSpec population = uniform(design);
  population.country_share = {{Country::kUS, 0.7}, {Country::kUK, 0.3}};
  for (auto& [country, axes] : population.membership) {
    for (auto& distribution : axes) {
      const double n = static_cast<double>(distribution.size());
      if (n < 2) continue;
      bool first = true;
      for (auto& [label, probability] : distribution) {
        probability = first ? 0.5 : 0.5 / (n - 1.0);
        first = false;
      }
    }
  }
  return population;
}

void PopulationSpec::validate() const {
  double total = 0.0;
  for (const auto& [country, share] : country_share) {
    if (share < 0.0) throw Error(ErrorCode::kInvalidArgument, "negative share");
    total += share;
    if (share > 0.0 && membership.count(country) == 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "no membership distribution for a sampled country");
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kInvalidArgument, "country shares must sum to 1");
  }
  for (const auto& [country, axes] : membership) {
    for (const auto& distribution : axes) {
      if (distribution.empty()) continue;
      double sum = 0.0;
      for (const auto& [label, probability] : distribution) sum += probability;
      if (std::abs(sum - 1.0) > 1e-9) {
        throw Error(ErrorCode::kInvalidArgument,
                    "membership proportions must sum to 1 per country and axis");
      }
    }
  }
}

RaterProfile PopulationSpec::sample_rater(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RaterProfile rater;
  {
    double u = unit(rng);
    rater.country = country_share.rbegin()->first;
    for (const auto& [country, share] : country_share) {
      if (u < share) {
        rater.country = country;
        break;
      }
      u -= share;
    }
  }
  const auto& axes = membership.at(rater.country);
  for (Axis axis : kAllAxes) {
    const int slot = axis_slot(axis);
    const auto& distribution = axes[slot];
    if (distribution.empty()) continue;
    if (unit(rng) < p_missing[slot]) continue;
    auto& groups = rater.groups(axis);
    groups.push_back(sample_label(distribution, rng));
    if (distribution.size() > 1 && unit(rng) < p_multi[slot]) {
      std::string second = groups.front();
      while (second == groups.front()) second = sample_label(distribution, rng);
      groups.push_back(second);
    }
  }
  return rater;
}

CensusTable PopulationSpec::as_census() const {
  CensusTable census;
  for (const auto& [country, share] : country_share) {
    auto& entry = census.countries[country];
    entry.population = share;
    const auto& axes = membership.at(country);
    for (int slot = 0; slot < kNumAxes; ++slot) entry.axes[slot] = axes[slot];
  }
  return census;
}

std::vector<std::string> eligible_strata(const RaterProfile& rater) {
  std::vector<std::string> strata;
  for (Axis axis : kAllAxes) {
    for (const auto& label : rater.groups(axis)) {
      strata.push_back(axis == Axis::kAge
                           ? std::string(country_name(rater.country)) + ":" + label
                           : label);
    }
  }
  if (strata.empty()) strata.push_back(std::string(country_name(rater.country)));
  return strata;
}

Outcome simulate_comparison(const GroundTruth& truth, const RaterProfile& rater,
                            int model_a, int model_b, int metric,
                            std::mt19937_64& rng) {
  const int n = static_cast<int>(truth.design.models.size());
  if (model_a < 0 || model_b < 0 || model_a >= n || model_b >= n ||
      metric < 0 || metric >= static_cast<int>(truth.design.metrics.size())) {
    throw Error(ErrorCode::kIndexOutOfRange, "pair or metric not indexed");
  }
  double demographic = 0.0;
  for (Axis axis : kAllAxes) {
    const int slot = axis_slot(axis);
    const auto& labels = truth.design.groups[slot];
    const auto& groups = rater.groups(axis);
    if (groups.empty()) continue;
    const double share = 1.0 / static_cast<double>(groups.size());
    for (const auto& label : groups) {
      auto it = std::find(labels.begin(), labels.end(), label);
      if (it == labels.end()) {
        throw Error(ErrorCode::kIndexOutOfRange, "group " + label + " not indexed");
      }
      const auto g = it - labels.begin();
      const auto& adjust = truth.u_star[metric][slot];
      demographic += share * (adjust(model_a, g) - adjust(model_b, g));
    }
  }
  const double eta = truth.theta_star(model_a, metric) -
                     truth.theta_star(model_b, metric) + truth.alpha * demographic;
  const OutcomeProbs probs = outcome_probs(eta, truth.nu_star[metric]);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < probs.p_a) return Outcome::kWinA;
  if (u < probs.p_a + probs.p_t) return Outcome::kTie;
  return Outcome::kWinB;
}

Dataset run_campaign(const GroundTruth& truth, const PopulationSpec& population,
                     Pairing pairing, int n_comparisons, std::mt19937_64& rng,
                     const CampaignOptions& options) {
  population.validate();
  if (n_comparisons < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative comparison count");
  }
  const auto& models = truth.design.models;
  const int n = static_cast<int>(models.size());
  if (n < 2) throw Error(ErrorCode::kTooFewModels, "campaign needs >= 2 models");
  const auto& metrics = truth.design.metrics;
  options.match.validate();

  std::map<std::string, TournamentState> tournaments;
  std::vector<ComparisonRecord> records;
  records.reserve(static_cast<std::size_t>(n_comparisons) * metrics.size());
  const int width = static_cast<int>(std::to_string(n_comparisons).size());

  for (int session = 0; session < n_comparisons; ++session) {
    RaterProfile rater = population.sample_rater(rng);
    const std::vector<std::string> strata = eligible_strata(rater);
    std::string stratum =
        options.single_tournament
            ? std::string("all")
            : strata[std::uniform_int_distribution<std::size_t>(
                  0, strata.size() - 1)(rng)];
    int a = 0;
    int b = 1;
    if (pairing == Pairing::kUniform) {
      a = std::uniform_int_distribution<int>(0, n - 1)(rng);
      b = std::uniform_int_distribution<int>(0, n - 2)(rng);
      if (b >= a) ++b;
    } else {
      auto it = tournaments.find(stratum);
      if (it == tournaments.end()) {
        it = tournaments
                 .emplace(stratum,
                          TournamentState::initial(stratum, models, options.match))
                 .first;
      }
      auto [first, second] = select_pair(it->second, options.match, rng);
      a = static_cast<int>(std::find(models.begin(), models.end(), first) -
                           models.begin());
      b = static_cast<int>(std::find(models.begin(), models.end(), second) -
                           models.begin());
    }
    const std::string session_id = "sim-" + pad_index(session, width);
    for (int k = 0; k < static_cast<int>(metrics.size()); ++k) {
      ComparisonRecord record;
      record.id = metrics.size() == 1 ? session_id : session_id + "/" + metrics[k];
      record.metric = metrics[k];
      record.model_a = models[a];
      record.model_b = models[b];
      record.outcome = simulate_comparison(truth, rater, a, b, k, rng);
      record.rater = rater;
      record.stratum = stratum;
      if (pairing == Pairing::kAdaptive && k == options.primary_metric) {
        auto& state = tournaments.at(stratum);
        ResultEvent event;
        event.seq = state.log_cursor + 1;
        event.event_id = record.id;
        event.stratum = stratum;
        event.model_a = record.model_a;
        event.model_b = record.model_b;
        event.outcome = record.outcome;
        state.apply(event, options.match);
      }
      records.push_back(std::move(record));
    }
  }

  std::vector<GroupRef> all_groups;
  for (Axis axis : kAllAxes) {
    for (const auto& label : truth.design.groups[axis_slot(axis)]) {
      all_groups.push_back(GroupRef{axis, label});
    }
  }
  Dataset dataset = build_index(std::move(records), all_groups);
  // Keep every model and metric of the design indexed, even if unused.
  if (dataset.models.size() != n ||
      dataset.metrics.size() != static_cast<int>(metrics.size())) {
    dataset.models = LabelIndex::from_labels(models);
    dataset.metrics = LabelIndex::from_labels(metrics);
  }
  return dataset;
}

RecoveryMetrics recovery_metrics(const PosteriorDraws& draws,
                                 const GroundTruth& truth,
                                 const MetricRef& metric) {
  const int k = truth.metric_position(metric);
  const int n = static_cast<int>(truth.design.models.size());
  if (draws.spec.n_models != n || draws.empty()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "draws and ground truth disagree on the model count");
  }
  RecoveryMetrics out;
  std::vector<double> estimate(n);
  std::vector<double> target(n);
  int covered = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<double> samples;
    samples.reserve(draws.draws.size());
    for (const auto& draw : draws.draws) samples.push_back(draw.theta[i]);
    estimate[i] = stats::mean(samples);
    target[i] = truth.theta_star(i, k);
    const double lo = stats::quantile(samples, 0.025);
    const double hi = stats::quantile(samples, 0.975);
    if (target[i] >= lo && target[i] <= hi) ++covered;
  }
  out.spearman_theta = stats::spearman(estimate, target);
  out.ci_coverage = static_cast<double>(covered) / n;
  for (int slot = 0; slot < kNumAxes; ++slot) {
    double sum = 0.0;
    for (const auto& draw : draws.draws) sum += draw.tau[slot];
    out.tau_error[slot] =
        std::abs(sum / static_cast<double>(draws.draws.size()) - truth.tau_star(k, slot));
  }
  double nu_sum = 0.0;
  for (const auto& draw : draws.draws) nu_sum += draw.nu;
  out.nu_error =
      std::abs(nu_sum / static_cast<double>(draws.draws.size()) - truth.nu_star[k]);
  return out;
}

Eigen::VectorXd point_estimate_theta(const Dataset& dataset,
                                     const MetricRef& metric,
                                     std::size_t record_limit) {
  ModelSpec spec;
  spec.n_models = dataset.models.size();
  if (spec.n_models < 2) {
    throw Error(ErrorCode::kTooFewModels, "need >= 2 models");
  }
  MetricData data(spec.n_models, spec.n_groups);
  const RaterWeights no_weights;
  const std::size_t limit = std::min(record_limit, dataset.records.size());
  for (std::size_t r = 0; r < limit; ++r) {
    const auto& record = dataset.records[r];
    if (record.metric != metric) continue;
    data.add(dataset.models.at(record.model_a), dataset.models.at(record.model_b),
             no_weights, record.outcome);
  }
  const int dim = spec.dimension();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd gradient;
  double value = log_posterior_flat(spec, data, x, &gradient);
  for (int iter = 0; iter < 100 && gradient.cwiseAbs().maxCoeff() > 1e-9; ++iter) {
    // Concave objective: Newton direction from a finite-difference Hessian
    // of the analytic gradient.
    Eigen::MatrixXd hessian(dim, dim);
    constexpr double kStep = 1e-5;
    for (int j = 0; j < dim; ++j) {
      Eigen::VectorXd up = x, down = x, g_up, g_down;
      up[j] += kStep;
      down[j] -= kStep;
      log_posterior_flat(spec, data, up, &g_up);
      log_posterior_flat(spec, data, down, &g_down);
      hessian.col(j) = (g_up - g_down) / (2.0 * kStep);
    }
    hessian = 0.5 * (hessian + hessian.transpose());
    Eigen::VectorXd direction = (-hessian).ldlt().solve(gradient);
    if (!direction.allFinite() || direction.dot(gradient) <= 0.0) direction = gradient;
    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      Eigen::VectorXd candidate = x + step * direction;
      Eigen::VectorXd candidate_gradient;
      const double candidate_value =
          log_posterior_flat(spec, data, candidate, &candidate_gradient);
      if (candidate_value >= value) {
        x = std::move(candidate);
        gradient = std::move(candidate_gradient);
        value = candidate_value;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return expand_theta(x.head(spec.n_models - 1));
}

}  // namespace arena
