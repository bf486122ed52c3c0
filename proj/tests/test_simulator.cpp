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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pref_arena/error.hpp"
#include "pref_arena/simulator.hpp"
#include "pref_arena/stats.hpp"

namespace arena {
namespace {

constexpr std::array<double, kNumAxes> kFlat = {0.0, 0.0, 0.0};

GroundTruth truth_with(int n_models, double heterogeneity, double nu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_ground_truth(StudyDesign::desk_scale(n_models),
                             {heterogeneity, heterogeneity, heterogeneity}, {nu}, rng);
}

RaterProfile plain_rater() {
  RaterProfile rater;
  rater.country = Country::kUS;
  return rater;
}

std::array<double, 3> frequencies(const GroundTruth& truth, const RaterProfile& rater, int a,
                                  int b, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<double, 3> counts{};
  for (int i = 0; i < n; ++i) {
    ++counts[static_cast<int>(simulate_comparison(truth, rater, a, b, 0, rng))];
  }
  for (auto& c : counts) c /= n;
  return counts;
}

void expect_within_3_sigma(const std::array<double, 3>& observed, const std::array<double, 3>& p,
                           int n) {
  for (int k = 0; k < 3; ++k) {
    const double sd = std::sqrt(p[k] * (1 - p[k]) / n);
    EXPECT_LE(std::abs(observed[k] - p[k]), 3 * sd + 1e-12) << "outcome " << k;
  }
}

TEST(GroundTruth, InvariantsAndDeterminism) {
  const auto truth = truth_with(6, 0.3, 1.5, 9);
  EXPECT_NEAR(truth.theta_star.col(0).sum(), 0.0, 1e-12);
  for (int slot = 0; slot < kNumAxes; ++slot) {
    const auto& u = truth.u_star[0][slot];
    EXPECT_EQ(u.rows(), 6);
    EXPECT_LT(u.rowwise().sum().cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(truth.tau_star(0, slot), 0.3);
  }
  EXPECT_EQ(truth.nu_star[0], 1.5);
  const auto again = truth_with(6, 0.3, 1.5, 9);
  EXPECT_EQ(truth.theta_star, again.theta_star);
  EXPECT_EQ(truth.u_star[0][1], again.u_star[0][1]);
}

TEST(GroundTruth, ZeroHeterogeneityAndErrors) {
  const auto truth = truth_with(4, 0.0, 1.0, 10);
  for (int slot = 0; slot < kNumAxes; ++slot) {
    EXPECT_EQ(truth.u_star[0][slot].cwiseAbs().maxCoeff(), 0.0);
  }
  std::mt19937_64 rng(1);
  EXPECT_THROW(sample_ground_truth(StudyDesign::desk_scale(4), kFlat, {}, rng), Error);
  EXPECT_THROW(sample_ground_truth(StudyDesign::desk_scale(4), kFlat, {-1.0}, rng), Error);
}

TEST(Comparison, EqualSkillsGiveThirds) {
  auto truth = truth_with(3, 0.0, 1.0, 11);
  truth.theta_star.setZero();
  const int n = 30000;
  expect_within_3_sigma(frequencies(truth, plain_rater(), 0, 1, n, 12), {1 / 3.0, 1 / 3.0, 1 / 3.0},
                        n);
}

TEST(Comparison, LargeGapSaturates) {
  auto truth = truth_with(2, 0.0, 1.0, 13);
  truth.theta_star(0, 0) = 5.0;
  truth.theta_star(1, 0) = -5.0;
  const auto f = frequencies(truth, plain_rater(), 0, 1, 10000, 14);
  EXPECT_GT(f[0], 0.999);
  const auto g = frequencies(truth, plain_rater(), 1, 0, 10000, 15);
  EXPECT_GT(g[2], 0.999);
}

TEST(Comparison, FrequenciesMatchOutcomeModel) {
  const auto truth = truth_with(6, 0.5, 0.8, 16);
  RaterProfile rater = plain_rater();
  rater.groups(Axis::kAge) = {"18-34", "55+"};
  rater.groups(Axis::kPolitics) = {"US:Democrat"};
  const auto& groups = truth.design.groups;
  auto pos = [&](Axis axis, const std::string& label) {
    const auto& labels = groups[axis_slot(axis)];
    return static_cast<int>(std::find(labels.begin(), labels.end(), label) - labels.begin());
  };
  const int a = 1, b = 4;
  const auto& age = truth.u_star[0][axis_slot(Axis::kAge)];
  const auto& pol = truth.u_star[0][axis_slot(Axis::kPolitics)];
  const int y = pos(Axis::kAge, "18-34"), o = pos(Axis::kAge, "55+"),
            d = pos(Axis::kPolitics, "US:Democrat");
  const double demographic = 0.5 * (age(a, y) - age(b, y)) + 0.5 * (age(a, o) - age(b, o)) +
                             (pol(a, d) - pol(b, d));
  const double eta = truth.theta_star(a, 0) - truth.theta_star(b, 0) +
                     demographic / std::sqrt(3.0);
  const double z = std::exp(eta) + 0.8 + std::exp(-eta);
  const int n = 40000;
  expect_within_3_sigma(frequencies(truth, rater, a, b, n, 17),
                        {std::exp(eta) / z, 0.8 / z, std::exp(-eta) / z}, n);
  EXPECT_THROW(frequencies(truth, rater, 0, 9, 1, 1), Error);
}

TEST(Comparison, TieFractionIncreasesWithNu) {
  double previous = -1.0;
  for (double nu : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    auto truth = truth_with(5, 0.2, nu, 18);
    const auto f = frequencies(truth, plain_rater(), 0, 3, 20000, 19);
    EXPECT_GT(f[1], previous);
    previous = f[1];
  }
}

TEST(Calibration, HitsTargetTieRate) {
  const auto truth = truth_with(6, 0.0, 1.0, 20);
  const Eigen::VectorXd theta = truth.theta_star.col(0);
  for (double target : {0.1, 0.25, 0.6}) {
    const double nu = calibrate_nu(theta, target);
    double mean_tie = 0.0;
    int pairs = 0;
    for (int i = 0; i < theta.size(); ++i) {
      for (int j = 0; j < theta.size(); ++j) {
        if (i == j) continue;
        const double eta = theta[i] - theta[j];
        mean_tie += nu / (std::exp(eta) + nu + std::exp(-eta));
        ++pairs;
      }
    }
    EXPECT_NEAR(mean_tie / pairs, target, 1e-6);
  }
}

TEST(Population, SamplingRespectsSpec) {
  const auto design = StudyDesign::desk_scale(4);
  const auto population = PopulationSpec::skewed(design);
  population.validate();
  std::mt19937_64 rng(21);
  int us = 0;
  const int n = 5000;
  for (int i = 0; i < n; ++i) {
    const RaterProfile rater = population.sample_rater(rng);
    if (rater.country == Country::kUS) ++us;
    for (Axis axis : {Axis::kEthnicity, Axis::kPolitics}) {
      for (const auto& label : rater.groups(axis)) {
        EXPECT_EQ(group_country(label), rater.country);
      }
    }
    EXPECT_NO_THROW(check_record([&] {
      ComparisonRecord record;
      record.id = "x";
      record.metric = "overall";
      record.model_a = "a";
      record.model_b = "b";
      record.rater = rater;
      return record;
    }()));
    for (const auto& stratum : eligible_strata(rater)) {
      EXPECT_EQ(stratum.rfind(std::string(country_name(rater.country)), 0), 0u);
    }
  }
  EXPECT_NEAR(static_cast<double>(us) / n, population.country_share.at(Country::kUS), 0.03);
  const auto census = population.as_census();
  EXPECT_TRUE(census.has(Country::kUK));
  EXPECT_NO_THROW(census.validate(design.groups));
  PopulationSpec broken = population;
  broken.country_share[Country::kUS] = 0.9;
  EXPECT_THROW(broken.validate(), Error);
}

TEST(Campaign, EmptyAndDeterministic) {
  const auto truth = truth_with(5, 0.2, 1.0, 22);
  const auto population = PopulationSpec::uniform(truth.design);
  std::mt19937_64 rng(23);
  const Dataset empty = run_campaign(truth, population, Pairing::kUniform, 0, rng);
  EXPECT_TRUE(empty.records.empty());
  EXPECT_EQ(empty.models.size(), 5);
  for (Pairing pairing : {Pairing::kUniform, Pairing::kAdaptive}) {
    std::mt19937_64 r1(24), r2(24);
    const Dataset x = run_campaign(truth, population, pairing, 500, r1);
    const Dataset y = run_campaign(truth, population, pairing, 500, r2);
    ASSERT_EQ(x.records.size(), 500u);
    EXPECT_EQ(x.records, y.records);
    for (const auto& record : x.records) {
      EXPECT_NE(record.model_a, record.model_b);
      EXPECT_NO_THROW(check_record(record));
      ASSERT_TRUE(record.stratum.has_value());
    }
  }
}

TEST(Campaign, SeveralMetricsShareSessions) {
  auto design = StudyDesign::desk_scale(4);
  design.metrics = {"overall", "trust"};
  std::mt19937_64 rng(25);
  const auto truth = sample_ground_truth(design, {0.1, 0.1, 0.1}, {0.5, 3.0}, rng);
  const Dataset data =
      run_campaign(truth, PopulationSpec::uniform(design), Pairing::kAdaptive, 200, rng);
  ASSERT_EQ(data.records.size(), 400u);
  EXPECT_EQ(data.metrics.size(), 2);
  EXPECT_EQ(data.records[0].model_a, data.records[1].model_a);
  EXPECT_EQ(data.records[0].rater, data.records[1].rater);
  EXPECT_NE(data.records[0].id, data.records[1].id);
}

TEST(Campaign, AdaptivePairsAreCloserInSkill) {
  double adaptive_total = 0.0, uniform_total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto truth = truth_with(8, 0.1, 1.0, 100 + seed);
    const auto population = PopulationSpec::uniform(truth.design);
    auto gap = [&](Pairing pairing) {
      std::mt19937_64 rng(200 + seed);
      CampaignOptions options;
      options.single_tournament = true;
      const Dataset data = run_campaign(truth, population, pairing, 3000, rng, options);
      double total = 0.0;
      for (const auto& record : data.records) {
        total += std::abs(truth.theta_star(data.models.at(record.model_a), 0) -
                          truth.theta_star(data.models.at(record.model_b), 0));
      }
      return total / static_cast<double>(data.records.size());
    };
    adaptive_total += gap(Pairing::kAdaptive);
    uniform_total += gap(Pairing::kUniform);
  }
  EXPECT_LT(adaptive_total, uniform_total);
}

TEST(Recovery, ExactAndReversedDraws) {
  const auto truth = truth_with(6, 0.2, 1.3, 26);
  const auto exact = recovery_metrics(truth.as_draws(0), truth, "overall");
  EXPECT_NEAR(exact.spearman_theta, 1.0, 1e-12);
  EXPECT_EQ(exact.ci_coverage, 1.0);
  EXPECT_NEAR(exact.nu_error, 0.0, 1e-12);
  EXPECT_NEAR(exact.tau_error.maxCoeff(), 0.0, 1e-12);

  PosteriorDraws reversed = truth.as_draws(0);
  reversed.draws[0].theta = -reversed.draws[0].theta;
  EXPECT_NEAR(recovery_metrics(reversed, truth, "overall").spearman_theta, -1.0, 1e-12);

  PosteriorDraws wrong = truth.as_draws(0);
  wrong.spec.n_models = 3;
  EXPECT_THROW(recovery_metrics(wrong, truth, "overall"), Error);
}

TEST(PointEstimate, RanksLargeCampaignCorrectly) {
  const auto truth = truth_with(6, 0.0, 1.0, 27);
  std::mt19937_64 rng(28);
  const Dataset data = run_campaign(truth, PopulationSpec::uniform(truth.design),
                                    Pairing::kUniform, 20000, rng);
  const Eigen::VectorXd theta = point_estimate_theta(data, "overall", data.records.size());
  ASSERT_EQ(theta.size(), 6);
  EXPECT_NEAR(theta.sum(), 0.0, 1e-9);
  std::vector<double> estimate(theta.data(), theta.data() + 6);
  std::vector<double> target(truth.theta_star.data(), truth.theta_star.data() + 6);
  EXPECT_GT(stats::spearman(estimate, target), 0.9);
  EXPECT_LT((theta - truth.theta_star.col(0)).cwiseAbs().maxCoeff(), 0.15);
  const Eigen::VectorXd none = point_estimate_theta(data, "overall", 0);
  EXPECT_LT(none.cwiseAbs().maxCoeff(), 1e-9);
}

}  // namespace
}  // namespace arena
