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

// Small statistical helpers shared across modules.

#ifndef PREF_ARENA_STATS_HPP_
#define PREF_ARENA_STATS_HPP_

#include <span>
#include <vector>

namespace arena::stats {

double normal_pdf(double x);
double normal_cdf(double x);
// Inverse standard normal CDF; p must lie in (0, 1).
double normal_quantile(double p);
// log Phi(x), accurate far into the lower tail.
double log_normal_cdf(double x);

double mean(std::span<const double> values);
// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> values);
// Linear-interpolation empirical quantile (R type 7), q in [0, 1].
double quantile(std::span<const double> values, double q);
// 1-based ranks, ties receive their average rank.
std::vector<double> average_ranks(std::span<const double> values);
// Spearman correlation with average ranks for ties. Returns 0 when either
// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace arena::stats

#endif  // PREF_ARENA_STATS_HPP_
