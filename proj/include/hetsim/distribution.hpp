/*
 * Copyright 2026 the hetsim authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "hetsim/common.hpp"
#include "hetsim/rng.hpp"

namespace hetsim {

enum class DistKind { Empirical, Constant, Uniform, Exponential, Lognormal };

inline const char* to_string(DistKind k) {
  switch (k) {
    case DistKind::Empirical: return "empirical";
    case DistKind::Constant: return "constant";
    case DistKind::Uniform: return "uniform";
    case DistKind::Exponential: return "exponential";
    case DistKind::Lognormal: return "lognormal";
  }
  return "?";
}

namespace detail {

// Acklam's rational approximation of the standard normal inverse CDF.
// Relative error below 1.2e-9 over (0, 1); good enough for service-time
// sampling and fully deterministic.
inline double inverse_normal_cdf(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  static constexpr double p_low = 0.02425;

  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace detail

/// A sampleable service-time model. Durations are in microseconds.
/// Empirical variants hold the profiled samples verbatim; sampling draws
/// uniformly with replacement (bootstrap), so every draw is one of the
/// stored values. Parametric variants sample by inverse-CDF transform of a
/// single uniform draw, so each sample() consumes exactly one RNG step
/// regardless of variant.
class ServiceDistribution {
public:
  ServiceDistribution() : kind_(DistKind::Constant), a_(0.0), b_(0.0) {}

  static ServiceDistribution empirical(std::vector<double> samples_us) {
    if (samples_us.empty()) throw Error("empirical distribution needs at least one sample");
    for (double v : samples_us) {
      if (!detail::finite_nonneg(v))
        throw Error("empirical sample must be finite and >= 0, got " + std::to_string(v));
    }
    ServiceDistribution d;
    d.kind_ = DistKind::Empirical;
    d.samples_ = std::move(samples_us);
    long double sum = 0.0L;
    for (double v : d.samples_) sum += v;
    d.a_ = static_cast<double>(sum / static_cast<long double>(d.samples_.size()));
    return d;
  }

  static ServiceDistribution constant(double value_us) {
    if (!detail::finite_nonneg(value_us))
      throw Error("constant duration must be finite and >= 0");
    ServiceDistribution d;
    d.kind_ = DistKind::Constant;
    d.a_ = value_us;
    return d;
  }

  static ServiceDistribution uniform(double lo_us, double hi_us) {
    if (!detail::finite_nonneg(lo_us) || !detail::finite_nonneg(hi_us) || lo_us > hi_us)
      throw Error("uniform needs 0 <= lo <= hi");
    ServiceDistribution d;
    d.kind_ = DistKind::Uniform;
    d.a_ = lo_us;
    d.b_ = hi_us;
    return d;
  }

  static ServiceDistribution exponential(double mean_us) {
    if (!std::isfinite(mean_us) || mean_us <= 0.0) throw Error("exponential needs mean > 0");
    ServiceDistribution d;
    d.kind_ = DistKind::Exponential;
    d.a_ = mean_us;
    return d;
  }

  static ServiceDistribution lognormal(double mu, double sigma) {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || sigma < 0.0)
      throw Error("lognormal needs finite mu and sigma >= 0");
    ServiceDistribution d;
    d.kind_ = DistKind::Lognormal;
    d.a_ = mu;
    d.b_ = sigma;
    return d;
  }

  DistKind kind() const { return kind_; }
  const std::vector<double>& samples() const { return samples_; }

  // Parameter accessors; meaning depends on kind.
  double value() const { return a_; }        // constant
  double lo() const { return a_; }           // uniform
  double hi() const { return b_; }           // uniform
  double exp_mean() const { return a_; }     // exponential
  double mu() const { return a_; }           // lognormal
  double sigma() const { return b_; }        // lognormal

  double mean() const {
    switch (kind_) {
      case DistKind::Empirical: return a_;  // precomputed exact arithmetic mean
      case DistKind::Constant: return a_;
      case DistKind::Uniform: return 0.5 * (a_ + b_);
      case DistKind::Exponential: return a_;
      case DistKind::Lognormal: return std::exp(a_ + 0.5 * b_ * b_);
    }
    return 0.0;
  }

  /// Draw one duration (microseconds, >= 0). Advances rng by one step.
  double sample(RngState& rng) const {
    switch (kind_) {
      case DistKind::Empirical:
        return samples_[rng.next_index(samples_.size())];
      case DistKind::Constant:
        rng.next_u64();
        return a_;
      case DistKind::Uniform: {
        double u = rng.next_unit();
        return a_ + u * (b_ - a_);
      }
      case DistKind::Exponential: {
        double u = rng.next_unit();
        return -a_ * std::log1p(-u);
      }
      case DistKind::Lognormal: {
        double u = rng.next_unit();
        if (b_ == 0.0) {
          return std::exp(a_);
        }
        double z = detail::inverse_normal_cdf(u);
        if (std::isinf(z)) return z < 0 ? 0.0 : std::numeric_limits<double>::max();
        return std::exp(a_ + b_ * z);
      }
    }
    return 0.0;
  }

  struct Summary {
    double mean, p50, p95, p99, min, max;
  };

  /// Exact nearest-rank order statistics for empirical variants, closed
  /// forms for parametric ones. Unbounded variants report max = +inf.
  Summary summary() const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind_) {
      case DistKind::Empirical: {
        std::vector<double> s = samples_;
        std::sort(s.begin(), s.end());
        auto rank = [&](double q) {
          std::size_t r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(s.size())));
          if (r == 0) r = 1;
          return s[r - 1];
        };
        return {a_, rank(0.50), rank(0.95), rank(0.99), s.front(), s.back()};
      }
      case DistKind::Constant:
        return {a_, a_, a_, a_, a_, a_};
      case DistKind::Uniform: {
        auto q = [&](double p) { return a_ + p * (b_ - a_); };
        return {0.5 * (a_ + b_), q(0.50), q(0.95), q(0.99), a_, b_};
      }
      case DistKind::Exponential: {
        auto q = [&](double p) { return -a_ * std::log1p(-p); };
        return {a_, q(0.50), q(0.95), q(0.99), 0.0, inf};
      }
      case DistKind::Lognormal: {
        auto q = [&](double p) { return std::exp(a_ + b_ * detail::inverse_normal_cdf(p)); };
        return {mean(), q(0.50), q(0.95), q(0.99), 0.0, b_ == 0.0 ? std::exp(a_) : inf};
      }
    }
    return {0, 0, 0, 0, 0, 0};
  }

  bool operator==(const ServiceDistribution& o) const {
    return kind_ == o.kind_ && a_ == o.a_ && b_ == o.b_ && samples_ == o.samples_;
  }
  bool operator!=(const ServiceDistribution& o) const { return !(*this == o); }

private:
  DistKind kind_;
  double a_ = 0.0;
  double b_ = 0.0;
  std::vector<double> samples_;
};

/// Build an empirical distribution from profiled durations (microseconds).
inline ServiceDistribution from_samples(std::vector<double> samples_us) {
  return ServiceDistribution::empirical(std::move(samples_us));
}

}  // namespace hetsim
