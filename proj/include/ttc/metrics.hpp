#pragma once

/**
 * Control / Scaling / Performance over an accuracy-vs-compute curve.
 *
 * A method is evaluated at several settings a ∈ A on a fixed benchmark; each
 * run gives (mean thinking tokens, accuracy %). The runs define a piecewise
 * linear f. Then
 *   Control     = % of runs whose compute lies inside [a_min, a_max]
 *   Scaling     = mean slope (f(b) - f(a)) / (b - a) over all pairs b > a
 *   Performance = max accuracy over the runs
 *
 * Slopes are in accuracy percentage points per thinking token;
 * `pp_per_kilotoken` gives the x1000 display unit.
 */

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttc/core_types.hpp"

namespace ttc {

struct EvalPoint {
  double compute = 0.0;   // mean thinking tokens
  double accuracy = 0.0;  // percent, [0, 100]

  bool operator==(const EvalPoint&) const = default;
};

/// Points sorted by strictly increasing compute. Runs with equal compute are
/// merged by averaging their accuracy; `run_count` keeps the number of runs.
class ScalingCurve {
 public:
  static ScalingCurve from_runs(std::vector<EvalPoint> runs, std::string method_label = {});

  const std::vector<EvalPoint>& points() const { return points_; }
  const std::string& method_label() const { return label_; }
  std::size_t run_count() const { return run_count_; }

 private:
  std::vector<EvalPoint> points_;
  std::string label_;
  std::size_t run_count_ = 0;
};

struct ControlBounds {
  std::optional<double> a_min;
  std::optional<double> a_max;

  void validate() const;
  bool contains(double compute) const;
  bool operator==(const ControlBounds&) const = default;
};

void to_json(json& j, const ControlBounds& b);
void from_json(const json& j, ControlBounds& b);

struct ControlObservation {
  double compute = 0.0;
  ControlBounds bounds;
};

/// Percentage of runs inside their bounds. Throws ValidationError when empty.
double compute_control(std::span<const ControlObservation> observed);

/// Two compliance checks: short < default and long > default (strict).
double compute_control_class_conditional(double short_compute, double long_compute,
                                         double default_compute);

/// Throws ValidationError for fewer than two distinct compute values.
double compute_scaling(const ScalingCurve& curve);

double compute_performance(const ScalingCurve& curve);

/// Piecewise-linear f(x); throws ValidationError outside the compute range.
double interpolate(const ScalingCurve& curve, double x);

inline double pp_per_kilotoken(double slope) { return slope * 1000.0; }

struct MethodReport {
  std::string method_label;
  double control_pct = 0.0;
  std::optional<double> scaling_slope;  // absent when the curve has one point
  double performance = 0.0;
  std::size_t run_count = 0;

  bool operator==(const MethodReport&) const = default;
};

/// Scaling is left empty (not an error) for single-point curves.
MethodReport make_report(const ScalingCurve& curve, double control_pct);

void to_json(json& j, const MethodReport& r);

/// "method_label,compute,accuracy" rows, one per curve point.
std::string curve_csv(std::span<const ScalingCurve> curves);

/// Fixed six-decimal rendering used by every CSV/report writer.
std::string format_number(double v);

}  // namespace ttc
