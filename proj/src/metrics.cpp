#include "ttc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ttc/errors.hpp"

namespace ttc {

ScalingCurve ScalingCurve::from_runs(std::vector<EvalPoint> runs, std::string method_label) {
  if (runs.empty()) throw ValidationError("scaling curve needs at least one run");
  for (const auto& p : runs) {
    if (!(p.compute >= 0.0) || !std::isfinite(p.compute)) {
      throw ValidationError("compute must be finite and nonnegative");
    }
    if (!(p.accuracy >= 0.0 && p.accuracy <= 100.0)) {
      throw ValidationError("accuracy must lie in [0, 100]");
    }
  }
  ScalingCurve c;
  c.label_ = std::move(method_label);
  c.run_count_ = runs.size();
  std::stable_sort(runs.begin(), runs.end(),
                   [](const EvalPoint& a, const EvalPoint& b) { return a.compute < b.compute; });
  for (std::size_t i = 0; i < runs.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < runs.size() && runs[j].compute == runs[i].compute) sum += runs[j++].accuracy;
    c.points_.push_back({runs[i].compute, sum / static_cast<double>(j - i)});
    i = j;
  }
  return c;
}

void ControlBounds::validate() const {
  if (a_min && a_max && *a_min > *a_max) throw ValidationError("a_min > a_max");
  if ((a_min && *a_min < 0) || (a_max && *a_max < 0)) {
    throw ValidationError("control bounds must be nonnegative");
  }
}

bool ControlBounds::contains(double compute) const {
  return (!a_min || *a_min <= compute) && (!a_max || compute <= *a_max);
}

void to_json(json& j, const ControlBounds& b) {
  j = json{{"a_min", b.a_min ? json(*b.a_min) : json(nullptr)},
           {"a_max", b.a_max ? json(*b.a_max) : json(nullptr)}};
}

void from_json(const json& j, ControlBounds& b) {
  b = ControlBounds{};
  if (auto it = j.find("a_min"); it != j.end() && !it->is_null()) b.a_min = it->get<double>();
  if (auto it = j.find("a_max"); it != j.end() && !it->is_null()) b.a_max = it->get<double>();
  b.validate();
}

double compute_control(std::span<const ControlObservation> observed) {
  if (observed.empty()) throw ValidationError("control needs at least one run");
  std::size_t inside = 0;
  for (const auto& o : observed) {
    o.bounds.validate();
    if (o.bounds.contains(o.compute)) ++inside;
  }
  return 100.0 * static_cast<double>(inside) / static_cast<double>(observed.size());
}

double compute_control_class_conditional(double short_compute, double long_compute,
                                         double default_compute) {
  int ok = 0;
  if (short_compute < default_compute) ++ok;
  if (long_compute > default_compute) ++ok;
  return 50.0 * ok;
}

double compute_scaling(const ScalingCurve& curve) {
  const auto& pts = curve.points();
  if (pts.size() < 2) throw ValidationError("scaling needs at least two distinct compute values");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      sum += (pts[b].accuracy - pts[a].accuracy) / (pts[b].compute - pts[a].compute);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double compute_performance(const ScalingCurve& curve) {
  const auto& pts = curve.points();
  if (pts.empty()) throw ValidationError("performance of an empty curve");
  double best = pts.front().accuracy;
  for (const auto& p : pts) best = std::max(best, p.accuracy);
  return best;
}

double interpolate(const ScalingCurve& curve, double x) {
  const auto& pts = curve.points();
  if (pts.empty()) throw ValidationError("interpolate on an empty curve");
  if (x < pts.front().compute || x > pts.back().compute) {
    throw ValidationError("interpolate: x outside the measured compute range");
  }
  auto hi = std::lower_bound(pts.begin(), pts.end(), x,
                             [](const EvalPoint& p, double v) { return p.compute < v; });
  if (hi->compute == x) return hi->accuracy;
  auto lo = hi - 1;
  const double t = (x - lo->compute) / (hi->compute - lo->compute);
  return lo->accuracy + t * (hi->accuracy - lo->accuracy);
}

MethodReport make_report(const ScalingCurve& curve, double control_pct) {
  MethodReport r;
  r.method_label = curve.method_label();
  r.control_pct = control_pct;
  if (curve.points().size() >= 2) r.scaling_slope = compute_scaling(curve);
  r.performance = compute_performance(curve);
  r.run_count = curve.run_count();
  return r;
}

void to_json(json& j, const MethodReport& r) {
  j = json{{"method", r.method_label},
           {"control_pct", r.control_pct},
           {"scaling_pp_per_token", r.scaling_slope ? json(*r.scaling_slope) : json(nullptr)},
           {"scaling_pp_per_kilotoken",
            r.scaling_slope ? json(pp_per_kilotoken(*r.scaling_slope)) : json(nullptr)},
           {"performance", r.performance},
           {"run_count", r.run_count}};
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string curve_csv(std::span<const ScalingCurve> curves) {
  std::string out = "method_label,compute,accuracy\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points()) {
      out += c.method_label() + "," + format_number(p.compute) + "," + format_number(p.accuracy) + "\n";
    }
  }
  return out;
}

}  // namespace ttc
