#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "notemesh/dataset.hpp"
#include "notemesh/errors.hpp"
#include "notemesh/features.hpp"

namespace notemesh {

// Objective comparison of two sample sets: per feature, pairwise Euclidean
// distances within each set (intra) and across sets (inter) are turned into
// densities, then each intra density is scored against the inter density by
// overlap area and KL divergence.

inline constexpr std::size_t kDefaultPdfPoints = 1000;
inline constexpr double kKlFloor = 1e-12;

struct DistanceSet {
  enum class Kind { intra, inter };

  std::vector<double> values;
  Kind kind = Kind::intra;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

struct Pdf {
  std::vector<double> grid;
  std::vector<double> density;
};

/// |a - b| for scalars, Euclidean norm of the difference otherwise.
inline double feature_distance(const FeatureValue& a, const FeatureValue& b) {
  if (a.kind != b.kind || a.data.size() != b.data.size()) {
    throw KindMismatch("cannot compare " + std::string(feature_code(a.kind)) + " with " +
                       std::string(feature_code(b.kind)));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

inline DistanceSet intra_set_distances(std::span<const FeatureValue> samples) {
  if (samples.size() < 2) {
    throw InsufficientSamples("intra-set distances need at least 2 samples, got " +
                              std::to_string(samples.size()));
  }
  DistanceSet out{{}, DistanceSet::Kind::intra, samples.size(), 0};
  out.values.reserve(samples.size() * (samples.size() - 1) / 2);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t j = i + 1; j < samples.size(); ++j) out.values.push_back(feature_distance(samples[i], samples[j]));
  }
  return out;
}

inline DistanceSet inter_set_distances(std::span<const FeatureValue> a, std::span<const FeatureValue> b) {
  if (a.empty() || b.empty()) throw InsufficientSamples("inter-set distances need two non-empty sets");
  DistanceSet out{{}, DistanceSet::Kind::inter, a.size(), b.size()};
  out.values.reserve(a.size() * b.size());
  for (const auto& x : a) {
    for (const auto& y : b) out.values.push_back(feature_distance(x, y));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Density estimation
// ---------------------------------------------------------------------------

/// Scott's rule h = sd * n^(-1/5); a zero spread falls back to
/// max(1e-3, 1e-3 * |mean|).
inline double kde_bandwidth(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (sd > 0.0) return sd * std::pow(n, -0.2);
  return std::max(1e-3, 1e-3 * std::abs(mean));
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  std::vector<double> grid(points);
  if (points == 1) {
    grid[0] = lo;
    return grid;
  }
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + step * static_cast<double>(i);
  grid.back() = hi;
  return grid;
}

inline double trapezoid(std::span<const double> x, std::span<const double> y) {
  double area = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return area;
}

/// Gaussian KDE evaluated on `grid` (or on K points spanning the data padded
/// by 3h), renormalized to unit trapezoidal mass.
inline Pdf estimate_pdf(std::span<const double> values, std::optional<std::vector<double>> grid = std::nullopt,
                        std::size_t points = kDefaultPdfPoints) {
  if (values.size() < 2) {
    throw InsufficientSamples("density estimation needs at least 2 values, got " +
                              std::to_string(values.size()));
  }
  const double h = kde_bandwidth(values);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  Pdf pdf;
  pdf.grid = grid ? std::move(*grid) : linear_grid(sorted.front() - 3 * h, sorted.back() + 3 * h, points);
  pdf.density.assign(pdf.grid.size(), 0.0);
  const double norm = 1.0 / (static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  // Kernel mass beyond 10 bandwidths is below double precision relative to the peak.
  const double reach = 10.0 * h;
  for (std::size_t g = 0; g < pdf.grid.size(); ++g) {
    const double x = pdf.grid[g];
    auto lo = std::lower_bound(sorted.begin(), sorted.end(), x - reach);
    auto hi = std::upper_bound(lo, sorted.end(), x + reach);
    double sum = 0.0;
    for (auto it = lo; it != hi; ++it) {
      const double z = (x - *it) / h;
      sum += std::exp(-0.5 * z * z);
    }
    pdf.density[g] = sum * norm;
  }
  const double mass = trapezoid(pdf.grid, pdf.density);
  if (mass > 0.0) {
    for (double& d : pdf.density) d /= mass;
  }
  return pdf;
}

inline Pdf estimate_pdf(const DistanceSet& distances, std::optional<std::vector<double>> grid = std::nullopt,
                        std::size_t points = kDefaultPdfPoints) {
  return estimate_pdf(std::span<const double>(distances.values), std::move(grid), points);
}

namespace detail {

inline std::vector<double> union_grid(const Pdf& p, const Pdf& q) {
  if (p.grid == q.grid) return p.grid;
  std::vector<double> grid;
  grid.reserve(p.grid.size() + q.grid.size());
  std::merge(p.grid.begin(), p.grid.end(), q.grid.begin(), q.grid.end(), std::back_inserter(grid));
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Linear interpolation of the density; zero outside its grid.
inline std::vector<double> resample(const Pdf& p, const std::vector<double>& grid) {
  if (grid == p.grid) return p.density;
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    if (p.grid.empty() || x < p.grid.front() || x > p.grid.back()) continue;
    auto it = std::lower_bound(p.grid.begin(), p.grid.end(), x);
    const auto k = static_cast<std::size_t>(it - p.grid.begin());
    if (p.grid[k] == x) {
      out[i] = p.density[k];
      continue;
    }
    const double t = (x - p.grid[k - 1]) / (p.grid[k] - p.grid[k - 1]);
    out[i] = p.density[k - 1] + t * (p.density[k] - p.density[k - 1]);
  }
  return out;
}

}  // namespace detail

/// Trapezoidal integral of min(p, q) over the union of both grids.
inline double overlap_area(const Pdf& p, const Pdf& q) {
  const auto grid = detail::union_grid(p, q);
  const auto pd = detail::resample(p, grid);
  const auto qd = detail::resample(q, grid);
  std::vector<double> lower(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) lower[i] = std::min(pd[i], qd[i]);
  return trapezoid(grid, lower);
}

/// KL(p || q) on the union grid after flooring both densities at 1e-12 and
/// renormalizing.
inline double kl_divergence(const Pdf& p, const Pdf& q) {
  const auto grid = detail::union_grid(p, q);
  auto pd = detail::resample(p, grid);
  auto qd = detail::resample(q, grid);
  for (auto* d : {&pd, &qd}) {
    for (double& v : *d) v = std::max(v, kKlFloor);
    const double mass = trapezoid(grid, *d);
    for (double& v : *d) v /= mass;
  }
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) integrand[i] = pd[i] * std::log(pd[i] / qd[i]);
  return trapezoid(grid, integrand);
}

// ---------------------------------------------------------------------------
// Cross validation
// ---------------------------------------------------------------------------

enum class Granularity { file, bar };

struct FeatureReport {
  FeatureKind kind = FeatureKind::PC;
  Pdf intra_a;
  Pdf intra_b;
  Pdf inter;
  double oa_a_inter = 0.0;
  double oa_b_inter = 0.0;
  double kld_a_inter = 0.0;
  double kld_b_inter = 0.0;
};

struct EvalReport {
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::vector<FeatureReport> features;  // in requested-kind order
};

inline std::vector<FeatureValue> sample_features(std::span<const Score> scores, FeatureKind kind,
                                                 Granularity granularity) {
  std::vector<FeatureValue> out;
  for (const Score& s : scores) {
    if (granularity == Granularity::file) {
      out.push_back(extract_feature(s, kind));
    } else {
      auto bars = extract_bar_features(s, kind);
      out.insert(out.end(), bars.begin(), bars.end());
    }
  }
  return out;
}

/// Scores one feature: the three densities share a grid spanning all pooled
/// distances padded by three of the widest bandwidth.
inline FeatureReport compare_feature(std::span<const FeatureValue> a, std::span<const FeatureValue> b,
                                     FeatureKind kind, std::size_t points = kDefaultPdfPoints) {
  const DistanceSet intra_a = intra_set_distances(a);
  const DistanceSet intra_b = intra_set_distances(b);
  const DistanceSet inter = inter_set_distances(a, b);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  double h = 0.0;
  for (const DistanceSet* d : {&intra_a, &intra_b, &inter}) {
    const auto [mn, mx] = std::minmax_element(d->values.begin(), d->values.end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
    h = std::max(h, kde_bandwidth(d->values));
  }
  const auto grid = linear_grid(lo - 3 * h, hi + 3 * h, points);

  FeatureReport r;
  r.kind = kind;
  r.intra_a = estimate_pdf(intra_a, grid);
  r.intra_b = estimate_pdf(intra_b, grid);
  r.inter = estimate_pdf(inter, grid);
  r.oa_a_inter = overlap_area(r.intra_a, r.inter);
  r.oa_b_inter = overlap_area(r.intra_b, r.inter);
  r.kld_a_inter = kl_divergence(r.intra_a, r.inter);
  r.kld_b_inter = kl_divergence(r.intra_b, r.inter);
  return r;
}

inline EvalReport cross_validate(std::span<const Score> a, std::span<const Score> b,
                                 std::span<const FeatureKind> kinds,
                                 Granularity granularity = Granularity::file) {
  if (a.size() < 2 || b.size() < 2) {
    throw InsufficientSamples("each dataset needs at least 2 files (got " + std::to_string(a.size()) +
                              " and " + std::to_string(b.size()) + ")");
  }
  EvalReport report;
  for (FeatureKind kind : kinds) {
    const auto fa = sample_features(a, kind, granularity);
    const auto fb = sample_features(b, kind, granularity);
    report.n_a = fa.size();
    report.n_b = fb.size();
    report.features.push_back(compare_feature(fa, fb, kind));
  }
  return report;
}

inline EvalReport cross_validate(const fs::path& dataset_a, const fs::path& dataset_b,
                                 std::span<const FeatureKind> kinds,
                                 Granularity granularity = Granularity::file,
                                 unsigned threads = worker_count()) {
  const auto a = load_dataset(resolve_dataset(dataset_a), threads);
  const auto b = load_dataset(resolve_dataset(dataset_b), threads);
  return cross_validate(std::span<const Score>(a), std::span<const Score>(b), kinds, granularity);
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report, bool include_curves = true) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["features"] = ordered_json::object();
  for (const FeatureReport& f : report.features) {
    ordered_json jf;
    jf["oa_a_inter"] = f.oa_a_inter;
    jf["kld_a_inter"] = f.kld_a_inter;
    jf["oa_b_inter"] = f.oa_b_inter;
    jf["kld_b_inter"] = f.kld_b_inter;
    if (include_curves) {
      jf["pdf_grids"] = ordered_json{{"grid", f.inter.grid},
                                     {"intra_a", f.intra_a.density},
                                     {"intra_b", f.intra_b.density},
                                     {"inter", f.inter.density}};
    }
    doc["features"][std::string(feature_code(f.kind))] = std::move(jf);
  }
  doc["n_a"] = report.n_a;
  doc["n_b"] = report.n_b;
  return doc;
}

}  // namespace notemesh
