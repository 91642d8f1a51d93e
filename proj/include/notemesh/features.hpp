#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/score.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

enum class FeatureKind { PC, PCH, PCTM, PR, PI, NC, IOI, NLH, NLTM };

inline constexpr std::array<FeatureKind, 9> kAllFeatureKinds = {
    FeatureKind::PC, FeatureKind::PCH, FeatureKind::PCTM, FeatureKind::PR,  FeatureKind::PI,
    FeatureKind::NC, FeatureKind::IOI, FeatureKind::NLH,  FeatureKind::NLTM};

inline std::string_view feature_code(FeatureKind k) {
  switch (k) {
    case FeatureKind::PC: return "pc";
    case FeatureKind::PCH: return "pch";
    case FeatureKind::PCTM: return "pctm";
    case FeatureKind::PR: return "pr";
    case FeatureKind::PI: return "pi";
    case FeatureKind::NC: return "nc";
    case FeatureKind::IOI: return "ioi";
    case FeatureKind::NLH: return "nlh";
    case FeatureKind::NLTM: return "nltm";
  }
  return "";
}

inline std::optional<FeatureKind> parse_feature_code(std::string_view code) {
  for (FeatureKind k : kAllFeatureKinds) {
    if (feature_code(k) == code) return k;
  }
  return std::nullopt;
}

inline std::size_t feature_size(FeatureKind k) {
  switch (k) {
    case FeatureKind::PCH:
    case FeatureKind::NLH: return 12;
    case FeatureKind::PCTM:
    case FeatureKind::NLTM: return 144;
    default: return 1;
  }
}

inline bool is_pitch_feature(FeatureKind k) {
  return k == FeatureKind::PC || k == FeatureKind::PCH || k == FeatureKind::PCTM ||
         k == FeatureKind::PR || k == FeatureKind::PI;
}

// Scalar, 12-vector, or row-major 12x12 matrix depending on kind.
struct FeatureValue {
  FeatureKind kind = FeatureKind::PC;
  std::vector<double> data;

  double scalar() const { return data.at(0); }

  friend bool operator==(const FeatureValue&, const FeatureValue&) = default;
};

// Note-length classes in quarter notes, longest first: whole, dotted half,
// half, dotted quarter, quarter, dotted eighth, eighth, dotted sixteenth,
// sixteenth, dotted 32nd, 32nd, 64th.
inline constexpr std::array<double, 12> kNoteLengthClasses = {
    4.0, 3.0, 2.0, 1.5, 1.0, 0.75, 0.5, 0.375, 0.25, 0.1875, 0.125, 0.0625};

/// Bin of the nearest class in log-duration; ties go to the longer class.
inline int note_length_class(Tick duration_ticks, int tpqn) {
  const double quarters = static_cast<double>(duration_ticks) / tpqn;
  const double logd = std::log(quarters);
  int best = 0;
  double best_dist = std::abs(logd - std::log(kNoteLengthClasses[0]));
  for (int i = 1; i < 12; ++i) {
    const double d = std::abs(logd - std::log(kNoteLengthClasses[i]));
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return best;
}

namespace detail {

inline std::vector<Note> onset_sorted(std::span<const Note> notes) {
  std::vector<Note> out(notes.begin(), notes.end());
  sort_notes(out);
  return out;
}

inline void normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total > 0.0) {
    for (double& x : v) x /= total;
  }
}

template <typename ClassOf>
FeatureValue histogram(FeatureKind kind, const std::vector<Note>& sorted, ClassOf class_of) {
  FeatureValue fv{kind, std::vector<double>(12, 0.0)};
  for (const Note& n : sorted) fv.data[class_of(n)] += 1.0;
  normalize(fv.data);
  return fv;
}

template <typename ClassOf>
FeatureValue transitions(FeatureKind kind, const std::vector<Note>& sorted, ClassOf class_of) {
  FeatureValue fv{kind, std::vector<double>(144, 0.0)};
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    fv.data[class_of(sorted[i - 1]) * 12 + class_of(sorted[i])] += 1.0;
  }
  normalize(fv.data);
  return fv;
}

}  // namespace detail

/// PC: distinct pitches. PR: max - min pitch. PI: mean absolute interval
/// between consecutive onset-sorted notes.
inline double pitch_scalar(std::span<const Note> notes, FeatureKind kind) {
  if (notes.empty()) return 0.0;
  const auto sorted = detail::onset_sorted(notes);
  switch (kind) {
    case FeatureKind::PC: {
      std::set<int> distinct;
      for (const Note& n : sorted) distinct.insert(n.pitch);
      return static_cast<double>(distinct.size());
    }
    case FeatureKind::PR: {
      const auto [lo, hi] = std::minmax_element(
          sorted.begin(), sorted.end(), [](const Note& a, const Note& b) { return a.pitch < b.pitch; });
      return static_cast<double>(hi->pitch - lo->pitch);
    }
    case FeatureKind::PI: {
      if (sorted.size() < 2) return 0.0;
      double sum = 0.0;
      for (std::size_t i = 1; i < sorted.size(); ++i) sum += std::abs(sorted[i].pitch - sorted[i - 1].pitch);
      return sum / static_cast<double>(sorted.size() - 1);
    }
    default:
      throw KindMismatch("pitch_scalar expects PC, PR or PI, got " + std::string(feature_code(kind)));
  }
}

inline FeatureValue pitch_histograms(std::span<const Note> notes, FeatureKind kind) {
  const auto sorted = detail::onset_sorted(notes);
  const auto pc = [](const Note& n) { return n.pitch % 12; };
  switch (kind) {
    case FeatureKind::PCH: return detail::histogram(kind, sorted, pc);
    case FeatureKind::PCTM: return detail::transitions(kind, sorted, pc);
    default:
      throw KindMismatch("pitch_histograms expects PCH or PCTM, got " + std::string(feature_code(kind)));
  }
}

/// NC: note count. IOI: mean gap in seconds between successive distinct onsets.
inline double rhythm_scalar(std::span<const Note> notes, FeatureKind kind) {
  switch (kind) {
    case FeatureKind::NC: return static_cast<double>(notes.size());
    case FeatureKind::IOI: {
      const auto sorted = detail::onset_sorted(notes);
      std::vector<double> onsets;
      Tick last = -1;
      for (const Note& n : sorted) {
        if (n.start_ticks != last) {
          onsets.push_back(n.start_sec);
          last = n.start_ticks;
        }
      }
      if (onsets.size() < 2) return 0.0;
      double sum = 0.0;
      for (std::size_t i = 1; i < onsets.size(); ++i) sum += onsets[i] - onsets[i - 1];
      return sum / static_cast<double>(onsets.size() - 1);
    }
    default:
      throw KindMismatch("rhythm_scalar expects NC or IOI, got " + std::string(feature_code(kind)));
  }
}

inline FeatureValue rhythm_histograms(std::span<const Note> notes, FeatureKind kind, int tpqn) {
  const auto sorted = detail::onset_sorted(notes);
  const auto cls = [tpqn](const Note& n) { return note_length_class(n.duration_ticks(), tpqn); };
  switch (kind) {
    case FeatureKind::NLH: return detail::histogram(kind, sorted, cls);
    case FeatureKind::NLTM: return detail::transitions(kind, sorted, cls);
    default:
      throw KindMismatch("rhythm_histograms expects NLH or NLTM, got " + std::string(feature_code(kind)));
  }
}

/// Any feature kind from an explicit note list.
inline FeatureValue compute_feature(std::span<const Note> notes, FeatureKind kind, int tpqn) {
  switch (kind) {
    case FeatureKind::PC:
    case FeatureKind::PR:
    case FeatureKind::PI: return FeatureValue{kind, {pitch_scalar(notes, kind)}};
    case FeatureKind::PCH:
    case FeatureKind::PCTM: return pitch_histograms(notes, kind);
    case FeatureKind::NC:
    case FeatureKind::IOI: return FeatureValue{kind, {rhythm_scalar(notes, kind)}};
    case FeatureKind::NLH:
    case FeatureKind::NLTM: return rhythm_histograms(notes, kind, tpqn);
  }
  return {};
}

/// Notes a feature is computed over: pitch features ignore drum notes,
/// rhythm features use every note.
inline std::vector<Note> feature_notes(const Score& score, FeatureKind kind) {
  std::vector<Note> notes;
  for (const Instrument& inst : score.instruments) {
    if (inst.is_drum && is_pitch_feature(kind)) continue;
    notes.insert(notes.end(), inst.notes.begin(), inst.notes.end());
  }
  return notes;
}

inline FeatureValue extract_feature(const Score& score, FeatureKind kind) {
  return compute_feature(feature_notes(score, kind), kind, score.tpqn);
}

/// One feature value per bar of the piece-wide bar grid.
inline std::vector<FeatureValue> extract_bar_features(const Score& score, FeatureKind kind) {
  const auto notes = feature_notes(score, kind);
  Tick end = 0;
  for (const Note& n : notes) end = std::max(end, n.end_ticks);
  const auto spans = bar_spans_covering(score.time_sig_map, score.tpqn, end);
  std::vector<std::vector<Note>> per_bar(spans.size());
  for (const Note& n : notes) {
    if (auto b = bar_index_of(spans, n.start_ticks)) per_bar[*b].push_back(n);
  }
  std::vector<FeatureValue> out;
  out.reserve(per_bar.size());
  for (const auto& bar_notes : per_bar) out.push_back(compute_feature(bar_notes, kind, score.tpqn));
  return out;
}

inline constexpr std::array<int, 4> kNumeratorCandidates = {2, 3, 4, 6};

/// Onset strength per quarter note (velocity-weighted onset count), the
/// input to the numerator estimate.
inline std::vector<double> onset_strength(std::span<const Note> notes, int tpqn) {
  std::vector<double> strength;
  for (const Note& n : notes) {
    Tick q = n.start_ticks / tpqn;
    if (2 * (n.start_ticks % tpqn) > tpqn) ++q;
    if (static_cast<std::size_t>(q) >= strength.size()) strength.resize(q + 1, 0.0);
    strength[q] += n.velocity;
  }
  return strength;
}

/// Picks the lag in {2,3,4,6} quarters maximizing the mean lagged product of
/// the onset-strength sequence. Near-equal scores go to the smaller lag.
inline int estimate_ts_numerator(std::span<const Note> notes, int tpqn) {
  if (notes.size() < 4) {
    throw InsufficientData("numerator estimation needs at least 4 notes, got " +
                           std::to_string(notes.size()));
  }
  const auto s = onset_strength(notes, tpqn);
  int best = kNumeratorCandidates[0];
  double best_score = -1.0;
  for (int lag : kNumeratorCandidates) {
    if (static_cast<std::size_t>(lag) >= s.size()) continue;
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < s.size(); ++i) sum += s[i] * s[i + lag];
    const double score = sum / static_cast<double>(s.size() - lag);
    if (score > best_score + 1e-9 * std::max(1.0, std::abs(best_score))) {
      best = lag;
      best_score = score;
    }
  }
  return best;
}

/// Cosine similarity between per-bar PCH or NLH vectors. An empty bar is
/// similar to nothing (0) except another empty bar (1).
inline std::vector<std::vector<double>> self_similarity(const Score& score, FeatureKind per_bar) {
  if (per_bar != FeatureKind::PCH && per_bar != FeatureKind::NLH) {
    throw KindMismatch("self_similarity expects PCH or NLH, got " + std::string(feature_code(per_bar)));
  }
  const auto bars = extract_bar_features(score, per_bar);
  const std::size_t n = bars.size();
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (double x : bars[i].data) norms[i] += x * x;
    norms[i] = std::sqrt(norms[i]);
  }
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double value;
      if (norms[i] == 0.0 || norms[j] == 0.0) {
        value = (norms[i] == 0.0 && norms[j] == 0.0) ? 1.0 : 0.0;
      } else if (i == j) {
        value = 1.0;
      } else {
        double dot = 0.0;
        for (std::size_t k = 0; k < bars[i].data.size(); ++k) dot += bars[i].data[k] * bars[j].data[k];
        value = std::clamp(dot / (norms[i] * norms[j]), 0.0, 1.0);
      }
      sim[i][j] = sim[j][i] = value;
    }
  }
  return sim;
}

}  // namespace notemesh
