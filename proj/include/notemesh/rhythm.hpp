#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

// ---------------------------------------------------------------------------
// Tempo map arithmetic
// ---------------------------------------------------------------------------

/// Seconds elapsed from tick 0 to `tick`. Each tempo segment contributes
/// 60 / (bpm * tpqn) seconds per tick.
inline double ticks_to_seconds(Tick tick, const TempoMap& tempo_map, int tpqn) {
  if (tempo_map.empty()) {
    return static_cast<double>(tick) * 60.0 / (kDefaultBpm * tpqn);
  }
  double seconds = 0.0;
  Tick cursor = 0;
  double bpm = tempo_map.front().bpm;
  for (const TempoEvent& ev : tempo_map) {
    if (ev.tick >= tick) break;
    seconds += static_cast<double>(ev.tick - cursor) * 60.0 / (bpm * tpqn);
    cursor = ev.tick;
    bpm = ev.bpm;
  }
  seconds += static_cast<double>(tick - cursor) * 60.0 / (bpm * tpqn);
  return seconds;
}

/// Inverse of ticks_to_seconds, rounded to the nearest tick.
inline Tick seconds_to_ticks(double seconds, const TempoMap& tempo_map, int tpqn) {
  if (seconds <= 0.0) return 0;
  TempoMap map = tempo_map.empty() ? TempoMap{TempoEvent{}} : tempo_map;
  double elapsed = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double ticks_per_sec = map[i].bpm * tpqn / 60.0;
    if (i + 1 < map.size()) {
      const double segment =
          static_cast<double>(map[i + 1].tick - map[i].tick) / ticks_per_sec;
      if (elapsed + segment < seconds) {
        elapsed += segment;
        continue;
      }
    }
    return map[i].tick + std::llround((seconds - elapsed) * ticks_per_sec);
  }
  return 0;  // unreachable
}

// ---------------------------------------------------------------------------
// Bars
// ---------------------------------------------------------------------------

inline bool is_valid_denominator(int denominator) {
  return denominator == 1 || denominator == 2 || denominator == 4 || denominator == 8 ||
         denominator == 16 || denominator == 32;
}

inline Tick bar_length_ticks(TimeSignature ts, int tpqn) {
  return static_cast<Tick>(ts.numerator) * (static_cast<Tick>(tpqn) * 4 / ts.denominator);
}

struct BarSpan {
  int index = 0;
  TimeSignature time_sig;
  Tick start_ticks = 0;
  Tick end_ticks = 0;
};

namespace detail {

// Walks the bar grid implied by a time-signature map. A signature change that
// falls inside a bar cuts that bar short and restarts the tiling at the change.
class BarWalker {
 public:
  BarWalker(const TimeSignatureMap& map, int tpqn) : map_(map), tpqn_(tpqn) {
    if (map_.empty() || map_.front().tick > 0) {
      map_.insert(map_.begin(), TimeSignatureEvent{0, TimeSignature{4, 4}});
    }
  }

  BarSpan next() {
    while (sig_ + 1 < map_.size() && map_[sig_ + 1].tick <= cursor_) ++sig_;
    const TimeSignature ts = map_[sig_].time_sig;
    Tick end = cursor_ + std::max<Tick>(1, bar_length_ticks(ts, tpqn_));
    if (sig_ + 1 < map_.size() && map_[sig_ + 1].tick < end) end = map_[sig_ + 1].tick;
    BarSpan span{index_++, ts, cursor_, end};
    cursor_ = end;
    return span;
  }

 private:
  TimeSignatureMap map_;
  int tpqn_;
  std::size_t sig_ = 0;
  Tick cursor_ = 0;
  int index_ = 0;
};

}  // namespace detail

/// Bars tiling [0, end_tick). Empty when end_tick <= 0.
inline std::vector<BarSpan> bar_spans_covering(const TimeSignatureMap& map, int tpqn,
                                               Tick end_tick) {
  std::vector<BarSpan> spans;
  detail::BarWalker walker(map, tpqn);
  while (spans.empty() ? end_tick > 0 : spans.back().end_ticks < end_tick) {
    spans.push_back(walker.next());
  }
  return spans;
}

/// The first `count` bars of the grid.
inline std::vector<BarSpan> bar_spans_count(const TimeSignatureMap& map, int tpqn, int count) {
  std::vector<BarSpan> spans;
  detail::BarWalker walker(map, tpqn);
  for (int i = 0; i < count; ++i) spans.push_back(walker.next());
  return spans;
}

/// Index of the span containing `tick`, or nullopt past the last span.
inline std::optional<std::size_t> bar_index_of(std::span<const BarSpan> spans, Tick tick) {
  auto it = std::upper_bound(spans.begin(), spans.end(), tick,
                             [](Tick t, const BarSpan& s) { return t < s.end_ticks; });
  if (it == spans.end() || tick < it->start_ticks) return std::nullopt;
  return static_cast<std::size_t>(it - spans.begin());
}

// ---------------------------------------------------------------------------
// Subdivisions and quantization
// ---------------------------------------------------------------------------

enum class Subdivision { whole, half, quarter, eighth, sixteenth, thirty_second };

inline constexpr std::array<Subdivision, 6> kAllSubdivisions = {
    Subdivision::whole,  Subdivision::half,      Subdivision::quarter,
    Subdivision::eighth, Subdivision::sixteenth, Subdivision::thirty_second};

inline std::string_view subdivision_name(Subdivision sub) {
  switch (sub) {
    case Subdivision::whole: return "whole";
    case Subdivision::half: return "half";
    case Subdivision::quarter: return "quarter";
    case Subdivision::eighth: return "eighth";
    case Subdivision::sixteenth: return "sixteenth";
    case Subdivision::thirty_second: return "thirty_second";
  }
  return "quarter";
}

inline std::optional<Subdivision> parse_subdivision(std::string_view name) {
  for (Subdivision sub : kAllSubdivisions) {
    if (subdivision_name(sub) == name) return sub;
  }
  return std::nullopt;
}

inline Tick grid_ticks(Subdivision sub, int tpqn) {
  const Tick q = tpqn;
  switch (sub) {
    case Subdivision::whole: return 4 * q;
    case Subdivision::half: return 2 * q;
    case Subdivision::quarter: return q;
    case Subdivision::eighth: return q / 2;
    case Subdivision::sixteenth: return q / 4;
    case Subdivision::thirty_second: return q / 8;
  }
  return q;
}

/// Nearest multiple of `grid`; an exact tie goes to the earlier grid point.
inline Tick snap_to_grid(Tick tick, Tick grid) {
  const Tick base = tick >= 0 ? tick / grid * grid : -((-tick + grid - 1) / grid) * grid;
  const Tick rem = tick - base;
  return 2 * rem > grid ? base + grid : base;
}

/// Snaps onsets to the grid, keeps the duration, re-snaps the end and clamps
/// the duration to at least one grid step. Second timings are left untouched;
/// use the Score overload to refresh them.
inline std::vector<Note> quantize(std::span<const Note> notes, Subdivision sub, int tpqn) {
  const Tick g = std::max<Tick>(1, grid_ticks(sub, tpqn));
  std::vector<Note> out(notes.begin(), notes.end());
  for (Note& n : out) {
    const Tick start = snap_to_grid(n.start_ticks, g);
    Tick end = snap_to_grid(start + n.duration_ticks(), g);
    if (end - start < g) end = start + g;
    n.start_ticks = start;
    n.end_ticks = end;
  }
  return out;
}

/// Recomputes start_sec/end_sec of every note from the tempo map.
inline void refresh_seconds(Score& score) {
  for (Instrument& inst : score.instruments) {
    for (Note& n : inst.notes) {
      n.start_sec = ticks_to_seconds(n.start_ticks, score.tempo_map, score.tpqn);
      n.end_sec = ticks_to_seconds(n.end_ticks, score.tempo_map, score.tpqn);
    }
  }
}

}  // namespace notemesh
