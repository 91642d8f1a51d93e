#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/score.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

// ---------------------------------------------------------------------------
// Intervals
// ---------------------------------------------------------------------------

struct Interval {
  int semitones = 0;
  std::string quality_name;

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr std::array<const char*, 25> kIntervalNames = {
    "unison",          "minor second",      "major second",      "minor third",
    "major third",     "perfect fourth",    "tritone",           "perfect fifth",
    "minor sixth",     "major sixth",       "minor seventh",     "major seventh",
    "octave",          "minor ninth",       "major ninth",       "minor tenth",
    "major tenth",     "perfect eleventh",  "augmented eleventh", "perfect twelfth",
    "minor thirteenth", "major thirteenth", "minor fourteenth",  "major fourteenth",
    "double octave"};

/// Unordered: the interval from a to b equals the one from b to a. Spans
/// beyond two octaves are named by their reduction mod 12.
inline Interval interval_between(int pitch_a, int pitch_b) {
  const int semitones = std::abs(pitch_b - pitch_a);
  const int named = semitones <= 24 ? semitones : semitones % 12;
  return Interval{semitones, kIntervalNames[named]};
}

// ---------------------------------------------------------------------------
// Chords
// ---------------------------------------------------------------------------

enum class ChordQuality {
  major_triad,
  minor_triad,
  diminished_triad,
  augmented_triad,
  major_seventh,
  minor_seventh,
  dominant_seventh,
  half_diminished_seventh,
  diminished_seventh,
};

inline constexpr std::array<ChordQuality, 9> kChordQualities = {
    ChordQuality::major_triad,      ChordQuality::minor_triad,
    ChordQuality::diminished_triad, ChordQuality::augmented_triad,
    ChordQuality::major_seventh,    ChordQuality::minor_seventh,
    ChordQuality::dominant_seventh, ChordQuality::half_diminished_seventh,
    ChordQuality::diminished_seventh};

inline std::vector<int> chord_intervals(ChordQuality q) {
  switch (q) {
    case ChordQuality::major_triad: return {0, 4, 7};
    case ChordQuality::minor_triad: return {0, 3, 7};
    case ChordQuality::diminished_triad: return {0, 3, 6};
    case ChordQuality::augmented_triad: return {0, 4, 8};
    case ChordQuality::major_seventh: return {0, 4, 7, 11};
    case ChordQuality::minor_seventh: return {0, 3, 7, 10};
    case ChordQuality::dominant_seventh: return {0, 4, 7, 10};
    case ChordQuality::half_diminished_seventh: return {0, 3, 6, 10};
    case ChordQuality::diminished_seventh: return {0, 3, 6, 9};
  }
  return {};
}

inline std::string_view chord_quality_name(ChordQuality q) {
  switch (q) {
    case ChordQuality::major_triad: return "major_triad";
    case ChordQuality::minor_triad: return "minor_triad";
    case ChordQuality::diminished_triad: return "diminished_triad";
    case ChordQuality::augmented_triad: return "augmented_triad";
    case ChordQuality::major_seventh: return "major_seventh";
    case ChordQuality::minor_seventh: return "minor_seventh";
    case ChordQuality::dominant_seventh: return "dominant_seventh";
    case ChordQuality::half_diminished_seventh: return "half_diminished_seventh";
    case ChordQuality::diminished_seventh: return "diminished_seventh";
  }
  return "";
}

using PitchClassSet = std::set<int>;

inline PitchClassSet chord_pitch_classes(int root_pc, ChordQuality quality) {
  PitchClassSet pcs;
  for (int offset : chord_intervals(quality)) pcs.insert((root_pc + offset) % 12);
  return pcs;
}

struct ChordReading {
  int root_pc = 0;
  ChordQuality quality = ChordQuality::major_triad;

  friend bool operator==(const ChordReading&, const ChordReading&) = default;
};

/// Every (root, quality) whose pitch classes equal `pcs`, by root then table order.
inline std::vector<ChordReading> identify_chord(const PitchClassSet& pcs) {
  std::vector<ChordReading> out;
  for (int root = 0; root < 12; ++root) {
    for (ChordQuality q : kChordQualities) {
      if (chord_pitch_classes(root, q) == pcs) out.push_back({root, q});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Keys and scales
// ---------------------------------------------------------------------------

enum class Mode { major, minor, dorian, phrygian, lydian, mixolydian, locrian };

enum class AccidentalKind { none, sharp, flat };

struct KeySignature {
  int count = 0;
  AccidentalKind kind = AccidentalKind::none;

  friend bool operator==(const KeySignature&, const KeySignature&) = default;
};

// `fifths` is the key signature's position on the circle of fifths
// (-7 = seven flats .. +7 = seven sharps); it fixes the tonic's spelling.
struct Key {
  int tonic_pc = 0;
  Mode mode = Mode::major;
  int fifths = 0;

  friend bool operator==(const Key&, const Key&) = default;
};

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::major: return "major";
    case Mode::minor: return "minor";
    case Mode::dorian: return "dorian";
    case Mode::phrygian: return "phrygian";
    case Mode::lydian: return "lydian";
    case Mode::mixolydian: return "mixolydian";
    case Mode::locrian: return "locrian";
  }
  return "major";
}

namespace detail {

inline constexpr std::array<int, 7> kMajorSteps = {0, 2, 4, 5, 7, 9, 11};

// Degree of the major scale each mode starts on.
inline int mode_rotation(Mode m) {
  switch (m) {
    case Mode::major: return 0;
    case Mode::dorian: return 1;
    case Mode::phrygian: return 2;
    case Mode::lydian: return 3;
    case Mode::mixolydian: return 4;
    case Mode::minor: return 5;
    case Mode::locrian: return 6;
  }
  return 0;
}

// Circle-of-fifths position of each major tonic, preferring the spelling
// with fewer accidentals (sharps on the F#/Gb tie).
inline constexpr std::array<int, 12> kMajorFifths = {0, -5, 2, -3, 4, -1, 6, 1, -4, 3, -2, 5};

inline int floor_mod(int a, int m) { return ((a % m) + m) % m; }

}  // namespace detail

inline Key make_key(int tonic_pc, Mode mode) {
  tonic_pc = detail::floor_mod(tonic_pc, 12);
  const int parent = detail::floor_mod(tonic_pc - detail::kMajorSteps[detail::mode_rotation(mode)], 12);
  return Key{tonic_pc, mode, detail::kMajorFifths[parent]};
}

/// Degrees I..VII as pitch classes. Minor is natural minor.
inline std::array<int, 7> scale_pitch_classes(const Key& key) {
  const int rot = detail::mode_rotation(key.mode);
  std::array<int, 7> out{};
  for (int i = 0; i < 7; ++i) {
    const int step = detail::floor_mod(detail::kMajorSteps[(i + rot) % 7] - detail::kMajorSteps[rot], 12);
    out[i] = (key.tonic_pc + step) % 12;
  }
  return out;
}

inline KeySignature key_signature(const Key& key) {
  if (key.mode != Mode::major && key.mode != Mode::minor) {
    throw UnsupportedMode("key signatures are defined for major and minor keys only, got " +
                          std::string(mode_name(key.mode)));
  }
  if (key.fifths == 0) return {0, AccidentalKind::none};
  return {std::abs(key.fifths), key.fifths > 0 ? AccidentalKind::sharp : AccidentalKind::flat};
}

/// Parses "<tonic><accidental?>_<mode>", e.g. "c_major", "eb_major", "f#_minor".
inline Key parse_key(std::string_view raw) {
  std::string lowered(raw);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const std::string_view text = lowered;
  const auto bad = [&](const std::string& why) {
    return KeyParseError("invalid key '" + std::string(raw) + "': " + why);
  };
  const auto sep = text.find('_');
  if (sep == std::string_view::npos || sep == 0) throw bad("expected <tonic>_<mode>");
  const std::string_view tonic = text.substr(0, sep);
  const std::string_view mode_text = text.substr(sep + 1);

  static constexpr std::string_view kLetters = "cdefgab";
  static constexpr std::array<int, 7> kLetterPc = {0, 2, 4, 5, 7, 9, 11};
  static constexpr std::array<int, 7> kLetterFifths = {0, 2, 4, -1, 1, 3, 5};
  const auto letter = kLetters.find(tonic[0]);
  if (letter == std::string_view::npos) throw bad("unknown tonic letter");

  int alter = 0;
  for (char c : tonic.substr(1)) {
    if (c == '#' || c == 's') {
      ++alter;
    } else if (c == 'b') {
      --alter;
    } else {
      throw bad("unknown accidental");
    }
  }
  if (std::abs(alter) > 1) throw bad("at most one accidental");

  std::optional<Mode> mode;
  for (Mode m : {Mode::major, Mode::minor, Mode::dorian, Mode::phrygian, Mode::lydian,
                 Mode::mixolydian, Mode::locrian}) {
    if (mode_name(m) == mode_text) mode = m;
  }
  if (!mode) throw bad("unknown mode");

  const int tonic_pc = detail::floor_mod(kLetterPc[letter] + alter, 12);
  // Fifths of the tonic name minus the offset of the mode's tonic within its
  // parent major scale (a minor -> c major: 3 - 3 = 0).
  static constexpr std::array<int, 7> kModeFifthsOffset = {0, 2, 4, -1, 1, 3, 5};
  const int fifths = kLetterFifths[letter] + 7 * alter -
                     kModeFifthsOffset[detail::mode_rotation(*mode)];
  if (std::abs(fifths) > 7) throw bad("needs more than seven accidentals");
  return Key{tonic_pc, *mode, fifths};
}

/// Inverse of parse_key, using the key's own spelling.
inline std::string key_to_string(const Key& key) {
  static constexpr std::array<int, 7> kModeFifthsOffset = {0, 2, 4, -1, 1, 3, 5};
  const int tonic_fifths = key.fifths + kModeFifthsOffset[detail::mode_rotation(key.mode)];
  // Letters in circle-of-fifths order starting at F.
  static constexpr std::string_view kFifthsLetters = "fcgdaeb";
  const int idx = detail::floor_mod(tonic_fifths + 1, 7);
  const int alter = (tonic_fifths + 1 - idx) / 7;
  std::string out(1, kFifthsLetters[idx]);
  if (alter > 0) out += std::string(alter, '#');
  if (alter < 0) out += std::string(-alter, 'b');
  return out + "_" + std::string(mode_name(key.mode));
}

// ---------------------------------------------------------------------------
// Key detection
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 12> kKrumhanslMajor = {6.35, 2.23, 3.48, 2.33, 4.38, 4.09,
                                                           2.52, 5.19, 2.39, 3.66, 2.29, 2.88};
inline constexpr std::array<double, 12> kKrumhanslMinor = {6.33, 2.68, 3.52, 5.38, 2.60, 3.53,
                                                           2.54, 4.75, 3.98, 2.69, 3.34, 3.17};

inline double pearson(const std::array<double, 12>& x, const std::array<double, 12>& y) {
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / 12.0;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / 12.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < 12; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

/// Duration-weighted pitch-class distribution of all non-drum notes.
inline std::array<double, 12> pitch_class_durations(const Score& score) {
  std::array<double, 12> dist{};
  for (const Instrument& inst : score.instruments) {
    if (inst.is_drum) continue;
    for (const Note& n : inst.notes) dist[n.pitch % 12] += static_cast<double>(n.duration_ticks());
  }
  return dist;
}

/// Global key by Krumhansl-Kessler profile correlation. Ties go to the lower
/// tonic, then major over minor.
inline Key detect_key(const Score& score) {
  const auto dist = pitch_class_durations(score);
  if (std::all_of(dist.begin(), dist.end(), [](double d) { return d == 0.0; })) {
    throw EmptyScore("key detection needs at least one non-drum note");
  }
  Key best = make_key(0, Mode::major);
  double best_r = -2.0;
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (Mode mode : {Mode::major, Mode::minor}) {
      const auto& profile = mode == Mode::major ? kKrumhanslMajor : kKrumhanslMinor;
      std::array<double, 12> rotated{};
      for (int pc = 0; pc < 12; ++pc) rotated[pc] = profile[detail::floor_mod(pc - tonic, 12)];
      const double r = pearson(dist, rotated);
      if (r > best_r + 1e-12) {
        best_r = r;
        best = make_key(tonic, mode);
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Degree-based transposition
// ---------------------------------------------------------------------------

namespace detail {

// Scale degree of a pitch class, plus its chromatic offset above the nearest
// lower diatonic degree (0 for diatonic pitches).
inline std::pair<int, int> degree_of(int pc, const std::array<int, 7>& scale) {
  for (int offset = 0; offset < 12; ++offset) {
    const int target = floor_mod(pc - offset, 12);
    for (int d = 0; d < 7; ++d) {
      if (scale[d] == target) return {d, offset};
    }
  }
  return {0, 0};
}

// The pitch with class `pc` closest to `reference`; ties go in `direction`
// (downward when direction <= 0). Result stays within 0..127.
inline int nearest_pitch(int pc, int reference, int direction) {
  const int below = reference - floor_mod(reference - pc, 12);
  const int above = below == reference ? reference : below + 12;
  int pitch;
  if (reference - below < above - reference) {
    pitch = below;
  } else if (above - reference < reference - below) {
    pitch = above;
  } else {
    pitch = direction > 0 ? above : below;
  }
  while (pitch < 0) pitch += 12;
  while (pitch > 127) pitch -= 12;
  return pitch;
}

}  // namespace detail

/// Moves every non-drum note's scale degree in `source` by the offset of its
/// bar in `degree_offsets` (last entry repeats; empty means all zero) and
/// realizes it in `target` at the octave nearest the original pitch.
inline Score transpose_by_degrees(const Score& score, const Key& source, const Key& target,
                                  const std::vector<int>& degree_offsets) {
  const auto src_scale = scale_pitch_classes(source);
  const auto dst_scale = scale_pitch_classes(target);

  std::size_t total = 0, chromatic = 0;
  for (const Instrument& inst : score.instruments) {
    if (inst.is_drum) continue;
    for (const Note& n : inst.notes) {
      ++total;
      if (detail::degree_of(n.pitch % 12, src_scale).second != 0) ++chromatic;
    }
  }
  if (2 * chromatic > total) {
    throw KeyMismatch(std::to_string(chromatic) + " of " + std::to_string(total) +
                      " notes are outside " + key_to_string(source));
  }

  Score out = group_notes_into_bars(score);
  for (Instrument& inst : out.instruments) {
    if (inst.is_drum) continue;
    std::vector<int> bar_of(inst.notes.size(), 0);
    for (const Bar& bar : inst.bars) {
      for (std::size_t ref : bar.note_refs) bar_of[ref] = bar.index;
    }
    for (std::size_t i = 0; i < inst.notes.size(); ++i) {
      Note& n = inst.notes[i];
      int shift = 0;
      if (!degree_offsets.empty()) {
        shift = degree_offsets[std::min<std::size_t>(bar_of[i], degree_offsets.size() - 1)];
      }
      const auto [degree, offset] = detail::degree_of(n.pitch % 12, src_scale);
      const int new_pc = (dst_scale[detail::floor_mod(degree + shift, 7)] + offset) % 12;
      n.pitch = detail::nearest_pitch(new_pc, n.pitch, shift);
      n.pitch_name = pitch_to_name(n.pitch);
    }
  }
  return out;
}

}  // namespace notemesh
