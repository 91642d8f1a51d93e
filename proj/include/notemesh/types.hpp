#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace notemesh {

using Tick = std::int64_t;

inline constexpr int kDefaultTpqn = 96;
inline constexpr double kDefaultBpm = 120.0;

struct TimeSignature {
  int numerator = 4;
  int denominator = 4;

  friend bool operator==(const TimeSignature&, const TimeSignature&) = default;
};

struct TempoEvent {
  Tick tick = 0;
  double bpm = kDefaultBpm;

  friend bool operator==(const TempoEvent&, const TempoEvent&) = default;
};

struct TimeSignatureEvent {
  Tick tick = 0;
  TimeSignature time_sig;

  friend bool operator==(const TimeSignatureEvent&, const TimeSignatureEvent&) = default;
};

using TempoMap = std::vector<TempoEvent>;
using TimeSignatureMap = std::vector<TimeSignatureEvent>;

struct Note {
  int pitch = 60;
  Tick start_ticks = 0;
  Tick end_ticks = 1;
  double start_sec = 0.0;
  double end_sec = 0.0;
  int velocity = 100;
  std::string pitch_name;
  bool is_drum = false;

  Tick duration_ticks() const { return end_ticks - start_ticks; }

  friend bool operator==(const Note&, const Note&) = default;
};

// A measure of one instrument. note_refs index into Instrument::notes.
struct Bar {
  int index = 0;
  TimeSignature time_sig;
  Tick start_ticks = 0;
  Tick end_ticks = 0;
  std::vector<std::size_t> note_refs;

  friend bool operator==(const Bar&, const Bar&) = default;
};

struct Instrument {
  int program = 0;
  std::string name;
  bool is_drum = false;
  std::vector<Note> notes;
  // Derived by group_notes_into_bars; not part of equality or serialization.
  std::vector<Bar> bars;

  friend bool operator==(const Instrument& a, const Instrument& b) {
    return a.program == b.program && a.name == b.name && a.is_drum == b.is_drum &&
           a.notes == b.notes;
  }
};

struct Score {
  int tpqn = kDefaultTpqn;
  TempoMap tempo_map{TempoEvent{0, kDefaultBpm}};
  TimeSignatureMap time_sig_map{TimeSignatureEvent{0, TimeSignature{4, 4}}};
  std::vector<Instrument> instruments;

  friend bool operator==(const Score&, const Score&) = default;
};

}  // namespace notemesh
