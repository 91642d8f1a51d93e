#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

#include "notemesh/errors.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

inline constexpr std::array<const char*, 12> kSharpNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                            "F#", "G",  "G#", "A",  "A#", "B"};

/// Scientific pitch notation with sharps, C4 = 60.
inline std::string pitch_to_name(int pitch) {
  if (pitch < 0 || pitch > 127) {
    throw RangeError("pitch " + std::to_string(pitch) + " outside 0-127");
  }
  return std::string(kSharpNames[pitch % 12]) + std::to_string(pitch / 12 - 1);
}

/// Builds a note with its pitch name filled in; seconds are left at zero
/// until refresh_seconds runs against the owning score.
inline Note make_note(int pitch, Tick start, Tick end, int velocity = 100, bool is_drum = false) {
  Note n;
  n.pitch = pitch;
  n.start_ticks = start;
  n.end_ticks = end;
  n.velocity = velocity;
  n.pitch_name = pitch_to_name(pitch);
  n.is_drum = is_drum;
  return n;
}

// Canonical note order: onset, then pitch, end, velocity.
inline bool note_order(const Note& a, const Note& b) {
  return std::tie(a.start_ticks, a.pitch, a.end_ticks, a.velocity) <
         std::tie(b.start_ticks, b.pitch, b.end_ticks, b.velocity);
}

inline void sort_notes(std::vector<Note>& notes) {
  std::stable_sort(notes.begin(), notes.end(), note_order);
}

inline Tick last_note_end(const Instrument& inst) {
  Tick end = 0;
  for (const Note& n : inst.notes) end = std::max(end, n.end_ticks);
  return end;
}

inline Tick last_note_end(const Score& score) {
  Tick end = 0;
  for (const Instrument& inst : score.instruments) end = std::max(end, last_note_end(inst));
  return end;
}

/// Fills every instrument's bars so they tile [0, last note end) and assigns
/// each note to the bar containing its onset.
inline Score group_notes_into_bars(const Score& score) {
  Score out = score;
  for (Instrument& inst : out.instruments) {
    inst.bars.clear();
    const auto spans = bar_spans_covering(out.time_sig_map, out.tpqn, last_note_end(inst));
    inst.bars.reserve(spans.size());
    for (const BarSpan& s : spans) {
      inst.bars.push_back(Bar{s.index, s.time_sig, s.start_ticks, s.end_ticks, {}});
    }
    for (std::size_t i = 0; i < inst.notes.size(); ++i) {
      if (auto bar = bar_index_of(spans, inst.notes[i].start_ticks)) {
        inst.bars[*bar].note_refs.push_back(i);
      }
    }
  }
  return out;
}

inline Score quantize(const Score& score, Subdivision sub) {
  Score out = score;
  for (Instrument& inst : out.instruments) {
    inst.notes = quantize(inst.notes, sub, score.tpqn);
  }
  refresh_seconds(out);
  return group_notes_into_bars(out);
}

// ---------------------------------------------------------------------------
// JSON export
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json to_json_value(const Score& score) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["tpqn"] = score.tpqn;
  doc["tempo_map"] = ordered_json::array();
  for (const TempoEvent& t : score.tempo_map) {
    doc["tempo_map"].push_back(ordered_json{{"tick", t.tick}, {"bpm", t.bpm}});
  }
  doc["time_sig_map"] = ordered_json::array();
  for (const TimeSignatureEvent& t : score.time_sig_map) {
    doc["time_sig_map"].push_back(ordered_json{{"tick", t.tick},
                                               {"numerator", t.time_sig.numerator},
                                               {"denominator", t.time_sig.denominator}});
  }
  doc["instruments"] = ordered_json::array();
  for (const Instrument& inst : score.instruments) {
    ordered_json jinst;
    jinst["program"] = inst.program;
    jinst["name"] = inst.name;
    jinst["is_drum"] = inst.is_drum;
    jinst["notes"] = ordered_json::array();
    for (const Note& n : inst.notes) {
      jinst["notes"].push_back(ordered_json{{"pitch", n.pitch},
                                            {"start_ticks", n.start_ticks},
                                            {"end_ticks", n.end_ticks},
                                            {"start_sec", n.start_sec},
                                            {"end_sec", n.end_sec},
                                            {"velocity", n.velocity},
                                            {"pitch_name", n.pitch_name}});
    }
    doc["instruments"].push_back(std::move(jinst));
  }
  return doc;
}

inline std::string to_json(const Score& score, int indent = -1) {
  return to_json_value(score).dump(indent);
}

namespace detail {

class SchemaReader {
 public:
  const nlohmann::json& member(const nlohmann::json& obj, const std::string& path,
                               const char* key) const {
    if (!obj.is_object()) throw SchemaError(path, "expected object");
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(path + "/" + key, "missing");
    return *it;
  }

  std::int64_t integer(const nlohmann::json& obj, const std::string& path, const char* key,
                       std::int64_t lo, std::int64_t hi) const {
    const auto& v = member(obj, path, key);
    const std::string where = path + "/" + key;
    if (!v.is_number_integer()) throw SchemaError(where, "expected integer");
    const auto x = v.get<std::int64_t>();
    if (x < lo || x > hi) {
      throw SchemaError(where, "value " + std::to_string(x) + " out of range [" +
                                   std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return x;
  }

  double number(const nlohmann::json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_number()) throw SchemaError(path + "/" + key, "expected number");
    return v.get<double>();
  }

  std::string text(const nlohmann::json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_string()) throw SchemaError(path + "/" + key, "expected string");
    return v.get<std::string>();
  }

  bool boolean(const nlohmann::json& obj, const std::string& path, const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_boolean()) throw SchemaError(path + "/" + key, "expected boolean");
    return v.get<bool>();
  }

  const nlohmann::json& array(const nlohmann::json& obj, const std::string& path,
                              const char* key) const {
    const auto& v = member(obj, path, key);
    if (!v.is_array()) throw SchemaError(path + "/" + key, "expected array");
    return v;
  }
};

}  // namespace detail

/// Parses a document produced by to_json. Bars are rebuilt, not read.
inline Score from_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("", std::string("malformed JSON: ") + e.what());
  }
  constexpr std::int64_t kMaxTick = std::numeric_limits<std::int64_t>::max() / 4;
  detail::SchemaReader r;
  if (!doc.is_object()) throw SchemaError("", "expected object");

  Score score;
  score.tpqn = static_cast<int>(r.integer(doc, "", "tpqn", 1, 0x7FFF));

  score.tempo_map.clear();
  const auto& tempos = r.array(doc, "", "tempo_map");
  if (tempos.empty()) throw SchemaError("/tempo_map", "must not be empty");
  for (std::size_t i = 0; i < tempos.size(); ++i) {
    const std::string path = "/tempo_map/" + std::to_string(i);
    TempoEvent ev{r.integer(tempos[i], path, "tick", 0, kMaxTick), r.number(tempos[i], path, "bpm")};
    if (!(ev.bpm > 0.0)) throw SchemaError(path + "/bpm", "must be positive");
    if (i == 0 && ev.tick != 0) throw SchemaError(path + "/tick", "first event must be at tick 0");
    if (i > 0 && ev.tick <= score.tempo_map.back().tick) {
      throw SchemaError(path + "/tick", "ticks must be strictly increasing");
    }
    score.tempo_map.push_back(ev);
  }

  score.time_sig_map.clear();
  const auto& sigs = r.array(doc, "", "time_sig_map");
  if (sigs.empty()) throw SchemaError("/time_sig_map", "must not be empty");
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const std::string path = "/time_sig_map/" + std::to_string(i);
    TimeSignatureEvent ev;
    ev.tick = r.integer(sigs[i], path, "tick", 0, kMaxTick);
    ev.time_sig.numerator = static_cast<int>(r.integer(sigs[i], path, "numerator", 1, 255));
    ev.time_sig.denominator = static_cast<int>(r.integer(sigs[i], path, "denominator", 1, 32));
    if (!is_valid_denominator(ev.time_sig.denominator)) {
      throw SchemaError(path + "/denominator", "must be a power of two up to 32");
    }
    if (i == 0 && ev.tick != 0) throw SchemaError(path + "/tick", "first event must be at tick 0");
    if (i > 0 && ev.tick <= score.time_sig_map.back().tick) {
      throw SchemaError(path + "/tick", "ticks must be strictly increasing");
    }
    score.time_sig_map.push_back(ev);
  }

  const auto& insts = r.array(doc, "", "instruments");
  for (std::size_t i = 0; i < insts.size(); ++i) {
    const std::string path = "/instruments/" + std::to_string(i);
    Instrument inst;
    inst.program = static_cast<int>(r.integer(insts[i], path, "program", 0, 127));
    inst.name = r.text(insts[i], path, "name");
    inst.is_drum = r.boolean(insts[i], path, "is_drum");
    const auto& notes = r.array(insts[i], path, "notes");
    for (std::size_t k = 0; k < notes.size(); ++k) {
      const std::string npath = path + "/notes/" + std::to_string(k);
      Note n;
      n.pitch = static_cast<int>(r.integer(notes[k], npath, "pitch", 0, 127));
      n.start_ticks = r.integer(notes[k], npath, "start_ticks", 0, kMaxTick);
      n.end_ticks = r.integer(notes[k], npath, "end_ticks", 0, kMaxTick);
      n.start_sec = r.number(notes[k], npath, "start_sec");
      n.end_sec = r.number(notes[k], npath, "end_sec");
      n.velocity = static_cast<int>(r.integer(notes[k], npath, "velocity", 0, 127));
      n.pitch_name = r.text(notes[k], npath, "pitch_name");
      n.is_drum = inst.is_drum;
      if (n.end_ticks <= n.start_ticks) {
        throw SchemaError(npath, "end_ticks must exceed start_ticks");
      }
      if (n.start_sec < 0.0 || n.end_sec < n.start_sec) {
        throw SchemaError(npath, "invalid second timings");
      }
      if (n.pitch_name != pitch_to_name(n.pitch)) {
        throw SchemaError(npath + "/pitch_name", "does not match pitch");
      }
      inst.notes.push_back(std::move(n));
    }
    score.instruments.push_back(std::move(inst));
  }
  return group_notes_into_bars(score);
}

}  // namespace notemesh
