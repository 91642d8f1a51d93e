#pragma once

#include <algorithm>
#include <charconv>
#include <deque>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/score.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

// MMM-style bar-bracketed encoding.
//
//   piece := "PIECE_START" track*
//   track := "TRACK_START" inst bar+ "TRACK_END"
//   inst  := "INST=" int | "DRUMS"
//   bar   := "BAR_START" event* "BAR_END"
//   event := "NOTE_ON=" int | "NOTE_OFF=" int | "TIME_DELTA=" int
//
// Times are in units of 1/time_unit_per_quarter of a quarter note. Within a
// bar, TIME_DELTA values sum to the bar length; a NOTE_OFF landing exactly on
// a barline is emitted at the end of the bar it closes.

struct TokenizerConfig {
  int time_unit_per_quarter = 24;
  int max_time_delta = 96;
  int program_min = 0;
  int program_max = 127;
  bool drum_tokens = true;

  friend bool operator==(const TokenizerConfig&, const TokenizerConfig&) = default;
};

struct TokenSeq {
  std::vector<std::string> tokens;
  TokenizerConfig config;

  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

inline constexpr int kDetokenizedVelocity = 96;

struct Token {
  enum class Type {
    piece_start,
    track_start,
    track_end,
    bar_start,
    bar_end,
    inst,
    drums,
    note_on,
    note_off,
    time_delta
  };

  Type type = Type::piece_start;
  int value = 0;
};

inline std::string token_text(const Token& t) {
  switch (t.type) {
    case Token::Type::piece_start: return "PIECE_START";
    case Token::Type::track_start: return "TRACK_START";
    case Token::Type::track_end: return "TRACK_END";
    case Token::Type::bar_start: return "BAR_START";
    case Token::Type::bar_end: return "BAR_END";
    case Token::Type::drums: return "DRUMS";
    case Token::Type::inst: return "INST=" + std::to_string(t.value);
    case Token::Type::note_on: return "NOTE_ON=" + std::to_string(t.value);
    case Token::Type::note_off: return "NOTE_OFF=" + std::to_string(t.value);
    case Token::Type::time_delta: return "TIME_DELTA=" + std::to_string(t.value);
  }
  return {};
}

/// Parses one token; nullopt if it is not in the vocabulary of `config`.
inline std::optional<Token> parse_token(std::string_view text, const TokenizerConfig& config) {
  using T = Token::Type;
  static const std::map<std::string_view, T> kStructural = {
      {"PIECE_START", T::piece_start}, {"TRACK_START", T::track_start},
      {"TRACK_END", T::track_end},     {"BAR_START", T::bar_start},
      {"BAR_END", T::bar_end}};
  if (auto it = kStructural.find(text); it != kStructural.end()) return Token{it->second, 0};
  if (text == "DRUMS") {
    return config.drum_tokens ? std::optional<Token>(Token{T::drums, 0}) : std::nullopt;
  }

  const auto eq = text.find('=');
  if (eq == std::string_view::npos) return std::nullopt;
  const std::string_view head = text.substr(0, eq);
  const std::string_view digits = text.substr(eq + 1);
  if (digits.empty() || (digits.size() > 1 && digits[0] == '0')) return std::nullopt;
  int value = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::nullopt;

  if (head == "INST" && value >= config.program_min && value <= config.program_max) {
    return Token{T::inst, value};
  }
  if (head == "NOTE_ON" && value <= 127) return Token{T::note_on, value};
  if (head == "NOTE_OFF" && value <= 127) return Token{T::note_off, value};
  if (head == "TIME_DELTA" && value >= 1 && value <= config.max_time_delta) {
    return Token{T::time_delta, value};
  }
  return std::nullopt;
}

/// Canonical vocabulary: structural tokens, INST=*, DRUMS, NOTE_ON=*,
/// NOTE_OFF=*, TIME_DELTA=1..max_time_delta.
inline std::vector<std::string> vocabulary(const TokenizerConfig& config) {
  std::vector<std::string> v = {"PIECE_START", "TRACK_START", "TRACK_END", "BAR_START", "BAR_END"};
  for (int p = config.program_min; p <= config.program_max; ++p) v.push_back("INST=" + std::to_string(p));
  if (config.drum_tokens) v.emplace_back("DRUMS");
  for (int p = 0; p < 128; ++p) v.push_back("NOTE_ON=" + std::to_string(p));
  for (int p = 0; p < 128; ++p) v.push_back("NOTE_OFF=" + std::to_string(p));
  for (int d = 1; d <= config.max_time_delta; ++d) v.push_back("TIME_DELTA=" + std::to_string(d));
  return v;
}

/// Nearest time unit with ties toward the earlier unit.
inline Tick resample_ticks(Tick tick, int from_tpqn, int to_units) {
  const Tick scaled = tick * to_units;
  const Tick base = scaled / from_tpqn;
  const Tick rem = scaled % from_tpqn;
  return 2 * rem > from_tpqn ? base + 1 : base;
}

/// Copy of `score` moved onto the token time grid: tpqn becomes the token
/// resolution and every note keeps at least one unit of duration.
inline Score resample_to_grid(const Score& score, int units_per_quarter) {
  Score out;
  out.tpqn = units_per_quarter;
  out.tempo_map.clear();
  for (const TempoEvent& t : score.tempo_map) {
    const TempoEvent ev{resample_ticks(t.tick, score.tpqn, units_per_quarter), t.bpm};
    if (!out.tempo_map.empty() && out.tempo_map.back().tick == ev.tick) {
      out.tempo_map.back() = ev;
    } else {
      out.tempo_map.push_back(ev);
    }
  }
  if (out.tempo_map.empty()) out.tempo_map.push_back(TempoEvent{});
  out.time_sig_map.clear();
  for (const TimeSignatureEvent& t : score.time_sig_map) {
    const TimeSignatureEvent ev{resample_ticks(t.tick, score.tpqn, units_per_quarter), t.time_sig};
    if (!out.time_sig_map.empty() && out.time_sig_map.back().tick == ev.tick) {
      out.time_sig_map.back() = ev;
    } else {
      out.time_sig_map.push_back(ev);
    }
  }
  if (out.time_sig_map.empty()) out.time_sig_map.push_back(TimeSignatureEvent{});
  for (const Instrument& inst : score.instruments) {
    Instrument copy = inst;
    copy.bars.clear();
    for (Note& n : copy.notes) {
      n.start_ticks = resample_ticks(n.start_ticks, score.tpqn, units_per_quarter);
      n.end_ticks = std::max(resample_ticks(n.end_ticks, score.tpqn, units_per_quarter),
                             n.start_ticks + 1);
    }
    sort_notes(copy.notes);
    out.instruments.push_back(std::move(copy));
  }
  refresh_seconds(out);
  return group_notes_into_bars(out);
}

namespace detail {

struct TimedNoteEvent {
  Tick time = 0;
  bool on = false;
  int pitch = 0;
};

inline void emit_deltas(std::vector<std::string>& out, Tick gap, int max_delta) {
  while (gap > 0) {
    const Tick d = std::min<Tick>(gap, max_delta);
    out.push_back("TIME_DELTA=" + std::to_string(d));
    gap -= d;
  }
}

}  // namespace detail

inline TokenSeq tokenize(const Score& score, const TokenizerConfig& config = {}) {
  if (score.instruments.empty()) throw EmptyScore("cannot tokenize a score without instruments");
  const Score grid = resample_to_grid(score, config.time_unit_per_quarter);
  const auto bars = bar_spans_covering(grid.time_sig_map, grid.tpqn,
                                       std::max<Tick>(1, last_note_end(grid)));

  TokenSeq seq{{"PIECE_START"}, config};
  auto& out = seq.tokens;
  for (const Instrument& inst : grid.instruments) {
    out.emplace_back("TRACK_START");
    if (inst.is_drum && config.drum_tokens) {
      out.emplace_back("DRUMS");
    } else {
      out.push_back("INST=" + std::to_string(std::clamp(inst.program, config.program_min,
                                                         config.program_max)));
    }

    std::vector<detail::TimedNoteEvent> ons, offs;
    for (const Note& n : inst.notes) {
      ons.push_back({n.start_ticks, true, n.pitch});
      offs.push_back({n.end_ticks, false, n.pitch});
    }
    const auto by_time = [](const auto& a, const auto& b) {
      return std::tie(a.time, a.pitch) < std::tie(b.time, b.pitch);
    };
    std::sort(ons.begin(), ons.end(), by_time);
    std::sort(offs.begin(), offs.end(), by_time);

    std::size_t on_i = 0, off_i = 0;
    for (const BarSpan& bar : bars) {
      out.emplace_back("BAR_START");
      Tick cursor = bar.start_ticks;
      // Offs in (start, end], ons in [start, end); offs first at equal times.
      while (true) {
        const bool has_off = off_i < offs.size() && offs[off_i].time <= bar.end_ticks;
        const bool has_on = on_i < ons.size() && ons[on_i].time < bar.end_ticks;
        if (!has_off && !has_on) break;
        const bool take_off = has_off && (!has_on || offs[off_i].time <= ons[on_i].time);
        const auto& ev = take_off ? offs[off_i++] : ons[on_i++];
        detail::emit_deltas(out, ev.time - cursor, config.max_time_delta);
        cursor = std::max(cursor, ev.time);
        out.push_back((ev.on ? "NOTE_ON=" : "NOTE_OFF=") + std::to_string(ev.pitch));
      }
      detail::emit_deltas(out, bar.end_ticks - cursor, config.max_time_delta);
      out.emplace_back("BAR_END");
    }
    out.emplace_back("TRACK_END");
  }
  return seq;
}

namespace detail {

// Smallest standard signature whose bar spans `length` time units.
inline std::optional<TimeSignature> signature_for_length(Tick length, int units_per_quarter) {
  if (length <= 0) return std::nullopt;
  for (int d : {4, 8, 16, 32, 2, 1}) {
    const Tick whole = static_cast<Tick>(units_per_quarter) * 4;
    if ((length * d) % whole == 0) {
      const Tick n = length * d / whole;
      if (n >= 1 && n <= 255) return TimeSignature{static_cast<int>(n), d};
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Rebuilds a score on the token grid: tpqn = time_unit_per_quarter, default
/// tempo, velocity 96. Time signatures are inferred from the first track's
/// bar lengths.
inline Score detokenize(const TokenSeq& seq) {
  using T = Token::Type;
  const auto& cfg = seq.config;
  std::vector<Token> toks;
  toks.reserve(seq.tokens.size());
  for (const std::string& text : seq.tokens) {
    auto t = parse_token(text, cfg);
    if (!t) throw UnknownToken(text);
    toks.push_back(*t);
  }

  Score score;
  score.tpqn = cfg.time_unit_per_quarter;
  std::size_t i = 0;
  const auto expect_more = [&](const char* what) {
    if (i >= toks.size()) throw GrammarError(i, std::string("unexpected end, expected ") + what);
  };
  expect_more("PIECE_START");
  if (toks[i].type != T::piece_start) throw GrammarError(i, "expected PIECE_START");
  ++i;

  std::vector<Tick> first_track_bars;
  while (i < toks.size()) {
    if (toks[i].type != T::track_start) throw GrammarError(i, "expected TRACK_START");
    ++i;
    expect_more("INST or DRUMS");
    Instrument inst;
    if (toks[i].type == T::inst) {
      inst.program = toks[i].value;
    } else if (toks[i].type == T::drums) {
      inst.is_drum = true;
    } else {
      throw GrammarError(i, "expected INST or DRUMS");
    }
    ++i;

    std::map<int, std::deque<Tick>> open;  // FIFO per pitch
    std::vector<Tick> bar_lengths;
    Tick now = 0;
    while (true) {
      expect_more("BAR_START or TRACK_END");
      if (toks[i].type == T::track_end) {
        if (bar_lengths.empty()) throw GrammarError(i, "track has no bars");
        ++i;
        break;
      }
      if (toks[i].type != T::bar_start) throw GrammarError(i, "expected BAR_START or TRACK_END");
      ++i;
      const Tick bar_start = now;
      while (true) {
        expect_more("BAR_END");
        const Token& t = toks[i];
        if (t.type == T::bar_end) {
          ++i;
          break;
        }
        switch (t.type) {
          case T::time_delta: now += t.value; break;
          case T::note_on: open[t.value].push_back(now); break;
          case T::note_off: {
            auto it = open.find(t.value);
            if (it == open.end() || it->second.empty()) {
              throw GrammarError(i, "NOTE_OFF=" + std::to_string(t.value) + " without NOTE_ON");
            }
            const Tick start = it->second.front();
            it->second.pop_front();
            if (now <= start) throw GrammarError(i, "zero-length note");
            Note n = make_note(t.value, start, now, kDetokenizedVelocity, inst.is_drum);
            inst.notes.push_back(std::move(n));
            break;
          }
          default: throw GrammarError(i, "unexpected " + token_text(t) + " inside bar");
        }
        ++i;
      }
      bar_lengths.push_back(now - bar_start);
    }
    for (const auto& [pitch, starts] : open) {
      if (!starts.empty()) {
        throw DanglingNoteError("NOTE_ON=" + std::to_string(pitch) + " never closed in track " +
                                std::to_string(score.instruments.size()));
      }
    }
    if (score.instruments.empty()) first_track_bars = bar_lengths;
    sort_notes(inst.notes);
    score.instruments.push_back(std::move(inst));
  }

  score.time_sig_map.clear();
  Tick at = 0;
  for (Tick len : first_track_bars) {
    if (auto ts = detail::signature_for_length(len, score.tpqn)) {
      if (score.time_sig_map.empty() || score.time_sig_map.back().time_sig != *ts) {
        score.time_sig_map.push_back(TimeSignatureEvent{at, *ts});
      }
    }
    at += len;
  }
  if (score.time_sig_map.empty() || score.time_sig_map.front().tick != 0) {
    score.time_sig_map.insert(score.time_sig_map.begin(), TimeSignatureEvent{});
  }
  refresh_seconds(score);
  return group_notes_into_bars(score);
}

inline std::string tokens_to_txt(const TokenSeq& seq) {
  std::string out;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (i) out += ' ';
    out += seq.tokens[i];
  }
  return out;
}

inline TokenSeq txt_to_tokens(std::string_view text, const TokenizerConfig& config = {}) {
  TokenSeq seq{{}, config};
  std::istringstream in{std::string(text)};
  std::string tok;
  while (in >> tok) {
    if (!parse_token(tok, config)) throw UnknownToken(tok);
    seq.tokens.push_back(tok);
  }
  return seq;
}

}  // namespace notemesh
