#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "notemesh/errors.hpp"
#include "notemesh/rhythm.hpp"
#include "notemesh/score.hpp"
#include "notemesh/types.hpp"

namespace notemesh {

using Bytes = std::vector<std::uint8_t>;

inline constexpr int kDrumChannel = 9;

// Decoded track event, the intermediate between raw bytes and the Score.
struct RawEvent {
  enum class Kind { note_on, note_off, tempo, time_signature, program_change, other };

  Tick delta_ticks = 0;
  Kind kind = Kind::other;
  std::vector<std::uint8_t> payload;
};

namespace detail {

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  bool done() const { return pos_ >= data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint8_t peek() {
    need(1);
    return data_[pos_];
  }

  std::uint16_t u16() {
    need(2);
    const auto v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
  }

  // At most four bytes; a continuation bit on the fourth byte is invalid.
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw FormatError(context_ + ": invalid variable-length quantity at byte " +
                      std::to_string(pos_ - 4));
  }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(context_ + ": truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> data_;
  std::string context_;
  std::size_t pos_ = 0;
};

struct OpenNote {
  Tick start = 0;
  int velocity = 0;
};

struct ChannelNote {
  int channel = 0;
  Note note;
};

struct TrackData {
  std::string name;
  std::vector<ChannelNote> notes;
  std::array<std::optional<int>, 16> program{};
  std::optional<int> first_channel;
  TempoMap tempos;
  TimeSignatureMap time_sigs;
};

inline int data_bytes_for(std::uint8_t status) {
  switch (status & 0xF0) {
    case 0xC0:
    case 0xD0: return 1;
    default: return 2;
  }
}

inline void close_note(TrackData& track, int channel, int pitch, const OpenNote& open, Tick end) {
  // Zero-length notes are widened to one tick so every note has a duration.
  Note n = make_note(pitch, open.start, std::max(end, open.start + 1), open.velocity,
                     channel == kDrumChannel);
  track.notes.push_back(ChannelNote{channel, std::move(n)});
}

// Splits one MTrk body into timed events. Channel-message payloads start
// with the channel number; "other" events keep their status byte first.
inline std::vector<RawEvent> decode_track(std::span<const std::uint8_t> chunk, int track_index) {
  const std::string where = "track " + std::to_string(track_index);
  ByteReader in(chunk, where);
  std::vector<RawEvent> events;
  std::uint8_t running = 0;

  while (!in.done()) {
    RawEvent ev;
    ev.delta_ticks = in.vlq();
    std::uint8_t status = in.peek();
    if (status & 0x80) {
      in.u8();
    } else if (running != 0) {
      status = running;
    } else {
      throw FormatError(where + ": data byte without running status at byte " +
                        std::to_string(in.position()));
    }

    if (status == 0xFF) {
      running = 0;
      const std::uint8_t type = in.u8();
      const auto data = in.take(in.vlq());
      if (type == 0x51 && data.size() >= 3) {
        ev.kind = RawEvent::Kind::tempo;
        ev.payload.assign(data.begin(), data.begin() + 3);
      } else if (type == 0x58 && data.size() >= 2) {
        ev.kind = RawEvent::Kind::time_signature;
        ev.payload.assign(data.begin(), data.end());
      } else {
        ev.payload = {0xFF, type};
        ev.payload.insert(ev.payload.end(), data.begin(), data.end());
      }
      events.push_back(std::move(ev));
      if (type == 0x2F) break;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      running = 0;
      in.take(in.vlq());
      ev.payload = {status};
      events.push_back(std::move(ev));
      continue;
    }
    if (status > 0xF0) {
      throw FormatError(where + ": unexpected status byte " + std::to_string(status));
    }

    running = status;
    const auto channel = static_cast<std::uint8_t>(status & 0x0F);
    const std::uint8_t d1 = in.u8();
    const std::uint8_t d2 = data_bytes_for(status) == 2 ? in.u8() : 0;
    if ((d1 | d2) & 0x80) throw FormatError(where + ": data byte out of range");

    switch (status & 0xF0) {
      case 0x90:
        ev.kind = d2 > 0 ? RawEvent::Kind::note_on : RawEvent::Kind::note_off;
        ev.payload = {channel, d1, d2};
        break;
      case 0x80:
        ev.kind = RawEvent::Kind::note_off;
        ev.payload = {channel, d1, d2};
        break;
      case 0xC0:
        ev.kind = RawEvent::Kind::program_change;
        ev.payload = {channel, d1};
        break;
      default:
        ev.payload = {status, d1, d2};
        break;
    }
    events.push_back(std::move(ev));
  }
  return events;
}

inline TrackData read_track(std::span<const std::uint8_t> chunk, int track_index) {
  TrackData track;
  std::map<std::pair<int, int>, OpenNote> open;
  Tick now = 0;

  for (const RawEvent& ev : decode_track(chunk, track_index)) {
    now += ev.delta_ticks;
    const auto& p = ev.payload;
    switch (ev.kind) {
      case RawEvent::Kind::note_on: {
        track.first_channel = track.first_channel.value_or(p[0]);
        const auto key = std::make_pair(int{p[0]}, int{p[1]});
        if (auto it = open.find(key); it != open.end()) {
          // Re-struck pitch: the previous note ends here.
          close_note(track, p[0], p[1], it->second, now);
          open.erase(it);
        }
        open.emplace(key, OpenNote{now, p[2]});
        break;
      }
      case RawEvent::Kind::note_off: {
        track.first_channel = track.first_channel.value_or(p[0]);
        if (auto it = open.find({p[0], p[1]}); it != open.end()) {
          close_note(track, p[0], p[1], it->second, now);
          open.erase(it);
        }
        break;
      }
      case RawEvent::Kind::program_change:
        track.first_channel = track.first_channel.value_or(p[0]);
        if (!track.program[p[0]]) track.program[p[0]] = p[1];
        break;
      case RawEvent::Kind::tempo: {
        const std::uint32_t us = (p[0] << 16) | (p[1] << 8) | p[2];
        if (us > 0) track.tempos.push_back(TempoEvent{now, 60'000'000.0 / us});
        break;
      }
      case RawEvent::Kind::time_signature:
        if (p[0] == 0 || p[1] > 5) {
          throw FormatError("track " + std::to_string(track_index) +
                            ": unsupported time signature " + std::to_string(p[0]) + "/2^" +
                            std::to_string(p[1]));
        }
        track.time_sigs.push_back(TimeSignatureEvent{now, TimeSignature{p[0], 1 << p[1]}});
        break;
      case RawEvent::Kind::other:
        if (p.size() >= 2 && p[0] == 0xFF && p[1] == 0x03 && track.name.empty()) {
          track.name.assign(p.begin() + 2, p.end());
        } else if (!p.empty() && p[0] < 0xF0) {
          track.first_channel = track.first_channel.value_or(p[0] & 0x0F);
        }
        break;
    }
  }

  for (const auto& [key, note] : open) close_note(track, key.first, key.second, note, now);
  return track;
}

template <typename Event>
std::vector<Event> merge_by_tick(std::vector<Event> events, Event at_zero) {
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return a.tick < b.tick; });
  std::vector<Event> out;
  for (const Event& e : events) {
    if (!out.empty() && out.back().tick == e.tick) {
      out.back() = e;  // last event at a tick wins
    } else {
      out.push_back(e);
    }
  }
  if (out.empty() || out.front().tick > 0) out.insert(out.begin(), at_zero);
  return out;
}

}  // namespace detail

/// Decodes a Standard MIDI File (formats 0, 1 and 2). Each (track, channel)
/// pair carrying notes becomes one instrument.
inline Score parse_midi(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes, "header");
  if (in.remaining() < 14 || in.u32() != 0x4D546864) {  // "MThd"
    throw FormatError("not a Standard MIDI File (missing MThd)");
  }
  const std::uint32_t header_len = in.u32();
  if (header_len < 6) throw FormatError("header chunk too short");
  if (header_len > in.remaining()) throw FormatError("truncated header chunk");
  const int format = in.u16();
  in.u16();  // declared track count; the chunks present are authoritative
  const std::uint16_t division = in.u16();
  in.take(header_len - 6);
  if (format > 2) throw FormatError("unsupported SMF format " + std::to_string(format));
  if (division & 0x8000) throw FormatError("SMPTE time division is not supported");
  if (division == 0) throw FormatError("division must be positive");

  std::vector<detail::TrackData> tracks;
  while (in.remaining() >= 8) {
    const std::uint32_t id = in.u32();
    const std::uint32_t len = in.u32();
    if (len > in.remaining()) {
      throw FormatError("truncated chunk: declares " + std::to_string(len) + " bytes, " +
                        std::to_string(in.remaining()) + " remain");
    }
    const auto body = in.take(len);
    if (id == 0x4D54726B) {  // "MTrk"
      tracks.push_back(detail::read_track(body, static_cast<int>(tracks.size())));
    }
  }

  Score score;
  score.tpqn = division;
  TempoMap tempos;
  TimeSignatureMap sigs;
  for (const auto& t : tracks) {
    tempos.insert(tempos.end(), t.tempos.begin(), t.tempos.end());
    sigs.insert(sigs.end(), t.time_sigs.begin(), t.time_sigs.end());
  }
  score.tempo_map = detail::merge_by_tick(std::move(tempos), TempoEvent{0, kDefaultBpm});
  score.time_sig_map =
      detail::merge_by_tick(std::move(sigs), TimeSignatureEvent{0, TimeSignature{4, 4}});

  for (const auto& t : tracks) {
    std::map<int, std::vector<Note>> by_channel;
    for (const auto& cn : t.notes) by_channel[cn.channel].push_back(cn.note);
    if (by_channel.empty()) {
      // A note-less track still counts when it carries channel messages or is
      // the only track of a format-0 file.
      if (t.first_channel) {
        by_channel[*t.first_channel];
      } else if (format == 0) {
        by_channel[0];
      }
    }
    for (auto& [channel, notes] : by_channel) {
      Instrument inst;
      inst.program = t.program[channel].value_or(0);
      inst.name = t.name;
      inst.is_drum = channel == kDrumChannel;
      inst.notes = std::move(notes);
      sort_notes(inst.notes);
      score.instruments.push_back(std::move(inst));
    }
  }
  refresh_seconds(score);
  return group_notes_into_bars(score);
}

namespace detail {

inline void put_u16(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_u32(Bytes& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

inline void put_vlq(Bytes& out, std::uint32_t v) {
  if (v > 0x0FFFFFFF) throw RangeError("delta time exceeds the 4-byte VLQ limit");
  std::uint8_t buf[4];
  int n = 0;
  do {
    buf[n++] = static_cast<std::uint8_t>(v & 0x7F);
    v >>= 7;
  } while (v != 0);
  while (n-- > 0) out.push_back(static_cast<std::uint8_t>(buf[n] | (n > 0 ? 0x80 : 0)));
}

struct TimedMessage {
  Tick tick = 0;
  int order = 0;  // same-tick priority: meta, program, note-off, note-on
  int pitch = 0;
  Bytes bytes;    // full message including status
};

inline Bytes encode_track(std::vector<TimedMessage> messages) {
  std::stable_sort(messages.begin(), messages.end(), [](const auto& a, const auto& b) {
    return std::tie(a.tick, a.order, a.pitch) < std::tie(b.tick, b.order, b.pitch);
  });
  Bytes body;
  Tick now = 0;
  std::uint8_t running = 0;
  for (const auto& m : messages) {
    put_vlq(body, static_cast<std::uint32_t>(m.tick - now));
    now = m.tick;
    const std::uint8_t status = m.bytes.front();
    const bool channel_msg = status < 0xF0;
    auto first = m.bytes.begin();
    if (channel_msg && status == running) ++first;
    body.insert(body.end(), first, m.bytes.end());
    running = channel_msg ? status : 0;
  }
  body.insert(body.end(), {0x00, 0xFF, 0x2F, 0x00});

  Bytes chunk{'M', 'T', 'r', 'k'};
  put_u32(chunk, static_cast<std::uint32_t>(body.size()));
  chunk.insert(chunk.end(), body.begin(), body.end());
  return chunk;
}

inline Bytes meta(std::uint8_t type, const Bytes& data) {
  Bytes out{0xFF, type};
  put_vlq(out, static_cast<std::uint32_t>(data.size()));
  out.insert(out.end(), data.begin(), data.end());
  return out;
}

}  // namespace detail

/// Encodes a score as a format-1 SMF: a conductor track with tempo and
/// time-signature events, then one track per instrument. Velocity 0 is
/// written as 1 since a zero-velocity note-on means note-off.
inline Bytes write_midi(const Score& score) {
  using detail::TimedMessage;
  Bytes out{'M', 'T', 'h', 'd'};
  detail::put_u32(out, 6);
  detail::put_u16(out, 1);
  detail::put_u16(out, static_cast<std::uint32_t>(score.instruments.size() + 1));
  detail::put_u16(out, static_cast<std::uint32_t>(score.tpqn) & 0x7FFF);

  std::vector<TimedMessage> conductor;
  for (const auto& ts : score.time_sig_map) {
    int exponent = 0;
    while ((1 << exponent) < ts.time_sig.denominator) ++exponent;
    conductor.push_back(TimedMessage{
        ts.tick, 0, 0,
        detail::meta(0x58, {static_cast<std::uint8_t>(ts.time_sig.numerator),
                            static_cast<std::uint8_t>(exponent), 24, 8})});
  }
  for (const auto& t : score.tempo_map) {
    const auto us = static_cast<std::uint32_t>(
        std::clamp<long long>(std::llround(60'000'000.0 / t.bpm), 1, 0xFFFFFF));
    conductor.push_back(TimedMessage{
        t.tick, 1, 0,
        detail::meta(0x51, {static_cast<std::uint8_t>(us >> 16), static_cast<std::uint8_t>(us >> 8),
                            static_cast<std::uint8_t>(us)})});
  }
  const Bytes track0 = detail::encode_track(std::move(conductor));
  out.insert(out.end(), track0.begin(), track0.end());

  int melodic = 0;
  for (const Instrument& inst : score.instruments) {
    int channel = kDrumChannel;
    if (!inst.is_drum) {
      channel = melodic % 15;
      if (channel >= kDrumChannel) ++channel;
      ++melodic;
    }
    std::vector<TimedMessage> msgs;
    if (!inst.name.empty()) {
      msgs.push_back(TimedMessage{0, 0, 0, detail::meta(0x03, Bytes(inst.name.begin(), inst.name.end()))});
    }
    msgs.push_back(TimedMessage{0, 1, 0,
                                {static_cast<std::uint8_t>(0xC0 | channel),
                                 static_cast<std::uint8_t>(inst.program & 0x7F)}});
    for (const Note& n : inst.notes) {
      const auto pitch = static_cast<std::uint8_t>(n.pitch & 0x7F);
      const auto velocity = static_cast<std::uint8_t>(std::clamp(n.velocity, 1, 127));
      msgs.push_back(TimedMessage{n.start_ticks, 3, n.pitch,
                                  {static_cast<std::uint8_t>(0x90 | channel), pitch, velocity}});
      msgs.push_back(TimedMessage{n.end_ticks, 2, n.pitch,
                                  {static_cast<std::uint8_t>(0x80 | channel), pitch, 0}});
    }
    const Bytes track = detail::encode_track(std::move(msgs));
    out.insert(out.end(), track.begin(), track.end());
  }
  return out;
}

inline Bytes read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline Score load_midi_file(const std::string& path) {
  const Bytes bytes = read_file_bytes(path);
  try {
    return parse_midi(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace notemesh
