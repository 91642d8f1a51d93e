#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "test_support.hpp"

using namespace notemesh;
using namespace testsupport;

namespace {

Bytes header(int format, int tracks, int division) {
  return {'M', 'T', 'h', 'd', 0, 0, 0, 6, 0, static_cast<std::uint8_t>(format), 0,
          static_cast<std::uint8_t>(tracks), static_cast<std::uint8_t>(division >> 8),
          static_cast<std::uint8_t>(division)};
}

Bytes track(const Bytes& body) {
  Bytes out;
  out.reserve(8 + body.size());
  for (char c : {'M', 'T', 'r', 'k'}) out.push_back(static_cast<std::uint8_t>(c));
  for (int shift : {24, 16, 8, 0}) out.push_back(static_cast<std::uint8_t>(body.size() >> shift));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Bytes concat(std::initializer_list<Bytes> parts) {
  Bytes out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

Score parse(const Bytes& b) { return parse_midi(std::span<const std::uint8_t>(b)); }

}  // namespace

TEST(ParseMidi, NoTempoMetaDefaultsTo120) {
  const Score s = parse(concat({header(0, 1, 96), track({0x00, 0x90, 60, 100, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00})}));
  ASSERT_EQ(s.tempo_map.size(), 1u);
  EXPECT_EQ(s.tempo_map[0].tick, 0);
  EXPECT_DOUBLE_EQ(s.tempo_map[0].bpm, 120.0);
  ASSERT_EQ(s.instruments.size(), 1u);
  const Note& n = s.instruments[0].notes[0];
  EXPECT_EQ(n.pitch, 60);
  EXPECT_EQ(n.start_ticks, 0);
  EXPECT_EQ(n.end_ticks, 96);
  EXPECT_DOUBLE_EQ(n.end_sec, 0.5);
  EXPECT_EQ(n.pitch_name, "C4");
}

TEST(ParseMidi, Format0WithoutNotesGivesOneEmptyInstrument) {
  const Score s = parse(concat({header(0, 1, 96), track({0x00, 0xFF, 0x2F, 0x00})}));
  ASSERT_EQ(s.instruments.size(), 1u);
  EXPECT_TRUE(s.instruments[0].notes.empty());
}

TEST(ParseMidi, RunningStatusAndVelocityZeroOff) {
  // note-on C4, running-status note-on E4, then velocity-0 offs
  const Score s = parse(concat({header(0, 1, 96),
                                track({0x00, 0x90, 60, 90, 0x00, 64, 80, 0x60, 60, 0, 0x00, 64, 0, 0x00, 0xFF, 0x2F, 0x00})}));
  const auto& notes = s.instruments[0].notes;
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].pitch, 60);
  EXPECT_EQ(notes[1].pitch, 64);
  EXPECT_EQ(notes[1].velocity, 80);
  EXPECT_EQ(notes[0].end_ticks, 96);
  EXPECT_EQ(notes[1].end_ticks, 96);
}

TEST(ParseMidi, UnmatchedNoteClosedAtTrackEnd) {
  const Score s = parse(concat({header(0, 1, 96), track({0x00, 0x90, 60, 90, 0x83, 0x00, 0xFF, 0x2F, 0x00})}));
  ASSERT_EQ(s.instruments[0].notes.size(), 1u);
  EXPECT_EQ(s.instruments[0].notes[0].end_ticks, 384);
}

TEST(ParseMidi, RestruckPitchLastWins) {
  const Score s = parse(concat({header(0, 1, 96),
                                track({0x00, 0x90, 60, 90, 0x30, 0x90, 60, 90, 0x30, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00})}));
  const auto& notes = s.instruments[0].notes;
  ASSERT_EQ(notes.size(), 2u);
  EXPECT_EQ(notes[0].end_ticks, 48);
  EXPECT_EQ(notes[1].start_ticks, 48);
  EXPECT_EQ(notes[1].end_ticks, 96);
}

TEST(ParseMidi, Channel10IsDrums) {
  const Score s = parse(concat({header(0, 1, 96),
                                track({0x00, 0x99, 36, 100, 0x18, 0x89, 36, 0, 0x00, 0x90, 60, 90, 0x18, 0x80, 60, 0,
                                       0x00, 0xFF, 0x2F, 0x00})}));
  ASSERT_EQ(s.instruments.size(), 2u);
  EXPECT_FALSE(s.instruments[0].is_drum);
  EXPECT_TRUE(s.instruments[1].is_drum);
  EXPECT_TRUE(s.instruments[1].notes[0].is_drum);
}

TEST(ParseMidi, TempoAndTimeSignature) {
  const Score s = parse(concat({header(0, 1, 96),
                                track({0x00, 0xFF, 0x51, 0x03, 0x0F, 0x42, 0x40,               // 60 bpm
                                       0x00, 0xFF, 0x58, 0x04, 6, 3, 24, 8,                    // 6/8
                                       0x83, 0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20,         // 120 bpm at 384
                                       0x00, 0xFF, 0x2F, 0x00})}));
  ASSERT_EQ(s.tempo_map.size(), 2u);
  EXPECT_DOUBLE_EQ(s.tempo_map[0].bpm, 60.0);
  EXPECT_EQ(s.tempo_map[1].tick, 384);
  EXPECT_DOUBLE_EQ(s.tempo_map[1].bpm, 120.0);
  EXPECT_EQ(s.time_sig_map[0].time_sig, (TimeSignature{6, 8}));
}

TEST(ParseMidi, Errors) {
  EXPECT_THROW(parse(Bytes{'R', 'I', 'F', 'F'}), FormatError);
  EXPECT_THROW(parse(concat({header(0, 1, 96), Bytes{'M', 'T', 'r', 'k', 0, 0, 0, 50, 0x00}})), FormatError);
  EXPECT_THROW(parse(concat({header(0, 1, 96), track({0x81, 0x81, 0x81, 0x81, 0x01, 0x90, 60, 90})})), FormatError);
  EXPECT_THROW(parse(concat({header(0, 1, 0xE728), track({0x00, 0xFF, 0x2F, 0x00})})), FormatError);
  EXPECT_THROW(parse(concat({header(0, 1, 96), track({0x00, 60, 90, 0x00, 0xFF, 0x2F, 0x00})})), FormatError);
  EXPECT_THROW(parse(concat({header(0, 1, 96), track({0x00, 0x90, 60})})), FormatError);
}

TEST(ParseMidi, SmpteMessageIsClear) {
  try {
    parse(concat({header(0, 1, 0xE728), track({0x00, 0xFF, 0x2F, 0x00})}));
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("SMPTE"), std::string::npos);
  }
}

TEST(WriteMidi, EmptyScoreParses) {
  const Score back = parse(write_midi(Score{}));
  EXPECT_TRUE(same_serialized_fields(back, Score{}));
}

TEST(WriteMidi, SingleNoteRoundTrip) {
  const Score s = single_track({make_note(60, 0, 96, 100)});
  const Score back = parse(write_midi(s));
  ASSERT_EQ(back.instruments.size(), 1u);
  ASSERT_EQ(back.instruments[0].notes.size(), 1u);
  EXPECT_EQ(back.instruments[0].notes[0], s.instruments[0].notes[0]);
}

TEST(WriteMidi, TempoChangePreserved) {
  Score s = single_track({make_note(60, 0, 96)});
  s.tempo_map = {{0, 120.0}, {384, 60.0}};
  const Score back = parse(write_midi(s));
  ASSERT_EQ(back.tempo_map.size(), 2u);
  EXPECT_EQ(back.tempo_map[1].tick, 384);
  EXPECT_DOUBLE_EQ(back.tempo_map[1].bpm, 60.0);
}

// Walks raw track bytes and checks every VLQ (deltas and meta lengths) is
// minimal, i.e. never starts with a 0x80 byte.
bool track_vlqs_minimal(const Bytes& b, std::size_t pos, std::size_t end) {
  auto vlq = [&](std::uint32_t& v) {
    if (b[pos] == 0x80) return false;
    v = 0;
    while (b[pos] & 0x80) v = (v << 7) | (b[pos++] & 0x7F);
    v = (v << 7) | b[pos++];
    return true;
  };
  std::uint8_t running = 0;
  std::uint32_t v = 0;
  while (pos < end) {
    if (!vlq(v)) return false;
    std::uint8_t status = b[pos];
    if (status & 0x80) {
      ++pos;
    } else {
      status = running;
    }
    if (status == 0xFF) {
      ++pos;
      if (!vlq(v)) return false;
      pos += v;
    } else if (status == 0xF0 || status == 0xF7) {
      if (!vlq(v)) return false;
      pos += v;
    } else {
      running = status;
      pos += ((status & 0xF0) == 0xC0 || (status & 0xF0) == 0xD0) ? 1 : 2;
    }
  }
  return pos == end;
}

TEST(WriteMidi, MinimalVlqs) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const Bytes b = write_midi(random_midi_score(rng));
    ASSERT_EQ(b[9], 1);  // format 1
    std::size_t pos = 14;
    while (pos + 8 <= b.size()) {
      const std::size_t len = (std::size_t{b[pos + 4]} << 24) | (std::size_t{b[pos + 5]} << 16) |
                              (std::size_t{b[pos + 6]} << 8) | b[pos + 7];
      EXPECT_TRUE(track_vlqs_minimal(b, pos + 8, pos + 8 + len));
      pos += 8 + len;
    }
    EXPECT_EQ(pos, b.size());
  }
}

TEST(WriteMidi, LongDeltaUsesFourBytes) {
  const Score s = single_track({make_note(60, 0x200000, 0x200000 + 1)});
  const Score back = parse(write_midi(s));
  EXPECT_EQ(back.instruments[0].notes[0].start_ticks, 0x200000);
}

TEST(MidiRoundTrip, RandomScores) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const Score s = random_midi_score(rng);
    const Bytes b = write_midi(s);
    const Score back = parse(b);
    ASSERT_TRUE(same_serialized_fields(s, back)) << "trial " << trial;
    const Score again = parse(write_midi(back));
    EXPECT_EQ(write_midi(again), write_midi(back));
  }
}

TEST(Vlq, EncodesAndDecodes) {
  for (std::uint32_t v : {0u, 0x40u, 0x7Fu, 0x80u, 0x2000u, 0x3FFFu, 0x4000u, 0x100000u, 0x1FFFFFu, 0x200000u,
                          0x8000000u, 0x0FFFFFFFu}) {
    Bytes buf;
    detail::put_vlq(buf, v);
    const std::size_t expected = v < 0x80 ? 1 : v < 0x4000 ? 2 : v < 0x200000 ? 3 : 4;
    EXPECT_EQ(buf.size(), expected) << v;
    detail::ByteReader r(buf, "vlq");
    EXPECT_EQ(r.vlq(), v);
  }
  Bytes buf;
  EXPECT_THROW(detail::put_vlq(buf, 0x10000000u), RangeError);
}

// Expected shapes recorded by the fixture generator.
TEST(Corpus, ValidFilesMatchManifest) {
  const auto manifest = nlohmann::json::parse(read_text(fixtures_dir() / "manifest.json"));
  ASSERT_EQ(manifest.size(), 15u);
  for (auto it = manifest.begin(); it != manifest.end(); ++it) {
    SCOPED_TRACE(it.key());
    const Score s = load_midi_file((fixtures_dir() / it.key()).string());
    const auto& e = it.value();
    EXPECT_EQ(s.tpqn, e["tpqn"].get<int>());
    EXPECT_EQ(s.instruments.size(), e["instruments"].get<std::size_t>());
    std::size_t notes = 0, drums = 0;
    for (const auto& inst : s.instruments) {
      notes += inst.notes.size();
      drums += inst.is_drum;
      for (const auto& n : inst.notes) EXPECT_GT(n.end_ticks, n.start_ticks);
    }
    EXPECT_EQ(notes, e["notes"].get<std::size_t>());
    EXPECT_EQ(s.tempo_map.size(), e["tempo_events"].get<std::size_t>());
    if (e.contains("drum_instruments")) { EXPECT_EQ(drums, e["drum_instruments"].get<std::size_t>()); }

    const Score back = parse(write_midi(s));
    std::size_t back_notes = 0;
    for (const auto& inst : back.instruments) back_notes += inst.notes.size();
    EXPECT_EQ(back_notes, notes);
  }
}

TEST(Corpus, CorruptFilesRaiseFormatError) {
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(fixtures_dir() / "corrupt")) {
    SCOPED_TRACE(entry.path().string());
    ++count;
    try {
      load_midi_file(entry.path().string());
      ADD_FAILURE() << "parsed without error";
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(entry.path().filename().string()), std::string::npos);
    }
  }
  EXPECT_EQ(count, 5u);
}

TEST(Corpus, NamedTracksAndPrograms) {
  const Score s = load_midi_file((fixtures_dir() / "valid/a/03_format1_conductor.mid").string());
  ASSERT_EQ(s.instruments.size(), 2u);
  EXPECT_EQ(s.instruments[0].name, "Violin");
  EXPECT_EQ(s.instruments[0].program, 40);
  EXPECT_EQ(s.instruments[1].name, "Cello");
  EXPECT_EQ(s.instruments[1].program, 42);
  ASSERT_EQ(s.tempo_map.size(), 2u);
  EXPECT_DOUBLE_EQ(s.tempo_map[0].bpm, 60'000'000.0 / 666'667);
}
