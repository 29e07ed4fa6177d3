#include <doctest.h>

#include <cmath>
#include <algorithm>
#include <random>

#include "mtae/perf_codec.hpp"

using namespace mtae;
using namespace mtae::perf;

TEST_CASE("vocabulary layout") {
  CHECK(kCoreVocabSize == 128 + 128 + 100 + 32);
  CHECK(kVocabSize == 391);
  CHECK(note_on(0) == 0);
  CHECK(note_off(127) == 255);
  CHECK(time_shift(1) == 256);
  CHECK(time_shift(100) == 355);
  CHECK(velocity(0) == 356);
  CHECK(velocity(31) == 387);
}

TEST_CASE("velocity quantization") {
  CHECK(quantize_velocity(1) == 0);
  CHECK(quantize_velocity(127) == 31);
  CHECK(quantize_velocity(64) == 16);
  CHECK(quantize_velocity(80) == 20);
  CHECK_THROWS(quantize_velocity(0));
  CHECK_THROWS(quantize_velocity(128));
  for (int v = 2; v <= 127; ++v) CHECK(quantize_velocity(v) >= quantize_velocity(v - 1));
  for (int b = 0; b < kVelocityBins; ++b) CHECK(quantize_velocity(dequantize_velocity(b)) == b);
}

TEST_CASE("single note example") {
  const NoteSequence seq({{60, 80, 0.0, 0.5}});
  const TokenSeq expect{velocity(20), note_on(60), time_shift(50), note_off(60)};
  CHECK(encode(seq) == expect);
  const auto r = decode(expect);
  CHECK(r.sequence == seq);
  CHECK(r.dangling_closed == 0);
}

TEST_CASE("empty sequence") {
  CHECK(encode(NoteSequence()).empty());
  CHECK(decode({}).sequence.empty());
}

TEST_CASE("long gaps split into shifts of at most 1 s") {
  const NoteSequence seq({{60, 80, 0.0, 0.5}, {62, 80, 3.0, 3.5}});
  const TokenSeq expect{velocity(20),    note_on(60),     time_shift(50), note_off(60), time_shift(100),
                        time_shift(100), time_shift(50), note_on(62),    time_shift(50), note_off(62)};
  CHECK(encode(seq) == expect);
}

TEST_CASE("simultaneous events: offs first, then ascending pitch") {
  const NoteSequence seq({{64, 80, 0.0, 0.5}, {60, 80, 0.5, 1.0}, {55, 80, 0.5, 1.0}});
  const TokenSeq expect{velocity(20), note_on(64), time_shift(50), note_off(64), note_on(55),
                        note_on(60),  time_shift(50), note_off(55), note_off(60)};
  CHECK(encode(seq) == expect);
}

TEST_CASE("velocity token only when the bin changes") {
  const NoteSequence seq({{60, 80, 0.0, 0.1}, {61, 81, 0.1, 0.2}, {62, 100, 0.2, 0.3}});
  const auto t = encode(seq);
  int vel_tokens = 0;
  for (int tok : t) vel_tokens += tok >= kVelocityBase && tok < kPad;
  CHECK(vel_tokens == 2);
}

TEST_CASE("trailing silence up to total_seconds") {
  const NoteSequence seq({{60, 80, 0.0, 0.5}}, 1.0);
  const auto t = encode(seq);
  CHECK(t.back() == time_shift(50));
  CHECK(decode(t).sequence == seq);
}

TEST_CASE("repairs") {
  SUBCASE("dangling note-on") {
    const auto r = decode({note_on(60)});
    REQUIRE(r.sequence.size() == 1);
    CHECK(r.sequence.notes()[0] == Note{60, dequantize_velocity(kDefaultVelocityBin), 0.0, 0.01});
    CHECK(r.dangling_closed == 1);
  }
  SUBCASE("orphan note-off") {
    const auto r = decode({note_off(60)});
    CHECK(r.sequence.empty());
    CHECK(r.orphan_offs == 1);
  }
  SUBCASE("decoding stops at EOS, skips PAD and STOP, counts bad ids") {
    const auto r = decode({kPad, note_on(60), kStop, time_shift(10), note_off(60), 999, kEos, note_on(70)});
    CHECK(r.sequence.size() == 1);
    CHECK(r.invalid_tokens == 1);
  }
  SUBCASE("re-onset closes the earlier note") {
    const auto r = decode({note_on(60), time_shift(10), note_on(60), time_shift(10), note_off(60)});
    REQUIRE(r.sequence.size() == 2);
    CHECK(r.sequence.notes()[0].offset == doctest::Approx(0.1));
  }
}

namespace {

// Grid-aligned random sequence: times are whole 10 ms steps and velocities
// are bin representatives, so the codec is exactly invertible.
NoteSequence random_grid_sequence(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n(0, 30), p(0, 127), bin(0, 31), on(0, 1500), dur(1, 300);
  std::vector<Note> notes;
  const int count = n(rng);
  for (int i = 0; i < count; ++i) {
    const int o = on(rng);
    notes.push_back({p(rng), dequantize_velocity(bin(rng)), o / 100.0, (o + dur(rng)) / 100.0});
  }
  return NoteSequence(notes);
}

}  // namespace

TEST_CASE("round trip on random grid-aligned sequences") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto seq = random_grid_sequence(rng);
    const auto tokens = encode(seq);
    for (int t : tokens) {
      CHECK(t >= 0);
      CHECK(t < kCoreVocabSize);
    }
    const auto back = decode(tokens);
    REQUIRE(back.sequence == seq);
    CHECK(back.dangling_closed + back.orphan_offs + back.invalid_tokens == 0);
  }
}

TEST_CASE("arbitrary times decode within 5 ms") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> on(0.0, 20.0), dur(0.02, 2.0);
  std::uniform_int_distribution<int> p(0, 127), v(1, 127);
  for (int trial = 0; trial < 500; ++trial) {
    // Distinct pitches keep same-pitch onsets from sharing a grid step.
    std::vector<Note> notes;
    std::vector<int> pitches(128);
    for (int i = 0; i < 128; ++i) pitches[static_cast<std::size_t>(i)] = i;
    std::shuffle(pitches.begin(), pitches.end(), rng);
    for (int i = 0; i < 20; ++i) {
      const double o = on(rng);
      notes.push_back({pitches[static_cast<std::size_t>(i)], v(rng), o, o + dur(rng)});
    }
    const NoteSequence seq(notes);
    const auto back = decode(encode(seq)).sequence;
    REQUIRE(back.size() == seq.size());
    // Onsets that share a grid step come back ordered by pitch, so match by pitch.
    for (const Note& n : seq.notes()) {
      const auto it = std::find_if(back.notes().begin(), back.notes().end(),
                                   [&](const Note& b) { return b.pitch == n.pitch; });
      REQUIRE(it != back.notes().end());
      CHECK(std::abs(it->onset - n.onset) < 0.005);
      CHECK(std::abs(it->offset - n.offset) < 0.005);
    }
  }
}
