#include <doctest.h>

#include <random>

#include "mtae/melody.hpp"
#include "oracles.hpp"

using namespace mtae;
using namespace mtae::melody;

TEST_CASE("vocabulary") {
  CHECK(kVocabSize == 92);
  CHECK(pitch_token(21) == 2);
  CHECK(pitch_token(110) == 91);
  CHECK(token_pitch(2) == 21);
}

TEST_CASE("encode examples") {
  const NoteSequence one({{60, 80, 0.0, 0.3}}, 0.5);
  CHECK(encode(one).tokens == TokenSeq{pitch_token(60), kNoEvent, kNoEvent, kNoteOff, kNoEvent});
  CHECK(encode(NoteSequence({}, 0.3)).tokens == TokenSeq{kNoEvent, kNoEvent, kNoEvent});
  const NoteSequence back_to_back({{60, 80, 0.0, 0.1}, {62, 80, 0.1, 0.2}}, 0.3);
  CHECK(encode(back_to_back).tokens == TokenSeq{pitch_token(60), pitch_token(62), kNoteOff});
}

TEST_CASE("length is ceil(total / 0.1)") {
  CHECK(frame_count(0.0) == 0);
  CHECK(frame_count(0.3) == 3);
  CHECK(frame_count(0.31) == 4);
  CHECK(frame_count(1.0) == 10);
  CHECK(encode(NoteSequence({{60, 80, 0.0, 0.25}})).tokens.size() == 3);
}

TEST_CASE("out-of-range pitches are clamped and counted") {
  const auto r = encode(NoteSequence({{10, 80, 0.0, 0.1}, {120, 80, 0.1, 0.2}}));
  CHECK(r.clamped == 2);
  CHECK(r.tokens[0] == pitch_token(21));
  CHECK(r.tokens[1] == pitch_token(110));
}

TEST_CASE("decode examples") {
  const auto seq = decode({pitch_token(60), kNoEvent, kNoEvent, kNoteOff, kNoEvent});
  REQUIRE(seq.size() == 1);
  CHECK(seq.notes()[0] == Note{60, kDefaultVelocity, 0.0, 0.3});
  CHECK(decode({kNoEvent, kNoEvent}).empty());
  CHECK(decode({kNoteOff, kNoEvent}).empty());
}

TEST_CASE("encode(decode(t)) == t without orphan note-offs") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> tok(0, 91), len(1, 60);
  for (int trial = 0; trial < 500; ++trial) {
    TokenSeq t(static_cast<std::size_t>(len(rng)));
    bool sounding = false;
    for (auto& x : t) {
      x = tok(rng);
      if (x == kNoteOff && !sounding) x = kNoEvent;
      if (x == kNoteOff) sounding = false;
      if (x >= kPitchBase) sounding = true;
    }
    CHECK(encode(decode(t)).tokens == t);
  }
}

TEST_CASE("transition rows are stochastic") {
  const MelodyHmm hmm;
  for (int i = 0; i < MelodyHmm::kStates; ++i) {
    double s = 0.0;
    for (int j = 0; j < MelodyHmm::kStates; ++j) {
      CHECK(hmm.transition(i, j) >= 0.0);
      s += hmm.transition(i, j);
    }
    CHECK(std::abs(s - 1.0) < 1e-9);
  }
  double init = 0.0;
  for (int i = 0; i < MelodyHmm::kStates; ++i) init += hmm.initial(i);
  CHECK(std::abs(init - 1.0) < 1e-9);
}

TEST_CASE("transition structure follows the stated rules") {
  const MelodyHmm hmm;
  const auto& p = hmm.params();
  const int s60 = MelodyHmm::state_of_pitch(60);
  CHECK(hmm.transition(s60, s60) == doctest::Approx(p.stay));
  CHECK(hmm.transition(s60, 0) == doctest::Approx(p.to_rest));
  CHECK(hmm.transition(0, 0) == doctest::Approx(p.rest_stay));
  // Jump probabilities decay geometrically with the interval.
  const double r1 = hmm.transition(s60, s60 + 2) / hmm.transition(s60, s60 + 1);
  CHECK(r1 == doctest::Approx(p.interval_decay));
  CHECK(hmm.transition(s60, s60 + 5) == doctest::Approx(hmm.transition(s60, s60 - 5)));
}

TEST_CASE("frame candidates and skyline emission") {
  const MelodyHmm hmm;
  const auto f = hmm.frame({64, 60, 67, 5});
  REQUIRE(f.states.size() == 4);
  CHECK(f.states[0] == 0);
  CHECK(f.emission[0] == doctest::Approx(1e-3));
  CHECK(f.states[3] == MelodyHmm::state_of_pitch(67));
  CHECK(f.emission[3] == doctest::Approx(1.0));
  CHECK(f.emission[2] == doctest::Approx(0.001));
  CHECK(f.emission[1] == doctest::Approx(0.001 * 0.001));
  const auto silent = hmm.frame({});
  CHECK(silent.states == std::vector<int>{0});
  CHECK(silent.emission[0] == 1.0);
}

TEST_CASE("Viterbi equals exhaustive search on small lattices") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> frames_n(1, 12), cands(0, 3), pitch(40, 90);
  const MelodyHmm hmm;
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<MelodyHmm::Frame> frames;
    const int n = frames_n(rng);
    for (int t = 0; t < n; ++t) {
      std::vector<int> ps;
      const int c = cands(rng);
      for (int k = 0; k < c; ++k) ps.push_back(pitch(rng));
      frames.push_back(hmm.frame(ps));  // rest + up to 3 pitches: at most 4 candidates
    }
    const auto path = hmm.viterbi(frames);
    const auto best = oracle::exhaustive_viterbi(hmm, frames);
    CHECK(hmm.path_log_prob(frames, path) == doctest::Approx(best.log_prob).epsilon(1e-12));
    // Symmetric transitions can tie; the path itself is pinned only when the optimum is unique.
    if (best.unique) CHECK(path == best.states);
  }
}

TEST_CASE("extraction: empty and monophonic inputs") {
  CHECK(extract(NoteSequence()).empty());
  const NoteSequence mono({{60, 70, 0.0, 0.3}, {64, 90, 0.3, 0.5}, {67, 50, 0.8, 1.2}});
  CHECK(extract(mono) == mono);
}

TEST_CASE("extraction recovers a separated top voice") {
  SUBCASE("constant top voice over chords") {
    std::vector<Note> notes;
    for (int k = 0; k < 6; ++k) {
      const double t = 0.4 * k;
      notes.push_back({72, 80, t, t + 0.4});
      notes.push_back({48 + k, 60, t, t + 0.4});
      notes.push_back({55 - k, 60, t, t + 0.2});
    }
    const auto melody = extract(NoteSequence(notes));
    REQUIRE(melody.size() == 6);
    for (const auto& n : melody.notes()) CHECK(n.pitch == 72);
  }
  SUBCASE("moving top voice over shorter accompaniment") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> bass(36, 59), top(72, 84), len(1, 4), gap(0, 2);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<Note> notes;
      int f = 0;
      for (int i = 0; i < 8; ++i) {
        const int l = len(rng);
        const int accomp = std::uniform_int_distribution<int>(1, l)(rng);
        notes.push_back({top(rng), 80, f / 10.0, (f + l) / 10.0});
        notes.push_back({bass(rng), 60, f / 10.0, (f + accomp) / 10.0});
        notes.push_back({bass(rng) - 12, 60, f / 10.0, (f + l) / 10.0});
        f += l + gap(rng);
      }
      const NoteSequence seq(notes);
      const auto melody = extract(seq);
      // Skyline oracle: highest pitch per frame, compared frame by frame.
      const auto sky = oracle::skyline_frames(seq);
      std::vector<int> got(sky.size(), -1);
      for (const auto& n : melody.notes()) {
        for (long k = std::lround(n.onset * 10); k < std::lround(n.offset * 10); ++k) got[static_cast<std::size_t>(k)] = n.pitch;
      }
      CHECK(got == sky);
    }
  }
}

TEST_CASE("extraction output is monophonic and coincides with played notes") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> p(30, 100), on(0, 100), dur(1, 15);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Note> notes;
    for (int i = 0; i < 25; ++i) {
      const int o = on(rng);
      notes.push_back({p(rng), 64, o / 20.0, (o + dur(rng)) / 20.0});
    }
    const NoteSequence seq(notes);
    const auto melody = extract(seq);
    const auto frames = frame_pitches(seq);
    for (std::size_t i = 1; i < melody.size(); ++i) CHECK(melody.notes()[i].onset >= melody.notes()[i - 1].offset - 1e-12);
    for (const auto& n : melody.notes()) {
      for (long k = frame_of(n.onset); k < frame_of(n.offset); ++k) {
        const auto& fp = frames[static_cast<std::size_t>(k)];
        CHECK(std::find(fp.begin(), fp.end(), n.pitch) != fp.end());
      }
    }
    CHECK(extract(seq) == melody);
  }
}
