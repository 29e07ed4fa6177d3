#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mtae/augment.hpp"
#include "mtae/error.hpp"
#include "oracles.hpp"

using namespace mtae;
using namespace mtae::augment;

namespace {
const NoteSequence kSeq({{60, 80, 0.5, 1.0}, {64, 70, 1.0, 2.0}, {125, 90, 2.0, 2.5}}, 3.0);
}

TEST_CASE("pitch shift") {
  CHECK(pitch_shift(kSeq, 0).sequence == kSeq);
  const NoteSequence in_range({{60, 80, 0.5, 1.0}, {64, 70, 1.0, 2.0}});
  CHECK(pitch_shift(pitch_shift(in_range, 6).sequence, -6).sequence == in_range);
  const auto up = pitch_shift(kSeq, 6);
  CHECK(up.clamped == 1);
  CHECK(up.sequence.notes()[2].pitch == 127);
  CHECK(up.sequence.notes()[0].onset == 0.5);
  CHECK(pitch_shift(kSeq, -70).clamped == 2);
}

TEST_CASE("time stretch") {
  CHECK(time_stretch(kSeq, 1.0) == kSeq);
  const auto s = time_stretch(kSeq, 2.0);
  CHECK(s.notes()[0].onset == 1.0);
  CHECK(s.total_seconds() == 6.0);
  CHECK(s.notes()[1].velocity == 70);
  const auto back = time_stretch(time_stretch(kSeq, 1.05), 1.0 / 1.05);
  for (std::size_t i = 0; i < kSeq.size(); ++i) {
    CHECK(std::abs(back.notes()[i].onset - kSeq.notes()[i].onset) < 1e-12);
    CHECK(std::abs(back.notes()[i].offset - kSeq.notes()[i].offset) < 1e-12);
  }
  CHECK_THROWS_AS(time_stretch(kSeq, 0.0), Error);
  CHECK_THROWS_AS(time_stretch(kSeq, -1.0), Error);
}

TEST_CASE("perturbation grid") {
  CHECK(kPerturbCells == 48);
  std::set<int> shifts(kPerturbSemitones.begin(), kPerturbSemitones.end());
  CHECK(shifts.size() == 12);
  CHECK(!shifts.count(0));
  CHECK(*shifts.begin() == -6);
  CHECK(*shifts.rbegin() == 6);
  CHECK(sample_perturbation(42).cell == sample_perturbation(42).cell);
  CHECK(sample_perturbation(42).semitones == sample_perturbation(42).semitones);
}

TEST_CASE("perturbation draws are uniform over the 48 cells") {
  std::mt19937_64 rng(2024);
  std::vector<std::size_t> counts(kPerturbCells, 0);
  for (int i = 0; i < 10000; ++i) {
    const auto p = sample_perturbation(rng);
    REQUIRE(p.cell < kPerturbCells);
    CHECK(p.semitones == kPerturbSemitones[p.cell / kPerturbStretch.size()]);
    CHECK(p.stretch == kPerturbStretch[p.cell % kPerturbStretch.size()]);
    ++counts[p.cell];
  }
  CHECK(oracle::chi_square_uniform(counts) < oracle::kChi2Crit47);
}

TEST_CASE("dataset augmentation") {
  const std::vector<NoteSequence> corpus{kSeq, time_stretch(kSeq, 1.5), pitch_shift(kSeq, -10).sequence};
  const auto out = augment_dataset(corpus, 3);
  REQUIRE(out.size() == 30);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(out[i * 10] == corpus[i]);
    for (std::size_t k = 1; k < 10; ++k) {
      const auto& v = out[i * 10 + k];
      const auto& src = corpus[i];
      REQUIRE(v.size() == src.size());
      // Unclamped notes show the shift directly.
      const int delta = v.notes()[0].pitch - src.notes()[0].pitch;
      CHECK(delta != 0);
      CHECK(std::abs(delta) <= 3);
      const double ratio = v.total_seconds() / src.total_seconds();
      CHECK(ratio >= 0.95 - 1e-12);
      CHECK(ratio <= 1.05 + 1e-12);
    }
  }
  CHECK(augment_dataset(corpus, 3) == out);
  CHECK_THROWS_AS(augment_dataset({}, 1), Error);
}
