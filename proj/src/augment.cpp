#include "mtae/augment.hpp"

#include <algorithm>

#include "mtae/error.hpp"

namespace mtae::augment {

ShiftResult pitch_shift(const NoteSequence& seq, int semitones) {
  if (semitones < -127 || semitones > 127) {
    throw Error(ErrorCategory::range, "pitch shift magnitude exceeds 127");
  }
  ShiftResult r;
  std::vector<Note> notes = seq.notes();
  for (auto& n : notes) {
    const int shifted = n.pitch + semitones;
    n.pitch = std::clamp(shifted, 0, 127);
    if (n.pitch != shifted) ++r.clamped;
  }
  r.sequence = NoteSequence(std::move(notes), seq.total_seconds());
  return r;
}

NoteSequence time_stretch(const NoteSequence& seq, double factor) {
  if (!(factor > 0.0)) throw Error(ErrorCategory::range, "stretch factor must be positive");
  std::vector<Note> notes = seq.notes();
  for (auto& n : notes) {
    n.onset *= factor;
    n.offset *= factor;
  }
  return NoteSequence(std::move(notes), seq.total_seconds() * factor);
}

Perturbation sample_perturbation(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> cell(0, kPerturbCells - 1);
  Perturbation p;
  p.cell = cell(rng);
  p.semitones = kPerturbSemitones[p.cell / kPerturbStretch.size()];
  p.stretch = kPerturbStretch[p.cell % kPerturbStretch.size()];
  return p;
}

Perturbation sample_perturbation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_perturbation(rng);
}

NoteSequence apply(const NoteSequence& seq, const Perturbation& p) {
  return time_stretch(pitch_shift(seq, p.semitones).sequence, p.stretch);
}

std::vector<NoteSequence> augment_dataset(const std::vector<NoteSequence>& corpus, std::uint64_t seed) {
  if (corpus.empty()) throw Error(ErrorCategory::range, "cannot augment an empty corpus");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift_index(0, 2 * kDatasetMaxShift - 1);
  std::uniform_real_distribution<double> stretch(1.0 - kDatasetMaxStretch, 1.0 + kDatasetMaxStretch);

  std::vector<NoteSequence> out;
  out.reserve(corpus.size() * kDatasetCopies);
  for (const auto& seq : corpus) {
    out.push_back(seq);
    for (int k = 1; k < kDatasetCopies; ++k) {
      int s = shift_index(rng) - kDatasetMaxShift;  // -3..2
      if (s >= 0) ++s;                              // skip 0
      out.push_back(time_stretch(pitch_shift(seq, s).sequence, stretch(rng)));
    }
  }
  return out;
}

}  // namespace mtae::augment
