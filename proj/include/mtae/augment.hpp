#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "mtae/notes.hpp"

namespace mtae::augment {

struct ShiftResult {
  NoteSequence sequence;
  int clamped = 0;
};

/// Shifts every pitch; pitches leaving 0..127 are clamped and counted.
ShiftResult pitch_shift(const NoteSequence& seq, int semitones);

/// Scales all times (including total_seconds) by `factor` > 0.
NoteSequence time_stretch(const NoteSequence& seq, double factor);

/// Encoder-side input perturbation grid: 12 pitch shifts x 4 stretches.
inline constexpr std::array<int, 12> kPerturbSemitones = {-6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6};
inline constexpr std::array<double, 4> kPerturbStretch = {0.95, 0.975, 1.025, 1.05};
inline constexpr std::size_t kPerturbCells = kPerturbSemitones.size() * kPerturbStretch.size();

struct Perturbation {
  int semitones = 0;
  double stretch = 1.0;
  std::size_t cell = 0;  // row-major index into the 12x4 grid
};

Perturbation sample_perturbation(std::mt19937_64& rng);
Perturbation sample_perturbation(std::uint64_t seed);

NoteSequence apply(const NoteSequence& seq, const Perturbation& p);

/// Each input yields itself followed by 9 variants, each with a pitch shift
/// in {-3..3}\{0} and a stretch drawn uniformly from [0.95, 1.05].
std::vector<NoteSequence> augment_dataset(const std::vector<NoteSequence>& corpus, std::uint64_t seed);

inline constexpr int kDatasetCopies = 10;
inline constexpr int kDatasetMaxShift = 3;
inline constexpr double kDatasetMaxStretch = 0.05;

}  // namespace mtae::augment
