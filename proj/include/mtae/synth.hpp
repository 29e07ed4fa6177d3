#pragma once

#include <cstdint>
#include <vector>

#include "mtae/notes.hpp"

namespace mtae::synth {

/// Four playing styles that differ in register, tempo, loudness and
/// articulation:
/// Each piece repeats a short scale-degree motif that climbs one degree per
/// cycle; root, tempo, loudness, accent, articulation, motif and starting
/// degree are drawn per piece.
///   0 high, fast, soft, staccato runs
///   1 low, slow, loud, sustained bass line
///   2 mid-register block chords
///   3 wide arpeggios with overlapping notes
inline constexpr int kStyles = 4;

/// One piece of `style` with times on the 10 ms grid. Notes are appended
/// until the performance encoding reaches at least `target_tokens`.
NoteSequence piece(int style, std::uint64_t seed, std::size_t target_tokens = 128);

struct LabeledPiece {
  int style;
  NoteSequence notes;
};

/// `per_style` pieces of each style, interleaved by style.
std::vector<LabeledPiece> corpus(std::size_t per_style, std::uint64_t seed, std::size_t target_tokens = 128);

}  // namespace mtae::synth
