#pragma once

#include <cstdint>
#include <vector>

#include "mtae/notes.hpp"

namespace mtae::perf {

// Event vocabulary layout.
inline constexpr int kNoteOnBase = 0;       // 0..127
inline constexpr int kNoteOffBase = 128;    // 128..255
inline constexpr int kTimeShiftBase = 256;  // 256..355, shift of k*10ms for k=1..100
inline constexpr int kVelocityBase = 356;   // 356..387, bins 0..31
inline constexpr int kCoreVocabSize = 388;
inline constexpr int kPad = 388;
inline constexpr int kEos = 389;
inline constexpr int kStop = 390;
inline constexpr int kVocabSize = 391;

inline constexpr int kMaxShiftSteps = 100;
inline constexpr int kVelocityBins = 32;
inline constexpr int kStepsPerSecond = 100;
inline constexpr int kDefaultVelocityBin = 20;

constexpr int note_on(int pitch) { return kNoteOnBase + pitch; }
constexpr int note_off(int pitch) { return kNoteOffBase + pitch; }
constexpr int time_shift(int steps) { return kTimeShiftBase + steps - 1; }
constexpr int velocity(int bin) { return kVelocityBase + bin; }

using TokenSeq = std::vector<int>;

/// floor(v * 32 / 128); throws for v outside 1..127.
int quantize_velocity(int v);

/// Lower edge of the bin (4 * bin), raised to 1 for bin 0. Velocities that are
/// multiples of 4 therefore survive an encode/decode round trip.
int dequantize_velocity(int bin);

/// Round-half-up onto the 10 ms grid.
std::int64_t quantize_time(double seconds);

TokenSeq encode(const NoteSequence& seq);

struct DecodeResult {
  NoteSequence sequence;
  int dangling_closed = 0;  // NOTE_ON never closed, ended at the final time
  int orphan_offs = 0;      // NOTE_OFF with nothing sounding
  int invalid_tokens = 0;   // ids outside the vocabulary, skipped
};

/// Never throws on ill-formed streams; repairs are counted instead. Decoding
/// stops at the first EOS. PAD and STOP are skipped.
DecodeResult decode(const TokenSeq& tokens);

}  // namespace mtae::perf
