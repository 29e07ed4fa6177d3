#pragma once

#include <vector>

#include "mtae/notes.hpp"

namespace mtae::melody {

// Melody token vocabulary on a 100 ms grid.
inline constexpr int kNoEvent = 0;
inline constexpr int kNoteOff = 1;
inline constexpr int kPitchBase = 2;  // tokens 2..91 <-> pitches 21..110
inline constexpr int kMinPitch = 21;
inline constexpr int kMaxPitch = 110;
inline constexpr int kVocabSize = 92;
inline constexpr int kFramesPerSecond = 10;
inline constexpr int kDefaultVelocity = 80;

constexpr int pitch_token(int pitch) { return kPitchBase + pitch - kMinPitch; }
constexpr int token_pitch(int token) { return token - kPitchBase + kMinPitch; }

using TokenSeq = std::vector<int>;

/// ceil(total_seconds / 0.1), tolerant of binary rounding in the quotient.
std::size_t frame_count(double total_seconds);
/// Frame index of a time (round half up on the 100 ms grid).
long frame_of(double seconds);

struct EncodeResult {
  TokenSeq tokens;
  int clamped = 0;  // pitches pulled into 21..110
};

EncodeResult encode(const NoteSequence& mono);
NoteSequence decode(const TokenSeq& tokens);

/// Frame-wise hidden Markov model over melody states: state 0 is rest,
/// state 1 + (p - 21) is "pitch p sounds as the melody".
class MelodyHmm {
 public:
  static constexpr int kStates = 1 + (kMaxPitch - kMinPitch + 1);

  struct Params {
    double stay = 0.6;           // held melody pitch
    double to_rest = 0.1;        // pitch -> rest
    double rest_stay = 0.5;      // rest -> rest
    double interval_decay = 0.9; // per-semitone decay of jump mass
    double emission_floor = 1e-3;// rest while notes sound
    double skyline_decay = 0.001;  // per sounding pitch above the candidate
  };

  MelodyHmm() : MelodyHmm(Params{}) {}
  explicit MelodyHmm(Params params);

  const Params& params() const noexcept { return params_; }
  double transition(int from, int to) const { return transition_[idx(from, to)]; }
  double log_transition(int from, int to) const { return log_transition_[idx(from, to)]; }
  double initial(int state) const { return initial_[static_cast<std::size_t>(state)]; }

  static int state_of_pitch(int pitch) { return 1 + pitch - kMinPitch; }
  static int pitch_of_state(int state) { return state - 1 + kMinPitch; }

  /// Candidate states of one frame and their emission likelihoods: the rest
  /// state plus every sounding pitch in 21..110.
  struct Frame {
    std::vector<int> states;
    std::vector<double> emission;
  };
  Frame frame(const std::vector<int>& sounding_pitches) const;

  /// Most likely state path through the candidate lattice (log-space).
  std::vector<int> viterbi(const std::vector<Frame>& frames) const;
  double path_log_prob(const std::vector<Frame>& frames, const std::vector<int>& choice) const;

 private:
  static std::size_t idx(int from, int to) {
    return static_cast<std::size_t>(from) * kStates + static_cast<std::size_t>(to);
  }

  Params params_;
  std::vector<double> transition_;
  std::vector<double> log_transition_;
  std::vector<double> initial_;
};

/// Sounding pitches per 100 ms frame.
std::vector<std::vector<int>> frame_pitches(const NoteSequence& seq);

/// Viterbi melody extraction; output notes lie on the 100 ms grid.
NoteSequence extract(const NoteSequence& seq, const MelodyHmm& hmm = MelodyHmm{});

}  // namespace mtae::melody
