#include "mtae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mtae/error.hpp"
#include "mtae/perf_codec.hpp"

namespace mtae::synth {

namespace {

struct Style {
  int low, high;    // pitch range
  double ioi;       // seconds between onsets
  double duration;  // fraction of ioi (> 1 overlaps)
  int velocity;     // centre
  int chord;        // notes per onset
};

constexpr Style kTable[kStyles] = {
    {72, 96, 0.12, 0.5, 36, 1},
    {33, 52, 0.60, 1.4, 108, 1},
    {52, 72, 0.50, 0.9, 72, 3},
    {40, 88, 0.16, 2.5, 56, 1},
};

constexpr int kMajor[7] = {0, 2, 4, 5, 7, 9, 11};

// Scale-degree motifs, four per style. Each cycle of the motif starts one
// degree higher than the last, wrapping inside the style's range.
constexpr int kMotifLen = 4;
constexpr int kMotifs[kStyles][4][kMotifLen] = {
    {{0, 1, 2, 3}, {0, 2, 1, 3}, {3, 2, 1, 0}, {0, 2, 4, 2}},
    {{0, 4, 0, 4}, {0, 3, 4, 0}, {0, -3, 0, 2}, {0, 0, 4, 4}},
    {{0, 3, 4, 0}, {0, 5, 3, 4}, {0, 4, 5, 3}, {0, 2, 3, 4}},
    {{0, 2, 4, 7}, {0, 4, 7, 9}, {0, 2, 4, 6}, {0, 3, 5, 7}},
};

double grid(double t) { return std::round(t * 100.0) / 100.0; }

}  // namespace

NoteSequence piece(int style, std::uint64_t seed, std::size_t target_tokens) {
  if (style < 0 || style >= kStyles) throw Error(ErrorCategory::range, "unknown synthetic style");
  const Style& s = kTable[style];
  std::mt19937_64 rng(seed * 4 + static_cast<std::uint64_t>(style));
  const int root = std::uniform_int_distribution<int>(0, 11)(rng);
  const double tempo = 0.85 + 0.05 * std::uniform_int_distribution<int>(0, 6)(rng);
  const int vel_level = s.velocity + 4 * std::uniform_int_distribution<int>(-3, 3)(rng);
  const int* motif = kMotifs[style][std::uniform_int_distribution<int>(0, 3)(rng)];
  const double articulation = 0.7 + 0.15 * std::uniform_int_distribution<int>(0, 3)(rng);
  const int accent = 8 * std::uniform_int_distribution<int>(0, 2)(rng);

  std::vector<int> scale;
  for (int p = s.low; p <= s.high; ++p) {
    if (std::find(std::begin(kMajor), std::end(kMajor), ((p - root) % 12 + 12) % 12) != std::end(kMajor)) {
      scale.push_back(p);
    }
  }
  const int n = static_cast<int>(scale.size());
  const int span = n - 10;  // room for the motif and chord tones above the base
  const double ioi = grid(s.ioi * tempo);
  const double dur = std::max(0.01, grid(s.ioi * tempo * s.duration * articulation));
  const int start = std::uniform_int_distribution<int>(0, span - 1)(rng);
  std::vector<Note> notes;
  double t = 0.0;
  for (int step = 0;; ++step) {
    const int cycle = step / kMotifLen;
    const int base = 3 + (start + cycle) % span;
    const int degree = std::clamp(base + motif[step % kMotifLen], 0, n - 1);
    const int v = std::clamp(vel_level + (step % kMotifLen == 0 ? accent : 0), 1, 127);
    for (int c = 0; c < s.chord; ++c) {
      const int idx = std::min(n - 1, degree + 2 * c);
      if (c > 0 && scale[static_cast<std::size_t>(idx)] == notes.back().pitch) continue;
      notes.push_back({scale[static_cast<std::size_t>(idx)], v, grid(t), grid(t + dur)});
    }
    t += ioi;
    if (step % kMotifLen == kMotifLen - 1 && perf::encode(NoteSequence(notes)).size() >= target_tokens) break;
  }
  return NoteSequence(notes);
}

std::vector<LabeledPiece> corpus(std::size_t per_style, std::uint64_t seed, std::size_t target_tokens) {
  std::vector<LabeledPiece> out;
  for (std::size_t i = 0; i < per_style; ++i) {
    for (int s = 0; s < kStyles; ++s) out.push_back({s, piece(s, seed * 1000003ULL + i, target_tokens)});
  }
  return out;
}

}  // namespace mtae::synth
