#include "mtae/melody.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mtae::melody {

std::size_t frame_count(double total_seconds) {
  const double frames = std::ceil(total_seconds * kFramesPerSecond - 1e-9);
  return frames > 0.0 ? static_cast<std::size_t>(frames) : 0;
}

long frame_of(double seconds) {
  return static_cast<long>(std::floor(seconds * kFramesPerSecond + 0.5));
}

namespace {

struct GridNote {
  long on;
  long off;
  int pitch;
  int velocity;
};

GridNote to_grid(const Note& n) {
  const long on = frame_of(n.onset);
  return {on, std::max(frame_of(n.offset), on + 1), n.pitch, n.velocity};
}

double seconds_of(long frame) { return static_cast<double>(frame) / kFramesPerSecond; }

}  // namespace

EncodeResult encode(const NoteSequence& mono) {
  EncodeResult result;
  const auto n_frames = static_cast<long>(frame_count(mono.total_seconds()));
  result.tokens.assign(static_cast<std::size_t>(n_frames), kNoEvent);

  std::vector<GridNote> grid;
  for (const auto& n : mono.notes()) {
    GridNote g = to_grid(n);
    if (g.pitch < kMinPitch || g.pitch > kMaxPitch) {
      g.pitch = std::clamp(g.pitch, kMinPitch, kMaxPitch);
      ++result.clamped;
    }
    grid.push_back(g);
  }
  for (const auto& g : grid) {
    if (g.off < n_frames) result.tokens[static_cast<std::size_t>(g.off)] = kNoteOff;
  }
  // Onsets override note-offs in the same frame.
  for (const auto& g : grid) {
    if (g.on < n_frames) result.tokens[static_cast<std::size_t>(g.on)] = pitch_token(g.pitch);
  }
  return result;
}

NoteSequence decode(const TokenSeq& tokens) {
  std::vector<Note> notes;
  int pitch = -1;
  long start = 0;
  const auto n_frames = static_cast<long>(tokens.size());
  auto close = [&](long end) {
    if (pitch >= 0) notes.push_back(Note{pitch, kDefaultVelocity, seconds_of(start), seconds_of(end)});
    pitch = -1;
  };
  for (long f = 0; f < n_frames; ++f) {
    const int tok = tokens[static_cast<std::size_t>(f)];
    if (tok == kNoteOff) {
      close(f);
    } else if (tok >= kPitchBase && tok < kVocabSize) {
      close(f);
      pitch = token_pitch(tok);
      start = f;
    }
  }
  close(n_frames);
  return NoteSequence(std::move(notes), seconds_of(n_frames));
}

MelodyHmm::MelodyHmm(Params params) : params_(params) {
  const auto n = static_cast<std::size_t>(kStates);
  transition_.assign(n * n, 0.0);
  initial_.assign(n, 1.0 / kStates);

  transition_[idx(0, 0)] = params_.rest_stay;
  for (int j = 1; j < kStates; ++j) {
    transition_[idx(0, j)] = (1.0 - params_.rest_stay) / (kStates - 1);
  }
  const double jump_mass = 1.0 - params_.stay - params_.to_rest;
  for (int i = 1; i < kStates; ++i) {
    double z = 0.0;
    for (int j = 1; j < kStates; ++j) {
      if (j != i) z += std::pow(params_.interval_decay, std::abs(i - j));
    }
    transition_[idx(i, 0)] = params_.to_rest;
    transition_[idx(i, i)] = params_.stay;
    for (int j = 1; j < kStates; ++j) {
      if (j != i) transition_[idx(i, j)] = jump_mass * std::pow(params_.interval_decay, std::abs(i - j)) / z;
    }
  }
  log_transition_.resize(transition_.size());
  std::transform(transition_.begin(), transition_.end(), log_transition_.begin(),
                 [](double p) { return std::log(p); });
}

MelodyHmm::Frame MelodyHmm::frame(const std::vector<int>& sounding_pitches) const {
  std::vector<int> pitches;
  for (int p : sounding_pitches) {
    if (p >= kMinPitch && p <= kMaxPitch) pitches.push_back(p);
  }
  std::sort(pitches.begin(), pitches.end());
  pitches.erase(std::unique(pitches.begin(), pitches.end()), pitches.end());

  Frame f;
  f.states.push_back(0);
  f.emission.push_back(pitches.empty() ? 1.0 : params_.emission_floor);
  for (std::size_t k = 0; k < pitches.size(); ++k) {
    const auto above = static_cast<double>(pitches.size() - 1 - k);
    f.states.push_back(state_of_pitch(pitches[k]));
    f.emission.push_back(std::pow(params_.skyline_decay, above));
  }
  return f;
}

std::vector<int> MelodyHmm::viterbi(const std::vector<Frame>& frames) const {
  if (frames.empty()) return {};
  const double neg_inf = -std::numeric_limits<double>::infinity();

  std::vector<std::vector<double>> score(frames.size());
  std::vector<std::vector<std::size_t>> back(frames.size());
  const auto& f0 = frames[0];
  score[0].resize(f0.states.size());
  for (std::size_t k = 0; k < f0.states.size(); ++k) {
    score[0][k] = std::log(initial(f0.states[k])) + std::log(f0.emission[k]);
  }
  for (std::size_t t = 1; t < frames.size(); ++t) {
    const auto& prev = frames[t - 1];
    const auto& cur = frames[t];
    score[t].assign(cur.states.size(), neg_inf);
    back[t].assign(cur.states.size(), 0);
    for (std::size_t k = 0; k < cur.states.size(); ++k) {
      double best = neg_inf;
      std::size_t arg = 0;
      for (std::size_t j = 0; j < prev.states.size(); ++j) {
        const double s = score[t - 1][j] + log_transition(prev.states[j], cur.states[k]);
        if (s > best) {
          best = s;
          arg = j;
        }
      }
      score[t][k] = best + std::log(cur.emission[k]);
      back[t][k] = arg;
    }
  }
  const auto& last = score.back();
  std::size_t k = static_cast<std::size_t>(std::max_element(last.begin(), last.end()) - last.begin());
  std::vector<int> path(frames.size());
  for (std::size_t t = frames.size(); t-- > 0;) {
    path[t] = frames[t].states[k];
    if (t > 0) k = back[t][k];
  }
  return path;
}

double MelodyHmm::path_log_prob(const std::vector<Frame>& frames, const std::vector<int>& path) const {
  double lp = 0.0;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    auto it = std::find(f.states.begin(), f.states.end(), path[t]);
    if (it == f.states.end()) return -std::numeric_limits<double>::infinity();
    lp += std::log(f.emission[static_cast<std::size_t>(it - f.states.begin())]);
    lp += t == 0 ? std::log(initial(path[0])) : log_transition(path[t - 1], path[t]);
  }
  return lp;
}

std::vector<std::vector<int>> frame_pitches(const NoteSequence& seq) {
  const auto n_frames = frame_count(seq.total_seconds());
  std::vector<std::vector<int>> frames(n_frames);
  for (const auto& n : seq.notes()) {
    const GridNote g = to_grid(n);
    for (long f = g.on; f < g.off && f < static_cast<long>(n_frames); ++f) {
      frames[static_cast<std::size_t>(f)].push_back(g.pitch);
    }
  }
  return frames;
}

NoteSequence extract(const NoteSequence& seq, const MelodyHmm& hmm) {
  if (seq.empty()) return NoteSequence({}, seq.total_seconds());

  const auto pitches = frame_pitches(seq);
  std::vector<MelodyHmm::Frame> frames;
  frames.reserve(pitches.size());
  for (const auto& p : pitches) frames.push_back(hmm.frame(p));
  const auto path = hmm.viterbi(frames);

  std::vector<GridNote> grid;
  grid.reserve(seq.size());
  for (const auto& n : seq.notes()) grid.push_back(to_grid(n));

  // Latest-onset input note of `pitch` sounding at frame f.
  auto source = [&](int pitch, long f) -> const GridNote* {
    const GridNote* best = nullptr;
    for (const auto& g : grid) {
      if (g.pitch == pitch && g.on <= f && f < g.off && (!best || g.on > best->on)) best = &g;
    }
    return best;
  };

  std::vector<Note> out;
  int cur_pitch = -1;
  long start = 0;
  int vel = kDefaultVelocity;
  auto close = [&](long end) {
    if (cur_pitch >= 0) out.push_back(Note{cur_pitch, vel, seconds_of(start), seconds_of(end)});
    cur_pitch = -1;
  };
  for (std::size_t t = 0; t < path.size(); ++t) {
    const long f = static_cast<long>(t);
    if (path[t] == 0) {
      close(f);
      continue;
    }
    const int pitch = MelodyHmm::pitch_of_state(path[t]);
    const GridNote* src = source(pitch, f);
    const bool reonset = src && src->on == f;
    if (pitch != cur_pitch || reonset) {
      close(f);
      cur_pitch = pitch;
      start = f;
      vel = src ? src->velocity : kDefaultVelocity;
    }
  }
  close(static_cast<long>(path.size()));
  double total = seq.total_seconds();
  for (const auto& n : out) total = std::max(total, n.offset);
  return NoteSequence(std::move(out), total);
}

}  // namespace mtae::melody
