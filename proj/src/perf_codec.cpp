#include "mtae/perf_codec.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mtae/error.hpp"

namespace mtae::perf {

int quantize_velocity(int v) {
  if (v < 1 || v > 127) {
    throw Error(ErrorCategory::range, "velocity out of range: " + std::to_string(v));
  }
  return std::clamp(v * kVelocityBins / 128, 0, kVelocityBins - 1);
}

int dequantize_velocity(int bin) {
  bin = std::clamp(bin, 0, kVelocityBins - 1);
  return std::max(1, bin * (128 / kVelocityBins));
}

std::int64_t quantize_time(double seconds) {
  return static_cast<std::int64_t>(std::floor(seconds * kStepsPerSecond + 0.5));
}

namespace {

struct Event {
  std::int64_t step;
  bool is_on;
  int pitch;
  int velocity_bin;
};

void emit_shift(TokenSeq& out, std::int64_t steps) {
  while (steps > 0) {
    const auto s = static_cast<int>(std::min<std::int64_t>(steps, kMaxShiftSteps));
    out.push_back(time_shift(s));
    steps -= s;
  }
}

}  // namespace

TokenSeq encode(const NoteSequence& seq) {
  std::vector<Event> events;
  events.reserve(seq.size() * 2);
  for (const auto& n : seq.notes()) {
    const auto on = quantize_time(n.onset);
    const auto off = std::max(quantize_time(n.offset), on + 1);
    const int bin = quantize_velocity(n.velocity);
    events.push_back({on, true, n.pitch, bin});
    events.push_back({off, false, n.pitch, bin});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.step != b.step) return a.step < b.step;
    if (a.is_on != b.is_on) return !a.is_on;  // offs first
    return a.pitch < b.pitch;
  });

  TokenSeq out;
  std::int64_t cursor = 0;
  int active_bin = -1;
  for (const auto& e : events) {
    emit_shift(out, e.step - cursor);
    cursor = e.step;
    if (e.is_on) {
      if (e.velocity_bin != active_bin) {
        out.push_back(velocity(e.velocity_bin));
        active_bin = e.velocity_bin;
      }
      out.push_back(note_on(e.pitch));
    } else {
      out.push_back(note_off(e.pitch));
    }
  }
  emit_shift(out, quantize_time(seq.total_seconds()) - cursor);
  return out;
}

DecodeResult decode(const TokenSeq& tokens) {
  DecodeResult result;
  std::vector<Note> notes;
  std::map<int, std::pair<std::int64_t, int>> sounding;  // pitch -> (onset step, velocity)
  std::int64_t cursor = 0;
  int bin = kDefaultVelocityBin;

  auto seconds = [](std::int64_t step) { return static_cast<double>(step) / kStepsPerSecond; };
  auto close = [&](int pitch, std::int64_t onset, int vel, std::int64_t end) {
    notes.push_back(Note{pitch, vel, seconds(onset), seconds(end)});
  };

  for (int tok : tokens) {
    if (tok < 0 || tok >= kVocabSize) {
      ++result.invalid_tokens;
      continue;
    }
    if (tok == kEos) break;
    if (tok == kPad || tok == kStop) continue;

    if (tok < kNoteOffBase) {
      const int pitch = tok - kNoteOnBase;
      auto it = sounding.find(pitch);
      if (it != sounding.end()) {
        // Re-onset: the earlier note ends here. A zero-length leftover is dropped.
        if (it->second.first < cursor) {
          close(pitch, it->second.first, it->second.second, cursor);
        } else {
          ++result.dangling_closed;
        }
        sounding.erase(it);
      }
      sounding.emplace(pitch, std::make_pair(cursor, dequantize_velocity(bin)));
    } else if (tok < kTimeShiftBase) {
      const int pitch = tok - kNoteOffBase;
      auto it = sounding.find(pitch);
      if (it == sounding.end()) {
        ++result.orphan_offs;
        continue;
      }
      // An off at the onset instant still yields one grid step of sound.
      close(pitch, it->second.first, it->second.second,
            std::max(cursor, it->second.first + 1));
      sounding.erase(it);
    } else if (tok < kVelocityBase) {
      cursor += tok - kTimeShiftBase + 1;
    } else {
      bin = tok - kVelocityBase;
    }
  }

  std::int64_t end = cursor;
  for (const auto& [pitch, state] : sounding) {
    close(pitch, state.first, state.second, std::max(cursor, state.first + 1));
    end = std::max(end, state.first + 1);
    ++result.dangling_closed;
  }
  double total = seconds(end);
  for (const auto& n : notes) total = std::max(total, n.offset);
  result.sequence = NoteSequence(std::move(notes), total);
  return result;
}

}  // namespace mtae::perf
