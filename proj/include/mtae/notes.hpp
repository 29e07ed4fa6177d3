#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace mtae {

struct Note {
  int pitch = 60;      // MIDI semitone, 0..127
  int velocity = 64;   // 1..127
  double onset = 0.0;  // seconds
  double offset = 0.0; // seconds, > onset

  bool operator==(const Note&) const = default;
};

/// Throws mtae::Error (range) when a field is out of bounds.
void validate_note(const Note& n);

/// An immutable, canonically ordered list of notes.
///
/// Construction sorts by (onset, pitch) and applies the re-onset rule: a new
/// onset of a pitch that is still sounding ends the earlier note at the new
/// onset. Two notes sharing (pitch, onset) collapse to the later one.
class NoteSequence {
 public:
  NoteSequence() = default;

  /// `total_seconds` < 0 means "use the last offset".
  explicit NoteSequence(std::vector<Note> notes, double total_seconds = -1.0);

  const std::vector<Note>& notes() const noexcept { return notes_; }
  double total_seconds() const noexcept { return total_seconds_; }
  std::size_t size() const noexcept { return notes_.size(); }
  bool empty() const noexcept { return notes_.empty(); }

  bool operator==(const NoteSequence&) const = default;

 private:
  std::vector<Note> notes_;
  double total_seconds_ = 0.0;
};

/// Parses the line format `pitch velocity onset offset`, with `#` comments
/// and a leading `total_seconds <value>` line. Errors carry the line number.
NoteSequence parse_notes(std::string_view text);

/// Emits the header line followed by one note per line, using the shortest
/// decimal representation that reads back to the identical double.
std::string write_notes(const NoteSequence& seq);

NoteSequence read_notes_file(const std::string& path);
void write_notes_file(const std::string& path, const NoteSequence& seq);

}  // namespace mtae
