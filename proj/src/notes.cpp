#include "mtae/notes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "mtae/error.hpp"

namespace mtae {

void validate_note(const Note& n) {
  if (n.pitch < 0 || n.pitch > 127) {
    throw Error(ErrorCategory::range, "pitch out of range: " + std::to_string(n.pitch));
  }
  if (n.velocity < 1 || n.velocity > 127) {
    throw Error(ErrorCategory::range, "velocity out of range: " + std::to_string(n.velocity));
  }
  if (!std::isfinite(n.onset) || !std::isfinite(n.offset) || n.onset < 0.0) {
    throw Error(ErrorCategory::range, "onset must be a finite non-negative time");
  }
  if (!(n.offset > n.onset)) {
    throw Error(ErrorCategory::range, "offset must be greater than onset");
  }
}

NoteSequence::NoteSequence(std::vector<Note> notes, double total_seconds) {
  for (const auto& n : notes) validate_note(n);
  std::stable_sort(notes.begin(), notes.end(), [](const Note& a, const Note& b) {
    if (a.onset != b.onset) return a.onset < b.onset;
    return a.pitch < b.pitch;
  });

  // Re-onset rule, applied per pitch in onset order.
  std::vector<long> last_of_pitch(128, -1);
  std::vector<bool> dropped(notes.size(), false);
  for (std::size_t i = 0; i < notes.size(); ++i) {
    auto& prev_idx = last_of_pitch[static_cast<std::size_t>(notes[i].pitch)];
    if (prev_idx >= 0) {
      Note& prev = notes[static_cast<std::size_t>(prev_idx)];
      if (prev.onset == notes[i].onset) {
        dropped[static_cast<std::size_t>(prev_idx)] = true;
      } else if (prev.offset > notes[i].onset) {
        prev.offset = notes[i].onset;
      }
    }
    prev_idx = static_cast<long>(i);
  }
  notes_.reserve(notes.size());
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (!dropped[i]) notes_.push_back(notes[i]);
  }

  double last_offset = 0.0;
  for (const auto& n : notes_) last_offset = std::max(last_offset, n.offset);
  if (total_seconds < 0.0) {
    total_seconds_ = last_offset;
  } else {
    if (!std::isfinite(total_seconds) || total_seconds < last_offset) {
      throw Error(ErrorCategory::range, "total_seconds is smaller than the last offset");
    }
    total_seconds_ = total_seconds;
  }
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line_no, const char* what) {
  T value{};
  const char* first = field.data();
  const char* last = first + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line_no, std::string("malformed ") + what + " '" + std::string(field) + "'");
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

NoteSequence parse_notes(std::string_view text) {
  std::vector<Note> notes;
  double total = -1.0;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;

    auto fields = split_fields(line);
    if (fields.empty() || fields[0].front() == '#') continue;

    if (!have_header) {
      if (fields.size() != 2 || fields[0] != "total_seconds") {
        throw ParseError(line_no, "expected 'total_seconds <value>' header");
      }
      total = parse_number<double>(fields[1], line_no, "total_seconds");
      if (!std::isfinite(total) || total < 0.0) {
        throw ParseError(line_no, "total_seconds must be non-negative");
      }
      have_header = true;
      continue;
    }
    if (fields.size() != 4) {
      throw ParseError(line_no, "expected 4 fields 'pitch velocity onset offset', got " +
                                    std::to_string(fields.size()));
    }
    Note n;
    n.pitch = parse_number<int>(fields[0], line_no, "pitch");
    n.velocity = parse_number<int>(fields[1], line_no, "velocity");
    n.onset = parse_number<double>(fields[2], line_no, "onset");
    n.offset = parse_number<double>(fields[3], line_no, "offset");
    try {
      validate_note(n);
    } catch (const Error& e) {
      throw ParseError(line_no, e.what());
    }
    notes.push_back(n);
  }
  if (!have_header) return NoteSequence{};
  try {
    return NoteSequence(std::move(notes), total);
  } catch (const Error& e) {
    throw ParseError(line_no, e.what());
  }
}

std::string write_notes(const NoteSequence& seq) {
  std::string out = "total_seconds ";
  append_double(out, seq.total_seconds());
  out += '\n';
  for (const auto& n : seq.notes()) {
    out += std::to_string(n.pitch);
    out += ' ';
    out += std::to_string(n.velocity);
    out += ' ';
    append_double(out, n.onset);
    out += ' ';
    append_double(out, n.offset);
    out += '\n';
  }
  return out;
}

NoteSequence read_notes_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_notes(ss.str());
}

void write_notes_file(const std::string& path, const NoteSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot write " + path);
  out << write_notes(seq);
}

}  // namespace mtae
