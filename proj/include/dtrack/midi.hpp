#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dtrack::midi {

struct NoteEvent {
  int pitch = 60;       // MIDI note number, 0..127
  std::int64_t onset = 0;     // ticks, or grid steps after quantize()
  std::int64_t duration = 1;  // >= 1
  int velocity = 80;    // 1..127
  int track = 0;

  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

// Total order used for MidiSong::notes.
bool note_less(const NoteEvent& a, const NoteEvent& b);

struct MidiSong {
  int ticks_per_beat = 96;
  int format = 1;
  std::vector<NoteEvent> notes;  // sorted by note_less
};

// Sorts notes and merges overlapping same-pitch notes on the same track into
// one note spanning their union. Touching notes (end == next onset) are kept
// separate.
void normalize(MidiSong& song);

// Decodes a Standard MIDI File (format 0 or 1). Throws dtrack::Error with
// MalformedHeader, UnsupportedFormat or TruncatedChunk. Unmatched note-offs
// and notes on the percussion channel are dropped with a log line.
MidiSong parse_midi(std::span<const std::uint8_t> bytes);

// Encodes a format-1 file with one MTrk chunk per track index 0..max_track.
// parse_midi(write_midi(s)).notes == s.notes for normalized s.
std::vector<std::uint8_t> write_midi(const MidiSong& song);

MidiSong read_midi_file(const std::filesystem::path& path);
void write_midi_file(const std::filesystem::path& path, const MidiSong& song);

// Round-half-to-even of value * num / den on integers (den > 0, value >= 0).
std::int64_t rescale_round_even(std::int64_t value, std::int64_t num,
                                std::int64_t den);

// Maps tick times onto a grid of steps_per_beat steps per beat.
std::vector<NoteEvent> quantize(const MidiSong& song, int steps_per_beat = 24);

// Encodes/decodes a MIDI variable-length quantity (at most 4 bytes).
void append_vlq(std::vector<std::uint8_t>& out, std::uint32_t value);

}  // namespace dtrack::midi
