#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dtrack/midi.hpp"

namespace dtrack::repr {

inline constexpr int kPitches = 128;

// One timestamp of a pianoroll: 1 where the pitch sounds.
using Frame = std::array<std::uint8_t, kPitches>;

struct GridConfig {
  int steps_per_beat = 24;
  int beats_per_bar = 3;
  int bars_per_window = 4;

  int bar_length() const { return steps_per_beat * beats_per_bar; }
  int window_length() const { return bar_length() * bars_per_window; }
};

struct Pianoroll {
  std::vector<Frame> grid;  // T x 128
  int steps_per_beat = 24;
  int beats_per_bar = 3;

  std::size_t length() const { return grid.size(); }
  int bar_length() const { return steps_per_beat * beats_per_bar; }
  std::size_t whole_bars() const { return grid.size() / static_cast<std::size_t>(bar_length()); }

  friend bool operator==(const Pianoroll&, const Pianoroll&) = default;
};

// grid[t][p] = 1 iff a note of pitch p covers step t. Length is the last note
// end rounded up to a whole bar; empty input gives T = 0.
Pianoroll to_pianoroll(std::span<const midi::NoteEvent> notes, const GridConfig& config = {});

// Maximal runs of 1s per pitch become notes (velocity 80, track 0), sorted.
std::vector<midi::NoteEvent> from_pianoroll(const Pianoroll& roll);

std::vector<int> active_pitches(const Frame& frame);

// Bijection between per-timestamp pitch sets and indices. Index 0 is the empty
// set (rest) and index 1 the unknown-chord fallback.
class ChordCorpus {
 public:
  static constexpr int kRest = 0;
  static constexpr int kUnk = 1;

  ChordCorpus();

  std::size_t size() const { return index_to_chord_.size(); }
  // Returns kRest for the empty set and kUnk for a set absent from the corpus.
  int index_of(const std::vector<int>& chord) const;
  // Adds the chord if new; returns its index.
  int add(const std::vector<int>& chord);
  // Pitch set for an index; the reserved indices decode to the empty set.
  const std::vector<int>& chord_at(int index) const;

  const std::vector<std::vector<int>>& chords() const { return index_to_chord_; }

  friend bool operator==(const ChordCorpus& a, const ChordCorpus& b) {
    return a.index_to_chord_ == b.index_to_chord_;
  }

 private:
  std::map<std::vector<int>, int> chord_to_index_;
  std::vector<std::vector<int>> index_to_chord_;
};

using ChordSequence = std::vector<int>;

// First-seen order after the reserved slots.
ChordCorpus build_corpus(std::span<const Pianoroll> rolls);

ChordSequence encode_chords(const Pianoroll& roll, const ChordCorpus& corpus);
Pianoroll decode_chords(std::span<const int> seq, const ChordCorpus& corpus,
                        const GridConfig& config = {});

void save_corpus(const std::filesystem::path& path, const ChordCorpus& corpus);
ChordCorpus load_corpus(const std::filesystem::path& path);
std::string corpus_to_json(const ChordCorpus& corpus);
ChordCorpus corpus_from_json(const std::string& text);

struct HandSplit {
  std::vector<midi::NoteEvent> right;
  std::vector<midi::NoteEvent> left;
};

inline constexpr int kHandSplitPitch = 60;

// Two or more non-empty tracks: the lowest-numbered non-empty track is the
// right hand, every other track the left. Otherwise split at middle C.
HandSplit split_hands(std::span<const midi::NoteEvent> notes);

enum class Representation { Embedding, Pianoroll };

std::string to_string(Representation r);
Representation representation_from_string(const std::string& s);

// A sequence of timestamps in one of the two representations.
struct Sequence {
  Representation repr = Representation::Pianoroll;
  std::vector<int> chords;    // Embedding
  std::vector<Frame> frames;  // Pianoroll

  static Sequence of_chords(std::vector<int> chords);
  static Sequence of_frames(std::vector<Frame> frames);

  std::size_t size() const {
    return repr == Representation::Embedding ? chords.size() : frames.size();
  }
  Sequence slice(std::size_t begin, std::size_t length) const;

  friend bool operator==(const Sequence&, const Sequence&) = default;
};

struct WindowPair {
  Sequence input;
  Sequence target;
};

// Pairs (seq[i, i+in_len), seq[i+in_len, i+in_len+out_len)) for
// i = 0, stride, 2*stride, ... A stride of 0 means stride = out_len.
std::vector<WindowPair> window_dataset(const Sequence& seq, std::size_t in_len = 288,
                                       std::size_t out_len = 288, std::size_t stride = 0);

struct RenderOptions {
  bool bar_lines = true;
  std::uint8_t background = 255;
  std::uint8_t active = 0;
  std::uint8_t bar_line = 192;
};

// Binary PGM (P5): width T, height 128, pitch 127 on the top row.
std::vector<std::uint8_t> render_pgm(const Pianoroll& roll, const RenderOptions& options = {});
void render_pianoroll(const Pianoroll& roll, const std::filesystem::path& path,
                      const RenderOptions& options = {});

}  // namespace dtrack::repr
