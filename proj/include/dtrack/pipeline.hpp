#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtrack/midi.hpp"
#include "dtrack/models.hpp"
#include "dtrack/repr.hpp"
#include "dtrack/train.hpp"

namespace dtrack::pipeline {

namespace fs = std::filesystem;

// Expands directories (non-recursive, *.mid / *.midi, sorted) and keeps
// explicit files as given. Throws EmptyDataset when nothing is found.
std::vector<fs::path> collect_midi_files(const std::vector<std::string>& inputs);

struct Song {
  fs::path path;
  std::vector<midi::NoteEvent> notes;  // quantized to grid steps
};

std::vector<Song> load_songs(const std::vector<fs::path>& files, const repr::GridConfig& grid);

// Roll of all tracks, or of one hand for dual-track use.
enum class Part { All, RightHand, LeftHand };
repr::Pianoroll song_roll(const Song& song, const repr::GridConfig& grid, Part part = Part::All);

// Sequence in the model's representation; Embedding needs the corpus.
repr::Sequence to_sequence(const repr::Pianoroll& roll, repr::Representation r,
                           const repr::ChordCorpus* corpus);

// First `length` steps of seq, padded with rests.
repr::Sequence prefix_window(const repr::Sequence& seq, std::size_t length);

struct Dataset {
  train::TrainData data;
  std::optional<repr::ChordCorpus> corpus;
  std::optional<repr::Sequence> prime;  // input of the first window
};

// Windows from every song (right hand only for dual-track models, which
// also get per-timestamp hand pairs). Embedding models use `corpus` when
// given, else one built from the training rolls. stride 0 means out_len.
Dataset build_dataset(const std::vector<Song>& songs, const models::ModelConfig& config,
                      const repr::GridConfig& grid, std::optional<repr::ChordCorpus> corpus,
                      std::size_t stride = 0);

midi::MidiSong rolls_to_song(const std::vector<const repr::Pianoroll*>& tracks, int steps_per_beat);

}  // namespace dtrack::pipeline
