#include "dtrack/pipeline.hpp"

#include <algorithm>
#include <cctype>

#include <spdlog/spdlog.h>

#include "dtrack/error.hpp"

namespace dtrack::pipeline {

namespace {

bool has_midi_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".mid" || ext == ".midi";
}

}  // namespace

std::vector<fs::path> collect_midi_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    std::error_code ec;
    if (fs::is_directory(p, ec)) {
      std::vector<fs::path> found;
      for (const auto& entry : fs::directory_iterator(p)) {
        if (entry.is_regular_file() && has_midi_extension(entry.path())) found.push_back(entry.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(p, ec)) {
      files.push_back(p);
    } else {
      throw Error(ErrorCode::Io, "no such file or directory: " + in);
    }
  }
  if (files.empty()) throw Error(ErrorCode::EmptyDataset, "no MIDI files found");
  return files;
}

std::vector<Song> load_songs(const std::vector<fs::path>& files, const repr::GridConfig& grid) {
  std::vector<Song> songs;
  songs.reserve(files.size());
  for (const auto& f : files) {
    const midi::MidiSong song = midi::read_midi_file(f);
    songs.push_back({f, midi::quantize(song, grid.steps_per_beat)});
    spdlog::debug("{}: {} notes", f.string(), songs.back().notes.size());
  }
  return songs;
}

repr::Pianoroll song_roll(const Song& song, const repr::GridConfig& grid, Part part) {
  if (part == Part::All) return repr::to_pianoroll(song.notes, grid);
  const auto hands = repr::split_hands(song.notes);
  return repr::to_pianoroll(part == Part::RightHand ? hands.right : hands.left, grid);
}

repr::Sequence to_sequence(const repr::Pianoroll& roll, repr::Representation r,
                           const repr::ChordCorpus* corpus) {
  if (r == repr::Representation::Pianoroll) return repr::Sequence::of_frames(roll.grid);
  if (!corpus) throw Error(ErrorCode::InvalidConfig, "Embedding representation needs a chord corpus");
  return repr::Sequence::of_chords(repr::encode_chords(roll, *corpus));
}

repr::Sequence prefix_window(const repr::Sequence& seq, std::size_t length) {
  repr::Sequence out = seq.slice(0, std::min(length, seq.size()));
  if (out.repr == repr::Representation::Embedding) {
    out.chords.resize(length, repr::ChordCorpus::kRest);
  } else {
    out.frames.resize(length, repr::Frame{});
  }
  return out;
}

Dataset build_dataset(const std::vector<Song>& songs, const models::ModelConfig& config,
                      const repr::GridConfig& grid, std::optional<repr::ChordCorpus> corpus,
                      std::size_t stride) {
  const bool dual = config.arch == models::Arch::DualTrack;
  std::vector<repr::Pianoroll> rolls;
  Dataset out;
  for (const Song& s : songs) {
    if (!dual) {
      rolls.push_back(song_roll(s, grid));
      continue;
    }
    auto right = song_roll(s, grid, Part::RightHand);
    auto left = song_roll(s, grid, Part::LeftHand);
    const std::size_t len = std::max(right.length(), left.length());
    right.grid.resize(len);
    left.grid.resize(len);
    for (std::size_t t = 0; t < len; ++t) out.data.hand_pairs.push_back({right.grid[t], left.grid[t]});
    rolls.push_back(std::move(right));
  }
  if (config.repr == repr::Representation::Embedding) {
    out.corpus = corpus ? std::move(corpus) : repr::build_corpus(rolls);
  }
  for (const auto& roll : rolls) {
    const auto seq = to_sequence(roll, config.repr, out.corpus ? &*out.corpus : nullptr);
    auto windows = repr::window_dataset(seq, config.in_len, config.out_len, stride);
    out.data.windows.insert(out.data.windows.end(), std::make_move_iterator(windows.begin()),
                            std::make_move_iterator(windows.end()));
  }
  if (!out.data.windows.empty()) out.prime = out.data.windows.front().input;
  return out;
}

midi::MidiSong rolls_to_song(const std::vector<const repr::Pianoroll*>& tracks, int steps_per_beat) {
  midi::MidiSong song;
  song.ticks_per_beat = steps_per_beat;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (auto n : repr::from_pianoroll(*tracks[i])) {
      n.track = static_cast<int>(i);
      song.notes.push_back(n);
    }
  }
  std::sort(song.notes.begin(), song.notes.end(), midi::note_less);
  return song;
}

}  // namespace dtrack::pipeline
