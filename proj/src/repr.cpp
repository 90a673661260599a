#include "dtrack/repr.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtrack/error.hpp"

namespace dtrack::repr {

using nlohmann::json;

Pianoroll to_pianoroll(std::span<const midi::NoteEvent> notes, const GridConfig& config) {
  Pianoroll roll;
  roll.steps_per_beat = config.steps_per_beat;
  roll.beats_per_bar = config.beats_per_bar;
  std::int64_t end = 0;
  for (const auto& n : notes) end = std::max(end, n.onset + n.duration);
  const std::int64_t bar = config.bar_length();
  const std::int64_t length = (end + bar - 1) / bar * bar;
  roll.grid.assign(static_cast<std::size_t>(length), Frame{});
  for (const auto& n : notes) {
    for (std::int64_t t = n.onset; t < n.onset + n.duration; ++t) {
      roll.grid[static_cast<std::size_t>(t)][static_cast<std::size_t>(n.pitch)] = 1;
    }
  }
  return roll;
}

std::vector<midi::NoteEvent> from_pianoroll(const Pianoroll& roll) {
  std::vector<midi::NoteEvent> notes;
  const auto length = static_cast<std::int64_t>(roll.grid.size());
  for (int p = 0; p < kPitches; ++p) {
    std::int64_t t = 0;
    while (t < length) {
      if (!roll.grid[t][p]) {
        ++t;
        continue;
      }
      const std::int64_t start = t;
      while (t < length && roll.grid[t][p]) ++t;
      notes.push_back({p, start, t - start, 80, 0});
    }
  }
  std::sort(notes.begin(), notes.end(), midi::note_less);
  return notes;
}

std::vector<int> active_pitches(const Frame& frame) {
  std::vector<int> pitches;
  for (int p = 0; p < kPitches; ++p) {
    if (frame[p]) pitches.push_back(p);
  }
  return pitches;
}

ChordCorpus::ChordCorpus() : index_to_chord_(2) {}

int ChordCorpus::index_of(const std::vector<int>& chord) const {
  if (chord.empty()) return kRest;
  auto it = chord_to_index_.find(chord);
  return it == chord_to_index_.end() ? kUnk : it->second;
}

int ChordCorpus::add(const std::vector<int>& chord) {
  if (chord.empty()) return kRest;
  auto [it, inserted] = chord_to_index_.emplace(chord, static_cast<int>(index_to_chord_.size()));
  if (inserted) index_to_chord_.push_back(chord);
  return it->second;
}

const std::vector<int>& ChordCorpus::chord_at(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= index_to_chord_.size()) {
    throw Error(ErrorCode::Format, "chord index " + std::to_string(index) + " out of range");
  }
  return index_to_chord_[static_cast<std::size_t>(index)];
}

ChordCorpus build_corpus(std::span<const Pianoroll> rolls) {
  ChordCorpus corpus;
  for (const auto& roll : rolls) {
    for (const auto& frame : roll.grid) corpus.add(active_pitches(frame));
  }
  return corpus;
}

ChordSequence encode_chords(const Pianoroll& roll, const ChordCorpus& corpus) {
  ChordSequence seq;
  seq.reserve(roll.grid.size());
  for (const auto& frame : roll.grid) seq.push_back(corpus.index_of(active_pitches(frame)));
  return seq;
}

Pianoroll decode_chords(std::span<const int> seq, const ChordCorpus& corpus,
                        const GridConfig& config) {
  Pianoroll roll;
  roll.steps_per_beat = config.steps_per_beat;
  roll.beats_per_bar = config.beats_per_bar;
  roll.grid.assign(seq.size(), Frame{});
  for (std::size_t t = 0; t < seq.size(); ++t) {
    for (int p : corpus.chord_at(seq[t])) roll.grid[t][p] = 1;
  }
  return roll;
}

std::string corpus_to_json(const ChordCorpus& corpus) {
  json entries = json::object();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    entries[std::to_string(i)] = corpus.chords()[i];
  }
  json doc = {
      {"format", "dtrack-corpus"},
      {"version", 1},
      {"rest", ChordCorpus::kRest},
      {"unk", ChordCorpus::kUnk},
      {"size", corpus.size()},
      {"index_to_chord", entries},
  };
  return doc.dump(1);
}

ChordCorpus corpus_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, std::string("corpus JSON: ") + e.what());
  }
  if (doc.value("format", "") != "dtrack-corpus" || doc.value("rest", -1) != ChordCorpus::kRest ||
      doc.value("unk", -1) != ChordCorpus::kUnk) {
    throw Error(ErrorCode::Format, "not a chord corpus file");
  }
  const auto size = doc.at("size").get<std::size_t>();
  const json& entries = doc.at("index_to_chord");
  ChordCorpus corpus;
  for (std::size_t i = 2; i < size; ++i) {
    auto chord = entries.at(std::to_string(i)).get<std::vector<int>>();
    if (chord.empty() || !std::is_sorted(chord.begin(), chord.end()) ||
        corpus.add(chord) != static_cast<int>(i)) {
      throw Error(ErrorCode::Format, "corpus entry " + std::to_string(i) + " is invalid");
    }
  }
  return corpus;
}

void save_corpus(const std::filesystem::path& path, const ChordCorpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << corpus_to_json(corpus) << '\n';
}

ChordCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return corpus_from_json(ss.str());
}

HandSplit split_hands(std::span<const midi::NoteEvent> notes) {
  std::set<int> tracks;
  for (const auto& n : notes) tracks.insert(n.track);
  HandSplit split;
  if (tracks.size() >= 2) {
    const int right_track = *tracks.begin();
    for (const auto& n : notes) (n.track == right_track ? split.right : split.left).push_back(n);
  } else {
    for (const auto& n : notes) (n.pitch >= kHandSplitPitch ? split.right : split.left).push_back(n);
  }
  return split;
}

std::string to_string(Representation r) {
  return r == Representation::Embedding ? "embedding" : "pianoroll";
}

Representation representation_from_string(const std::string& s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
  if (lower == "embedding") return Representation::Embedding;
  if (lower == "pianoroll") return Representation::Pianoroll;
  throw Error(ErrorCode::InvalidConfig, "unknown representation '" + s + "'");
}

Sequence Sequence::of_chords(std::vector<int> chords) {
  Sequence s;
  s.repr = Representation::Embedding;
  s.chords = std::move(chords);
  return s;
}

Sequence Sequence::of_frames(std::vector<Frame> frames) {
  Sequence s;
  s.repr = Representation::Pianoroll;
  s.frames = std::move(frames);
  return s;
}

Sequence Sequence::slice(std::size_t begin, std::size_t length) const {
  Sequence s;
  s.repr = repr;
  if (repr == Representation::Embedding) {
    s.chords.assign(chords.begin() + begin, chords.begin() + begin + length);
  } else {
    s.frames.assign(frames.begin() + begin, frames.begin() + begin + length);
  }
  return s;
}

std::vector<WindowPair> window_dataset(const Sequence& seq, std::size_t in_len,
                                       std::size_t out_len, std::size_t stride) {
  if (stride == 0) stride = out_len;
  std::vector<WindowPair> pairs;
  for (std::size_t i = 0; i + in_len + out_len <= seq.size(); i += stride) {
    pairs.push_back({seq.slice(i, in_len), seq.slice(i + in_len, out_len)});
  }
  return pairs;
}

std::vector<std::uint8_t> render_pgm(const Pianoroll& roll, const RenderOptions& options) {
  const std::size_t width = roll.grid.size();
  const std::string header = "P5\n" + std::to_string(width) + " " +
                             std::to_string(kPitches) + "\n255\n";
  std::vector<std::uint8_t> image(header.begin(), header.end());
  const std::size_t offset = image.size();
  image.resize(offset + width * kPitches, options.background);
  const auto bar = static_cast<std::size_t>(roll.bar_length());
  for (int row = 0; row < kPitches; ++row) {
    const int pitch = kPitches - 1 - row;
    std::uint8_t* line = image.data() + offset + static_cast<std::size_t>(row) * width;
    for (std::size_t t = 0; t < width; ++t) {
      if (roll.grid[t][pitch]) {
        line[t] = options.active;
      } else if (options.bar_lines && bar > 0 && t > 0 && t % bar == 0) {
        line[t] = options.bar_line;
      }
    }
  }
  return image;
}

void render_pianoroll(const Pianoroll& roll, const std::filesystem::path& path,
                      const RenderOptions& options) {
  const auto image = render_pgm(roll, options);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(image.data()),
            static_cast<std::streamsize>(image.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace dtrack::repr
