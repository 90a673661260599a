#include "dtrack/midi.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <tuple>

#include <spdlog/spdlog.h>

#include "dtrack/error.hpp"

namespace dtrack::midi {

namespace {

constexpr int kPercussionChannel = 9;

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  bool done() const { return pos_ >= data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  std::uint8_t peek() const {
    need(1);
    return data_[pos_];
  }
  std::uint16_t u16be() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>((data_[pos_] << 8) | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_ + i];
    pos_ += 4;
    return v;
  }
  std::uint32_t vlq() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      std::uint8_t b = u8();
      v = (v << 7) | (b & 0x7F);
      if ((b & 0x80) == 0) return v;
    }
    throw Error(ErrorCode::Format, "variable-length quantity longer than 4 bytes");
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  void skip(std::size_t n) { take(n); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) {
      throw Error(ErrorCode::TruncatedChunk, "unexpected end of data");
    }
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

bool has_tag(std::span<const std::uint8_t> bytes, const char* tag) {
  return bytes.size() >= 4 && std::equal(bytes.begin(), bytes.begin() + 4, tag);
}

struct OpenNote {
  std::int64_t onset;
  int velocity;
};

void parse_track(std::span<const std::uint8_t> data, int track_index,
                 std::vector<NoteEvent>& notes) {
  ByteReader in(data);
  std::int64_t now = 0;
  std::uint8_t running = 0;
  // (channel, pitch) -> FIFO of open note-ons
  std::map<std::pair<int, int>, std::deque<OpenNote>> open;

  auto close_note = [&](int channel, int pitch) {
    auto it = open.find({channel, pitch});
    if (it == open.end() || it->second.empty()) {
      spdlog::debug("track {}: unmatched note-off pitch {} at tick {}, dropped",
                    track_index, pitch, now);
      return;
    }
    OpenNote on = it->second.front();
    it->second.pop_front();
    const std::int64_t duration = now - on.onset;
    if (duration <= 0) {
      spdlog::debug("track {}: zero-length note pitch {} at tick {}, dropped",
                    track_index, pitch, now);
      return;
    }
    if (channel == kPercussionChannel) return;
    notes.push_back({pitch, on.onset, duration, on.velocity, track_index});
  };

  while (!in.done()) {
    now += in.vlq();
    std::uint8_t status = in.peek();
    if (status & 0x80) {
      in.u8();
    } else {
      if (running == 0) {
        throw Error(ErrorCode::Format, "data byte without running status");
      }
      status = running;
    }

    if (status == 0xFF) {
      const std::uint8_t type = in.u8();
      const std::uint32_t len = in.vlq();
      in.skip(len);
      if (type == 0x2F) break;
      continue;
    }
    if (status == 0xF0 || status == 0xF7) {
      in.skip(in.vlq());
      running = 0;
      continue;
    }
    if (status >= 0xF0) {
      throw Error(ErrorCode::Format, "unexpected system message in track");
    }

    running = status;
    const int kind = status & 0xF0;
    const int channel = status & 0x0F;
    switch (kind) {
      case 0x80: {
        const int pitch = in.u8() & 0x7F;
        in.u8();
        close_note(channel, pitch);
        break;
      }
      case 0x90: {
        const int pitch = in.u8() & 0x7F;
        const int velocity = in.u8() & 0x7F;
        if (velocity == 0) {
          close_note(channel, pitch);
        } else {
          open[{channel, pitch}].push_back({now, velocity});
        }
        break;
      }
      case 0xA0:
      case 0xB0:
      case 0xE0:
        in.skip(2);
        break;
      case 0xC0:
      case 0xD0:
        in.skip(1);
        break;
      default:
        break;
    }
  }

  for (auto& [key, pending] : open) {
    for (const OpenNote& on : pending) {
      const std::int64_t duration = now - on.onset;
      if (duration > 0 && key.first != kPercussionChannel) {
        spdlog::debug("track {}: note pitch {} never released, closed at end of track",
                      track_index, key.second);
        notes.push_back({key.second, on.onset, duration, on.velocity, track_index});
      }
    }
  }
}

void put_u16be(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
  }
}

}  // namespace

bool note_less(const NoteEvent& a, const NoteEvent& b) {
  return std::tie(a.onset, a.pitch, a.track, a.duration, a.velocity) <
         std::tie(b.onset, b.pitch, b.track, b.duration, b.velocity);
}

void normalize(MidiSong& song) {
  std::sort(song.notes.begin(), song.notes.end(), note_less);
  std::vector<NoteEvent> merged;
  merged.reserve(song.notes.size());
  // (track, pitch) -> index of the last note kept for it
  std::map<std::pair<int, int>, std::size_t> last;
  for (const NoteEvent& n : song.notes) {
    auto it = last.find({n.track, n.pitch});
    if (it != last.end()) {
      NoteEvent& prev = merged[it->second];
      const std::int64_t prev_end = prev.onset + prev.duration;
      if (n.onset < prev_end) {
        prev.duration = std::max(prev_end, n.onset + n.duration) - prev.onset;
        continue;
      }
    }
    last[{n.track, n.pitch}] = merged.size();
    merged.push_back(n);
  }
  song.notes = std::move(merged);
}

MidiSong parse_midi(std::span<const std::uint8_t> bytes) {
  if (!has_tag(bytes, "MThd")) {
    throw Error(ErrorCode::MalformedHeader, "missing MThd magic");
  }
  ByteReader in(bytes);
  in.skip(4);
  const std::uint32_t header_len = in.u32be();
  if (header_len < 6) {
    throw Error(ErrorCode::MalformedHeader, "header chunk shorter than 6 bytes");
  }
  auto header = ByteReader(in.take(header_len));
  const int format = header.u16be();
  const int ntracks = header.u16be();
  const std::uint16_t division = header.u16be();
  if (format == 2) {
    throw Error(ErrorCode::UnsupportedFormat, "SMF format 2 is not supported");
  }
  if (format > 2) {
    throw Error(ErrorCode::MalformedHeader, "unknown SMF format " + std::to_string(format));
  }
  if (division & 0x8000) {
    throw Error(ErrorCode::UnsupportedFormat, "SMPTE time division is not supported");
  }
  if (division == 0) {
    throw Error(ErrorCode::MalformedHeader, "zero ticks per beat");
  }

  MidiSong song;
  song.format = format;
  song.ticks_per_beat = division;

  int track_index = 0;
  while (!in.done() && track_index < ntracks) {
    if (in.remaining() < 8) {
      throw Error(ErrorCode::TruncatedChunk, "partial chunk header");
    }
    auto tag = in.take(4);
    const std::uint32_t len = in.u32be();
    if (len > in.remaining()) {
      throw Error(ErrorCode::TruncatedChunk, "chunk length exceeds file size");
    }
    auto body = in.take(len);
    if (!has_tag(tag, "MTrk")) continue;
    parse_track(body, format == 0 ? 0 : track_index, song.notes);
    ++track_index;
  }
  if (track_index < ntracks) {
    spdlog::debug("header announces {} tracks, found {}", ntracks, track_index);
  }
  normalize(song);
  return song;
}

void append_vlq(std::vector<std::uint8_t>& out, std::uint32_t value) {
  std::array<std::uint8_t, 5> buf{};
  int n = 0;
  buf[n++] = value & 0x7F;
  while ((value >>= 7) != 0) buf[n++] = static_cast<std::uint8_t>((value & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

std::vector<std::uint8_t> write_midi(const MidiSong& song) {
  int max_track = 0;
  for (const NoteEvent& n : song.notes) max_track = std::max(max_track, n.track);
  const int ntracks = max_track + 1;

  std::vector<std::uint8_t> out;
  out.insert(out.end(), {'M', 'T', 'h', 'd'});
  put_u32be(out, 6);
  put_u16be(out, 1);
  put_u16be(out, static_cast<std::uint16_t>(ntracks));
  put_u16be(out, static_cast<std::uint16_t>(song.ticks_per_beat));

  struct Event {
    std::int64_t tick;
    int order;  // note-offs sort before note-ons at the same tick
    int pitch;
    int velocity;
  };

  for (int t = 0; t < ntracks; ++t) {
    std::vector<Event> events;
    for (const NoteEvent& n : song.notes) {
      if (n.track != t) continue;
      events.push_back({n.onset, 1, n.pitch, n.velocity});
      events.push_back({n.onset + n.duration, 0, n.pitch, 0});
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
      return std::tie(a.tick, a.order, a.pitch) < std::tie(b.tick, b.order, b.pitch);
    });

    std::vector<std::uint8_t> body;
    if (t == 0) {
      // tempo 120 bpm
      body.insert(body.end(), {0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20});
    }
    std::int64_t now = 0;
    for (const Event& e : events) {
      append_vlq(body, static_cast<std::uint32_t>(e.tick - now));
      now = e.tick;
      // note-offs are note-ons with velocity 0, so one status byte covers the
      // whole track via running status
      if (&e == &events.front()) body.push_back(0x90);
      body.push_back(static_cast<std::uint8_t>(e.pitch));
      body.push_back(static_cast<std::uint8_t>(e.velocity));
    }
    body.insert(body.end(), {0x00, 0xFF, 0x2F, 0x00});

    out.insert(out.end(), {'M', 'T', 'r', 'k'});
    put_u32be(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
  }
  return out;
}

MidiSong read_midi_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse_midi(bytes);
}

void write_midi_file(const std::filesystem::path& path, const MidiSong& song) {
  const auto bytes = write_midi(song);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

std::int64_t rescale_round_even(std::int64_t value, std::int64_t num, std::int64_t den) {
  const std::int64_t scaled = value * num;
  std::int64_t q = scaled / den;
  const std::int64_t r2 = 2 * (scaled % den);
  if (r2 > den || (r2 == den && (q % 2 != 0))) ++q;
  return q;
}

std::vector<NoteEvent> quantize(const MidiSong& song, int steps_per_beat) {
  std::vector<NoteEvent> out;
  out.reserve(song.notes.size());
  for (NoteEvent n : song.notes) {
    n.onset = rescale_round_even(n.onset, steps_per_beat, song.ticks_per_beat);
    n.duration = std::max<std::int64_t>(
        1, rescale_round_even(n.duration, steps_per_beat, song.ticks_per_beat));
    out.push_back(n);
  }
  return out;
}

}  // namespace dtrack::midi
