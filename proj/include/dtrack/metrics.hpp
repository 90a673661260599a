#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtrack/midi.hpp"
#include "dtrack/repr.hpp"

namespace dtrack::metrics {

// Notes of at least this many grid steps count as qualified.
inline constexpr std::int64_t kQualifiedMinSteps = 3;

struct ReferenceRow {
  std::string_view model;
  double upc;
  double qn;
};

// Published comparison rows, displayed next to computed results. They are not
// recomputed here.
inline constexpr ReferenceRow kTrueMusic{"True Music", 9.83, 0.987};
inline constexpr ReferenceRow kMuseGan{"MuseGAN", 4.57, 0.64};
inline constexpr ReferenceRow kReferenceRows[] = {kTrueMusic, kMuseGan};

struct UpcResult {
  std::vector<int> per_bar;
  double mean = 0.0;
};

// Distinct pitch classes (pitch mod 12) among active cells of each whole bar.
// A trailing partial bar is ignored. Throws ZeroBars when the roll is shorter
// than one bar.
UpcResult upc(const repr::Pianoroll& roll);

// Fraction of notes lasting >= 3 steps. Throws NoNotes on empty input.
double qn(std::span<const midi::NoteEvent> notes);

struct MetricsReport {
  std::vector<int> upc_per_bar;
  double upc_mean = 0.0;
  double qn_ratio = 0.0;
  std::size_t n_bars = 0;
  std::size_t n_notes = 0;
  std::size_t n_qualified = 0;
};

// Bar-weighted UPC and note-weighted QN across all rolls. Rolls shorter than
// a bar contribute notes but no bars. Throws ZeroBars / NoNotes when the
// whole collection has no bars / no notes.
MetricsReport evaluate(std::span<const repr::Pianoroll> rolls);

// Aggregate of two reports as if evaluated on the concatenated roll lists.
MetricsReport combine(const MetricsReport& a, const MetricsReport& b);

std::string report_to_json(const MetricsReport& report, const std::string& label);
// Aligned text table: Model | UPC | QN, with the reference rows first.
std::string report_to_table(const MetricsReport& report, const std::string& label);

}  // namespace dtrack::metrics
