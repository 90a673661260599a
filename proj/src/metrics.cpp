#include "dtrack/metrics.hpp"

#include <algorithm>
#include <bitset>
#include <cstdio>
#include <exception>

#include <json.hpp>

#include "dtrack/error.hpp"

namespace dtrack::metrics {

namespace {

std::vector<int> upc_bars(const repr::Pianoroll& roll) {
  const auto bar = static_cast<std::size_t>(roll.bar_length());
  std::vector<int> per_bar;
  for (std::size_t b = 0; b < roll.whole_bars(); ++b) {
    std::bitset<12> classes;
    for (std::size_t t = b * bar; t < (b + 1) * bar; ++t) {
      for (int p = 0; p < repr::kPitches; ++p) {
        if (roll.grid[t][p]) classes.set(static_cast<std::size_t>(p % 12));
      }
    }
    per_bar.push_back(static_cast<int>(classes.count()));
  }
  return per_bar;
}

std::size_t count_qualified(std::span<const midi::NoteEvent> notes) {
  return static_cast<std::size_t>(std::count_if(notes.begin(), notes.end(), [](const auto& n) {
    return n.duration >= kQualifiedMinSteps;
  }));
}

void finalize(MetricsReport& r) {
  std::size_t total = 0;
  for (int v : r.upc_per_bar) total += static_cast<std::size_t>(v);
  r.n_bars = r.upc_per_bar.size();
  r.upc_mean = r.n_bars ? static_cast<double>(total) / static_cast<double>(r.n_bars) : 0.0;
  r.qn_ratio = r.n_notes ? static_cast<double>(r.n_qualified) / static_cast<double>(r.n_notes) : 0.0;
}

std::string percent(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * ratio);
  return buf;
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

UpcResult upc(const repr::Pianoroll& roll) {
  if (roll.whole_bars() == 0) {
    throw Error(ErrorCode::ZeroBars, "roll of " + std::to_string(roll.length()) +
                                         " steps is shorter than one bar of " +
                                         std::to_string(roll.bar_length()));
  }
  UpcResult r;
  r.per_bar = upc_bars(roll);
  double total = 0.0;
  for (int v : r.per_bar) total += v;
  r.mean = total / static_cast<double>(r.per_bar.size());
  return r;
}

double qn(std::span<const midi::NoteEvent> notes) {
  if (notes.empty()) throw Error(ErrorCode::NoNotes, "QN needs at least one note");
  return static_cast<double>(count_qualified(notes)) / static_cast<double>(notes.size());
}

MetricsReport evaluate(std::span<const repr::Pianoroll> rolls) {
  struct PerRoll {
    std::vector<int> bars;
    std::size_t notes = 0;
    std::size_t qualified = 0;
  };
  std::vector<PerRoll> parts(rolls.size());
  std::vector<std::exception_ptr> errors(rolls.size());
  const auto n = static_cast<std::ptrdiff_t>(rolls.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      parts[k].bars = upc_bars(rolls[k]);
      const auto notes = repr::from_pianoroll(rolls[k]);
      parts[k].notes = notes.size();
      parts[k].qualified = count_qualified(notes);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  MetricsReport report;
  for (const PerRoll& p : parts) {
    report.upc_per_bar.insert(report.upc_per_bar.end(), p.bars.begin(), p.bars.end());
    report.n_notes += p.notes;
    report.n_qualified += p.qualified;
  }
  finalize(report);
  if (report.n_bars == 0) throw Error(ErrorCode::ZeroBars, "no roll contains a whole bar");
  if (report.n_notes == 0) throw Error(ErrorCode::NoNotes, "the rolls contain no notes");
  return report;
}

MetricsReport combine(const MetricsReport& a, const MetricsReport& b) {
  MetricsReport r;
  r.upc_per_bar = a.upc_per_bar;
  r.upc_per_bar.insert(r.upc_per_bar.end(), b.upc_per_bar.begin(), b.upc_per_bar.end());
  r.n_notes = a.n_notes + b.n_notes;
  r.n_qualified = a.n_qualified + b.n_qualified;
  finalize(r);
  return r;
}

std::string report_to_json(const MetricsReport& report, const std::string& label) {
  nlohmann::json refs = nlohmann::json::array();
  for (const auto& row : kReferenceRows) {
    refs.push_back({{"model", row.model}, {"upc", row.upc}, {"qn", row.qn}, {"source", "published"}});
  }
  nlohmann::json doc = {
      {"model", label},
      {"upc_mean", report.upc_mean},
      {"upc_per_bar", report.upc_per_bar},
      {"qn_ratio", report.qn_ratio},
      {"n_bars", report.n_bars},
      {"n_notes", report.n_notes},
      {"n_qualified", report.n_qualified},
      {"references", refs},
  };
  return doc.dump(2);
}

std::string report_to_table(const MetricsReport& report, const std::string& label) {
  struct Line {
    std::string model, upc, qn;
  };
  std::vector<Line> lines = {{"Model", "UPC", "QN"}};
  for (const auto& row : kReferenceRows) {
    lines.push_back({std::string(row.model) + " (published)", fixed2(row.upc), percent(row.qn)});
  }
  lines.push_back({label, fixed2(report.upc_mean), percent(report.qn_ratio)});

  std::size_t w0 = 0, w1 = 0, w2 = 0;
  for (const auto& l : lines) {
    w0 = std::max(w0, l.model.size());
    w1 = std::max(w1, l.upc.size());
    w2 = std::max(w2, l.qn.size());
  }
  std::string out;
  auto pad = [](const std::string& s, std::size_t w, bool right) {
    const std::string fill(w - s.size(), ' ');
    return right ? fill + s : s + fill;
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out += pad(lines[i].model, w0, false) + " | " + pad(lines[i].upc, w1, true) + " | " +
           pad(lines[i].qn, w2, true) + "\n";
    if (i == 0) out += std::string(w0, '-') + "-+-" + std::string(w1, '-') + "-+-" +
                       std::string(w2, '-') + "\n";
  }
  out += "bars: " + std::to_string(report.n_bars) + ", notes: " + std::to_string(report.n_notes) + "\n";
  return out;
}

}  // namespace dtrack::metrics
