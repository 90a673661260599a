// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <sys/wait.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "dtrack/config_io.hpp"
#include "dtrack/grad_suite.hpp"
#include "dtrack/log.hpp"
#include "dtrack/metrics.hpp"
#include "dtrack/midi.hpp"
#include "dtrack/pipeline.hpp"
#include "dtrack/repr.hpp"
#include "dtrack/sample.hpp"
#include "dtrack/train.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace dtrack;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome gradient_suite() {
  Outcome o;
  double worst_prim = 0.0, worst_model = 0.0;
  for (const auto& c : primitive_suite(1, 10)) {
    worst_prim = std::max(worst_prim, c.max_rel_error);
    if (!c.passed() || c.tolerance > kPrimitiveTolerance) {
      o.pass = false;
      o.detail += c.name + " ";
    }
  }
  for (const auto& c : model_suite(1)) {
    worst_model = std::max(worst_model, c.max_rel_error);
    if (!c.passed() || c.tolerance > kModelTolerance) {
      o.pass = false;
      o.detail += c.name + " ";
    }
  }
  o.detail += fmt("worst primitive %.2e (< 1e-4), worst architecture %.2e (< 1e-3)", worst_prim, worst_model);
  return o;
}

double chi_square_p(const std::vector<long>& counts, const std::vector<double>& probs, long n) {
  double stat = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = static_cast<double>(n) * probs[i];
    stat += (counts[i] - e) * (counts[i] - e) / e;
  }
  const boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

Outcome gumbel_equivalence() {
  Outcome o;
  std::mt19937_64 gen(2);
  std::normal_distribution<double> normal(0.0, 1.5);
  Rng rng(3);
  double min_p = 1.0;
  const long draws = 100000;
  for (std::size_t v = 2; v <= 8; ++v) {
    std::vector<double> logits(v);
    for (auto& x : logits) x = normal(gen);
    std::vector<double> p(v);
    double total = 0.0;
    for (std::size_t i = 0; i < v; ++i) total += p[i] = std::exp(logits[i]);
    for (auto& x : p) x /= total;
    std::vector<long> counts(v, 0);
    for (long i = 0; i < draws; ++i) ++counts[sample::gumbel_pick(logits, 1.0, rng)];
    const double pv = chi_square_p(counts, p, draws);
    min_p = std::min(min_p, pv);
    if (!(pv > 1e-3)) o.pass = false;
  }
  o.detail = fmt("smallest chi-square p over vocab 2..8 = %.4f (> 0.001)", min_p);
  return o;
}

Outcome teacher_forcing_rate() {
  Rng rng(4);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += train::tf_decide(0.2, rng);
  const double frac = hits / 10000.0;
  return {frac >= 0.18 && frac <= 0.22, fmt("true fraction %.4f in [0.18, 0.22]", frac)};
}

Outcome round_trips() {
  Outcome o;
  std::mt19937_64 gen(5);
  int midi_ok = 0, roll_ok = 0, chord_ok = 0, chord_total = 0;
  for (int i = 0; i < 100; ++i) {
    midi::MidiSong s;
    s.ticks_per_beat = std::uniform_int_distribution<int>(24, 960)(gen);
    const int n = std::uniform_int_distribution<int>(1, 80)(gen);
    for (int k = 0; k < n; ++k) {
      s.notes.push_back({static_cast<int>(gen() % 128), static_cast<std::int64_t>(gen() % 10000),
                         1 + static_cast<std::int64_t>(gen() % 500), 1 + static_cast<int>(gen() % 127),
                         static_cast<int>(gen() % 3)});
    }
    midi::normalize(s);
    midi_ok += midi::parse_midi(midi::write_midi(s)).notes == s.notes;
  }
  for (int i = 0; i < 500; ++i) {
    repr::Pianoroll r = testing::random_roll(gen, 72 * (1 + gen() % 4), 0.3 * (gen() % 1000) / 1000.0);
    r.grid.back()[gen() % 128] = 1;
    roll_ok += repr::to_pianoroll(repr::from_pianoroll(r)) == r;
  }
  const repr::GridConfig grid;
  const auto songs = pipeline::load_songs(pipeline::collect_midi_files({testing::data_dir().string()}), grid);
  std::vector<repr::Pianoroll> rolls;
  for (const auto& s : songs) {
    for (auto part : {pipeline::Part::All, pipeline::Part::RightHand, pipeline::Part::LeftHand})
      rolls.push_back(pipeline::song_roll(s, grid, part));
  }
  const auto corpus = repr::build_corpus(rolls);
  for (const auto& r : rolls) {
    ++chord_total;
    chord_ok += repr::decode_chords(repr::encode_chords(r, corpus), corpus, grid) == r;
  }
  o.pass = midi_ok == 100 && roll_ok == 500 && chord_ok == chord_total;
  o.detail = fmt("midi %d/100, pianoroll %d/500, chords %d/%d", midi_ok, roll_ok, chord_ok, chord_total);
  return o;
}

Outcome memorization() {
  const repr::GridConfig grid;
  const auto songs = pipeline::load_songs({testing::data_dir() / "minuet_in_g.mid"}, grid);
  repr::Pianoroll roll = pipeline::song_roll(songs.at(0), grid, pipeline::Part::All);
  roll.grid.resize(8 * 72);
  const auto corpus = repr::build_corpus(std::vector<repr::Pianoroll>{roll});

  models::ModelConfig mc;
  mc.arch = models::Arch::SimpleLstm;
  mc.repr = repr::Representation::Embedding;
  mc.hidden_size = 64;
  mc.embedding_size = 32;
  mc.corpus_size = corpus.size();
  train::TrainData data;
  data.windows = repr::window_dataset(pipeline::to_sequence(roll, mc.repr, &corpus), 288, 288);
  if (data.windows.size() != 1) return {false, "phrase did not yield one window"};

  models::Model model = models::Model::build(mc, 7);
  train::TrainConfig tc;
  tc.epochs = 200;
  tc.lr = 5e-4;
  tc.seed = 7;
  tc.tf_schedule = {{0, 0.0}};
  int reached = -1;
  double acc = 0.0;
  const auto report = train::train(model, data, tc, [&](int epoch, double) {
    if (reached < 0 && (epoch + 1) % 10 == 0 && train::teacher_forced_accuracy(model, data.windows) > 0.95) {
      reached = epoch + 1;
    }
  });
  acc = train::teacher_forced_accuracy(model, data.windows);
  int ups = 0, span = 0;
  for (std::size_t e = 21; e < report.epoch_loss.size(); ++e, ++span) ups += report.epoch_loss[e] > report.epoch_loss[e - 1];
  const bool monotone = ups <= 0.05 * span;
  return {acc > 0.95 && monotone,
          fmt("accuracy %.4f after 200 epochs (> 0.95, first reached by epoch %d), %d/%d loss upticks after epoch 20",
              acc, reached, ups, span)};
}

Outcome metric_oracles() {
  std::mt19937_64 gen(6);
  int upc_ok = 0, qn_ok = 0, qn_cases = 0;
  bool ranges = true;
  for (int i = 0; i < 1000; ++i) {
    const auto r = testing::random_roll(gen, 72 + gen() % 300, 0.4 * (gen() % 1000) / 1000.0);
    std::vector<int> brute;
    for (std::size_t b = 0; b < r.whole_bars(); ++b) {
      std::set<int> cls;
      for (std::size_t t = 72 * b; t < 72 * (b + 1); ++t)
        for (int p = 0; p < 128; ++p)
          if (r.grid[t][p]) cls.insert(p % 12);
      brute.push_back(static_cast<int>(cls.size()));
    }
    const auto u = metrics::upc(r);
    upc_ok += u.per_bar == brute;
    for (int v : u.per_bar) ranges &= v >= 0 && v <= 12;
    std::size_t notes = 0, good = 0;
    for (int p = 0; p < 128; ++p) {
      std::size_t run = 0;
      for (std::size_t t = 0; t <= r.length(); ++t) {
        if (t < r.length() && r.grid[t][p]) {
          ++run;
        } else if (run) {
          ++notes;
          good += run >= 3;
          run = 0;
        }
      }
    }
    if (notes == 0) continue;
    ++qn_cases;
    const double q = metrics::qn(repr::from_pianoroll(r));
    qn_ok += q == static_cast<double>(good) / static_cast<double>(notes);
    ranges &= q >= 0.0 && q <= 1.0;
  }
  const std::vector<midi::NoteEvent> boundary = {{60, 0, 3, 80, 0}, {62, 0, 2, 80, 0}};
  const bool three_qualifies = metrics::qn(boundary) == 0.5;
  return {upc_ok == 1000 && qn_ok == qn_cases && ranges && three_qualifies,
          fmt("upc exact %d/1000, qn exact %d/%d, ranges %s, duration 3 qualifies %s", upc_ok, qn_ok, qn_cases,
              ranges ? "ok" : "violated", three_qualifies ? "yes" : "no")};
}

Outcome window_arithmetic() {
  const repr::GridConfig g;
  const models::ModelConfig mc;
  const auto pairs = repr::window_dataset(repr::Sequence::of_chords(std::vector<int>(576, 0)));
  const bool ok = g.bar_length() == 72 && g.window_length() == 288 && mc.in_len == 288 && mc.out_len == 288 &&
                  pairs.size() == 1 && pairs[0].input.size() == 288 && pairs[0].target.size() == 288;
  return {ok, fmt("bar %d steps, window %d steps, default model windows %zu/%zu", g.bar_length(),
                  g.window_length(), mc.in_len, mc.out_len)};
}

int sh(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DTRACK_CLI_PATH) + " " + args + " >> " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
  const fs::path dir = testing::scratch_dir("acceptance_e2e");
  const fs::path log = dir / "log.txt";
  const std::string data = testing::data_dir().string();
  std::vector<std::string> failures;
  auto step = [&](const std::string& name, const std::string& args) {
    const int rc = sh(args, log);
    if (rc != 0) failures.push_back(name + " exit " + std::to_string(rc));
  };
  step("ingest", "ingest " + data + " --json " + (dir / "ingest.json").string());
  const auto ingest = io::read_json_file(dir / "ingest.json");
  const std::size_t files = ingest.contains("files") ? ingest["files"].size() : 0;
  if (files < 2) failures.push_back("ingested " + std::to_string(files) + " files");
  step("train", "train --arch cnn-attn-enc-dec --repr pianoroll --data " + data + " --epochs 20 --seed 7 --out " +
                    (dir / "cnn.dtck").string());
  std::string gen_files;
  for (const char* s : {"greedy", "topk", "gumbel"}) {
    const fs::path out = dir / (std::string(s) + ".mid");
    step(std::string("generate ") + s, "generate --checkpoint " + (dir / "cnn.dtck").string() + " --strategy " + s +
                                          " --length 288 --seed 7 --out " + out.string());
    try {
      midi::read_midi_file(out);
    } catch (const std::exception& e) {
      failures.push_back(std::string(s) + " output does not parse");
    }
    gen_files += " " + out.string();
  }
  step("evaluate", "evaluate" + gen_files + " --label CNN --json " + (dir / "report.json").string());
  std::string detail;
  if (fs::exists(dir / "report.json")) {
    const auto rep = io::read_json_file(dir / "report.json");
    const double upc = rep["upc_mean"], qn = rep["qn_ratio"];
    bool in_range = upc >= 0 && upc <= 12 && qn >= 0 && qn <= 1;
    for (int v : rep["upc_per_bar"]) in_range &= v >= 0 && v <= 12;
    if (!in_range) failures.push_back("report out of range");
    detail = fmt("%zu files ingested, UPC %.2f, QN %.3f over %d notes", files, upc, qn, rep["n_notes"].get<int>());
  }
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

Outcome dual_track_contract() {
  const repr::GridConfig grid;
  const auto songs = pipeline::load_songs(pipeline::collect_midi_files({testing::data_dir().string()}), grid);
  models::ModelConfig mc;
  mc.arch = models::Arch::DualTrack;
  mc.generator_arch = models::Arch::EncDec;
  mc.repr = repr::Representation::Pianoroll;
  mc.hidden_size = 32;
  mc.mlp_hidden = 64;
  mc.in_len = 72;
  mc.out_len = 72;
  const auto ds = pipeline::build_dataset(songs, mc, grid, std::nullopt, 0);
  models::Model model = models::Model::build(mc, 9);
  const ParameterSet mlp_before = model.mlp_params();
  train::TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;
  const auto report = train::train(model, ds.data, tc);
  const bool frozen = report.generator_checksum_around_mlp &&
                      report.generator_checksum_around_mlp->first == report.generator_checksum_around_mlp->second;
  const bool mlp_moved = !(model.mlp_params() == mlp_before);

  std::size_t mismatches = 0, steps = 0;
  for (auto strategy : {sample::Strategy::Greedy, sample::Strategy::TopK, sample::Strategy::Gumbel}) {
    const auto out = sample::dual_track_generate(
        model, *ds.prime, sample::SampleConfig{.strategy = strategy, .length = 288, .seed = 9}, grid);
    for (std::size_t t = 0; t < out.merged.length(); ++t, ++steps)
      for (int p = 0; p < 128; ++p)
        mismatches += out.merged.grid[t][p] != (out.right.grid[t][p] | out.left.grid[t][p]);
  }
  return {frozen && mlp_moved && mismatches == 0 && steps == 3 * 288,
          fmt("generator checksum %016llx before/after MLP phase %s, %zu OR mismatches over %zu steps",
              static_cast<unsigned long long>(report.generator_checksum_around_mlp ? report.generator_checksum_around_mlp->first : 0),
              frozen ? "equal" : "differ", mismatches, steps)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", 60, gradient_suite},
      {2, "gumbel-max equivalence", 10, gumbel_equivalence},
      {3, "teacher-forcing rate", 1, teacher_forcing_rate},
      {4, "round trips", 30, round_trips},
      {5, "memorization oracle", 300, memorization},
      {6, "metric oracles", 60, metric_oracles},
      {7, "window arithmetic", 1, window_arithmetic},
      {8, "end-to-end smoke", 900, end_to_end},
      {9, "dual-track contract", 300, dual_track_contract},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s criterion %d (%s): %s [%.1f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id,
                c.name.c_str(), o.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
