#include "dtrack/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "dtrack/config_io.hpp"
#include "dtrack/grad_suite.hpp"
#include "dtrack/log.hpp"
#include "dtrack/manifest.hpp"
#include "dtrack/metrics.hpp"
#include "dtrack/pipeline.hpp"
#include "dtrack/sample.hpp"

namespace dtrack::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridOptions {
  int steps_per_beat = 24;
  int beats_per_bar = 3;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--steps-per-beat", steps_per_beat, "Grid steps per beat")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--beats-per-bar", beats_per_bar, "Beats per bar")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }
  repr::GridConfig grid() const {
    repr::GridConfig g;
    g.steps_per_beat = steps_per_beat;
    g.beats_per_bar = beats_per_bar;
    return g;
  }
  Json to_json() const { return {{"steps_per_beat", steps_per_beat}, {"beats_per_bar", beats_per_bar}}; }
};

void ensure_writable(const fs::path& path, bool force) {
  if (!force && fs::exists(path)) {
    throw UsageError("refusing to overwrite " + path.string() + " (pass --force)");
  }
}

void record_artifact(const std::string& manifest, ArtifactRecord artifact,
                     const std::vector<std::string>& corpus_paths = {}, const std::string& representation = {}) {
  if (manifest.empty()) return;
  auto m = ProjectManifest::load(manifest);
  for (const auto& p : corpus_paths) {
    if (std::find(m.corpus_paths.begin(), m.corpus_paths.end(), p) == m.corpus_paths.end()) {
      m.corpus_paths.push_back(p);
    }
  }
  if (!representation.empty()) m.representation = representation;
  m.record(std::move(artifact));
  m.save(manifest);
}

std::vector<std::string> path_strings(const std::vector<fs::path>& files) {
  std::vector<std::string> out;
  for (const auto& f : files) out.push_back(f.string());
  return out;
}

Json sequence_to_json(const repr::Sequence& seq) {
  if (seq.repr == repr::Representation::Embedding) return seq.chords;
  Json frames = Json::array();
  for (const auto& f : seq.frames) frames.push_back(repr::active_pitches(f));
  return frames;
}

repr::Sequence sequence_from_json(const Json& j, repr::Representation r) {
  if (r == repr::Representation::Embedding) return repr::Sequence::of_chords(j.get<std::vector<int>>());
  std::vector<repr::Frame> frames;
  for (const auto& pitches : j) {
    repr::Frame f{};
    for (int p : pitches.get<std::vector<int>>()) {
      if (p < 0 || p >= repr::kPitches) throw Error(ErrorCode::Format, "pitch out of range in prime");
      f[static_cast<std::size_t>(p)] = 1;
    }
    frames.push_back(f);
  }
  return repr::Sequence::of_frames(std::move(frames));
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
  std::ostringstream out;
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < losses.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, losses[e]);
    out << buf;
  }
  io::write_text_file(path, out.str());
}

// ---------------------------------------------------------------- ingest

struct IngestOptions {
  std::vector<std::string> inputs;
  GridOptions grid;
  std::string json_out;
  std::string manifest;
  bool force = false;
};

int cmd_ingest(const IngestOptions& o) {
  if (!o.json_out.empty()) ensure_writable(o.json_out, o.force);
  const auto grid = o.grid.grid();
  const auto files = pipeline::collect_midi_files(o.inputs);
  const auto songs = pipeline::load_songs(files, grid);

  Json per_file = Json::array();
  std::size_t total_notes = 0, total_bars = 0;
  std::vector<repr::Pianoroll> rolls;
  std::printf("%-40s %7s %6s %7s %5s %6s %6s\n", "file", "notes", "tracks", "steps", "bars", "right", "left");
  for (const auto& s : songs) {
    std::set<int> tracks;
    for (const auto& n : s.notes) tracks.insert(n.track);
    const auto roll = pipeline::song_roll(s, grid);
    const auto hands = repr::split_hands(s.notes);
    std::printf("%-40s %7zu %6zu %7zu %5zu %6zu %6zu\n", s.path.filename().string().c_str(), s.notes.size(),
                tracks.size(), roll.length(), roll.whole_bars(), hands.right.size(), hands.left.size());
    per_file.push_back({{"path", s.path.string()},
                        {"notes", s.notes.size()},
                        {"tracks", tracks.size()},
                        {"steps", roll.length()},
                        {"bars", roll.whole_bars()},
                        {"right_notes", hands.right.size()},
                        {"left_notes", hands.left.size()}});
    total_notes += s.notes.size();
    total_bars += roll.whole_bars();
    rolls.push_back(roll);
  }
  const auto corpus = repr::build_corpus(rolls);
  std::printf("files: %zu, notes: %zu, bars: %zu, distinct chords: %zu (bar = %d steps, window = %d steps)\n",
              songs.size(), total_notes, total_bars, corpus.size() - 2, grid.bar_length(), grid.window_length());

  if (!o.json_out.empty()) {
    Json stats = {{"grid", o.grid.to_json()},
                  {"files", per_file},
                  {"total_notes", total_notes},
                  {"total_bars", total_bars},
                  {"distinct_chords", corpus.size() - 2}};
    io::write_text_file(o.json_out, stats.dump(2) + "\n");
    record_artifact(o.manifest, {"ingest-stats", o.json_out, io::config_hash(o.grid.to_json()), path_strings(files)},
                    path_strings(files));
  }
  return kOk;
}

// ---------------------------------------------------------- build-corpus

struct CorpusOptions {
  std::vector<std::string> inputs;
  GridOptions grid;
  std::string out;
  std::string manifest;
  bool force = false;
};

int cmd_build_corpus(const CorpusOptions& o) {
  ensure_writable(o.out, o.force);
  const auto grid = o.grid.grid();
  const auto files = pipeline::collect_midi_files(o.inputs);
  std::vector<repr::Pianoroll> rolls;
  for (const auto& s : pipeline::load_songs(files, grid)) rolls.push_back(pipeline::song_roll(s, grid));
  const auto corpus = repr::build_corpus(rolls);
  repr::save_corpus(o.out, corpus);
  std::printf("corpus: %zu entries (%zu chords + rest + unk) -> %s\n", corpus.size(), corpus.size() - 2,
              o.out.c_str());
  record_artifact(o.manifest, {"corpus", o.out, io::config_hash(o.grid.to_json()), path_strings(files)},
                  path_strings(files), "embedding");
  return kOk;
}

// ----------------------------------------------------------------- train

struct TrainOptions {
  std::string arch;
  std::string repr;
  std::string config;
  std::string model_config;
  std::vector<std::string> data;
  std::string out;
  std::string loss_csv;
  std::string corpus;
  std::string manifest;
  std::uint64_t seed = 0;
  GridOptions grid;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;
  std::optional<double> clip_norm;
  std::optional<std::string> dual_track_mode;
  std::optional<std::string> generator_arch;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> embedding_size;
  std::optional<std::size_t> mlp_hidden;
  std::optional<std::size_t> in_len;
  std::optional<std::size_t> out_len;
  std::size_t stride = 0;
  bool force = false;
};

int cmd_train(const TrainOptions& o) {
  const fs::path out(o.out);
  const fs::path csv = o.loss_csv.empty() ? fs::path(o.out + ".loss.csv") : fs::path(o.loss_csv);
  const fs::path mlp_csv = fs::path(o.out + ".mlp-loss.csv");
  ensure_writable(out, o.force);
  ensure_writable(io::sidecar_path(out), o.force);
  ensure_writable(csv, o.force);

  const auto grid = o.grid.grid();
  models::ModelConfig mc = o.model_config.empty() ? models::ModelConfig{}
                                                  : io::model_config_from_json(io::read_json_file(o.model_config));
  if (o.model_config.empty()) {
    mc.in_len = mc.out_len = static_cast<std::size_t>(grid.window_length());
  }
  mc.arch = models::arch_from_string(o.arch);
  mc.repr = repr::representation_from_string(o.repr);
  if (o.generator_arch) mc.generator_arch = models::arch_from_string(*o.generator_arch);
  if (o.hidden) mc.hidden_size = *o.hidden;
  if (o.embedding_size) mc.embedding_size = *o.embedding_size;
  if (o.mlp_hidden) mc.mlp_hidden = *o.mlp_hidden;
  if (o.in_len) mc.in_len = *o.in_len;
  if (o.out_len) mc.out_len = *o.out_len;

  train::TrainConfig tc = o.config.empty() ? train::TrainConfig{}
                                           : io::train_config_from_json(io::read_json_file(o.config));
  tc.seed = o.seed;
  if (o.epochs) tc.epochs = *o.epochs;
  if (o.lr) tc.lr = *o.lr;
  if (o.batch_size) tc.batch_size = *o.batch_size;
  if (o.clip_norm) tc.clip_norm = *o.clip_norm;
  if (o.dual_track_mode) tc.dual_track_mode = train::dual_track_mode_from_string(*o.dual_track_mode);
  train::validate(tc);

  const auto files = pipeline::collect_midi_files(o.data);
  const auto songs = pipeline::load_songs(files, grid);
  std::optional<repr::ChordCorpus> corpus;
  if (!o.corpus.empty()) corpus = repr::load_corpus(o.corpus);
  auto dataset = pipeline::build_dataset(songs, mc, grid, std::move(corpus), o.stride);
  if (dataset.data.windows.empty()) {
    throw Error(ErrorCode::EmptyDataset, "no training windows: every piece is shorter than " +
                                             std::to_string(mc.in_len + mc.out_len) + " steps");
  }
  if (dataset.corpus) mc.corpus_size = dataset.corpus->size();

  auto model = models::Model::build(mc, tc.seed);
  model.corpus = dataset.corpus;
  spdlog::info("training {} ({}) on {} windows from {} files, {} parameters", models::to_string(mc.arch),
               repr::to_string(mc.repr), dataset.data.windows.size(), files.size(),
               model.generator_params().scalar_count() + model.mlp_params().scalar_count());
  const auto report = train::train(model, dataset.data, tc, [&](int epoch, double loss) {
    spdlog::info("epoch {} loss {:.6f}", epoch, loss);
  });

  const Json model_json = io::to_json(mc);
  const Json train_json = io::to_json(tc);
  const std::string hash = io::config_hash({{"model", model_json}, {"train", train_json}, {"grid", o.grid.to_json()}});
  Json extra = {{"train", train_json}, {"grid", o.grid.to_json()}, {"config_hash", hash}, {"inputs", path_strings(files)}};
  if (dataset.prime) extra["prime"] = sequence_to_json(*dataset.prime);
  io::save_model(out, model, extra);
  write_loss_csv(csv, report.epoch_loss);
  if (model.is_dual_track()) write_loss_csv(mlp_csv, report.mlp_epoch_loss);

  const std::string final_loss = report.epoch_loss.empty() ? "n/a" : std::to_string(report.epoch_loss.back());
  std::printf("trained %d epochs in %.1fs, final loss %s -> %s\n", tc.epochs, report.wall_seconds,
              final_loss.c_str(), out.string().c_str());
  if (report.generator_checksum_around_mlp) {
    const auto [before, after] = *report.generator_checksum_around_mlp;
    std::printf("generator checksum around MLP phase: %016llx -> %016llx\n",
                static_cast<unsigned long long>(before), static_cast<unsigned long long>(after));
  }
  const auto inputs = path_strings(files);
  record_artifact(o.manifest, {"checkpoint", out.string(), hash, inputs}, inputs, repr::to_string(mc.repr));
  record_artifact(o.manifest, {"loss-csv", csv.string(), hash, {out.string()}});
  return kOk;
}

// -------------------------------------------------------------- generate

struct GenerateOptions {
  std::string checkpoint;
  std::string strategy = "gumbel";
  double scale = 1.0;
  std::size_t k = 5;
  std::size_t length = 288;
  double threshold = 0.5;
  std::size_t rest_cutoff = 144;
  std::uint64_t seed = 0;
  std::string prime;
  std::string out;
  std::string pgm;
  std::string manifest;
  bool force = false;
};

int cmd_generate(const GenerateOptions& o) {
  ensure_writable(o.out, o.force);
  if (!o.pgm.empty()) ensure_writable(o.pgm, o.force);

  const Json side = io::read_sidecar(o.checkpoint);
  const auto model = io::load_model(o.checkpoint);
  const auto& mc = model.config();
  repr::GridConfig grid;
  if (side.contains("grid")) {
    grid.steps_per_beat = side["grid"].value("steps_per_beat", grid.steps_per_beat);
    grid.beats_per_bar = side["grid"].value("beats_per_bar", grid.beats_per_bar);
  }

  sample::SampleConfig sc;
  sc.strategy = sample::strategy_from_string(o.strategy);
  sc.gumbel_scale = o.scale;
  sc.k = o.k;
  sc.length = o.length;
  sc.pianoroll_threshold = o.threshold;
  sc.rest_cutoff = o.rest_cutoff;
  sc.seed = o.seed;
  sample::validate(sc);

  repr::Sequence seed_window;
  if (!o.prime.empty()) {
    const auto songs = pipeline::load_songs({fs::path(o.prime)}, grid);
    const auto part = model.is_dual_track() ? pipeline::Part::RightHand : pipeline::Part::All;
    const auto roll = pipeline::song_roll(songs.front(), grid, part);
    const auto seq = pipeline::to_sequence(roll, mc.repr, model.corpus ? &*model.corpus : nullptr);
    seed_window = pipeline::prefix_window(seq, mc.in_len);
  } else if (side.contains("prime")) {
    seed_window = pipeline::prefix_window(sequence_from_json(side["prime"], mc.repr), mc.in_len);
  } else {
    seed_window = mc.repr == repr::Representation::Embedding
                      ? repr::Sequence::of_chords(std::vector<int>(mc.in_len, repr::ChordCorpus::kRest))
                      : repr::Sequence::of_frames(std::vector<repr::Frame>(mc.in_len));
  }

  midi::MidiSong song;
  repr::Pianoroll rendered;
  bool saturated = false;
  if (model.is_dual_track()) {
    const auto result = sample::dual_track_generate(model, seed_window, sc, grid);
    song = pipeline::rolls_to_song({&result.right, &result.left}, grid.steps_per_beat);
    rendered = result.merged;
    saturated = result.saturated;
  } else {
    const auto result = sample::generate(model, seed_window, sc);
    rendered = sample::to_roll(model, result.output, grid);
    song = pipeline::rolls_to_song({&rendered}, grid.steps_per_beat);
    saturated = result.saturated;
  }
  midi::write_midi_file(o.out, song);
  if (!o.pgm.empty()) repr::render_pianoroll(rendered, o.pgm);

  std::printf("generated %zu steps, %zu notes, strategy %s%s -> %s\n", sc.length, song.notes.size(),
              sample::to_string(sc.strategy).c_str(), saturated ? " (saturated: long rest run)" : "",
              o.out.c_str());
  const std::string hash =
      io::config_hash({{"sample", io::to_json(sc)}, {"checkpoint", side.value("config_hash", "")}});
  record_artifact(o.manifest, {"midi", o.out, hash, {o.checkpoint}});
  if (!o.pgm.empty()) record_artifact(o.manifest, {"image", o.pgm, hash, {o.checkpoint}});
  return kOk;
}

// -------------------------------------------------------------- evaluate

struct EvaluateOptions {
  std::vector<std::string> inputs;
  GridOptions grid;
  std::string label = "Generated";
  std::string json_out;
  std::string manifest;
  bool force = false;
};

int cmd_evaluate(const EvaluateOptions& o) {
  if (!o.json_out.empty()) ensure_writable(o.json_out, o.force);
  const auto grid = o.grid.grid();
  const auto files = pipeline::collect_midi_files(o.inputs);
  std::vector<repr::Pianoroll> rolls;
  for (const auto& s : pipeline::load_songs(files, grid)) rolls.push_back(pipeline::song_roll(s, grid));
  const auto report = metrics::evaluate(rolls);
  std::fputs(metrics::report_to_table(report, o.label).c_str(), stdout);
  if (!o.json_out.empty()) {
    io::write_text_file(o.json_out, metrics::report_to_json(report, o.label) + "\n");
    record_artifact(o.manifest, {"report", o.json_out, io::config_hash(o.grid.to_json()), path_strings(files)});
  }
  return kOk;
}

// ---------------------------------------------------------------- render

struct RenderOptions {
  std::string input;
  std::string out;
  GridOptions grid;
  bool no_bar_lines = false;
  std::string manifest;
  bool force = false;
};

int cmd_render(const RenderOptions& o) {
  ensure_writable(o.out, o.force);
  const auto grid = o.grid.grid();
  const auto songs = pipeline::load_songs({fs::path(o.input)}, grid);
  const auto roll = pipeline::song_roll(songs.front(), grid);
  repr::RenderOptions ro;
  ro.bar_lines = !o.no_bar_lines;
  repr::render_pianoroll(roll, o.out, ro);
  std::printf("rendered %zu x %d -> %s\n", roll.length(), repr::kPitches, o.out.c_str());
  record_artifact(o.manifest, {"image", o.out, io::config_hash(o.grid.to_json()), {o.input}});
  return kOk;
}

// ------------------------------------------------------------- gradcheck

struct GradcheckOptions {
  std::uint64_t seed = 1;
  int trials = 10;
  bool primitives_only = false;
};

int cmd_gradcheck(const GradcheckOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  auto cases = primitive_suite(o.seed, o.trials);
  if (!o.primitives_only) {
    auto models = model_suite(o.seed);
    cases.insert(cases.end(), models.begin(), models.end());
  }
  bool ok = true;
  std::printf("%-28s %12s %9s %8s\n", "case", "max rel err", "tolerance", "result");
  for (const auto& c : cases) {
    std::printf("%-28s %12.3e %9.0e %8s\n", c.name.c_str(), c.max_rel_error, c.tolerance,
                c.passed() ? "ok" : "FAILED");
    ok = ok && c.passed();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%zu cases, %s, %.1fs\n", cases.size(), ok ? "all passed" : "FAILURES", secs);
  return ok ? kOk : kNumeric;
}

}  // namespace

ExitCode exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteValue:
    case ErrorCode::NonFiniteLoss:
      return kNumeric;
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidRate:
    case ErrorCode::InvalidK:
      return kUsage;
    default:
      return kData;
  }
}

int run(const std::vector<std::string>& args) {
  init_logging();
  CLI::App app{"Dual-track symbolic music generation toolkit", "dtrack"};
  app.require_subcommand(1);

  IngestOptions ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Parse and quantize MIDI files and report statistics");
  c_ingest->add_option("inputs", ingest.inputs, "MIDI files or directories")->required();
  ingest.grid.add_to(c_ingest);
  c_ingest->add_option("--json", ingest.json_out, "Write statistics as JSON");
  c_ingest->add_option("--manifest", ingest.manifest, "Project manifest to update");
  c_ingest->add_flag("--force", ingest.force, "Overwrite existing outputs");

  CorpusOptions corpus;
  auto* c_corpus = app.add_subcommand("build-corpus", "Build the chord corpus JSON from MIDI files");
  c_corpus->add_option("inputs", corpus.inputs, "MIDI files or directories")->required();
  c_corpus->add_option("--out", corpus.out, "Corpus JSON path")->required();
  corpus.grid.add_to(c_corpus);
  c_corpus->add_option("--manifest", corpus.manifest, "Project manifest to update");
  c_corpus->add_flag("--force", corpus.force, "Overwrite existing outputs");

  TrainOptions tr;
  auto* c_train = app.add_subcommand("train", "Train a model; writes checkpoint, sidecar JSON and loss CSV");
  c_train->add_option("--arch", tr.arch, "simple-lstm | enc-dec | attn-enc-dec | cnn-attn-enc-dec | dual-track")
      ->required();
  c_train->add_option("--repr", tr.repr, "embedding | pianoroll")->required();
  c_train->add_option("--data", tr.data, "MIDI files or directories")->required();
  c_train->add_option("--out", tr.out, "Checkpoint path")->required();
  c_train->add_option("--seed", tr.seed, "Seed for initialization, shuffling and teacher forcing")->required();
  c_train->add_option("--config", tr.config, "Train config JSON (flags override it)");
  c_train->add_option("--model-config", tr.model_config, "Model config JSON (flags override it)");
  c_train->add_option("--loss-csv", tr.loss_csv, "Loss curve CSV (default <out>.loss.csv)");
  c_train->add_option("--corpus", tr.corpus, "Chord corpus JSON (Embedding; default built from data)");
  c_train->add_option("--epochs", tr.epochs, "Epochs");
  c_train->add_option("--lr", tr.lr, "Adam learning rate");
  c_train->add_option("--batch-size", tr.batch_size, "Windows per batch");
  c_train->add_option("--clip-norm", tr.clip_norm, "Global gradient norm clip");
  c_train->add_option("--dual-track-mode", tr.dual_track_mode, "sequential | joint");
  c_train->add_option("--generator-arch", tr.generator_arch, "Right-hand generator of a dual-track model");
  c_train->add_option("--hidden", tr.hidden, "LSTM hidden size");
  c_train->add_option("--embedding-size", tr.embedding_size, "Chord embedding size");
  c_train->add_option("--mlp-hidden", tr.mlp_hidden, "Hidden width of the left-hand MLP");
  c_train->add_option("--in-len", tr.in_len, "Input window steps");
  c_train->add_option("--out-len", tr.out_len, "Target window steps");
  c_train->add_option("--stride", tr.stride, "Window stride (0: out-len)");
  tr.grid.add_to(c_train);
  c_train->add_option("--manifest", tr.manifest, "Project manifest to update");
  c_train->add_flag("--force", tr.force, "Overwrite existing outputs");

  GenerateOptions gen;
  auto* c_gen = app.add_subcommand("generate", "Generate music from a checkpoint and write MIDI");
  c_gen->add_option("--checkpoint", gen.checkpoint, "Checkpoint path")->required();
  c_gen->add_option("--seed", gen.seed, "Sampling seed")->required();
  c_gen->add_option("--out", gen.out, "Output MIDI path")->required();
  c_gen->add_option("--strategy", gen.strategy, "greedy | topk | gumbel")->capture_default_str();
  c_gen->add_option("--scale", gen.scale, "Gumbel noise scale")->capture_default_str();
  c_gen->add_option("--k", gen.k, "Top-k size")->capture_default_str();
  c_gen->add_option("--length", gen.length, "Steps to generate")->capture_default_str();
  c_gen->add_option("--threshold", gen.threshold, "Pianoroll activation threshold")->capture_default_str();
  c_gen->add_option("--rest-cutoff", gen.rest_cutoff, "Rest steps that end generation (0: off)")
      ->capture_default_str();
  c_gen->add_option("--prime", gen.prime, "MIDI whose opening window seeds the encoder");
  c_gen->add_option("--pgm", gen.pgm, "Also render the output as PGM");
  c_gen->add_option("--manifest", gen.manifest, "Project manifest to update");
  c_gen->add_flag("--force", gen.force, "Overwrite existing outputs");

  EvaluateOptions ev;
  auto* c_eval = app.add_subcommand("evaluate", "Report UPC and QN for MIDI files");
  c_eval->add_option("inputs", ev.inputs, "MIDI files or directories")->required();
  ev.grid.add_to(c_eval);
  c_eval->add_option("--label", ev.label, "Model name in the report")->capture_default_str();
  c_eval->add_option("--json", ev.json_out, "Write the report as JSON");
  c_eval->add_option("--manifest", ev.manifest, "Project manifest to update");
  c_eval->add_flag("--force", ev.force, "Overwrite existing outputs");

  RenderOptions rd;
  auto* c_render = app.add_subcommand("render", "Render a MIDI file as a PGM pianoroll image");
  c_render->add_option("input", rd.input, "MIDI file")->required();
  c_render->add_option("--out", rd.out, "Output PGM path")->required();
  rd.grid.add_to(c_render);
  c_render->add_flag("--no-bar-lines", rd.no_bar_lines, "Omit bar lines");
  c_render->add_option("--manifest", rd.manifest, "Project manifest to update");
  c_render->add_flag("--force", rd.force, "Overwrite existing outputs");

  GradcheckOptions gc;
  auto* c_grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  c_grad->add_option("--seed", gc.seed, "Seed for random shapes and values")->capture_default_str();
  c_grad->add_option("--trials", gc.trials, "Random trials per primitive")->capture_default_str();
  c_grad->add_flag("--primitives-only", gc.primitives_only, "Skip the per-architecture checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (c_ingest->parsed()) return cmd_ingest(ingest);
    if (c_corpus->parsed()) return cmd_build_corpus(corpus);
    if (c_train->parsed()) return cmd_train(tr);
    if (c_gen->parsed()) return cmd_generate(gen);
    if (c_eval->parsed()) return cmd_evaluate(ev);
    if (c_render->parsed()) return cmd_render(rd);
    if (c_grad->parsed()) return cmd_gradcheck(gc);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace dtrack::cli
