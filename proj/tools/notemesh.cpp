// notemesh command-line front end.
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "notemesh/notemesh.hpp"

namespace nm = notemesh;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const fs::path& target, const std::string& data) {
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw nm::DatasetError("cannot write " + tmp.string());
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw nm::DatasetError("cannot write " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::vector<std::string> split_csv(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

nm::Subdivision subdivision_arg(const std::string& name) {
  if (auto s = nm::parse_subdivision(name)) return *s;
  throw UsageError("unknown subdivision '" + name + "'");
}

nm::Key key_arg(const std::string& text) {
  try {
    return nm::parse_key(text);
  } catch (const nm::KeyParseError& e) {
    throw UsageError(e.what());
  }
}

int int_arg(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("invalid " + what + " '" + text + "'");
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// --- analyze ---------------------------------------------------------------

struct AnalyzeArgs {
  std::string file;
  std::string json_out;
  std::string quantize;
};

int cmd_analyze(const AnalyzeArgs& args) {
  nm::Score score = nm::load_midi_file(args.file);
  if (!args.quantize.empty()) score = nm::quantize(score, subdivision_arg(args.quantize));

  std::cout << "file: " << args.file << "\n";
  std::cout << "tpqn: " << score.tpqn << "\n";
  std::cout << "tempo:";
  for (const auto& t : score.tempo_map) std::cout << " " << fmt(t.bpm) << " bpm@" << t.tick;
  std::cout << "\ntime signatures:";
  for (const auto& t : score.time_sig_map) {
    std::cout << " " << t.time_sig.numerator << "/" << t.time_sig.denominator << "@" << t.tick;
  }
  std::cout << "\ninstruments: " << score.instruments.size() << "\n";
  std::vector<nm::Note> all;
  for (std::size_t i = 0; i < score.instruments.size(); ++i) {
    const auto& inst = score.instruments[i];
    std::cout << "  [" << i << "] " << (inst.is_drum ? "drums" : "program " + std::to_string(inst.program));
    if (!inst.name.empty()) std::cout << " \"" << inst.name << "\"";
    std::cout << " notes: " << inst.notes.size() << " bars: " << inst.bars.size() << "\n";
    all.insert(all.end(), inst.notes.begin(), inst.notes.end());
  }
  std::cout << "notes: " << all.size() << "\n";

  try {
    const nm::Key key = nm::detect_key(score);
    std::cout << "key: " << nm::key_to_string(key) << "\n";
  } catch (const nm::EmptyScore&) {
    std::cout << "key: n/a\n";
  }
  try {
    std::cout << "time signature numerator estimate: " << nm::estimate_ts_numerator(all, score.tpqn) << "\n";
  } catch (const nm::InsufficientData&) {
    std::cout << "time signature numerator estimate: n/a\n";
  }
  for (nm::FeatureKind k : nm::kAllFeatureKinds) {
    if (nm::feature_size(k) != 1) continue;
    std::cout << nm::feature_code(k) << ": " << fmt(nm::extract_feature(score, k).scalar()) << "\n";
  }

  if (!args.json_out.empty()) write_file_atomic(args.json_out, nm::to_json(score, 2) + "\n");
  return kExitOk;
}

// --- tokenize --------------------------------------------------------------

struct TokenizeArgs {
  std::string path;
  std::string out_dir;
  int time_unit = 24;
  std::string quantize;
};

int cmd_tokenize(const TokenizeArgs& args) {
  if (args.time_unit < 1) throw UsageError("--time-unit must be positive");
  std::optional<nm::Subdivision> quant;
  if (!args.quantize.empty()) quant = subdivision_arg(args.quantize);
  nm::TokenizerConfig config;
  config.time_unit_per_quarter = args.time_unit;
  config.max_time_delta = 4 * args.time_unit;

  const nm::DatasetSpec spec = nm::resolve_dataset(args.path);
  const bool single = fs::is_regular_file(args.path);
  const fs::path out_root(args.out_dir);

  std::vector<std::string> errors(spec.files.size());
  nm::parallel_for(spec.files.size(), nm::worker_count(), [&](std::size_t i) {
    const fs::path& file = spec.files[i];
    try {
      nm::Score score = nm::load_midi_file(file.string());
      if (quant) score = nm::quantize(score, *quant);
      const nm::TokenSeq seq = nm::tokenize(score, config);
      fs::path rel = single ? file.filename() : file.lexically_relative(spec.root);
      rel.replace_extension(".txt");
      write_file_atomic(out_root / rel, nm::tokens_to_txt(seq) + "\n");
    } catch (const nm::Error& e) {
      errors[i] = e.kind() + ": " + e.what();
    } catch (const std::exception& e) {
      errors[i] = file.string() + ": " + e.what();
    }
  });

  std::size_t ok = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) {
      ++ok;
    } else {
      std::cerr << errors[i] << "\n";
    }
  }
  if (ok == 0) {
    std::cerr << "no file tokenized under " << args.path << "\n";
    return kExitError;
  }
  std::string vocab;
  for (const auto& t : nm::vocabulary(config)) vocab += t + "\n";
  write_file_atomic(out_root / "vocab.txt", vocab);
  std::cout << "tokenized " << ok << " of " << spec.files.size() << " files into " << args.out_dir << "\n";
  return kExitOk;
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string dir_a;
  std::string dir_b;
  std::string features;
  std::string out;
  std::string plots;
  std::string granularity = "file";
};

int cmd_eval(const EvalArgs& args) {
  std::vector<nm::FeatureKind> kinds;
  if (args.features.empty()) {
    kinds.assign(nm::kAllFeatureKinds.begin(), nm::kAllFeatureKinds.end());
  } else {
    for (const auto& code : split_csv(args.features)) {
      auto k = nm::parse_feature_code(code);
      if (!k) throw UsageError("unknown feature code '" + code + "'");
      if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
    }
  }
  const auto granularity = args.granularity == "bar" ? nm::Granularity::bar : nm::Granularity::file;

  const nm::EvalReport report = nm::cross_validate(args.dir_a, args.dir_b, kinds, granularity);
  write_file_atomic(args.out, nm::report_to_json(report).dump(2) + "\n");
  if (!args.plots.empty()) {
    for (const auto& f : report.features) {
      write_file_atomic(fs::path(args.plots) / (std::string(nm::feature_code(f.kind)) + ".svg"),
                        nm::render_pdf_svg(f));
    }
  }
  std::cout << "samples: " << report.n_a << " vs " << report.n_b << "\n";
  std::cout << "feature  oa_a_inter  kld_a_inter  oa_b_inter  kld_b_inter\n";
  for (const auto& f : report.features) {
    char line[128];
    std::snprintf(line, sizeof line, "%-7s  %10.4f  %11.4f  %10.4f  %11.4f\n",
                  std::string(nm::feature_code(f.kind)).c_str(), f.oa_a_inter, f.kld_a_inter, f.oa_b_inter,
                  f.kld_b_inter);
    std::cout << line;
  }
  return kExitOk;
}

// --- plot ------------------------------------------------------------------

struct PlotArgs {
  std::string file;
  std::string bars;
  std::string subdivision = "quarter";
  int track = 0;
  std::string out;
  bool no_bar_labels = false;
  int width = 1200;
  int height = 480;
};

int cmd_plot(const PlotArgs& args) {
  nm::PlotOptions opts;
  opts.subdivision = subdivision_arg(args.subdivision);
  if (args.track < 0) throw UsageError("--track must be non-negative");
  opts.track_index = static_cast<std::size_t>(args.track);
  opts.show_bar_labels = !args.no_bar_labels;
  if (args.width < 64 || args.height < 64) throw UsageError("--width/--height must be at least 64");
  opts.width_px = args.width;
  opts.height_px = args.height;
  if (!args.bars.empty()) {
    const auto colon = args.bars.find(':');
    if (colon == std::string::npos) throw UsageError("--bars expects a:b");
    const std::string a = args.bars.substr(0, colon);
    const std::string b = args.bars.substr(colon + 1);
    opts.first_bar = a.empty() ? 0 : int_arg(a, "bar index");
    if (!b.empty()) opts.last_bar = int_arg(b, "bar index");
  }
  const nm::Score score = nm::load_midi_file(args.file);
  write_file_atomic(args.out, nm::render_pianoroll_svg(score, opts));
  return kExitOk;
}

// --- transpose -------------------------------------------------------------

struct TransposeArgs {
  std::string file;
  std::string source_key;
  std::string target_key;
  std::string degrees = "0";
  std::string out;
};

int cmd_transpose(const TransposeArgs& args) {
  const nm::Key source = key_arg(args.source_key);
  const nm::Key target = key_arg(args.target_key);
  std::vector<int> degrees;
  for (const auto& d : split_csv(args.degrees)) degrees.push_back(int_arg(d, "degree offset"));
  const nm::Score score = nm::load_midi_file(args.file);
  const nm::Score moved = nm::transpose_by_degrees(score, source, target, degrees);
  const nm::Bytes bytes = nm::write_midi(moved);
  write_file_atomic(args.out, std::string(bytes.begin(), bytes.end()));
  return kExitOk;
}

// --- key-detect ------------------------------------------------------------

int cmd_key_detect(const std::string& file) {
  const nm::Score score = nm::load_midi_file(file);
  const nm::Key key = nm::detect_key(score);
  const nm::KeySignature sig = nm::key_signature(key);
  std::cout << nm::key_to_string(key) << " (" << sig.count << " "
            << (sig.kind == nm::AccidentalKind::sharp ? "sharps"
                : sig.kind == nm::AccidentalKind::flat ? "flats"
                                                        : "accidentals")
            << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"notemesh: symbolic music toolkit"};
  app.set_version_flag("--version", nm::kVersion);
  app.require_subcommand(1);
  std::function<int()> run;

  AnalyzeArgs analyze;
  auto* sc_analyze = app.add_subcommand("analyze", "Summarize a MIDI file");
  sc_analyze->add_option("file", analyze.file, "MIDI file")->required();
  sc_analyze->add_option("--json", analyze.json_out, "Write the score as JSON");
  sc_analyze->add_option("--quantize", analyze.quantize, "Quantize to a subdivision first");
  sc_analyze->callback([&] { run = [&] { return cmd_analyze(analyze); }; });

  TokenizeArgs tok;
  auto* sc_tok = app.add_subcommand("tokenize", "Write MMM token files for a file or dataset directory");
  sc_tok->add_option("path", tok.path, "MIDI file or directory")->required();
  sc_tok->add_option("--out", tok.out_dir, "Output directory")->required();
  sc_tok->add_option("--time-unit", tok.time_unit, "Time units per quarter note");
  sc_tok->add_option("--quantize", tok.quantize, "Quantize to a subdivision first");
  sc_tok->callback([&] { run = [&] { return cmd_tokenize(tok); }; });

  EvalArgs ev;
  auto* sc_eval = app.add_subcommand("eval", "Cross-validate two datasets");
  sc_eval->add_option("dir_a", ev.dir_a, "First dataset")->required();
  sc_eval->add_option("dir_b", ev.dir_b, "Second dataset")->required();
  sc_eval->add_option("--features", ev.features, "Comma-separated feature codes (default: all)");
  sc_eval->add_option("--out", ev.out, "Report JSON path")->required();
  sc_eval->add_option("--plots", ev.plots, "Directory for per-feature PDF plots");
  sc_eval->add_option("--granularity", ev.granularity, "Sample unit: file or bar")
      ->check(CLI::IsMember({"file", "bar"}));
  sc_eval->callback([&] { run = [&] { return cmd_eval(ev); }; });

  PlotArgs plot;
  auto* sc_plot = app.add_subcommand("plot", "Render a pianoroll to SVG");
  sc_plot->add_option("file", plot.file, "MIDI file")->required();
  sc_plot->add_option("--bars", plot.bars, "Bar range a:b (end exclusive)");
  sc_plot->add_option("--subdivision", plot.subdivision, "Grid subdivision");
  sc_plot->add_option("--track", plot.track, "Instrument index");
  sc_plot->add_option("--out", plot.out, "SVG path")->required();
  sc_plot->add_flag("--no-bar-labels", plot.no_bar_labels, "Hide bar numbers");
  sc_plot->add_option("--width", plot.width, "Width in pixels");
  sc_plot->add_option("--height", plot.height, "Height in pixels");
  sc_plot->callback([&] { run = [&] { return cmd_plot(plot); }; });

  TransposeArgs tr;
  auto* sc_tr = app.add_subcommand("transpose", "Move scale degrees into another key");
  sc_tr->add_option("file", tr.file, "MIDI file")->required();
  sc_tr->add_option("--source-key", tr.source_key, "Key of the input, e.g. c_major")->required();
  sc_tr->add_option("--target-key", tr.target_key, "Key of the output, e.g. a_minor")->required();
  sc_tr->add_option("--degrees", tr.degrees, "Per-bar degree offsets, comma-separated");
  sc_tr->add_option("--out", tr.out, "Output MIDI path")->required();
  sc_tr->callback([&] { run = [&] { return cmd_transpose(tr); }; });

  std::string key_file;
  auto* sc_key = app.add_subcommand("key-detect", "Print the detected global key");
  sc_key->add_option("file", key_file, "MIDI file")->required();
  sc_key->callback([&] { run = [&] { return cmd_key_detect(key_file); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
  }

  try {
    return run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const nm::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
