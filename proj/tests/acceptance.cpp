#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "test_support.hpp"

using namespace notemesh;
using namespace testsupport;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail = why;
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[96];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Outcome midi_round_trip() {
  Outcome o;
  std::mt19937_64 rng(20240501);
  const auto t0 = Clock::now();
  for (int i = 0; i < 500; ++i) {
    const Score s = random_midi_score(rng);
    std::size_t notes = 0;
    for (const auto& inst : s.instruments) notes += inst.notes.size();
    if (s.instruments.size() > 4 || notes > 64) o.fail("generator out of bounds");
    const auto same = same_serialized_fields(s, parse_midi(write_midi(s)));
    if (!same) o.fail("score " + std::to_string(i) + ": " + same.message());
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 10.0) o.fail(fmt("took %.2f s", elapsed));
  if (o.pass) o.detail = "500 scores in " + fmt("%.3f s", elapsed);
  return o;
}

Outcome corpus_robustness() {
  Outcome o;
  std::size_t files = 0, parsed = 0, rejected = 0;
  for (const auto& e : fs::recursive_directory_iterator(fixtures_dir())) {
    if (e.path().extension() != ".mid") continue;
    ++files;
    try {
      load_midi_file(e.path().string());
      ++parsed;
    } catch (const FormatError&) {
      ++rejected;
    } catch (const std::exception& ex) {
      o.fail(e.path().filename().string() + " threw untyped " + ex.what());
    }
  }
  if (files != 20) o.fail("expected 20 fixture files, found " + std::to_string(files));
  if (rejected != 5) o.fail("expected 5 FormatErrors, got " + std::to_string(rejected));
  if (o.pass) o.detail = std::to_string(parsed) + " parsed, " + std::to_string(rejected) + " FormatError";
  return o;
}

Outcome tokenizer_round_trip() {
  Outcome o;
  const auto vocab = vocabulary(TokenizerConfig{});
  if (vocab.size() != 486) o.fail("vocabulary size " + std::to_string(vocab.size()));
  const std::set<std::string> known(vocab.begin(), vocab.end());
  std::mt19937_64 rng(77);
  for (int i = 0; i < 500; ++i) {
    const Score s = random_grid_score(rng);
    const TokenSeq seq = tokenize(s);
    for (const auto& t : seq.tokens) {
      if (!known.count(t)) o.fail("token outside vocabulary: " + t);
    }
    const Score back = detokenize(seq);
    if (back.instruments.size() != s.instruments.size()) {
      o.fail("score " + std::to_string(i) + ": instrument count");
      continue;
    }
    for (std::size_t k = 0; k < s.instruments.size(); ++k) {
      if (note_multiset(back.instruments[k]) != note_multiset(s.instruments[k])) {
        o.fail("score " + std::to_string(i) + " instrument " + std::to_string(k) + ": note multiset differs");
      }
    }
  }
  if (o.pass) o.detail = "500 scores, vocabulary 486";
  return o;
}

Outcome feature_normalization() {
  Outcome o;
  std::mt19937_64 rng(4242);
  const auto sums_to_one = [](const std::vector<double>& v) {
    return std::abs(std::accumulate(v.begin(), v.end(), 0.0) - 1.0) <= 1e-9;
  };
  const auto all_zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  for (int i = 0; i < 1000; ++i) {
    const int tpqn = 96;
    const auto notes = random_notes(rng, tpqn);
    const auto tag = "set " + std::to_string(i) + ": ";
    const bool empty = notes.empty();
    const bool no_transitions = notes.size() < 2;
    for (FeatureKind k : {FeatureKind::PCH, FeatureKind::NLH}) {
      const auto v = compute_feature(notes, k, tpqn).data;
      if (!(empty ? all_zero(v) : sums_to_one(v))) o.fail(tag + std::string(feature_code(k)));
    }
    for (FeatureKind k : {FeatureKind::PCTM, FeatureKind::NLTM}) {
      const auto v = compute_feature(notes, k, tpqn).data;
      if (!(no_transitions ? all_zero(v) : sums_to_one(v))) o.fail(tag + std::string(feature_code(k)));
    }
    const auto pch = compute_feature(notes, FeatureKind::PCH, tpqn).data;

    const double pr = compute_feature(notes, FeatureKind::PR, tpqn).scalar();
    const double pi = compute_feature(notes, FeatureKind::PI, tpqn).scalar();
    const double pc = compute_feature(notes, FeatureKind::PC, tpqn).scalar();
    const double nc = compute_feature(notes, FeatureKind::NC, tpqn).scalar();
    if (pr < 0) o.fail(tag + "PR < 0");
    if (pi < 0) o.fail(tag + "PI < 0");
    if (pc > nc || pc > 128) o.fail(tag + "PC bounds");

    auto shifted = notes;
    std::uniform_int_distribution<int> octave(-10, 10);
    for (auto& n : shifted) {
      int p = n.pitch + 12 * octave(rng);
      while (p < 0) p += 12;
      while (p > 127) p -= 12;
      n.pitch = p;
    }
    if (compute_feature(shifted, FeatureKind::PCH, tpqn).data != pch) o.fail(tag + "PCH octave invariance");
  }
  if (o.pass) o.detail = "1000 note sets";
  return o;
}

Outcome eval_math() {
  Outcome o;
  std::mt19937_64 rng(9001);
  for (int i = 0; i < 100; ++i) {
    std::uniform_int_distribution<int> n(2, 200);
    std::lognormal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(static_cast<std::size_t>(n(rng)));
    for (auto& x : v) x = d(rng);
    const Pdf p = estimate_pdf(v);
    const double oa = overlap_area(p, p);
    const double kl = kl_divergence(p, p);
    if (std::abs(oa - 1.0) > 1e-3) o.fail(fmt("OA(p,p) = %.6f", oa));
    if (kl > 1e-6) o.fail(fmt("KLD(p,p) = %.3g", kl));
  }

  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> s0(10000), s1(10000), s2(10000);
  for (auto& x : s0) x = z(rng);
  for (auto& x : s1) x = z(rng) + 1.0;
  for (auto& x : s2) x = z(rng) + 2.0;
  const double oa = overlap_area(estimate_pdf(s0), estimate_pdf(s2));
  const double kl = kl_divergence(estimate_pdf(s0), estimate_pdf(s1));
  if (std::abs(oa - 0.317) > 0.02) o.fail(fmt("Gaussian OA %.4f", oa));
  if (std::abs(kl - 0.5) > 0.05) o.fail(fmt("Gaussian KLD %.4f", kl));

  std::vector<FeatureValue> a, b;
  for (int i = 0; i < 7; ++i) a.push_back({FeatureKind::PR, {static_cast<double>(i)}});
  for (int i = 0; i < 5; ++i) b.push_back({FeatureKind::PR, {static_cast<double>(i) * 2}});
  if (intra_set_distances(a).values.size() != 21) o.fail("intra count");
  if (inter_set_distances(a, b).values.size() != 35) o.fail("inter count");

  if (o.pass) o.detail = fmt("Gaussian OA %.4f", oa) + fmt(", KLD %.4f", kl);
  return o;
}

std::vector<Note> repeated_pitch(std::mt19937_64& rng, int pitch) {
  std::uniform_int_distribution<int> len(1, 4);
  std::vector<Note> notes;
  Tick t = 0;
  for (int k = 0; k < 16; ++k) {
    const Tick d = 24 * len(rng);
    notes.push_back(make_note(pitch, t, t + d));
    t += d;
  }
  return notes;
}

Outcome self_comparison() {
  Outcome o;
  const fs::path dir = scratch_dir("acceptance_self");
  // ten files from three source pieces, each piece appearing several times
  std::mt19937_64 rng(3);
  std::vector<Score> pieces;
  for (int i = 0; i < 3; ++i) pieces.push_back(random_grid_score(rng, 96));
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "piece_%02d.mid", i);
    write_bytes(dir / "d" / name, write_midi(pieces[i % 3]));
  }
  for (int i = 0; i < 10; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "line_%02d.mid", i);
    write_bytes(dir / "c4" / name, write_midi(single_track(repeated_pitch(rng, 60))));
    write_bytes(dir / "fs4" / name, write_midi(single_track(repeated_pitch(rng, 66))));
  }

  const auto t0 = Clock::now();
  const EvalReport self = cross_validate(dir / "d", dir / "d", kAllFeatureKinds);
  double min_oa = 1.0, max_kl = 0.0;
  for (const auto& f : self.features) {
    const auto code = std::string(feature_code(f.kind));
    for (double oa : {f.oa_a_inter, f.oa_b_inter}) {
      if (oa < 0.9) o.fail(code + fmt(" OA %.4f", oa));
      min_oa = std::min(min_oa, oa);
    }
    for (double kl : {f.kld_a_inter, f.kld_b_inter}) {
      if (kl > 0.05) o.fail(code + fmt(" KLD %.4f", kl));
      max_kl = std::max(max_kl, kl);
    }
  }
  const std::array<FeatureKind, 1> pch = {FeatureKind::PCH};
  const EvalReport contrast = cross_validate(dir / "c4", dir / "fs4", pch);
  const double contrast_oa = contrast.features[0].oa_a_inter;
  if (contrast_oa > 0.05) o.fail(fmt("contrast PCH OA %.4f", contrast_oa));
  const double elapsed = seconds_since(t0);
  if (elapsed >= 30.0) o.fail(fmt("took %.2f s", elapsed));
  if (o.pass) {
    o.detail = fmt("min OA %.3f", min_oa) + fmt(", max KLD %.4f", max_kl) + fmt(", contrast OA %.4f", contrast_oa) +
               fmt(", %.2f s", elapsed);
  }
  return o;
}

Outcome key_detection() {
  Outcome o;
  for (int tonic = 0; tonic < 12; ++tonic) {
    for (bool minor : {false, true}) {
      const Key expected = make_key(tonic, minor ? Mode::minor : Mode::major);
      for (int shift : {0, -1, 1}) {
        const Key got = detect_key(key_fixture(tonic, minor, shift));
        if (!(got == expected)) {
          o.fail(key_to_string(expected) + " shift " + std::to_string(shift) + " detected as " + key_to_string(got));
        }
      }
    }
  }
  if (o.pass) o.detail = "24 keys x 3 octaves";
  return o;
}

Outcome quantization() {
  Outcome o;
  std::mt19937_64 rng(555);
  const std::array<int, 4> tpqns = {96, 120, 480, 960};
  for (int i = 0; i < 1000; ++i) {
    const int tpqn = tpqns[static_cast<std::size_t>(i) % tpqns.size()];
    const auto notes = random_notes(rng, tpqn);
    for (Subdivision sub : kAllSubdivisions) {
      const Tick g = grid_ticks(sub, tpqn);
      const auto q = quantize(notes, sub, tpqn);
      if (q.size() != notes.size()) o.fail("note count changed");
      for (const auto& n : q) {
        if (n.start_ticks % g != 0 || n.end_ticks % g != 0) o.fail("off-grid note");
        if (n.end_ticks <= n.start_ticks) o.fail("empty note");
      }
      if (quantize(q, sub, tpqn) != q) o.fail(std::string(subdivision_name(sub)) + " not idempotent");
    }
  }
  if (o.pass) o.detail = "1000 note sets x 6 subdivisions";
  return o;
}

bool well_formed(const std::string& svg) {
  std::istringstream in(svg);
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_xml(in, tree);
  } catch (const boost::property_tree::xml_parser_error&) {
    return false;
  }
  return tree.count("svg") == 1;
}

Outcome render() {
  Outcome o;
  std::mt19937_64 rng(8080);
  for (int i = 0; i < 50; ++i) {
    const Score s = random_grid_score(rng, 96);
    const auto& inst = s.instruments[0];
    const TimeSignature ts = s.time_sig_map[0].time_sig;
    const int total_bars = std::max<int>(1, static_cast<int>(inst.bars.size()));
    PlotOptions opt;
    opt.first_bar = static_cast<int>(rng() % static_cast<unsigned>(total_bars));
    opt.last_bar = opt.first_bar + 1 + static_cast<int>(rng() % static_cast<unsigned>(total_bars - opt.first_bar));
    opt.subdivision = static_cast<Subdivision>(2 + rng() % 4);
    const std::string svg = render_pianoroll_svg(s, opt);
    const int bars = *opt.last_bar - opt.first_bar;
    const Tick bar_len = bar_length_ticks(ts, 96);
    const Tick g = grid_ticks(opt.subdivision, 96);
    const auto tag = "score " + std::to_string(i) + ": ";
    if (bar_len % g == 0 && count_of(svg, "class=\"vgrid ") != static_cast<std::size_t>(bars * (bar_len / g) + 1)) {
      o.fail(tag + "grid line count");
    }
    if (count_of(svg, "class=\"vgrid bar\"") != static_cast<std::size_t>(bars + 1)) o.fail(tag + "bar line count");
    const Tick lo = opt.first_bar * bar_len;
    const Tick hi = *opt.last_bar * bar_len;
    std::size_t expected = 0;
    for (const auto& n : inst.notes) expected += n.start_ticks >= lo && n.start_ticks < hi;
    if (count_of(svg, "class=\"note\"") != expected) o.fail(tag + "note rectangle count");
    if (!well_formed(svg)) o.fail(tag + "malformed XML");
    if (render_pianoroll_svg(s, opt) != svg) o.fail(tag + "not deterministic");
  }
  if (o.pass) o.detail = "50 scores";
  return o;
}

Outcome workflow() {
  Outcome o;
  const fs::path out = scratch_dir("acceptance_workflow");
  const std::string cmd = std::string("bash \"") + NOTEMESH_WORKFLOW + "\" \"" + NOTEMESH_CLI + "\" \"" +
                          (fixtures_dir() / "valid/a").string() + "\" \"" + (fixtures_dir() / "valid/b").string() +
                          "\" \"" + out.string() + "\" > \"" + (out / "log.txt").string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (code != 0) o.fail("exit code " + std::to_string(code) + ", see " + (out / "log.txt").string());
  for (const char* f : {"report.json", "pianoroll.svg", "plots/pch.svg"}) {
    if (!fs::exists(out / f)) o.fail(std::string("missing ") + f);
  }
  if (o.pass) o.detail = "analyze, eval, plot exit 0";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"midi-round-trip", midi_round_trip},
      {"corpus-robustness", corpus_robustness},
      {"tokenizer-round-trip", tokenizer_round_trip},
      {"feature-normalization", feature_normalization},
      {"eval-math", eval_math},
      {"self-comparison", self_comparison},
      {"key-detection", key_detection},
      {"quantization", quantization},
      {"render", render},
      {"cli-workflow", workflow},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::printf("%s %s (%s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
