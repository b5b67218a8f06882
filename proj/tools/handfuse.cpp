// handfuse: enroll, identify, verify, evaluate and synth.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "handfuse/evaluation.hpp"
#include "handfuse/evidence.hpp"
#include "handfuse/experiments.hpp"
#include "handfuse/image_io.hpp"
#include "handfuse/pipeline.hpp"
#include "handfuse/store.hpp"
#include "handfuse/synthhand.hpp"

namespace fs = std::filesystem;
using namespace handfuse;

namespace {

struct Flags {
  std::string db, config, debug_dir, left, right, user, claim, out;
  int scheme = 0, split = -1, population = 50, samples = 3, sample = -1;
  double th = 0, tau = 0, sigma = 0.05;
  std::size_t d = 0;
  std::uint64_t seed = 0;
  bool ablation = false;
};

/// Options registered on several subcommands; any of them counts as given.
struct Options {
  std::vector<CLI::Option*> scheme, th, d, tau, seed;

  static bool given(const std::vector<CLI::Option*>& opts) {
    return std::any_of(opts.begin(), opts.end(), [](const CLI::Option* o) { return o->count() > 0; });
  }
};

Config resolve_config(const Flags& f, const Options& o) {
  Config c = f.config.empty() ? Config{} : load_config(f.config);
  if (Options::given(o.scheme)) c.scheme = f.scheme;
  if (Options::given(o.th)) c.th = f.th;
  if (Options::given(o.d)) c.d = f.d;
  if (Options::given(o.tau)) c.tau = f.tau;
  if (Options::given(o.seed)) c.seed = f.seed;
  c.validate();
  return c;
}

std::optional<fs::path> debug_dir(const Flags& f) {
  if (!f.debug_dir.empty()) return fs::path(f.debug_dir);
  if (const char* env = std::getenv("HANDFUSE_DEBUG_DIR"); env && *env) return fs::path(env);
  return std::nullopt;
}

PipelineOptions pipeline_options(const Config& c, const Flags& f) {
  PipelineOptions p;
  p.normalize = c.normalize_options();
  p.landmarks = c.landmark_options();
  p.debug_dir = debug_dir(f);
  return p;
}

std::pair<FeatureValues, FeatureValues> measure_pair(const Flags& f, const Config& c) {
  PipelineOptions p = pipeline_options(c, f);
  p.debug_prefix = "left";
  const FeatureValues l = measure_file(f.left, HandSide::Left, p).features.values;
  p.debug_prefix = "right";
  const FeatureValues r = measure_file(f.right, HandSide::Right, p).features.values;
  return {l, r};
}

void print_decision(const TemplateDatabase& db, const char* label, const CandidateDecision& d) {
  std::printf("%s:", label);
  for (std::size_t i = 0; i < d.classes.size(); ++i)
    std::printf(" %s=%.4f", db.class_name(d.classes[i]).c_str(), d.probs[i]);
  std::printf("  -> %s%s\n", db.class_name(d.chosen).c_str(), d.exact_match ? " (exact match)" : "");
}

void report_trial(const TemplateDatabase& db, const TrialResult& r) {
  if (r.first) print_decision(db, "classifier1", *r.first);
  if (r.second) print_decision(db, "classifier2", *r.second);
  const FusedDecision& fd = r.fused;
  if (!r.note.empty()) {
    std::printf("path: rejected early (%s)\n", r.note.c_str());
  } else if (fd.agreement) {
    std::printf("path: agreement on %s, belief %.4f\n", db.class_name(fd.rc).c_str(), fd.bel_a);
  } else {
    std::printf("path: combination  BEL(%s)=%.4f  BEL(%s)=%.4f  m(U)=%.4f\n", db.class_name(fd.class_a).c_str(), fd.bel_a,
                db.class_name(fd.class_b).c_str(), fd.bel_b, fd.m_u);
  }
}

void dump_masses(const Flags& f, const TrialResult& r) {
  const auto dir = debug_dir(f);
  if (!dir || !r.first || !r.second) return;
  fs::create_directories(*dir);
  std::ofstream out(*dir / "masses.csv");
  out << "source,m_a,m_b,m_u\n";
  const Bpas b = assign_bpas(*r.first, *r.second);
  if (const auto* p = std::get_if<BpaPair>(&b)) {
    out << "classifier1," << p->m1.a << ',' << p->m1.b << ',' << p->m1.u << '\n';
    out << "classifier2," << p->m2.a << ',' << p->m2.b << ',' << p->m2.u << '\n';
  }
  out << "fused," << r.fused.bel_a << ',' << r.fused.bel_b << ',' << r.fused.m_u << '\n';
}

int cmd_enroll(const Flags& f, const Config& c) {
  TemplateStore store = TemplateStore::load(f.db);
  const int sample = f.sample >= 0 ? f.sample : store.next_sample(f.user);
  FeatureValues l{}, r{};
  try {
    std::tie(l, r) = measure_pair(f, c);
  } catch (const Error& e) {
    if (e.code() == Errc::IoError || e.code() == Errc::ParseError) throw;
    throw Error(Errc::EnrollmentRejected, e.what());
  }
  store.add({f.user, HandSide::Left, sample, l});
  store.add({f.user, HandSide::Right, sample, r});
  store.save(f.db);
  std::printf("enrolled %s sample %d (%zu templates)\n", f.user.c_str(), sample, store.size());
  return 0;
}

int cmd_identify(const Flags& f, const Config& c) {
  const TemplateStore store = TemplateStore::load(f.db);
  const TemplateDatabase db = store.database(c.normalize);
  if (db.empty()) {
    std::printf("class: U (empty database)\n");
    return 0;
  }
  const auto [l, r] = measure_pair(f, c);
  const TrialResult res = run_trial(db, store.probe(l, r, c.normalize), c.match());
  report_trial(db, res);
  dump_masses(f, res);
  std::printf("class: %s\n", res.fused.rejected() ? "U" : db.class_name(res.rc()).c_str());
  return 0;
}

int cmd_verify(const Flags& f, const Config& c) {
  const TemplateStore store = TemplateStore::load(f.db);
  const TemplateDatabase db = store.database(c.normalize);
  const auto claim = db.find_class(f.claim);
  if (!claim) throw Error(Errc::UnknownClass, "claimed identity '" + f.claim + "' is not enrolled");
  const auto [l, r] = measure_pair(f, c);
  const TrialResult res = run_trial(db, store.probe(l, r, c.normalize), c.match());
  report_trial(db, res);
  dump_masses(f, res);
  const bool ok = accepts(res.fused, *claim, c.tau);
  std::printf("claim %s  belief %.4f  tau %.4f  -> %s\n", f.claim.c_str(), res.fused.rc == *claim ? res.fused.winning_belief() : 0.0,
              c.tau, ok ? "accept" : "reject");
  return 0;
}

synth::PopulationOptions population(const Flags& f, const Config& c) {
  synth::PopulationOptions p;
  p.users = f.population;
  p.samples = f.samples;
  p.intra_sigma = f.sigma;
  p.seed = c.seed;
  return p;
}

int cmd_evaluate(const Flags& f, const Config& c, bool from_db) {
  const Cohort cohort = from_db ? cohort_from_store(TemplateStore::load(f.db))
                                : measure_population(population(f, c), pipeline_options(c, f));
  EvalOptions eo;
  eo.match = c.match();
  eo.split = f.split;
  eo.normalize = c.normalize;
  const EvalReport rep = evaluate(cohort, eo);

  const fs::path out = f.out.empty() ? fs::path("eval_out") : fs::path(f.out);
  fs::create_directories(out);
  {
    std::ofstream roc(out / "roc.csv");
    write_roc_csv(roc, rep);
    std::ofstream trials(out / "trials.csv");
    write_trials_csv(trials, rep);
  }
  nlohmann::json j = report_json(rep, f.ablation);
  j["config"] = {{"d", c.d},         {"th", c.th},       {"alpha", c.alpha_deg}, {"scheme", c.scheme},
                 {"tau", c.tau},     {"seed", c.seed},   {"normalize", c.normalize},
                 {"resize", c.resize ? std::to_string(c.resize->width) + "x" + std::to_string(c.resize->height) : "off"},
                 {"source", from_db ? f.db : "synthetic"}};
  std::ofstream(out / "report.json") << j.dump(2) << '\n';
  write_report_table(std::cout, rep, f.ablation);
  std::printf("wrote %s, %s and %s\n", (out / "report.json").c_str(), (out / "roc.csv").c_str(),
              (out / "trials.csv").c_str());
  return 0;
}

int cmd_synth(const Flags& f, const Config& c) {
  const auto pop = population(f, c);
  const fs::path out = f.out.empty() ? fs::path("synth_out") : fs::path(f.out);
  fs::create_directories(out);
  std::ofstream truth(out / "truth.csv");
  truth << "user_id,hand,sample_index,file";
  for (char n : LandmarkSet::kNames) truth << ',' << n << "_x," << n << "_y";
  for (std::size_t j = 0; j < kFeatureCount; ++j) truth << ',' << feature_name(j);
  truth << '\n';
  std::uint64_t image_index = 0;
  for (const auto& s : synth::generate_population(pop)) {
    for (const synth::HandParams* hp : {&s.left, &s.right}) {
      const auto smp = synth::generate(*hp, pop.seed * 1000003ULL + image_index++);
      const std::string name = subject_id(s.user) + "_s" + std::to_string(s.sample) + "_" + side_code(hp->side) + ".png";
      io::write_png(out / name, smp.image);
      truth << subject_id(s.user) << ',' << side_code(hp->side) << ',' << s.sample << ',' << name;
      for (PointF p : smp.truth->points()) truth << ',' << detail::format6(p.x) << ',' << detail::format6(p.y);
      for (double v : smp.features->values) truth << ',' << detail::format6(v);
      truth << '\n';
    }
  }
  std::printf("wrote %d images and truth.csv to %s\n", 2 * pop.users * pop.samples, out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hand geometry identification with evidence-theoretic decision fusion"};
  app.require_subcommand(1);
  Flags f;
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "key=value configuration file")->check(CLI::ExistingFile);
    sub->add_option("--debug-dir", f.debug_dir, "directory for intermediate images (also HANDFUSE_DEBUG_DIR)");
  };
  auto matching = [&](CLI::App* sub) {
    o.scheme.push_back(sub->add_option("--scheme", f.scheme, "first-level scheme 1, 2 or 3")->check(CLI::Range(1, 3)));
    o.th.push_back(sub->add_option("--th", f.th, "per-feature match threshold (normalized units)"));
    o.d.push_back(sub->add_option("--d", f.d, "number of candidates"));
    o.tau.push_back(sub->add_option("--tau", f.tau, "verification belief threshold"));
  };
  auto hands = [&](CLI::App* sub) {
    sub->add_option("--left", f.left, "left hand image")->required()->check(CLI::ExistingFile);
    sub->add_option("--right", f.right, "right hand image")->required()->check(CLI::ExistingFile);
  };
  auto synthetic = [&](CLI::App* sub) {
    sub->add_option("--population", f.population, "number of synthetic users")->check(CLI::Range(1, 100000));
    sub->add_option("--samples", f.samples, "acquisitions per user")->check(CLI::Range(1, 1000));
    sub->add_option("--sigma", f.sigma, "intra-class variation")->check(CLI::NonNegativeNumber);
    o.seed.push_back(sub->add_option("--seed", f.seed, "random seed"));
    sub->add_option("--out", f.out, "output directory");
  };

  auto* enroll = app.add_subcommand("enroll", "extract features from a left/right pair and store them");
  enroll->add_option("--db", f.db, "template database CSV")->required();
  enroll->add_option("--user", f.user, "user id")->required();
  enroll->add_option("--sample", f.sample, "sample index (default: next free)");
  hands(enroll);
  common(enroll);

  auto* identify = app.add_subcommand("identify", "one-to-many identification");
  identify->add_option("--db", f.db, "template database CSV")->required()->check(CLI::ExistingFile);
  hands(identify);
  matching(identify);
  common(identify);

  auto* verify = app.add_subcommand("verify", "one-to-one verification of a claimed identity");
  verify->add_option("--db", f.db, "template database CSV")->required()->check(CLI::ExistingFile);
  verify->add_option("--claim", f.claim, "claimed user id")->required();
  hands(verify);
  matching(verify);
  common(verify);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "identification and verification experiments");
  evaluate_cmd->add_option("--db", f.db, "evaluate stored templates instead of a synthetic population")
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--split", f.split, "held-out sample index (negative counts from the end)");
  evaluate_cmd->add_flag("--ablation", f.ablation, "also report single-hand and single-classifier accuracy");
  matching(evaluate_cmd);
  synthetic(evaluate_cmd);
  common(evaluate_cmd);

  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic population with ground truth");
  synthetic(synth_cmd);
  common(synth_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    const Config c = resolve_config(f, o);
    if (enroll->parsed()) return cmd_enroll(f, c);
    if (identify->parsed()) return cmd_identify(f, c);
    if (verify->parsed()) return cmd_verify(f, c);
    if (evaluate_cmd->parsed()) return cmd_evaluate(f, c, !f.db.empty());
    if (synth_cmd->parsed()) return cmd_synth(f, c);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
