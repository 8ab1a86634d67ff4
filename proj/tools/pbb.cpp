// pbb: command-line front end for the photon-blockade-breakdown toolkit.
//
// Every subcommand writes its fully resolved config to <out>/config.ini. Any
// error ends the run with a JSON object on stderr and a nonzero exit status:
//   2  configuration or usage error
//   3  some farm jobs failed (partial results were kept)
//   4  any other module error
//   5  selftest failure

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pbb/config.hpp"
#include "pbb/io.hpp"
#include "pbb/mcwf.hpp"
#include "pbb/neoclassical.hpp"
#include "pbb/scaling.hpp"
#include "pbb/steadystate.hpp"
#include "pbb/study.hpp"
#include "pbb/telegraph.hpp"

namespace fs = std::filesystem;
using pbb::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct PartialFailure : std::runtime_error {
  std::vector<pbb::FarmFailure> failures;
  explicit PartialFailure(std::vector<pbb::FarmFailure> f)
      : std::runtime_error(std::to_string(f.size()) + " job(s) failed"), failures(std::move(f)) {}
};

struct SelftestFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out;
  int workers = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool resume = false;
};

void log_line(const std::string& s) { std::cerr << s << std::endl; }

pbb::RunConfig resolve(const Flags& f) {
  pbb::RunConfig c;
  if (!f.config.empty()) c = pbb::parse_config(pbb::read_text_file(f.config));
  if (!f.out.empty()) c.out = f.out;
  if (f.workers > 0) c.workers = f.workers;
  if (f.seed_set) {
    c.master_seed = f.seed;
    c.trajectory.seed = f.seed;
  }
  return c;
}

fs::path prepare_out(const pbb::RunConfig& c) {
  fs::create_directories(c.out);
  pbb::write_text_file((fs::path(c.out) / "config.ini").string(), pbb::write_config(c));
  return c.out;
}

std::string with_comment(const std::string& what, const std::string& hash, const std::string& body) {
  std::ostringstream o;
  pbb::detail::comment_block(o, what, hash);
  return o.str() + body;
}

void emit(const json& j) { std::cout << j.dump(2) << std::endl; }

// trajectory

json summarize_record(const pbb::TrajectoryRecord& rec) {
  using pbb::Observable;
  json j = {{"mean_photons", pbb::time_average(rec, Observable::photon_number)},
            {"mean_excitation", pbb::time_average(rec, Observable::atom_excitation)},
            {"samples", rec.size()},
            {"jumps", rec.jumps.size()}};
  std::size_t cavity = 0;
  for (const auto& e : rec.jumps) cavity += e.channel == pbb::JumpChannel::cavity;
  const double span = rec.config.t_final;
  j["cavity_jump_rate"] = double(cavity) / span;
  j["atom_jump_rate"] = double(rec.jumps.size() - cavity) / span;
  try {
    const pbb::BinarySignal x = pbb::binarize(rec);
    if (!x.degenerate) {
      pbb::TelegraphStats s = pbb::telegraph_stats(rec, x);
      pbb::add_autocorrelation(s, {&x});
      j["telegraph"] = pbb::to_json(s);
    }
  } catch (const pbb::TelegraphError& e) {
    j["telegraph_note"] = e.what();
  }
  return j;
}

void write_record_files(const fs::path& stem, const pbb::TrajectoryRecord& rec,
                        const std::string& hash) {
  std::ostringstream csv, jumps;
  pbb::write_record_csv(csv, rec, hash);
  pbb::write_jumps_csv(jumps, rec, hash);
  pbb::write_text_file(stem.string() + ".csv", csv.str());
  pbb::write_text_file(stem.string() + ".jumps.csv", jumps.str());
  pbb::write_text_file(stem.string() + ".json", pbb::record_header_json(rec, hash).dump(2) + "\n");
}

void cmd_trajectory(const pbb::RunConfig& c) {
  const fs::path out = prepare_out(c);
  const std::string hash = pbb::config_hash(c);
  const pbb::ModelParams p = c.resolved_model();
  const pbb::TrajectoryRecord rec = pbb::run_trajectory(p, c.trajectory);
  write_record_files(out / "trajectory", rec, hash);
  json s = summarize_record(rec);
  s["cutoff"] = p.cutoff;
  pbb::write_text_file((out / "summary.json").string(), s.dump(2) + "\n");
  emit(s);
}

// steady

void cmd_steady(const pbb::RunConfig& c) {
  const fs::path out = prepare_out(c);
  const std::string hash = pbb::config_hash(c);
  pbb::ModelParams p = c.model;
  if (p.cutoff == 0) p.cutoff = std::min(pbb::max_oracle_cutoff, c.resolved_model().cutoff);
  const pbb::DensityMatrix rho = pbb::steady_state(p);
  const pbb::OperatorSet ops = pbb::build_operators(p.cutoff);
  const std::vector<double> pn = pbb::photon_distribution(rho);
  json j = {{"cutoff", p.cutoff},
            {"mean_photons", pbb::expectation(rho, ops.number).real()},
            {"mean_excitation", pbb::expectation(rho, ops.atom_excitation).real()},
            {"field_re", pbb::expectation(rho, ops.a).real()},
            {"field_im", pbb::expectation(rho, ops.a).imag()},
            {"top_level_population", pn.back()}};
  if (p.g == 0.0) {
    // The empty cavity relaxes to a coherent state of amplitude eta/(kappa - i delta).
    const double n = p.eta * p.eta / (p.kappa * p.kappa + p.delta * p.delta);
    j["oracle"] = {{"name", "empty-cavity coherent state"},
                   {"expected_mean_photons", n},
                   {"relative_error", std::abs(j["mean_photons"].get<double>() - n) / std::max(n, 1e-300)}};
  }
  std::ostringstream csv;
  pbb::write_photon_distribution_csv(csv, pn);
  pbb::write_text_file((out / "photon_distribution.csv").string(),
                       with_comment("pbb steady-state photon distribution", hash, csv.str()));
  pbb::write_text_file((out / "steady.json").string(), j.dump(2) + "\n");
  emit(j);
}

// phase-diagram

void cmd_phase_diagram(const pbb::RunConfig& c, const std::vector<double>& gs) {
  const fs::path out = prepare_out(c);
  std::vector<double> grid;
  const double step = c.study.eta_over_g_step;
  for (double r = step; r <= 0.6 + 1e-12; r += step) grid.push_back(r);
  std::vector<pbb::PhaseBoundary> curves;
  for (double g : gs) curves.push_back(pbb::phase_diagram(g, c.study.delta_grid, grid));
  std::ostringstream csv;
  pbb::write_phase_diagram_csv(csv, curves);
  pbb::write_text_file((out / "phase_diagram.csv").string(),
                       with_comment("pbb neoclassical bistability boundaries", pbb::config_hash(c),
                                    csv.str()));
  json rows = json::array();
  for (const auto& curve : curves)
    for (const auto& r : curve.rows)
      rows.push_back({{"g", curve.g},
                      {"delta", r.delta},
                      {"eta_lower_over_g", r.eta_lower_over_g ? json(*r.eta_lower_over_g) : json()},
                      {"eta_upper_over_g", r.eta_upper_over_g ? json(*r.eta_upper_over_g) : json()}});
  emit({{"rows", rows}});
}

// sweep / scale

void cmd_sweep(const pbb::RunConfig& c, bool resume, bool workpoint_only) {
  const fs::path out = prepare_out(c);
  const auto specs = workpoint_only ? std::vector<pbb::PointSpec>{pbb::workpoint_spec(c)}
                                    : pbb::sweep_specs(c);
  pbb::write_text_file((out / (workpoint_only ? "workpoint_manifest.json" : "manifest.json")).string(),
                       pbb::study_manifest(c, specs).dump(2) + "\n");
  const pbb::PointRun run = pbb::run_points(specs, out.string(), c.workers, resume, log_line);
  std::vector<pbb::SweepPoint> pts;
  for (const auto& p : run.points)
    if (p) pts.push_back(*p);
  pbb::write_text_file((out / (workpoint_only ? "workpoint.csv" : "sweep.csv")).string(),
                       pbb::sweep_csv(pts, pbb::config_hash(c)));
  emit({{"points", pts.size()}, {"failed", run.failures.size()}});
  if (!run.failures.empty()) throw PartialFailure(run.failures);
}

void cmd_scale(const pbb::RunConfig& c, bool resume) {
  const fs::path out = prepare_out(c);
  pbb::write_text_file((out / "manifest.json").string(),
                       pbb::study_manifest(c, pbb::sweep_specs(c)).dump(2) + "\n");
  const pbb::StudyResult r = pbb::run_study(c, out.string(), c.workers, resume, log_line);
  pbb::write_study_outputs(r, c, out.string());
  emit(pbb::exponent_report(r, c));
  if (!r.failures.empty()) throw PartialFailure(r.failures);
}

// analyze

void cmd_analyze(const pbb::RunConfig& c, const std::vector<std::string>& inputs) {
  const fs::path out = prepare_out(c);
  std::vector<pbb::TrajectoryRecord> recs;
  for (const auto& in : inputs) {
    fs::path stem(in);
    if (stem.extension() == ".csv" || stem.extension() == ".json") stem.replace_extension();
    std::ifstream csv(stem.string() + ".csv"), jumps(stem.string() + ".jumps.csv");
    if (!csv || !jumps) throw pbb::IoError("cannot open record files for " + stem.string());
    const json header = json::parse(pbb::read_text_file(stem.string() + ".json"));
    recs.push_back(pbb::read_record(csv, jumps, header));
  }
  if (recs.empty()) throw UsageError("analyze needs at least one record");
  json per = json::array();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    json s = summarize_record(recs[i]);
    s["input"] = inputs[i];
    per.push_back(s);
  }
  pbb::PointSpec spec;
  const auto& p0 = recs.front().params;
  spec.g = p0.g;
  spec.eta = p0.eta;
  spec.gamma = p0.gamma;
  spec.delta = p0.delta;
  spec.budget.seeds = int(recs.size());
  const pbb::SweepPoint pooled = pbb::analyze_point(spec, recs);
  json j = {{"records", per}, {"pooled", pbb::to_json(pooled)}};
  pbb::write_text_file((out / "analysis.json").string(), j.dump(2) + "\n");
  emit(j);
}

// selftest: fast oracles that need no long simulation

struct Check {
  std::string name;
  double value, expected, tolerance;
  bool pass() const { return std::abs(value - expected) <= tolerance; }
};

std::vector<Check> selftest_checks() {
  std::vector<Check> out;

  {  // n = 1 doublet of the resonant undriven model sits at +/- g
    pbb::ModelParams p{1.0, 0.0, 7.0, 0.0, 0.0, 3};
    const Eigen::MatrixXcd h = pbb::build_hamiltonian(p).dense();
    const int a = pbb::basis_index(pbb::Atom::ground, 1), b = pbb::basis_index(pbb::Atom::excited, 0);
    Eigen::Matrix2cd blk;
    blk << h(a, a), h(a, b), h(b, a), h(b, b);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(blk);
    out.push_back({"n=1 doublet lower", es.eigenvalues()(0), -7.0, 1e-12});
    out.push_back({"n=1 doublet upper", es.eigenvalues()(1), 7.0, 1e-12});
  }
  {  // dressed states are eigenvectors of the undriven Hamiltonian
    pbb::ModelParams p{1.0, 0.0, 50.0, -5.0, 0.0, 8};
    const pbb::SparseMatrix h = pbb::build_hamiltonian(p).matrix;
    double worst = 0.0;
    for (int n = 1; n <= 8; ++n)
      for (auto l : {pbb::Ladder::plus, pbb::Ladder::minus}) {
        const pbb::Vector v = pbb::dressed_state(n, l, p.cutoff).amplitudes();
        worst = std::max(worst, (h * v - pbb::dressed_energy(n, l, p) * v).norm());
      }
    out.push_back({"dressed-state eigen residual", worst, 0.0, 1e-10});
  }
  {  // empty cavity relaxes to |eta/(kappa - i delta)|^2 photons
    pbb::ModelParams p{1.0, 0.1, 0.0, -1.0, 2.0, 30};
    const pbb::DensityMatrix rho = pbb::steady_state(p);
    const auto ops = pbb::build_operators(p.cutoff);
    out.push_back({"empty-cavity steady <n>", pbb::expectation(rho, ops.number).real(), 2.0, 1e-6});
  }
  {
    const auto w = pbb::bistability_boundaries(-5.0, 50.0, [] {
      std::vector<double> e;
      for (int i = 1; i <= 240; ++i) e.push_back(50.0 * 0.0025 * i);
      return e;
    }());
    out.push_back({"neoclassical lower boundary at delta=-5",
                   w.eta_lower ? *w.eta_lower / 50.0 : 0.0, 0.5 / std::sqrt(26.0), 1e-5});
  }
  {
    std::vector<double> x{20, 30, 40, 50}, y;
    for (double v : x) y.push_back(3.0 * std::pow(v, 2.2));
    out.push_back({"power-law exponent recovery", pbb::fit_power_law(x, y).exponent, 2.2, 1e-10});
  }
  {
    const auto rec = pbb::synthesize_telegraph(0.01, 0.02, 40.0, 20000.0, 0.1, 7);
    const auto x = pbb::binarize(rec);
    out.push_back({"binary identity deviation", pbb::verify_binary_identity(x), 0.0, 1e-12});
  }
  {  // same seed, same bytes
    pbb::ModelParams p{1.0, 0.0, 10.0, -5.0, 2.5, 20};
    pbb::TrajectoryConfig t;
    t.t_final = 50.0;
    t.burn_in = 0.0;
    t.seed = 99;
    std::ostringstream a, b;
    pbb::write_record_csv(a, pbb::run_trajectory(p, t), "selftest");
    pbb::write_record_csv(b, pbb::run_trajectory(p, t), "selftest");
    out.push_back({"trajectory determinism", a.str() == b.str() ? 0.0 : 1.0, 0.0, 0.0});
  }
  return out;
}

void cmd_selftest(const pbb::RunConfig& c) {
  const fs::path out = prepare_out(c);
  json arr = json::array();
  bool ok = true;
  for (const auto& ch : selftest_checks()) {
    ok = ok && ch.pass();
    arr.push_back({{"name", ch.name},
                   {"value", ch.value},
                   {"expected", ch.expected},
                   {"tolerance", ch.tolerance},
                   {"pass", ch.pass()}});
  }
  const json j = {{"checks", arr}, {"pass", ok}};
  pbb::write_text_file((out / "selftest.json").string(), j.dump(2) + "\n");
  emit(j);
  if (!ok) throw SelftestFailure("selftest checks failed");
}

int fail(int code, const std::string& type, const std::string& what, json extra = json::object()) {
  json j = {{"error", {{"type", type}, {"message", what}}}};
  for (auto& [k, v] : extra.items()) j["error"][k] = v;
  std::cerr << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-blockade-breakdown simulator and finite-size-scaling pipeline"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "config file (key = value, [section] headers)")
      ->envname("PBB_CONFIG");
  app.add_option("--out", f.out, "output directory")->envname("PBB_OUT");
  app.add_option("--workers", f.workers, "farm worker threads")->envname("PBB_WORKERS")
      ->check(CLI::Range(1, 1024));
  auto* seed_opt = app.add_option("--seed", f.seed, "master seed (also the trajectory seed)")
                       ->envname("PBB_SEED");
  app.add_flag("--resume", f.resume, "reuse persisted sweep points")->envname("PBB_RESUME");

  auto* traj = app.add_subcommand("trajectory", "one MCWF trajectory of the [model] point");
  auto* steady = app.add_subcommand("steady", "master-equation steady state of the [model] point");
  auto* phase = app.add_subcommand("phase-diagram", "neoclassical bistability boundaries");
  std::vector<double> phase_g{50.0, 75.0, 100.0};
  phase->add_option("--g", phase_g, "coupling strengths")->delimiter(',');
  auto* sweep = app.add_subcommand("sweep", "telegraph statistics over the (g, eta) grid");
  bool workpoint = false;
  sweep->add_flag("--workpoint", workpoint, "only the [model] point, with the study budget");
  auto* scale = app.add_subcommand("scale", "sweep, eta* orbit and scaling exponents");
  auto* analyze = app.add_subcommand("analyze", "telegraph analysis of stored records");
  std::vector<std::string> inputs;
  analyze->add_option("records", inputs, "record stems or .csv/.json paths")->required();
  auto* selftest = app.add_subcommand("selftest", "fast built-in oracles");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(2, "usage", e.what());
  }
  f.seed_set = seed_opt->count() > 0;

  try {
    const pbb::RunConfig c = resolve(f);
    if (traj->parsed()) cmd_trajectory(c);
    else if (steady->parsed()) cmd_steady(c);
    else if (phase->parsed()) cmd_phase_diagram(c, phase_g);
    else if (sweep->parsed()) cmd_sweep(c, f.resume, workpoint);
    else if (scale->parsed()) cmd_scale(c, f.resume);
    else if (analyze->parsed()) cmd_analyze(c, inputs);
    else if (selftest->parsed()) cmd_selftest(c);
    return 0;
  } catch (const pbb::ConfigError& e) {
    return fail(2, "config", e.what(), {{"line", e.line()}});
  } catch (const UsageError& e) {
    return fail(2, "usage", e.what());
  } catch (const PartialFailure& e) {
    json fs = json::array();
    for (const auto& x : e.failures) fs.push_back({{"key", x.key}, {"error", x.what}});
    return fail(3, "partial", e.what(), {{"failures", fs}});
  } catch (const SelftestFailure& e) {
    return fail(5, "selftest", e.what());
  } catch (const std::exception& e) {
    return fail(4, "module", e.what());
  }
}
