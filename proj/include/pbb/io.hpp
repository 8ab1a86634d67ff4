#ifndef PBB_IO_HPP
#define PBB_IO_HPP

// File formats. CSV files start with a '#' comment block carrying the
// resolved config hash, then a header row; numbers use %.17g so every
// double round-trips. JSON summaries map NaN to null.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pbb/config.hpp"
#include "pbb/mcwf.hpp"
#include "pbb/scaling.hpp"
#include "pbb/telegraph.hpp"

namespace pbb {

using json = nlohmann::json;

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* record_csv_header = "t,n_expect,re_a,im_a,q";
inline constexpr const char* jump_csv_header = "t,channel";

namespace detail {

inline void put_number(std::string& s, double v) {
  char buf[40];
  if (std::isnan(v))
    s += "nan";
  else {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    s += buf;
  }
}

inline json number_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

inline double number_or_nan(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline void comment_block(std::ostream& os, const std::string& what, const std::string& hash) {
  os << "# " << what << "\n# config_hash " << hash << "\n# units: kappa = 1, times in 1/kappa\n";
}

}  // namespace detail

inline void write_record_csv(std::ostream& os, const TrajectoryRecord& rec,
                             const std::string& hash) {
  detail::comment_block(os, "pbb trajectory record", hash);
  os << record_csv_header << '\n';
  std::string line;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    line.clear();
    detail::put_number(line, rec.sample_times[i]);
    line += ',';
    detail::put_number(line, rec.photon_number[i]);
    line += ',';
    detail::put_number(line, rec.field_amplitude[i].real());
    line += ',';
    detail::put_number(line, rec.field_amplitude[i].imag());
    line += ',';
    detail::put_number(line, rec.mandel_q[i]);
    line += '\n';
    os << line;
  }
}

inline void write_jumps_csv(std::ostream& os, const TrajectoryRecord& rec,
                            const std::string& hash) {
  detail::comment_block(os, "pbb jump log", hash);
  os << jump_csv_header << '\n';
  std::string line;
  for (const auto& j : rec.jumps) {
    line.clear();
    detail::put_number(line, j.time);
    line += ',';
    line += to_string(j.channel);
    line += '\n';
    os << line;
  }
}

inline json to_json(const ModelParams& p) {
  return {{"kappa", p.kappa}, {"gamma", p.gamma}, {"g", p.g},
          {"delta", p.delta}, {"eta", p.eta},     {"cutoff", p.cutoff}};
}

inline ModelParams model_from_json(const json& j) {
  ModelParams p;
  p.kappa = j.at("kappa").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.g = j.at("g").get<double>();
  p.delta = j.at("delta").get<double>();
  p.eta = j.at("eta").get<double>();
  p.cutoff = j.at("cutoff").get<int>();
  return p;
}

inline json to_json(const TrajectoryConfig& c) {
  return {{"seed", c.seed},
          {"t_final", c.t_final},
          {"dt_sample", c.dt_sample},
          {"dt_max", c.dt_max},
          {"norm_tolerance", c.norm_tolerance},
          {"burn_in", c.burn_in},
          {"integrator", to_string(c.integrator)},
          {"rk_tolerance", c.rk_tolerance},
          {"guard_levels", c.guard_levels},
          {"guard_threshold", c.guard_threshold}};
}

inline TrajectoryConfig trajectory_from_json(const json& j) {
  TrajectoryConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.t_final = j.at("t_final").get<double>();
  c.dt_sample = j.at("dt_sample").get<double>();
  c.dt_max = j.at("dt_max").get<double>();
  c.norm_tolerance = j.at("norm_tolerance").get<double>();
  c.burn_in = j.at("burn_in").get<double>();
  c.integrator = j.at("integrator").get<std::string>() == "taylor" ? Integrator::taylor
                                                                   : Integrator::adaptive_rk;
  c.rk_tolerance = j.at("rk_tolerance").get<double>();
  c.guard_levels = j.at("guard_levels").get<int>();
  c.guard_threshold = j.at("guard_threshold").get<double>();
  return c;
}

inline json record_header_json(const TrajectoryRecord& rec, const std::string& hash) {
  return {{"format", "pbb-trajectory-1"},
          {"config_hash", hash},
          {"params", to_json(rec.params)},
          {"config", to_json(rec.config)},
          {"samples", rec.size()},
          {"jumps", rec.jumps.size()},
          {"columns", record_csv_header},
          {"jump_columns", jump_csv_header}};
}

namespace detail {

inline std::vector<std::string> data_lines(std::istream& is, const char* header) {
  std::vector<std::string> out;
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!have_header) {
      if (line != header) throw IoError("unexpected CSV header: " + line);
      have_header = true;
      continue;
    }
    out.push_back(line);
  }
  if (!have_header) throw IoError("CSV header missing");
  return out;
}

inline double field(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw IoError("bad number in CSV: " + s);
  return v;
}

}  // namespace detail

/// Reads record, jump log and header back; atom excitation is not stored.
inline TrajectoryRecord read_record(std::istream& csv, std::istream& jumps, const json& header) {
  TrajectoryRecord rec;
  rec.params = model_from_json(header.at("params"));
  rec.config = trajectory_from_json(header.at("config"));
  for (const auto& line : detail::data_lines(csv, record_csv_header)) {
    std::stringstream ss(line);
    std::string f[5];
    for (auto& x : f)
      if (!std::getline(ss, x, ',')) throw IoError("short record row");
    rec.sample_times.push_back(detail::field(f[0]));
    rec.photon_number.push_back(detail::field(f[1]));
    rec.field_amplitude.emplace_back(detail::field(f[2]), detail::field(f[3]));
    rec.mandel_q.push_back(detail::field(f[4]));
  }
  for (const auto& line : detail::data_lines(jumps, jump_csv_header)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("short jump row");
    const std::string ch = line.substr(comma + 1);
    if (ch != "cavity" && ch != "atom") throw IoError("unknown jump channel " + ch);
    rec.jumps.push_back({detail::field(line.substr(0, comma)),
                         ch == "cavity" ? JumpChannel::cavity : JumpChannel::atom});
  }
  return rec;
}

inline json to_json(const TelegraphStats& s) {
  using detail::number_or_null;
  return {{"a", number_or_null(s.on_level)},
          {"mu", number_or_null(s.mu)},
          {"lambda", number_or_null(s.lambda)},
          {"F", number_or_null(s.filling)},
          {"tau", number_or_null(s.tau)},
          {"tau_autocorr", number_or_null(s.tau_autocorr)},
          {"off_level", number_or_null(s.off_level)},
          {"counts", {{"on", s.n_on}, {"off", s.n_off}}},
          {"errors",
           {{"a", number_or_null(s.on_level_err)},
            {"mu", number_or_null(s.mu_err)},
            {"lambda", number_or_null(s.lambda_err)},
            {"F", number_or_null(s.filling_err)},
            {"tau", number_or_null(s.tau_err)},
            {"tau_autocorr", number_or_null(s.tau_autocorr_err)}}},
          {"total_time", s.total_time},
          {"longest_dwell", s.longest_dwell},
          {"identity_deviation", s.identity_deviation},
          {"degenerate", s.degenerate}};
}

inline TelegraphStats stats_from_json(const json& j) {
  using detail::number_or_nan;
  TelegraphStats s;
  s.on_level = number_or_nan(j.at("a"));
  s.mu = number_or_nan(j.at("mu"));
  s.lambda = number_or_nan(j.at("lambda"));
  s.filling = number_or_nan(j.at("F"));
  s.tau = number_or_nan(j.at("tau"));
  s.tau_autocorr = number_or_nan(j.at("tau_autocorr"));
  s.off_level = number_or_nan(j.at("off_level"));
  s.n_on = j.at("counts").at("on").get<std::size_t>();
  s.n_off = j.at("counts").at("off").get<std::size_t>();
  const json& e = j.at("errors");
  s.on_level_err = number_or_nan(e.at("a"));
  s.mu_err = number_or_nan(e.at("mu"));
  s.lambda_err = number_or_nan(e.at("lambda"));
  s.filling_err = number_or_nan(e.at("F"));
  s.tau_err = number_or_nan(e.at("tau"));
  s.tau_autocorr_err = number_or_nan(e.at("tau_autocorr"));
  s.total_time = j.at("total_time").get<double>();
  s.longest_dwell = j.at("longest_dwell").get<double>();
  s.identity_deviation = j.at("identity_deviation").get<double>();
  s.degenerate = j.at("degenerate").get<bool>();
  return s;
}

inline json to_json(const SweepPoint& p) {
  using detail::number_or_null;
  return {{"format", "pbb-point-1"},
          {"key", point_key(p.g, p.eta, p.gamma, p.delta)},
          {"g", p.g},
          {"eta", p.eta},
          {"gamma", p.gamma},
          {"delta", p.delta},
          {"cutoff", p.cutoff},
          {"budget", {{"t_per_seed", p.budget.t_per_seed}, {"seeds", p.budget.seeds}}},
          {"point_seed", p.point_seed},
          {"stats", to_json(p.stats)},
          {"threshold", number_or_null(p.threshold)},
          {"mean_photons", number_or_null(p.mean_photons)},
          {"mean_excitation", number_or_null(p.mean_excitation)},
          {"dim_q", number_or_null(p.dim_q)},
          {"dim_q_err", number_or_null(p.dim_q_err)},
          {"on_q", number_or_null(p.on_q)},
          {"on_q_err", number_or_null(p.on_q_err)},
          {"on_phase", number_or_null(p.on_phase)},
          {"ks_on_p", number_or_null(p.ks_on_p)},
          {"ks_off_p", number_or_null(p.ks_off_p)},
          {"jumps", p.jumps},
          {"on_durations", p.on_durations},
          {"off_durations", p.off_durations},
          {"degenerate", p.degenerate},
          {"note", p.note}};
}

inline SweepPoint point_from_json(const json& j) {
  using detail::number_or_nan;
  if (j.at("format") != "pbb-point-1") throw IoError("not a point file");
  SweepPoint p;
  p.g = j.at("g").get<double>();
  p.eta = j.at("eta").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.delta = j.at("delta").get<double>();
  p.cutoff = j.at("cutoff").get<int>();
  p.budget.t_per_seed = j.at("budget").at("t_per_seed").get<double>();
  p.budget.seeds = j.at("budget").at("seeds").get<int>();
  p.point_seed = j.at("point_seed").get<std::uint64_t>();
  p.stats = stats_from_json(j.at("stats"));
  p.threshold = number_or_nan(j.at("threshold"));
  p.mean_photons = number_or_nan(j.at("mean_photons"));
  p.mean_excitation = number_or_nan(j.at("mean_excitation"));
  p.dim_q = number_or_nan(j.at("dim_q"));
  p.dim_q_err = number_or_nan(j.at("dim_q_err"));
  p.on_q = number_or_nan(j.at("on_q"));
  p.on_q_err = number_or_nan(j.at("on_q_err"));
  p.on_phase = number_or_nan(j.at("on_phase"));
  p.ks_on_p = number_or_nan(j.at("ks_on_p"));
  p.ks_off_p = number_or_nan(j.at("ks_off_p"));
  p.jumps = j.at("jumps").get<std::size_t>();
  p.on_durations = j.at("on_durations").get<std::vector<double>>();
  p.off_durations = j.at("off_durations").get<std::vector<double>>();
  p.degenerate = j.at("degenerate").get<bool>();
  p.note = j.at("note").get<std::string>();
  return p;
}

inline json to_json(const ExponentFit& f) {
  using detail::number_or_null;
  return {{"exponent", number_or_null(f.exponent)},
          {"exponent_err", number_or_null(f.exponent_err)},
          {"intercept", number_or_null(f.intercept)},
          {"intercept_err", number_or_null(f.intercept_err)},
          {"covariance", number_or_null(f.covariance)},
          {"chi2", number_or_null(f.chi2)},
          {"dof", f.dof},
          {"residuals", f.residuals}};
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path);
  f << content;
  if (!f) throw IoError("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace pbb

#endif  // PBB_IO_HPP
