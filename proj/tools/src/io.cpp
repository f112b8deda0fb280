#include "io.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

#include "hcw/error.hpp"

namespace hcw::cli {

namespace fs = std::filesystem;

fs::path resolve_output_dir(const std::string& flag) {
  fs::path dir = ".";
  if (!flag.empty())
    dir = flag;
  else if (const char* env = std::getenv("HCW_OUTPUT_DIR"); env != nullptr && *env != '\0')
    dir = env;
  fs::create_directories(dir);
  return dir;
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << value.dump(2) << '\n';
}

void write_metadata(const fs::path& result, const std::vector<std::string>& argv) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&tt, &utc);
  std::ostringstream ts;
  ts << std::put_time(&utc, "%Y-%m-%dT%H:%M:%SZ");
  json meta;
  meta["result"] = result.filename().string();
  meta["timestamp"] = ts.str();
  meta["argv"] = argv;
  meta["version"] = HCW_VERSION;
  fs::path side = result;
  side.replace_extension(".meta.json");
  write_json(side, meta);
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (static_cast<Eigen::Index>(j.at(i).size()) != cols)
      raise(ErrorKind::ParseError, "ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

json to_json(const EffectiveParameters& p) {
  json j;
  j["dimension"] = p.b.size();
  j["num_astral"] = p.num_astral();
  j["theta"] = to_json(p.theta);
  j["b"] = to_json(p.b);
  j["alpha"] = to_json(p.alpha);
  j["m"] = p.m;
  j["generator"] = to_json(p.generator);
  return j;
}

EffectiveParameters effective_from_json(const json& j) {
  try {
    EffectiveParameters p;
    p.theta = matrix_from_json(j.at("theta"));
    p.b = vector_from_json(j.at("b"));
    p.alpha = matrix_from_json(j.at("alpha"));
    p.m = j.at("m").get<double>();
    p.generator = assemble_generator(p.alpha, p.m);
    return p;
  } catch (const json::exception& e) {
    raise(ErrorKind::ParseError, std::string("effective parameters: ") + e.what());
  }
}

EffectiveParameters load_effective(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::ParseError, "cannot open " + path.string());
  try {
    return effective_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    raise(ErrorKind::ParseError, path.string() + ": " + e.what());
  }
}

json to_json(const EnsembleStats& stats) {
  json j;
  j["dimension"] = stats.dimension;
  j["num_astral"] = stats.num_astral;
  j["observables"] = stats.observable_ids;
  json cps = json::array();
  for (const auto& c : stats.checkpoints) {
    json cj;
    cj["time"] = c.time;
    cj["n_paths"] = c.n_paths;
    cj["n_alive"] = c.n_alive;
    cj["absorbed_fraction"] = c.absorbed_fraction;
    cj["occupancy"] = c.occupancy;
    cj["displacement_mean"] = to_json(c.displacement_mean);
    cj["displacement_cov"] = to_json(c.displacement_cov);
    json obs = json::object();
    for (std::size_t k = 0; k < stats.observable_ids.size(); ++k)
      obs[stats.observable_ids[k]] = {{"mean", c.observable_mean[k]},
                                      {"stderr", c.observable_stderr[k]}};
    cj["observables"] = std::move(obs);
    cps.push_back(std::move(cj));
  }
  j["checkpoints"] = std::move(cps);
  return j;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_csv(const fs::path& path, const char* header) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << header << '\n';
  return out;
}

}  // namespace

void write_ensemble_csv(const fs::path& path, const EnsembleStats& stats) {
  auto out = open_csv(path, "time,statistic,value,stderr");
  for (const auto& c : stats.checkpoints) {
    const double n = static_cast<double>(c.n_paths);
    const double t = c.time;
    auto line = [&](const std::string& name, double v, double se) {
      out << num(t) << ',' << name << ',' << num(v) << ',' << num(se) << '\n';
    };
    line("absorbed_fraction", c.absorbed_fraction,
         std::sqrt(c.absorbed_fraction * (1.0 - c.absorbed_fraction) / n));
    for (std::size_t k = 0; k < c.occupancy.size(); ++k) {
      const bool star = k + 1 == c.occupancy.size();
      const double p = c.occupancy[k];
      line(star ? std::string("occupancy_absorbed") : "occupancy_" + std::to_string(k), p,
           std::sqrt(p * (1.0 - p) / n));
    }
    const double alive = static_cast<double>(c.n_alive);
    for (Eigen::Index i = 0; i < c.displacement_mean.size(); ++i) {
      const double var = c.displacement_cov.rows() > i ? c.displacement_cov(i, i) : 0.0;
      line("displacement_mean_" + std::to_string(i), c.displacement_mean(i),
           alive > 0 ? std::sqrt(var / alive) : 0.0);
    }
    for (Eigen::Index i = 0; i < c.displacement_cov.rows(); ++i)
      for (Eigen::Index k = i; k < c.displacement_cov.cols(); ++k)
        line("displacement_cov_" + std::to_string(i) + std::to_string(k), c.displacement_cov(i, k),
             0.0);
    for (std::size_t k = 0; k < stats.observable_ids.size(); ++k)
      line("observable_" + stats.observable_ids[k], c.observable_mean[k], c.observable_stderr[k]);
  }
}

json to_json(const ConvergenceReport& report) {
  json j;
  json rows = json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"epsilon", r.epsilon},
                    {"observable", r.observable_id},
                    {"t", r.t},
                    {"micro", r.micro},
                    {"micro_stderr", r.micro_stderr},
                    {"macro", r.macro},
                    {"macro_stderr", r.macro_stderr},
                    {"error", r.error},
                    {"sup_norm", r.sup_norm},
                    {"label_only", r.label_only},
                    {"inconclusive", r.inconclusive}});
  j["rows"] = std::move(rows);
  json labels = json::array();
  for (const auto& l : report.labels)
    labels.push_back({{"epsilon", l.epsilon}, {"t", l.t}, {"micro", l.micro}, {"macro", l.macro},
                      {"tv", l.tv}});
  j["labels"] = std::move(labels);
  j["summary"] = {{"smallest_epsilon", report.summary.smallest_epsilon},
                  {"max_error_at_smallest", report.summary.max_error_at_smallest},
                  {"max_tv_at_smallest", report.summary.max_tv_at_smallest},
                  {"error_ratios", report.summary.error_ratios}};
  return j;
}

void write_convergence_csv(const fs::path& path, const ConvergenceReport& report) {
  auto out = open_csv(
      path, "epsilon,observable,t,micro,micro_stderr,macro,macro_stderr,error,inconclusive");
  for (const auto& r : report.rows)
    out << num(r.epsilon) << ',' << r.observable_id << ',' << num(r.t) << ',' << num(r.micro)
        << ',' << num(r.micro_stderr) << ',' << num(r.macro) << ',' << num(r.macro_stderr) << ','
        << num(r.error) << ',' << (r.inconclusive ? 1 : 0) << '\n';
  for (const auto& l : report.labels)
    out << num(l.epsilon) << ",label_tv," << num(l.t) << ",,,,," << num(l.tv) << ",0\n";
}

void write_fields_csv(const fs::path& path, const std::vector<MacroFields>& traj) {
  auto out = open_csv(path, "t,x,rho0,rho1,rho_star");
  for (const auto& f : traj)
    for (std::size_t i = 0; i < f.grid.n; ++i)
      out << num(f.t) << ',' << num(f.grid.x(i)) << ',' << num(f.rho0[i]) << ','
          << num(f.rho1[i]) << ',' << num(f.rho_star) << '\n';
}

void write_rho0_csv(const fs::path& path, const Grid1D& grid,
                    const std::vector<Rho0Snapshot>& traj) {
  auto out = open_csv(path, "t,x,rho0");
  for (const auto& s : traj)
    for (std::size_t i = 0; i < s.rho0.size(); ++i)
      out << num(s.t) << ',' << num(grid.x(i)) << ',' << num(s.rho0[i]) << '\n';
}

}  // namespace hcw::cli
