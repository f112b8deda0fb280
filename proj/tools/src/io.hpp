#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hcw/corrector.hpp"
#include "hcw/ensemble.hpp"
#include "hcw/macromodel.hpp"
#include "hcw/validation.hpp"

namespace hcw::cli {

using nlohmann::json;

/// --out if given, else $HCW_OUTPUT_DIR, else the working directory. Created on demand.
std::filesystem::path resolve_output_dir(const std::string& flag);

void write_json(const std::filesystem::path& path, const json& value);

/// <name>.meta.json next to the result: wall-clock timestamp, argv, version.
void write_metadata(const std::filesystem::path& result, const std::vector<std::string>& argv);

json to_json(const Eigen::MatrixXd& m);
json to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const json& j);
Eigen::VectorXd vector_from_json(const json& j);

json to_json(const EffectiveParameters& p);
/// Reads the object written by to_json(EffectiveParameters).
EffectiveParameters effective_from_json(const json& j);
EffectiveParameters load_effective(const std::filesystem::path& path);

json to_json(const EnsembleStats& stats);
/// Long format: time, statistic, value, stderr.
void write_ensemble_csv(const std::filesystem::path& path, const EnsembleStats& stats);

json to_json(const ConvergenceReport& report);
void write_convergence_csv(const std::filesystem::path& path, const ConvergenceReport& report);

/// Long format: t, x, rho0, rho1, rho_star.
void write_fields_csv(const std::filesystem::path& path, const std::vector<MacroFields>& traj);
void write_rho0_csv(const std::filesystem::path& path, const Grid1D& grid,
                    const std::vector<Rho0Snapshot>& traj);

/// Full-precision decimal text for CSV cells.
std::string num(double x);

}  // namespace hcw::cli
