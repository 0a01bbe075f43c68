#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "semiflow/growth_fragmentation.hpp"
#include "semiflow/harris.hpp"
#include "semiflow/selection_mutation.hpp"

namespace semiflow {

/// Config-level failure: every collected violation, field-path annotated.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::vector<std::string>& violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

struct SmModelConfig {
    FitnessField fitness;
    MutationKernel kernel;
};

struct GfModelConfig {
    PeriodicCoefficient g0, g1, b0, b1;
    FragmentationDistribution kappa;
    double alpha_weight = 2.0;
    int z_nodes = 64;
};

struct SinModelConfig {
    double period = 0.0;
};

enum class ExperimentKind {
    floquet,
    harris_A,
    harris_B,
    convergence,
    gabriel,
    counterexample_b4,
    doeblin
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::floquet;
    // floquet
    std::size_t n_monodromy = 200;
    double power_tol = 1e-12;
    int power_max_iter = 2000;
    std::size_t family_samples = 7;
    double cross_route_tol = 5e-3;
    double affine_tol = 1e-6;
    // harris (shared)
    int k_periods = 1;
    int n_max = 6;
    int time_samples = 4;
    bool K_auto = true;
    double K_lo = 0.0, K_hi = 0.0;
    bool nu_auto = true;
    double nu_lo = 0.0, nu_hi = 0.0;
    double d_threshold = 0.9;
    // harris_B
    double s0 = 0.0;
    double tau_periods = 1.0;
    double x0_bump = 0.0;  // 0 -> auto (0.45 * L)
    std::size_t b5_u_nodes = 12;
    int b5_pairs = 4;
    // convergence
    int horizon_periods = 15;
    int checkpoints_per_period = 1;
    bool dirac_auto = true;
    std::size_t dirac_node = 0, dirac_node_2 = 0;
    bool second_dirac = true;
    double profile_tol = 1e-4;
    double start_time = 0.0;
    // gabriel
    GabrielParams gabriel;
    double collapse_tol = 5e-3;
    // counterexample_b4
    int b4_k_max = 8;
    double b4_s = 0.0;
    double b4_u = 1.5707963267948966;
    // doeblin
    double doeblin_s = 0.0;
    double doeblin_t = 0.5;
    bool doeblin_R_auto = true;
    double doeblin_R = 0.0;
    double factor_rtol = 0.05;
};

struct ScenarioConfig {
    std::string name;
    std::variant<GfModelConfig, SmModelConfig, SinModelConfig> model;
    double x_min = 0.0, x_max = 1.0;
    std::size_t n_nodes = 2;
    StepScheme scheme;
    ExperimentConfig experiment;
    nlohmann::json echo;  // normalized config with defaults filled

    SpaceGrid make_grid() const { return SpaceGrid(x_min, x_max, n_nodes); }
};

ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_json(const nlohmann::json& j);

struct Verdict {
    std::string criterion;
    double value = 0.0;
    bool pass = false;
};

struct RunReport {
    nlohmann::json config_echo;
    std::string out_dir;
    double wall_time_s = 0.0;
    std::map<std::string, std::string> outputs;  // artifact name -> file path
    std::vector<Verdict> verdicts;
    nlohmann::json extras;  // informational diagnostics, not pass/fail

    bool all_pass() const;
};

/// Execute the configured experiment; artifacts land in
/// <out_base>/<config-hash>/ and the report echoes every file written.
RunReport run(const ScenarioConfig& config, const std::string& out_base, bool quiet = false);

/// Write gnuplot scripts next to the CSVs referenced by a report.json.
/// Returns the script paths; never invokes external programs.
std::vector<std::string> emit_plots(const std::string& report_path);

std::string config_hash(const nlohmann::json& normalized);
nlohmann::json report_to_json(const RunReport& report);
void write_report(const RunReport& report, const std::string& path);

nlohmann::json harris_to_json(const HarrisReport& report);
std::string harris_table(const HarrisReport& report);

/// CSV writer, 15 significant digits, byte-deterministic.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);

} // namespace semiflow
