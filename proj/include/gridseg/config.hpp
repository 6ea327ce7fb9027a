#pragma once

#include <fstream>

#include <nlohmann/json.hpp>

#include "gridseg/common.hpp"

namespace gridseg {

/// Tolerances and decision thresholds for the whole pipeline. Defaults are
/// the working values for the bundled test systems; every knob can be
/// overridden from a JSON config file.
struct RunConfig {
    // tolerances
    double pf_tol = 1e-8;
    int pf_max_iter = 30;
    double eigen_residual_tol = 1e-8;
    double zero_flow_eps = 1e-6;
    double tie_tol = 1e-12;

    // mode classification
    double em_band_lo_hz = 0.1;
    double em_band_hi_hz = 3.0;
    double em_min_lambda = 0.01;
    double em_min_participation = 0.3;

    // edge/group identification (degrees)
    double shape_min_mag = 0.1;
    double group_phase_deg = 45.0;
    double opposing_phase_deg = 90.0;

    // suppression verdict
    double suppress_zeta_min = 0.15;
    double suppress_freq_window_hz = 0.15;

    std::string output_dir = ".";
    int verbosity = 1;

    void check() const {
        auto pos = [](double v, const char* name) {
            if (!(v > 0.0)) throw ParseError(std::string("config.") + name + ": must be > 0");
        };
        pos(pf_tol, "pf_tol");
        pos(eigen_residual_tol, "eigen_residual_tol");
        pos(zero_flow_eps, "zero_flow_eps");
        pos(tie_tol, "tie_tol");
        if (!(em_band_lo_hz >= 0.0 && em_band_hi_hz > em_band_lo_hz))
            throw ParseError("config: electromechanical band must satisfy 0 <= lo < hi");
        if (!(em_min_participation > 0.0 && em_min_participation <= 1.0))
            throw ParseError("config.em_min_participation: must lie in (0, 1]");
        if (!(group_phase_deg > 0.0 && group_phase_deg <= 90.0))
            throw ParseError("config.group_phase_deg: must lie in (0, 90]");
        if (!(opposing_phase_deg >= 90.0 && opposing_phase_deg < 180.0))
            throw ParseError("config.opposing_phase_deg: must lie in [90, 180)");
        if (!(suppress_zeta_min > 0.0 && suppress_zeta_min < 1.0))
            throw ParseError("config.suppress_zeta_min: must lie in (0, 1)");
        pos(suppress_freq_window_hz, "suppress_freq_window_hz");
        if (pf_max_iter < 1) throw ParseError("config.pf_max_iter: must be >= 1");
    }
};

inline RunConfig load_config_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("config file: invalid JSON: ") + e.what());
    }
    RunConfig cfg;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("pf_tol", cfg.pf_tol);
    get("pf_max_iter", cfg.pf_max_iter);
    get("eigen_residual_tol", cfg.eigen_residual_tol);
    get("zero_flow_eps", cfg.zero_flow_eps);
    get("tie_tol", cfg.tie_tol);
    get("em_band_lo_hz", cfg.em_band_lo_hz);
    get("em_band_hi_hz", cfg.em_band_hi_hz);
    get("em_min_lambda", cfg.em_min_lambda);
    get("em_min_participation", cfg.em_min_participation);
    get("shape_min_mag", cfg.shape_min_mag);
    get("group_phase_deg", cfg.group_phase_deg);
    get("opposing_phase_deg", cfg.opposing_phase_deg);
    get("suppress_zeta_min", cfg.suppress_zeta_min);
    get("suppress_freq_window_hz", cfg.suppress_freq_window_hz);
    get("output_dir", cfg.output_dir);
    get("verbosity", cfg.verbosity);
    cfg.check();
    return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("config file not found: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load_config_json(text);
}

/// One-line key=value rendering, echoed into output file headers.
inline std::string config_echo(const RunConfig& c) {
    std::ostringstream os;
    os.precision(12);
    os << "pf_tol=" << c.pf_tol << " pf_max_iter=" << c.pf_max_iter
       << " eigen_residual_tol=" << c.eigen_residual_tol << " zero_flow_eps=" << c.zero_flow_eps
       << " tie_tol=" << c.tie_tol << " em_band_hz=[" << c.em_band_lo_hz << ","
       << c.em_band_hi_hz << "]" << " em_min_lambda=" << c.em_min_lambda
       << " em_min_participation=" << c.em_min_participation
       << " shape_min_mag=" << c.shape_min_mag << " group_phase_deg=" << c.group_phase_deg
       << " opposing_phase_deg=" << c.opposing_phase_deg
       << " suppress_zeta_min=" << c.suppress_zeta_min
       << " suppress_freq_window_hz=" << c.suppress_freq_window_hz;
    return os.str();
}

}  // namespace gridseg
