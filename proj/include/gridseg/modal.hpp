#pragma once

#include "gridseg/config.hpp"
#include "gridseg/lapack.hpp"
#include "gridseg/linearizer.hpp"

namespace gridseg {

/// One system mode. Only representatives with Im(lambda) >= 0 are kept;
/// the conjugate is implicit. Left vector is in the transposed convention
/// (y^T A = lambda y^T) scaled so y^T v = 1, making participations
/// p_i = y_i v_i sum to one.
struct Mode {
    Complex lambda;
    double damping_ratio = 0.0;
    double frequency_hz = 0.0;
    Eigen::VectorXcd right;
    Eigen::VectorXcd left;
    Eigen::VectorXcd participations;
    bool is_electromechanical = false;
    bool degenerate = false;  // defective pair: y^T v numerically vanishing
};

inline std::vector<Mode> eigen_analysis(const StateSpaceModel& model,
                                        const RunConfig& cfg = {}) {
    const Eigen::MatrixXd& a = model.a;
    const int n = static_cast<int>(a.rows());
    const EigenSystem es = dense_eigensystem(a);

    std::vector<Mode> modes;
    for (int k = 0; k < n; ++k) {
        if (es.values(k).imag() < 0.0) continue;
        Mode md;
        md.lambda = es.values(k);
        md.right = es.right.col(k);
        md.left = es.left_t.col(k);

        const double vnorm = md.right.cwiseAbs().maxCoeff();
        const double resid = (a * md.right - md.lambda * md.right).cwiseAbs().maxCoeff() / vnorm;
        if (resid > cfg.eigen_residual_tol)
            throw DomainError("eigen residual " + std::to_string(resid) +
                              " exceeds tolerance for lambda=" + std::to_string(md.lambda.real()) +
                              "+j" + std::to_string(md.lambda.imag()) +
                              " (rcond(A)=" + std::to_string(rcond_estimate(a)) + ")");

        const Complex s = md.left.transpose() * md.right;
        const double scale_ref = md.left.norm() * md.right.norm();
        md.degenerate = std::abs(s) < 1e-8 * scale_ref;
        if (std::abs(s) > 0.0) {
            md.left /= s;
            md.participations = md.left.cwiseProduct(md.right);
        } else {
            md.participations = Eigen::VectorXcd::Zero(n);
        }

        const double mag = std::abs(md.lambda);
        md.damping_ratio = mag > 0.0 ? -md.lambda.real() / mag : 1.0;
        md.frequency_hz = md.lambda.imag() / (2.0 * kPi);
        modes.push_back(std::move(md));
    }

    std::sort(modes.begin(), modes.end(), [](const Mode& a_, const Mode& b_) {
        if (a_.frequency_hz != b_.frequency_hz) return a_.frequency_hz < b_.frequency_hz;
        return a_.lambda.real() < b_.lambda.real();
    });
    return modes;
}

inline Eigen::VectorXcd participation_factors(const Mode& mode) { return mode.participations; }

/// Rotor-speed participation share: sum |p_i| over speed states / sum all.
inline double speed_participation_share(const Mode& mode, const StateSpaceModel& model) {
    double speed = 0.0, total = 0.0;
    for (int i = 0; i < model.n_states(); ++i) {
        const double p = std::abs(mode.participations(i));
        total += p;
        if (model.states[i].kind == StateLabel::Kind::rotor_speed) speed += p;
    }
    return total > 0.0 ? speed / total : 0.0;
}

/// Oscillatory modes in the electromechanical band with dominant rotor
/// participation, sorted by ascending damping ratio (the first entry is the
/// critical mode).
inline std::vector<Mode> electromechanical_filter(const std::vector<Mode>& modes,
                                                  const StateSpaceModel& model,
                                                  const RunConfig& cfg = {}) {
    std::vector<Mode> out;
    for (const Mode& md : modes) {
        if (md.degenerate) continue;
        if (std::abs(md.lambda) < cfg.em_min_lambda) continue;
        if (md.frequency_hz < cfg.em_band_lo_hz || md.frequency_hz > cfg.em_band_hi_hz) continue;
        if (speed_participation_share(md, model) < cfg.em_min_participation) continue;
        Mode copy = md;
        copy.is_electromechanical = true;
        out.push_back(std::move(copy));
    }
    std::sort(out.begin(), out.end(), [](const Mode& a_, const Mode& b_) {
        if (a_.damping_ratio != b_.damping_ratio) return a_.damping_ratio < b_.damping_ratio;
        return a_.frequency_hz < b_.frequency_hz;
    });
    return out;
}

struct ModeShapeEntry {
    Id machine_bus;
    Complex value;  // magnitude pu, phase of the rotated/scaled shape
};

/// Generator-speed entries of the right eigenvector, rotated and scaled so
/// the largest-magnitude entry is 1 at 0 degrees.
struct ModeShape {
    std::vector<ModeShapeEntry> entries;
    int reference = 0;  // machine index of the unit entry
    Complex scale;      // the eigenvector entry that was normalized to 1
};

namespace detail {

/// Index of the max-|.| speed entry (ties: lowest machine index).
inline int shape_reference(const Mode& mode, const StateSpaceModel& model) {
    const PlantModel& p = *model.plant;
    int best = 0;
    double best_mag = -1.0;
    for (int m = 0; m < p.n_mach(); ++m) {
        const double mag = std::abs(mode.right(p.ix_omega(m)));
        if (mag > best_mag) {
            best_mag = mag;
            best = m;
        }
    }
    return best;
}

}  // namespace detail

inline ModeShape mode_shape(const Mode& mode, const StateSpaceModel& model) {
    const PlantModel& p = *model.plant;
    if (p.n_mach() < 1) throw DomainError("mode_shape requires at least one machine");
    ModeShape out;
    out.reference = detail::shape_reference(mode, model);
    out.scale = mode.right(p.ix_omega(out.reference));
    for (int m = 0; m < p.n_mach(); ++m)
        out.entries.push_back({p.machines[m].bus, mode.right(p.ix_omega(m)) / out.scale});
    return out;
}

/// Per-mode observability factors phi = C v with v under the mode-shape
/// normalization (unit entry at the reference machine's speed state).
struct ObservabilityFactors {
    Eigen::VectorXcd phi_v;  // per bus
    Eigen::VectorXcd phi_f;  // per bus
    Eigen::VectorXcd phi_i;  // per branch
};

inline ObservabilityFactors observability(const Mode& mode, const StateSpaceModel& model) {
    const Complex scale = mode.right(model.plant->ix_omega(detail::shape_reference(mode, model)));
    const Eigen::VectorXcd v = mode.right / scale;
    ObservabilityFactors out;
    out.phi_v = model.c_v * v;
    out.phi_f = model.c_f * v;
    out.phi_i = model.c_i * v;
    return out;
}

/// Free response over [0, horizon] sampled every dt, by modal
/// superposition of the complete spectrum.
struct Trajectory {
    std::vector<double> t;
    Eigen::MatrixXd x;  // sample rows, state columns
    std::vector<StateLabel> states;
};

inline Trajectory linear_free_response(const StateSpaceModel& model, const Eigen::VectorXd& x0,
                                       double horizon, double dt) {
    if (!(dt > 0.0) || !(horizon > 0.0))
        throw DomainError("linear_free_response requires dt > 0 and horizon > 0");
    const EigenSystem es = dense_eigensystem(model.a);
    const Eigen::VectorXcd z0 =
        Eigen::PartialPivLU<Eigen::MatrixXcd>(es.right).solve(x0.cast<Complex>());

    Trajectory tr;
    tr.states = model.states;
    const int steps = static_cast<int>(horizon / dt) + 1;
    tr.t.resize(steps);
    tr.x.resize(steps, model.n_states());
    for (int k = 0; k < steps; ++k) {
        const double t = k * dt;
        tr.t[k] = t;
        Eigen::VectorXcd zt(es.values.size());
        for (int j = 0; j < es.values.size(); ++j) zt(j) = z0(j) * std::exp(es.values(j) * t);
        tr.x.row(k) = (es.right * zt).real().transpose();
    }
    return tr;
}

}  // namespace gridseg
