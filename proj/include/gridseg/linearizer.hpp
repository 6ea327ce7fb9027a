#pragma once

#include <memory>

#include "gridseg/powerflow.hpp"

namespace gridseg {

struct StateLabel {
    enum class Kind { rotor_angle, rotor_speed, eq_p, ed_p, psi1d, psi2q, exciter_vf };
    Kind kind;
    Id machine_bus;

    std::string name() const {
        switch (kind) {
            case Kind::rotor_angle: return "delta(" + machine_bus + ")";
            case Kind::rotor_speed: return "omega(" + machine_bus + ")";
            case Kind::eq_p: return "eq_p(" + machine_bus + ")";
            case Kind::ed_p: return "ed_p(" + machine_bus + ")";
            case Kind::psi1d: return "psi1d(" + machine_bus + ")";
            case Kind::psi2q: return "psi2q(" + machine_bus + ")";
            case Kind::exciter_vf: return "vf(" + machine_bus + ")";
        }
        return "?";
    }
};

namespace detail {

/// Machine on system base with derived coupling constants and the
/// operating point. Model: field + one d-axis damper, two q-axis rotor
/// circuits, stator transients neglected, speed terms at 1 pu in the
/// stator equations.
struct MachineModel {
    Id bus;
    int bus_idx = -1;
    double H, D, Ra, Xd, Xq, Xdp, Xqp, Xdpp, Xqpp, Xl;
    double Td0p, Td0pp, Tq0p, Tq0pp, Tr, Ka;
    double kd1, kd2, kd3, kq1, kq2, kq3;
    Eigen::Matrix2d minv;  // inverse of [[Ra, -Xq''],[Xd'', Ra]]
    // operating point
    double delta0, tm, vref;
    double w0_, eqp0, edp0, psi1d0, psi2q0, vf0, efd0;
};

inline Eigen::Matrix2d rot(double rho) {
    Eigen::Matrix2d r;
    r << std::cos(rho), -std::sin(rho), std::sin(rho), std::cos(rho);
    return r;
}

}  // namespace detail

/// Nonlinear differential-algebraic plant about which the state-space
/// model is formed:
///   x' = f(x, V),   0 = g(x, V) = Y V - I_machines(x, V) - I_fixed(V)
/// States per machine: delta, speed deviation (pu), E'q, E'd, psi1d,
/// psi2q, exciter sensor. Loads enter Y as constant admittances fixed at
/// the solved voltage; non-machine scheduled PQ injections stay constant
/// power. Exposes the raw maps so tests can difference them.
class PlantModel {
public:
    Case net;
    double f0 = 50.0, omega0 = 0.0;
    std::vector<detail::MachineModel> machines;
    Eigen::MatrixXcd ybus_aug;
    std::shared_ptr<const Admittance> branch_adm;
    std::vector<std::pair<int, Complex>> fixed_injections;  // (bus index, S)
    Eigen::VectorXd x0;
    Eigen::VectorXcd v0;
    std::vector<StateLabel> states;

    int n_mach() const { return static_cast<int>(machines.size()); }
    int n_bus() const { return static_cast<int>(net.buses.size()); }
    int n_states() const { return 7 * n_mach(); }

    int ix_delta(int m) const { return m; }
    int ix_omega(int m) const { return n_mach() + m; }
    int ix_eqp(int m) const { return 2 * n_mach() + 5 * m; }
    int ix_edp(int m) const { return 2 * n_mach() + 5 * m + 1; }
    int ix_psi1d(int m) const { return 2 * n_mach() + 5 * m + 2; }
    int ix_psi2q(int m) const { return 2 * n_mach() + 5 * m + 3; }
    int ix_vf(int m) const { return 2 * n_mach() + 5 * m + 4; }

    struct DqCurrents {
        double id, iq;
        Eigen::Matrix2d d_v;               // d(id,iq)/d(Re V, Im V)
        Eigen::Matrix<double, 2, 5> d_x;   // d(id,iq)/d(delta, eqp, edp, psi1d, psi2q)
        double eq2, ed2;                   // subtransient EMFs
        Eigen::Matrix2d r;                 // dq -> network rotation
    };

    DqCurrents dq_currents(int m, const Eigen::VectorXd& x, Complex vbus) const {
        const auto& mm = machines[m];
        DqCurrents out;
        const double delta = x(ix_delta(m));
        const double rho = delta - kPi / 2.0;
        out.r = detail::rot(rho);
        const Eigen::Vector2d vab(vbus.real(), vbus.imag());
        const Eigen::Vector2d vdq = out.r.transpose() * vab;
        out.eq2 = mm.kd1 * x(ix_eqp(m)) + mm.kd2 * x(ix_psi1d(m));
        out.ed2 = mm.kq1 * x(ix_edp(m)) - mm.kq2 * x(ix_psi2q(m));
        const Eigen::Vector2d e(out.ed2, out.eq2);
        const Eigen::Vector2d idq = mm.minv * (e - vdq);
        out.id = idq(0);
        out.iq = idq(1);
        // d/d delta of (vd, vq) = (vq, -vd)
        out.d_x.col(0) = mm.minv * Eigen::Vector2d(-vdq(1), vdq(0));
        out.d_x.col(1) = mm.minv * Eigen::Vector2d(0.0, mm.kd1);   // eqp
        out.d_x.col(2) = mm.minv * Eigen::Vector2d(mm.kq1, 0.0);   // edp
        out.d_x.col(3) = mm.minv * Eigen::Vector2d(0.0, mm.kd2);   // psi1d
        out.d_x.col(4) = mm.minv * Eigen::Vector2d(-mm.kq2, 0.0);  // psi2q
        out.d_v = -mm.minv * out.r.transpose();
        return out;
    }

    /// Machine current injection in the network frame.
    Complex machine_injection(int m, const Eigen::VectorXd& x, Complex vbus) const {
        const DqCurrents c = dq_currents(m, x, vbus);
        const Eigen::Vector2d inet = c.r * Eigen::Vector2d(c.id, c.iq);
        return {inet(0), inet(1)};
    }

    static Complex pq_injection_current(Complex s, Complex v) {
        return std::conj(s) / std::conj(v);
    }

    Eigen::VectorXd f(const Eigen::VectorXd& x, const Eigen::VectorXcd& v) const {
        Eigen::VectorXd out(n_states());
        for (int m = 0; m < n_mach(); ++m) {
            const auto& mm = machines[m];
            const Complex vbus = v(mm.bus_idx);
            const DqCurrents c = dq_currents(m, x, vbus);
            const double w = x(ix_omega(m));
            const double eqp = x(ix_eqp(m)), edp = x(ix_edp(m));
            const double p1 = x(ix_psi1d(m)), p2 = x(ix_psi2q(m)), vf = x(ix_vf(m));
            const double te =
                c.eq2 * c.iq + c.ed2 * c.id + (mm.Xqpp - mm.Xdpp) * c.id * c.iq;
            const double efd = mm.Ka * (mm.vref - vf);
            out(ix_delta(m)) = omega0 * w;
            out(ix_omega(m)) = (mm.tm - te - mm.D * w) / (2.0 * mm.H);
            out(ix_eqp(m)) =
                (-eqp - (mm.Xd - mm.Xdp) * (mm.kd1 * c.id - mm.kd3 * p1 + mm.kd3 * eqp) + efd) /
                mm.Td0p;
            out(ix_edp(m)) =
                (-edp + (mm.Xq - mm.Xqp) * (mm.kq1 * c.iq - mm.kq3 * p2 - mm.kq3 * edp)) /
                mm.Tq0p;
            out(ix_psi1d(m)) = (-p1 + eqp - (mm.Xdp - mm.Xl) * c.id) / mm.Td0pp;
            out(ix_psi2q(m)) = (-p2 - edp - (mm.Xqp - mm.Xl) * c.iq) / mm.Tq0pp;
            out(ix_vf(m)) = (std::abs(vbus) - vf) / mm.Tr;
        }
        return out;
    }

    /// Network current balance, rows [0,n): real part, [n,2n): imaginary.
    Eigen::VectorXd g(const Eigen::VectorXd& x, const Eigen::VectorXcd& v) const {
        const int n = n_bus();
        Eigen::VectorXcd balance = ybus_aug * v;
        for (int m = 0; m < n_mach(); ++m)
            balance(machines[m].bus_idx) -= machine_injection(m, x, v(machines[m].bus_idx));
        for (const auto& [b, s] : fixed_injections)
            balance(b) -= pq_injection_current(s, v(b));
        Eigen::VectorXd out(2 * n);
        for (int b = 0; b < n; ++b) {
            out(b) = balance(b).real();
            out(n + b) = balance(b).imag();
        }
        return out;
    }

    /// Newton solve of g(x, V) = 0 for V. Used by the finite-difference
    /// oracles and for consistency checks; the analytic reduction never
    /// depends on it.
    Eigen::VectorXcd solve_network(const Eigen::VectorXd& x, Eigen::VectorXcd v,
                                   double tol = 1e-13, int max_iter = 30) const {
        const int n = n_bus();
        for (int it = 0; it < max_iter; ++it) {
            const Eigen::VectorXd resid = g(x, v);
            if (resid.cwiseAbs().maxCoeff() <= tol) return v;
            const Eigen::MatrixXd jv = jac_gv(x, v);
            const Eigen::VectorXd dv = Eigen::PartialPivLU<Eigen::MatrixXd>(jv).solve(resid);
            for (int b = 0; b < n; ++b) v(b) -= Complex(dv(b), dv(n + b));
        }
        throw DomainError("network algebraic solve did not converge");
    }

    // --- analytic Jacobians -------------------------------------------------

    Eigen::MatrixXd jac_gv(const Eigen::VectorXd& x, const Eigen::VectorXcd& v) const {
        const int n = n_bus();
        Eigen::MatrixXd jv(2 * n, 2 * n);
        for (int r = 0; r < n; ++r)
            for (int cidx = 0; cidx < n; ++cidx) {
                const Complex y = ybus_aug(r, cidx);
                jv(r, cidx) = y.real();
                jv(r, n + cidx) = -y.imag();
                jv(n + r, cidx) = y.imag();
                jv(n + r, n + cidx) = y.real();
            }
        for (int m = 0; m < n_mach(); ++m) {
            const int b = machines[m].bus_idx;
            const DqCurrents c = dq_currents(m, x, v(b));
            const Eigen::Matrix2d dinet_dv = c.r * c.d_v;
            jv(b, b) -= dinet_dv(0, 0);
            jv(b, n + b) -= dinet_dv(0, 1);
            jv(n + b, b) -= dinet_dv(1, 0);
            jv(n + b, n + b) -= dinet_dv(1, 1);
        }
        for (const auto& [b, s] : fixed_injections) {
            const double a = v(b).real(), bb = v(b).imag();
            const double r2 = a * a + bb * bb;
            const double p = s.real(), q = s.imag();
            // I = (P - jQ)(a + jb)/r^2
            const double ire_a = p / r2 - 2.0 * a * (p * a + q * bb) / (r2 * r2);
            const double ire_b = q / r2 - 2.0 * bb * (p * a + q * bb) / (r2 * r2);
            const double iim_a = -q / r2 - 2.0 * a * (p * bb - q * a) / (r2 * r2);
            const double iim_b = p / r2 - 2.0 * bb * (p * bb - q * a) / (r2 * r2);
            jv(b, b) -= ire_a;
            jv(b, n + b) -= ire_b;
            jv(n + b, b) -= iim_a;
            jv(n + b, n + b) -= iim_b;
        }
        return jv;
    }

    Eigen::MatrixXd jac_gx(const Eigen::VectorXd& x, const Eigen::VectorXcd& v) const {
        const int n = n_bus();
        Eigen::MatrixXd jx = Eigen::MatrixXd::Zero(2 * n, n_states());
        for (int m = 0; m < n_mach(); ++m) {
            const int b = machines[m].bus_idx;
            const DqCurrents c = dq_currents(m, x, v(b));
            Eigen::Matrix<double, 2, 5> dinet = c.r * c.d_x;
            // frame rotation contributes j*I to the delta column
            const Eigen::Vector2d inet = c.r * Eigen::Vector2d(c.id, c.iq);
            dinet.col(0) += Eigen::Vector2d(-inet(1), inet(0));
            const int cols[5] = {ix_delta(m), ix_eqp(m), ix_edp(m), ix_psi1d(m), ix_psi2q(m)};
            for (int k = 0; k < 5; ++k) {
                jx(b, cols[k]) -= dinet(0, k);
                jx(n + b, cols[k]) -= dinet(1, k);
            }
        }
        return jx;
    }

    struct FJac {
        Eigen::MatrixXd fx;  // n_x x n_x
        Eigen::MatrixXd fv;  // n_x x 2n
    };

    FJac jac_f(const Eigen::VectorXd& x, const Eigen::VectorXcd& v) const {
        const int n = n_bus();
        FJac out;
        out.fx = Eigen::MatrixXd::Zero(n_states(), n_states());
        out.fv = Eigen::MatrixXd::Zero(n_states(), 2 * n);
        for (int m = 0; m < n_mach(); ++m) {
            const auto& mm = machines[m];
            const int b = mm.bus_idx;
            const Complex vbus = v(b);
            const DqCurrents c = dq_currents(m, x, vbus);

            // rows of d(id,iq) against the five coupled states and V
            const int xs[5] = {ix_delta(m), ix_eqp(m), ix_edp(m), ix_psi1d(m), ix_psi2q(m)};

            out.fx(ix_delta(m), ix_omega(m)) = omega0;

            // torque: Te = Eq2 iq + Ed2 id + (Xq''-Xd'') id iq
            const double dte_did = c.ed2 + (mm.Xqpp - mm.Xdpp) * c.iq;
            const double dte_diq = c.eq2 + (mm.Xqpp - mm.Xdpp) * c.id;
            Eigen::Matrix<double, 1, 5> dte_dx =
                dte_did * c.d_x.row(0) + dte_diq * c.d_x.row(1);
            dte_dx(1) += mm.kd1 * c.iq;   // Eq2 direct via eqp
            dte_dx(2) += mm.kq1 * c.id;   // Ed2 direct via edp
            dte_dx(3) += mm.kd2 * c.iq;   // via psi1d
            dte_dx(4) += -mm.kq2 * c.id;  // via psi2q
            for (int k = 0; k < 5; ++k)
                out.fx(ix_omega(m), xs[k]) -= dte_dx(k) / (2.0 * mm.H);
            out.fx(ix_omega(m), ix_omega(m)) = -mm.D / (2.0 * mm.H);
            const Eigen::RowVector2d dte_dv =
                dte_did * c.d_v.row(0) + dte_diq * c.d_v.row(1);
            out.fv(ix_omega(m), b) = -dte_dv(0) / (2.0 * mm.H);
            out.fv(ix_omega(m), n + b) = -dte_dv(1) / (2.0 * mm.H);

            // E'q dynamics
            const double ceq = -(mm.Xd - mm.Xdp);
            for (int k = 0; k < 5; ++k)
                out.fx(ix_eqp(m), xs[k]) += ceq * mm.kd1 * c.d_x(0, k) / mm.Td0p;
            out.fx(ix_eqp(m), ix_eqp(m)) +=
                (-1.0 - (mm.Xd - mm.Xdp) * mm.kd3) / mm.Td0p;
            out.fx(ix_eqp(m), ix_psi1d(m)) += (mm.Xd - mm.Xdp) * mm.kd3 / mm.Td0p;
            out.fx(ix_eqp(m), ix_vf(m)) += -mm.Ka / mm.Td0p;
            out.fv(ix_eqp(m), b) += ceq * mm.kd1 * c.d_v(0, 0) / mm.Td0p;
            out.fv(ix_eqp(m), n + b) += ceq * mm.kd1 * c.d_v(0, 1) / mm.Td0p;

            // E'd dynamics
            const double ced = (mm.Xq - mm.Xqp);
            for (int k = 0; k < 5; ++k)
                out.fx(ix_edp(m), xs[k]) += ced * mm.kq1 * c.d_x(1, k) / mm.Tq0p;
            out.fx(ix_edp(m), ix_edp(m)) +=
                (-1.0 - (mm.Xq - mm.Xqp) * mm.kq3) / mm.Tq0p;
            out.fx(ix_edp(m), ix_psi2q(m)) += -(mm.Xq - mm.Xqp) * mm.kq3 / mm.Tq0p;
            out.fv(ix_edp(m), b) += ced * mm.kq1 * c.d_v(1, 0) / mm.Tq0p;
            out.fv(ix_edp(m), n + b) += ced * mm.kq1 * c.d_v(1, 1) / mm.Tq0p;

            // damper fluxes
            for (int k = 0; k < 5; ++k)
                out.fx(ix_psi1d(m), xs[k]) += -(mm.Xdp - mm.Xl) * c.d_x(0, k) / mm.Td0pp;
            out.fx(ix_psi1d(m), ix_psi1d(m)) += -1.0 / mm.Td0pp;
            out.fx(ix_psi1d(m), ix_eqp(m)) += 1.0 / mm.Td0pp;
            out.fv(ix_psi1d(m), b) += -(mm.Xdp - mm.Xl) * c.d_v(0, 0) / mm.Td0pp;
            out.fv(ix_psi1d(m), n + b) += -(mm.Xdp - mm.Xl) * c.d_v(0, 1) / mm.Td0pp;

            for (int k = 0; k < 5; ++k)
                out.fx(ix_psi2q(m), xs[k]) += -(mm.Xqp - mm.Xl) * c.d_x(1, k) / mm.Tq0pp;
            out.fx(ix_psi2q(m), ix_psi2q(m)) += -1.0 / mm.Tq0pp;
            out.fx(ix_psi2q(m), ix_edp(m)) += -1.0 / mm.Tq0pp;
            out.fv(ix_psi2q(m), b) += -(mm.Xqp - mm.Xl) * c.d_v(1, 0) / mm.Tq0pp;
            out.fv(ix_psi2q(m), n + b) += -(mm.Xqp - mm.Xl) * c.d_v(1, 1) / mm.Tq0pp;

            // exciter sensor
            out.fx(ix_vf(m), ix_vf(m)) = -1.0 / mm.Tr;
            const double vabs = std::abs(vbus);
            out.fv(ix_vf(m), b) = vbus.real() / vabs / mm.Tr;
            out.fv(ix_vf(m), n + b) = vbus.imag() / vabs / mm.Tr;
        }
        return out;
    }
};

/// State-space model about the power-flow operating point, with labeled
/// states and network sensitivity output matrices.
struct StateSpaceModel {
    Eigen::MatrixXd a;
    Eigen::MatrixXd c_v, c_theta, c_f, c_i;
    std::vector<StateLabel> states;
    std::vector<Id> bus_ids;
    std::vector<Id> branch_ids;
    std::vector<Id> regularized_branches;
    std::shared_ptr<const PlantModel> plant;

    int n_states() const { return static_cast<int>(states.size()); }
    int n_mach() const { return plant->n_mach(); }
};

namespace detail {

inline MachineModel make_machine_model(const Machine& raw, int bus_idx, double system_mva) {
    const Machine m = machine_to_base(raw, system_mva);
    MachineModel mm;
    mm.bus = raw.bus;
    mm.bus_idx = bus_idx;
    mm.H = m.H;
    mm.D = m.D;
    mm.Ra = m.Ra;
    mm.Xd = m.Xd;
    mm.Xq = m.Xq;
    mm.Xdp = m.Xd_p;
    mm.Xqp = m.Xq_p;
    mm.Xdpp = m.Xd_pp;
    mm.Xqpp = m.Xq_pp;
    mm.Xl = m.Xl;
    mm.Td0p = m.Td0_p;
    mm.Td0pp = m.Td0_pp;
    mm.Tq0p = m.Tq0_p;
    mm.Tq0pp = m.Tq0_pp;
    mm.Tr = m.exciter.Tr;
    mm.Ka = m.exciter.Ka;
    mm.kd1 = (mm.Xdpp - mm.Xl) / (mm.Xdp - mm.Xl);
    mm.kd2 = (mm.Xdp - mm.Xdpp) / (mm.Xdp - mm.Xl);
    mm.kd3 = (mm.Xdp - mm.Xdpp) / ((mm.Xdp - mm.Xl) * (mm.Xdp - mm.Xl));
    mm.kq1 = (mm.Xqpp - mm.Xl) / (mm.Xqp - mm.Xl);
    mm.kq2 = (mm.Xqp - mm.Xqpp) / (mm.Xqp - mm.Xl);
    mm.kq3 = (mm.Xqp - mm.Xqpp) / ((mm.Xqp - mm.Xl) * (mm.Xqp - mm.Xl));
    Eigen::Matrix2d z;
    z << mm.Ra, -mm.Xqpp, mm.Xdpp, mm.Ra;
    mm.minv = z.inverse();
    return mm;
}

/// Steady-state rotor quantities from the terminal condition (S, V).
inline void init_operating_point(MachineModel& mm, Complex s, Complex v) {
    const Complex i = std::conj(s / v);
    const Complex e = v + Complex(mm.Ra, mm.Xq) * i;
    mm.delta0 = std::arg(e);
    const Complex rot = std::polar(1.0, -(mm.delta0 - kPi / 2.0));
    const Complex vdq = v * rot, idq = i * rot;
    const double vd = vdq.real(), vq = vdq.imag();
    const double id = idq.real(), iq = idq.imag();
    mm.eqp0 = vq + mm.Ra * iq + mm.Xdp * id;
    mm.edp0 = vd + mm.Ra * id - mm.Xqp * iq;
    mm.psi1d0 = mm.eqp0 - (mm.Xdp - mm.Xl) * id;
    mm.psi2q0 = -mm.edp0 - (mm.Xqp - mm.Xl) * iq;
    mm.efd0 = mm.eqp0 + (mm.Xd - mm.Xdp) * id;
    const double eq2 = mm.kd1 * mm.eqp0 + mm.kd2 * mm.psi1d0;
    const double ed2 = mm.kq1 * mm.edp0 - mm.kq2 * mm.psi2q0;
    mm.tm = eq2 * iq + ed2 * id + (mm.Xqpp - mm.Xdpp) * id * iq;
    mm.vf0 = std::abs(v);
    mm.vref = mm.vf0 + mm.efd0 / mm.Ka;
    mm.w0_ = 0.0;
}

}  // namespace detail

/// Assembles the plant and reduces it to x' = A x with outputs
/// [ |V| ; f_bus ; |I_branch| ] = [C_V; C_f; C_I] x.
/// Bus frequency is the angle derivative composed through the state
/// dynamics: C_f = C_theta A / (2 pi f0), in pu of f0.
inline StateSpaceModel build_linear_model(const Case& c, const PowerFlowSolution& sol,
                                          double zero_flow_eps = 1e-6) {
    for (size_t i = 0; i < c.machines.size(); ++i)
        for (size_t j = i + 1; j < c.machines.size(); ++j)
            if (c.machines[i].bus == c.machines[j].bus)
                throw DomainError("build_linear_model requires a normalized case: bus " +
                                  c.machines[i].bus + " has multiple machines");
    if (c.machines.empty()) throw DomainError("case has no machines");

    auto plant = std::make_shared<PlantModel>();
    plant->net = c;
    plant->f0 = c.frequency_hz;
    plant->omega0 = 2.0 * kPi * c.frequency_hz;
    plant->v0 = sol.v;
    plant->branch_adm = std::make_shared<Admittance>(c, /*include_loads=*/false);

    // loads fixed as admittances at the solved voltage
    Eigen::VectorXd vmag(c.buses.size());
    for (int b = 0; b < static_cast<int>(c.buses.size()); ++b) vmag(b) = sol.vmag(b);
    plant->ybus_aug = Admittance(c, /*include_loads=*/true, &vmag).ybus;

    // constant-PQ devices: auxiliary injections everywhere, plus the
    // schedule of machineless pq buses (on machine buses p_set is the
    // machine dispatch, not a device)
    for (size_t b = 0; b < c.buses.size(); ++b) {
        const Bus& bus = c.buses[b];
        Complex s(bus.aux_p, bus.aux_q);
        if (bus.kind == BusKind::pq && c.machine_at(bus.id) < 0)
            s += Complex(bus.p_set, bus.q_set);
        if (s != Complex(0.0, 0.0))
            plant->fixed_injections.emplace_back(static_cast<int>(b), s);
        if (bus.kind != BusKind::pq && c.machine_at(bus.id) < 0)
            throw DomainError("bus " + bus.id +
                              " is " + to_string(bus.kind) + " but hosts no machine");
    }

    const auto dispatch = machine_dispatch(c, sol);
    for (size_t m = 0; m < c.machines.size(); ++m) {
        const int bi = c.bus_index(c.machines[m].bus);
        auto mm = detail::make_machine_model(c.machines[m], bi, c.system_base_mva);
        detail::init_operating_point(mm, Complex(dispatch[m].p, dispatch[m].q), sol.v(bi));
        plant->machines.push_back(mm);
    }

    const int nm = plant->n_mach();
    plant->x0.resize(plant->n_states());
    plant->states.resize(plant->n_states());
    for (int m = 0; m < nm; ++m) {
        const auto& mm = plant->machines[m];
        plant->x0(plant->ix_delta(m)) = mm.delta0;
        plant->x0(plant->ix_omega(m)) = 0.0;
        plant->x0(plant->ix_eqp(m)) = mm.eqp0;
        plant->x0(plant->ix_edp(m)) = mm.edp0;
        plant->x0(plant->ix_psi1d(m)) = mm.psi1d0;
        plant->x0(plant->ix_psi2q(m)) = mm.psi2q0;
        plant->x0(plant->ix_vf(m)) = mm.vf0;
        using K = StateLabel::Kind;
        plant->states[plant->ix_delta(m)] = {K::rotor_angle, mm.bus};
        plant->states[plant->ix_omega(m)] = {K::rotor_speed, mm.bus};
        plant->states[plant->ix_eqp(m)] = {K::eq_p, mm.bus};
        plant->states[plant->ix_edp(m)] = {K::ed_p, mm.bus};
        plant->states[plant->ix_psi1d(m)] = {K::psi1d, mm.bus};
        plant->states[plant->ix_psi2q(m)] = {K::psi2q, mm.bus};
        plant->states[plant->ix_vf(m)] = {K::exciter_vf, mm.bus};
    }

    const int n = plant->n_bus();
    const Eigen::MatrixXd gv = plant->jac_gv(plant->x0, plant->v0);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(gv);
    if (!lu.isInvertible()) {
        // name the bus carrying the largest kernel component
        const Eigen::MatrixXd ker = lu.kernel();
        int worst = 0;
        ker.col(0).cwiseAbs().maxCoeff(&worst);
        throw DomainError("singular stator/network algebraic block near bus " +
                          c.buses[worst % n].id);
    }
    const Eigen::MatrixXd gx = plant->jac_gx(plant->x0, plant->v0);
    const Eigen::MatrixXd s_red = -lu.solve(gx);  // dV/dx on the manifold

    const auto fj = plant->jac_f(plant->x0, plant->v0);

    StateSpaceModel model;
    model.plant = plant;
    model.states = plant->states;
    model.a = fj.fx + fj.fv * s_red;

    // output sensitivities in rectangular voltage coordinates
    Eigen::MatrixXd hv = Eigen::MatrixXd::Zero(n, 2 * n);
    Eigen::MatrixXd ht = Eigen::MatrixXd::Zero(n, 2 * n);
    for (int b = 0; b < n; ++b) {
        const double a_ = plant->v0(b).real(), b_ = plant->v0(b).imag();
        const double r2 = a_ * a_ + b_ * b_;
        const double r = std::sqrt(r2);
        hv(b, b) = a_ / r;
        hv(b, n + b) = b_ / r;
        ht(b, b) = -b_ / r2;
        ht(b, n + b) = a_ / r2;
        model.bus_ids.push_back(c.buses[b].id);
    }
    model.c_v = hv * s_red;
    model.c_theta = ht * s_red;
    model.c_f = model.c_theta * model.a / plant->omega0;

    const int nbr = static_cast<int>(c.branches.size());
    model.c_i.resize(nbr, plant->n_states());
    const auto& adm = *plant->branch_adm;
    for (int bi = 0; bi < nbr; ++bi) {
        const int fb = c.bus_index(c.branches[bi].from_bus);
        const int tb = c.bus_index(c.branches[bi].to_bus);
        const Complex i0 = adm.yff[bi] * plant->v0(fb) + adm.yft[bi] * plant->v0(tb);
        // dI/d(a_f, b_f, a_t, b_t) as complex sensitivities
        Eigen::RowVectorXd d_re = Eigen::RowVectorXd::Zero(2 * n);
        Eigen::RowVectorXd d_im = Eigen::RowVectorXd::Zero(2 * n);
        auto add = [&](int bus, Complex y) {
            d_re(bus) += y.real();
            d_re(n + bus) += -y.imag();
            d_im(bus) += y.imag();
            d_im(n + bus) += y.real();
        };
        add(fb, adm.yff[bi]);
        add(tb, adm.yft[bi]);
        const Eigen::RowVectorXd c_re = d_re * s_red;
        const Eigen::RowVectorXd c_im = d_im * s_red;
        if (std::abs(i0) >= zero_flow_eps) {
            const double mag = std::abs(i0);
            model.c_i.row(bi) = (i0.real() * c_re + i0.imag() * c_im) / mag;
        } else {
            // near-zero base flow: magnitude derivative is undefined, use a
            // sign-consistent composite of the rectangular sensitivities
            for (int col = 0; col < plant->n_states(); ++col) {
                const double re = c_re(col), im = c_im(col);
                const double sgn = (std::abs(re) >= std::abs(im) ? (re >= 0.0 ? 1.0 : -1.0)
                                                                 : (im >= 0.0 ? 1.0 : -1.0));
                model.c_i(bi, col) = sgn * std::sqrt(re * re + im * im);
            }
            model.regularized_branches.push_back(c.branches[bi].id);
        }
        model.branch_ids.push_back(c.branches[bi].id);
    }

    return model;
}

}  // namespace gridseg
