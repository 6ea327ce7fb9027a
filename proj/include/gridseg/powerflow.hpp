#pragma once

#include <Eigen/Dense>

#include "gridseg/graph.hpp"

namespace gridseg {

/// Bus admittance matrix plus per-branch terminal admittances of the
/// pi-model with an off-nominal tap on the from side:
///   I_from = Yff V_f + Yft V_t,   I_to = Ytf V_f + Ytt V_t
struct Admittance {
    Eigen::MatrixXcd ybus;
    std::vector<Complex> yff, yft, ytf, ytt;

    Admittance(const Case& c, bool include_loads, const Eigen::VectorXd* load_vmag = nullptr)
        : ybus(Eigen::MatrixXcd::Zero(c.buses.size(), c.buses.size())) {
        yff.resize(c.branches.size());
        yft.resize(c.branches.size());
        ytf.resize(c.branches.size());
        ytt.resize(c.branches.size());
        for (size_t bi = 0; bi < c.branches.size(); ++bi) {
            const Branch& br = c.branches[bi];
            const Complex ys = 1.0 / Complex(br.r, br.x);
            const Complex ysh(0.0, br.b_shunt / 2.0);
            const double t = br.tap_ratio;
            yff[bi] = (ys + ysh) / (t * t);
            yft[bi] = -ys / t;
            ytf[bi] = -ys / t;
            ytt[bi] = ys + ysh;
            const int f = c.bus_index(br.from_bus);
            const int to = c.bus_index(br.to_bus);
            ybus(f, f) += yff[bi];
            ybus(f, to) += yft[bi];
            ybus(to, f) += ytf[bi];
            ybus(to, to) += ytt[bi];
        }
        if (include_loads) {
            // Constant-admittance conversion at |V| (1.0 unless a solved
            // profile is supplied).
            for (const Load& l : c.loads) {
                const int b = c.bus_index(l.bus);
                const double v = load_vmag ? (*load_vmag)(b) : 1.0;
                ybus(b, b) += Complex(l.p, -l.q) / (v * v);
            }
        }
    }
};

struct BranchFlow {
    Complex s_from, s_to;  // complex power into the branch at each end (pu)
    Complex i_from, i_to;  // current into the branch at each end (pu)
};

struct PowerFlowSolution {
    Eigen::VectorXcd v;        // complex bus voltage
    Eigen::VectorXd p_inj, q_inj;  // net injection at each bus (pu)
    std::vector<BranchFlow> flows;
    int iterations = 0;
    double max_residual = 0.0;
    std::vector<double> residual_history;  // inf-norm per iteration
    std::vector<Id> slack_buses;           // one per island

    double vmag(int b) const { return std::abs(v(b)); }
    double theta(int b) const { return std::arg(v(b)); }
};

struct PowerFlowOptions {
    double tol = 1e-8;
    int max_iter = 30;
};

/// Per-island slack choice: machine bus with the largest rating, ties by
/// lowest bus id. Errors on islands without machines.
inline std::vector<Id> assign_slacks(const Case& c, const std::vector<std::vector<Id>>& islands) {
    std::vector<Id> out;
    for (const auto& island : islands) {
        std::optional<Id> best;
        double best_rating = -1.0;
        for (const Id& bus : island) {
            const int mi = c.machine_at(bus);
            if (mi < 0) continue;
            const double rating = c.machines[mi].rating_mva;
            if (rating > best_rating ||
                (rating == best_rating && best && natural_less(bus, *best))) {
                best = bus;
                best_rating = rating;
            }
        }
        if (!best)
            throw DomainError("unservable island: no machine in island containing bus " +
                              island.front());
        out.push_back(*best);
    }
    return out;
}

namespace detail {

/// Resolved bus roles for one solve: one slack per island (declared, or
/// assigned by the largest-machine rule when an island declares none).
struct BusRoles {
    std::vector<BusKind> kind;   // effective kind
    std::vector<Id> slacks;
};

inline BusRoles resolve_roles(const Case& c) {
    BusRoles roles;
    roles.kind.resize(c.buses.size());
    for (size_t i = 0; i < c.buses.size(); ++i) roles.kind[i] = c.buses[i].kind;

    const Graph g(c);
    const auto comp = g.components();
    const auto islands = island_bus_ids(c, comp);
    for (const auto& island : islands) {
        std::vector<Id> declared;
        for (const Id& bus : island)
            if (c.buses[c.bus_index(bus)].kind == BusKind::slack) declared.push_back(bus);
        if (declared.size() > 1)
            throw DomainError("island containing bus " + island.front() +
                              " declares " + std::to_string(declared.size()) + " slack buses");
        if (declared.size() == 1) {
            roles.slacks.push_back(declared.front());
            continue;
        }
        const Id chosen = assign_slacks(c, {island}).front();
        roles.kind[c.bus_index(chosen)] = BusKind::slack;
        roles.slacks.push_back(chosen);
    }
    return roles;
}

}  // namespace detail

/// Sending/receiving complex power and current per branch from a voltage
/// profile (pi-model).
inline std::vector<BranchFlow> branch_flows(const Case& c, const Eigen::VectorXcd& v) {
    const Admittance adm(c, /*include_loads=*/false);
    std::vector<BranchFlow> out(c.branches.size());
    for (size_t bi = 0; bi < c.branches.size(); ++bi) {
        const int f = c.bus_index(c.branches[bi].from_bus);
        const int t = c.bus_index(c.branches[bi].to_bus);
        BranchFlow& fl = out[bi];
        fl.i_from = adm.yff[bi] * v(f) + adm.yft[bi] * v(t);
        fl.i_to = adm.ytf[bi] * v(f) + adm.ytt[bi] * v(t);
        fl.s_from = v(f) * std::conj(fl.i_from);
        fl.s_to = v(t) * std::conj(fl.i_to);
    }
    return out;
}

/// Newton-Raphson AC power flow (polar). Deterministic flat start unless a
/// warm-start profile is supplied. Multi-island cases are solved jointly
/// with one angle reference per island.
inline PowerFlowSolution solve_power_flow(const Case& c, const PowerFlowOptions& opts = {},
                                          const Eigen::VectorXcd* warm_start = nullptr) {
    const int n = static_cast<int>(c.buses.size());
    const auto roles = detail::resolve_roles(c);
    const Admittance adm(c, /*include_loads=*/false);

    // Scheduled net injections (machines via p_set, loads negative, plus
    // any fixed auxiliary injection).
    Eigen::VectorXd p_sched = Eigen::VectorXd::Zero(n), q_sched = Eigen::VectorXd::Zero(n);
    for (int b = 0; b < n; ++b) {
        p_sched(b) = c.buses[b].p_set + c.buses[b].aux_p;
        q_sched(b) = c.buses[b].q_set + c.buses[b].aux_q;
    }
    for (const Load& l : c.loads) {
        const int b = c.bus_index(l.bus);
        p_sched(b) -= l.p;
        q_sched(b) -= l.q;
    }

    Eigen::VectorXd vm(n), va(n);
    for (int b = 0; b < n; ++b) {
        if (warm_start) {
            vm(b) = std::abs((*warm_start)(b));
            va(b) = std::arg((*warm_start)(b));
        } else {
            vm(b) = (roles.kind[b] == BusKind::pq) ? 1.0 : c.buses[b].v_setpoint;
            va(b) = 0.0;
        }
    }

    // Unknown layout: angles for non-slack buses, magnitudes for pq buses.
    std::vector<int> ang_idx, mag_idx;
    for (int b = 0; b < n; ++b) {
        if (roles.kind[b] != BusKind::slack) ang_idx.push_back(b);
        if (roles.kind[b] == BusKind::pq) mag_idx.push_back(b);
    }
    const int na = static_cast<int>(ang_idx.size());
    const int nm = static_cast<int>(mag_idx.size());

    auto injections = [&](Eigen::VectorXd& p, Eigen::VectorXd& q) {
        Eigen::VectorXcd v(n);
        for (int b = 0; b < n; ++b) v(b) = std::polar(vm(b), va(b));
        const Eigen::VectorXcd i = adm.ybus * v;
        for (int b = 0; b < n; ++b) {
            const Complex s = v(b) * std::conj(i(b));
            p(b) = s.real();
            q(b) = s.imag();
        }
    };

    PowerFlowSolution sol;
    Eigen::VectorXd p(n), q(n);
    int it = 0;
    for (;; ++it) {
        injections(p, q);
        Eigen::VectorXd mis(na + nm);
        for (int k = 0; k < na; ++k) mis(k) = p_sched(ang_idx[k]) - p(ang_idx[k]);
        for (int k = 0; k < nm; ++k) mis(na + k) = q_sched(mag_idx[k]) - q(mag_idx[k]);
        const double resid = mis.size() ? mis.cwiseAbs().maxCoeff() : 0.0;
        sol.residual_history.push_back(resid);
        if (resid <= opts.tol) break;
        if (it >= opts.max_iter) {
            int worst = 0;
            double wv = -1.0;
            for (int k = 0; k < mis.size(); ++k)
                if (std::abs(mis(k)) > wv) { wv = std::abs(mis(k)); worst = k; }
            const Id bus = worst < na ? c.buses[ang_idx[worst]].id : c.buses[mag_idx[worst - na]].id;
            throw DomainError("power flow divergence: residual " + std::to_string(resid) +
                              " after " + std::to_string(it) + " iterations, worst bus " + bus);
        }

        // Polar Jacobian. dP/dθ etc. with the standard expressions.
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(na + nm, na + nm);
        auto dS = [&](int i, int j, double& dp_da, double& dq_da, double& dp_dv, double& dq_dv) {
            const Complex y = adm.ybus(i, j);
            const double g = y.real(), b_ = y.imag();
            const double aij = va(i) - va(j);
            const double cs = std::cos(aij), sn = std::sin(aij);
            if (i == j) {
                dp_da = -q(i) - b_ * vm(i) * vm(i);
                dq_da = p(i) - g * vm(i) * vm(i);
                dp_dv = p(i) / vm(i) + g * vm(i);
                dq_dv = q(i) / vm(i) - b_ * vm(i);
            } else {
                const double vv = vm(i) * vm(j);
                dp_da = vv * (g * sn - b_ * cs);
                dq_da = -vv * (g * cs + b_ * sn);
                dp_dv = vm(i) * (g * cs + b_ * sn);
                dq_dv = vm(i) * (g * sn - b_ * cs);
            }
        };
        for (int r = 0; r < na + nm; ++r) {
            const int i = r < na ? ang_idx[r] : mag_idx[r - na];
            const bool p_row = r < na;
            for (int s = 0; s < na + nm; ++s) {
                const int jb = s < na ? ang_idx[s] : mag_idx[s - na];
                if (adm.ybus(i, jb) == Complex(0.0, 0.0) && i != jb) continue;
                double dp_da, dq_da, dp_dv, dq_dv;
                dS(i, jb, dp_da, dq_da, dp_dv, dq_dv);
                const double val = s < na ? (p_row ? dp_da : dq_da) : (p_row ? dp_dv : dq_dv);
                jac(r, s) = val;
            }
        }

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
        const Eigen::VectorXd dx = lu.solve(mis);
        if (!dx.allFinite()) {
            int worst = 0;
            mis.cwiseAbs().maxCoeff(&worst);
            const Id bus = worst < na ? c.buses[ang_idx[worst]].id : c.buses[mag_idx[worst - na]].id;
            throw DomainError("power flow Jacobian singular at iteration " + std::to_string(it) +
                              ", worst bus " + bus);
        }
        for (int k = 0; k < na; ++k) va(ang_idx[k]) += dx(k);
        for (int k = 0; k < nm; ++k) vm(mag_idx[k]) += dx(na + k);
    }

    sol.iterations = it;
    sol.max_residual = sol.residual_history.back();
    sol.slack_buses = roles.slacks;
    sol.v.resize(n);
    for (int b = 0; b < n; ++b) sol.v(b) = std::polar(vm(b), va(b));
    injections(p, q);
    sol.p_inj = p;
    sol.q_inj = q;
    sol.flows = branch_flows(c, sol.v);
    return sol;
}

/// Machine terminal dispatch at a bus: the net injection minus local loads
/// and auxiliary devices. Valid for normalized cases (one machine per bus).
struct MachineDispatch {
    Id bus;
    double p, q;      // pu, system base
    double vmag, theta;  // terminal voltage
};

inline std::vector<MachineDispatch> machine_dispatch(const Case& c,
                                                     const PowerFlowSolution& sol) {
    std::vector<MachineDispatch> out;
    for (const Machine& m : c.machines) {
        const int b = c.bus_index(m.bus);
        double p = sol.p_inj(b) - c.buses[b].aux_p;
        double q = sol.q_inj(b) - c.buses[b].aux_q;
        for (const Load& l : c.loads)
            if (l.bus == m.bus) {
                p += l.p;
                q += l.q;
            }
        out.push_back({m.bus, p, q, sol.vmag(b), sol.theta(b)});
    }
    return out;
}

}  // namespace gridseg
