#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "gridseg/common.hpp"

namespace gridseg {

enum class BusKind { slack, pv, pq };

enum class LoadModel { constant_impedance };

inline const char* to_string(BusKind k) {
    switch (k) {
        case BusKind::slack: return "slack";
        case BusKind::pv: return "pv";
        case BusKind::pq: return "pq";
    }
    return "?";
}

struct Exciter {
    double Tr = 0.0;  // voltage-sensor time constant (s)
    double Ka = 0.0;  // static gain (pu)

    friend bool operator==(const Exciter&, const Exciter&) = default;
};

/// Synchronous machine, sixth order (field + 1 d-damper, 2 q-circuits).
/// Impedances/time constants are on the machine's own MVA base as given in
/// the case file; convert with to_system_base() before mixing with network
/// quantities.
struct Machine {
    Id bus;
    double rating_mva = 0.0;
    double H = 0.0;   // inertia constant (s, machine base)
    double D = 0.0;   // speed damping (pu torque / pu speed)
    double Ra = 0.0;  // stator resistance (pu)
    double Xd = 0.0, Xq = 0.0;
    double Xd_p = 0.0, Xq_p = 0.0;
    double Xd_pp = 0.0, Xq_pp = 0.0;
    double Xl = 0.0;
    double Td0_p = 0.0, Td0_pp = 0.0;
    double Tq0_p = 0.0, Tq0_pp = 0.0;
    Exciter exciter;

    friend bool operator==(const Machine&, const Machine&) = default;
};

struct Bus {
    Id id;
    BusKind kind = BusKind::pq;
    double v_setpoint = 1.0;  // pu, held on slack/pv buses
    double p_set = 0.0;       // scheduled injection (pu, system base)
    double q_set = 0.0;

    // Non-schema constant-power injection (VSC station placed on a machine
    // bus during plan evaluation). Never serialized.
    double aux_p = 0.0;
    double aux_q = 0.0;

    friend bool operator==(const Bus&, const Bus&) = default;
};

struct Branch {
    Id id;
    Id from_bus, to_bus;
    double r = 0.0, x = 0.0;   // series impedance (pu, system base)
    double b_shunt = 0.0;      // total line charging susceptance (pu)
    double tap_ratio = 1.0;    // off-nominal ratio on the from side
    double rating_mva = 0.0;   // 0 = unrated

    friend bool operator==(const Branch&, const Branch&) = default;
};

struct Load {
    Id bus;
    double p = 0.0, q = 0.0;  // demand (pu, system base)
    LoadModel model = LoadModel::constant_impedance;

    friend bool operator==(const Load&, const Load&) = default;
};

struct BranchImpedance {
    double r = 0.0, x = 0.0, b = 0.0;
};

/// Expands per-km line rates to total series impedance and charging.
inline BranchImpedance branch_km_expand(double length_km, const BranchImpedance& per_km) {
    if (!(length_km > 0.0))
        throw ParseError("length_km: must be > 0, got " + std::to_string(length_km));
    return {per_km.r * length_km, per_km.x * length_km, per_km.b * length_km};
}

struct Case {
    double system_base_mva = 100.0;
    double frequency_hz = 50.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Machine> machines;
    std::vector<Load> loads;

    // Normalization/conversion notes, and merged-branch membership so plan
    // output can name the original circuits behind an aggregated line.
    std::vector<std::string> provenance;
    std::map<Id, std::vector<Id>> merged_branches;

    int bus_index(const Id& id) const {
        for (size_t i = 0; i < buses.size(); ++i)
            if (buses[i].id == id) return static_cast<int>(i);
        return -1;
    }
    int branch_index(const Id& id) const {
        for (size_t i = 0; i < branches.size(); ++i)
            if (branches[i].id == id) return static_cast<int>(i);
        return -1;
    }
    /// Index of the (single, post-normalize) machine at a bus, or -1.
    int machine_at(const Id& bus) const {
        for (size_t i = 0; i < machines.size(); ++i)
            if (machines[i].bus == bus) return static_cast<int>(i);
        return -1;
    }
    std::vector<Id> original_circuits(const Id& branch_id) const {
        auto it = merged_branches.find(branch_id);
        if (it != merged_branches.end()) return it->second;
        return {branch_id};
    }

    friend bool operator==(const Case& a, const Case& b) {
        return a.system_base_mva == b.system_base_mva && a.frequency_hz == b.frequency_hz &&
               a.buses == b.buses && a.branches == b.branches && a.machines == b.machines &&
               a.loads == b.loads;
    }
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ParseError(path + ": " + msg);
}

inline void check_positive(double v, const std::string& path) {
    if (!(v > 0.0)) fail(path, "must be > 0, got " + std::to_string(v));
}

}  // namespace detail

/// Structural validation: id uniqueness, reference integrity, parameter
/// ranges. Throws ParseError with the offending field path.
inline void validate(const Case& c) {
    using detail::fail;
    detail::check_positive(c.system_base_mva, "system.base_mva");
    detail::check_positive(c.frequency_hz, "system.frequency_hz");
    if (c.buses.empty()) fail("buses", "schema violation: empty bus list");

    std::unordered_map<std::string, int> bus_ids;
    for (size_t i = 0; i < c.buses.size(); ++i) {
        const Bus& b = c.buses[i];
        const std::string path = "buses[" + std::to_string(i) + "]";
        if (b.id.empty()) fail(path + ".id", "empty identifier");
        if (!bus_ids.emplace(b.id, static_cast<int>(i)).second)
            fail(path + ".id", "duplicate id '" + b.id + "'");
        if (b.kind != BusKind::pq && !(b.v_setpoint > 0.5 && b.v_setpoint < 1.5))
            fail(path + ".v_setpoint", "must lie in (0.5, 1.5) for slack/pv buses");
    }

    std::unordered_map<std::string, int> branch_ids;
    for (size_t i = 0; i < c.branches.size(); ++i) {
        const Branch& br = c.branches[i];
        const std::string path = "branches[" + std::to_string(i) + "]";
        if (br.id.empty()) fail(path + ".id", "empty identifier");
        if (!branch_ids.emplace(br.id, static_cast<int>(i)).second)
            fail(path + ".id", "duplicate id '" + br.id + "'");
        if (!bus_ids.count(br.from_bus))
            fail(path + ".from_bus", "dangling reference '" + br.from_bus + "'");
        if (!bus_ids.count(br.to_bus))
            fail(path + ".to_bus", "dangling reference '" + br.to_bus + "'");
        if (br.from_bus == br.to_bus) fail(path, "from_bus == to_bus");
        if (br.x == 0.0) fail(path + ".x", "series reactance must be nonzero");
        if (!(br.tap_ratio > 0.0)) fail(path + ".tap_ratio", "must be > 0");
        if (br.rating_mva < 0.0) fail(path + ".rating_mva", "must be >= 0");
    }

    for (size_t i = 0; i < c.machines.size(); ++i) {
        const Machine& m = c.machines[i];
        const std::string path = "machines[" + std::to_string(i) + "]";
        if (!bus_ids.count(m.bus)) fail(path + ".bus", "dangling reference '" + m.bus + "'");
        detail::check_positive(m.rating_mva, path + ".rating_mva");
        detail::check_positive(m.H, path + ".H");
        if (!(m.Xd > m.Xd_p && m.Xd_p > m.Xd_pp && m.Xd_pp > m.Xl && m.Xl > 0.0))
            fail(path, "requires Xd > Xd_p > Xd_pp > Xl > 0");
        if (!(m.Xq > m.Xq_p && m.Xq_p > m.Xq_pp && m.Xq_pp > m.Xl))
            fail(path, "requires Xq > Xq_p > Xq_pp > Xl");
        for (auto [v, name] : {std::pair{m.Td0_p, ".Td0_p"}, {m.Td0_pp, ".Td0_pp"},
                               {m.Tq0_p, ".Tq0_p"}, {m.Tq0_pp, ".Tq0_pp"}})
            detail::check_positive(v, path + name);
        detail::check_positive(m.exciter.Tr, path + ".exciter.Tr");
        detail::check_positive(m.exciter.Ka, path + ".exciter.Ka");
        if (m.D < 0.0) fail(path + ".D", "must be >= 0");
    }

    for (size_t i = 0; i < c.loads.size(); ++i) {
        const Load& l = c.loads[i];
        const std::string path = "loads[" + std::to_string(i) + "]";
        if (!bus_ids.count(l.bus)) fail(path + ".bus", "dangling reference '" + l.bus + "'");
    }
}

/// Rebases machine impedances/inertia from the machine MVA base onto a
/// target base (same kV base assumed: the bus nominal voltage).
inline Machine machine_to_base(const Machine& m, double target_mva) {
    Machine out = m;
    const double kz = target_mva / m.rating_mva;  // impedance scale
    for (double* z : {&out.Ra, &out.Xd, &out.Xq, &out.Xd_p, &out.Xq_p, &out.Xd_pp, &out.Xq_pp,
                      &out.Xl})
        *z *= kz;
    out.H = m.H * m.rating_mva / target_mva;
    out.D = m.D * m.rating_mva / target_mva;
    out.rating_mva = m.rating_mva;  // nameplate is base-independent
    return out;
}

namespace detail {

inline std::pair<Id, Id> canon_pair(const Id& a, const Id& b) {
    return natural_less(a, b) ? std::pair{a, b} : std::pair{b, a};
}

inline Branch merge_parallel(const std::vector<const Branch*>& group) {
    // Series impedances in parallel; charging, ratings summed.
    Complex y_sum = 0.0;
    Branch out = *group.front();
    out.b_shunt = 0.0;
    out.rating_mva = 0.0;
    std::vector<Id> ids;
    for (const Branch* br : group) {
        y_sum += 1.0 / Complex(br->r, br->x);
        out.b_shunt += br->b_shunt;
        out.rating_mva += br->rating_mva;
        ids.push_back(br->id);
    }
    const Complex z = 1.0 / y_sum;
    out.r = z.real();
    out.x = z.imag();
    std::sort(ids.begin(), ids.end(), natural_less);
    out.id = join_ids(ids, "+");
    return out;
}

inline Machine merge_machines(const std::vector<const Machine*>& group) {
    // Common base = summed rating. Reactances parallel on the common base;
    // inertia adds; time constants and exciter are rating-weighted means
    // (exact when the units are identical, which is the aggregation case
    // that actually occurs in practice).
    double s_total = 0.0;
    for (const Machine* m : group) s_total += m->rating_mva;

    Machine out;
    out.bus = group.front()->bus;
    out.rating_mva = s_total;

    auto parallel = [&](double Machine::*field) {
        double inv = 0.0;
        for (const Machine* m : group) {
            const Machine mc = machine_to_base(*m, s_total);
            inv += 1.0 / (mc.*field);
        }
        return 1.0 / inv;
    };
    out.Ra = parallel(&Machine::Ra);
    out.Xd = parallel(&Machine::Xd);
    out.Xq = parallel(&Machine::Xq);
    out.Xd_p = parallel(&Machine::Xd_p);
    out.Xq_p = parallel(&Machine::Xq_p);
    out.Xd_pp = parallel(&Machine::Xd_pp);
    out.Xq_pp = parallel(&Machine::Xq_pp);
    out.Xl = parallel(&Machine::Xl);

    double h = 0.0, d = 0.0;
    for (const Machine* m : group) {
        const Machine mc = machine_to_base(*m, s_total);
        h += mc.H;
        d += mc.D;
    }
    out.H = h;
    out.D = d;

    auto weighted = [&](double Machine::*field) {
        double acc = 0.0;
        for (const Machine* m : group) acc += (m->*field) * m->rating_mva;
        return acc / s_total;
    };
    out.Td0_p = weighted(&Machine::Td0_p);
    out.Td0_pp = weighted(&Machine::Td0_pp);
    out.Tq0_p = weighted(&Machine::Tq0_p);
    out.Tq0_pp = weighted(&Machine::Tq0_pp);
    double tr = 0.0, ka = 0.0;
    for (const Machine* m : group) {
        tr += m->exciter.Tr * m->rating_mva;
        ka += m->exciter.Ka * m->rating_mva;
    }
    out.exciter = {tr / s_total, ka / s_total};
    return out;
}

}  // namespace detail

/// Pre-analysis aggregation: parallel circuits between the same bus pair
/// become one equivalent branch, multiple machines on one bus become one
/// equivalent unit. Idempotent; merged-element provenance is retained.
inline Case normalize(const Case& c) {
    Case out = c;

    // --- parallel branches ---
    std::map<std::pair<Id, Id>, std::vector<const Branch*>> by_pair;
    std::vector<std::pair<Id, Id>> order;
    for (const Branch& br : c.branches) {
        auto key = detail::canon_pair(br.from_bus, br.to_bus);
        if (by_pair[key].empty()) order.push_back(key);
        by_pair[key].push_back(&br);
    }
    bool any_merge = false;
    for (const auto& key : order)
        if (by_pair[key].size() > 1) any_merge = true;
    if (any_merge) {
        out.branches.clear();
        for (const auto& key : order) {
            const auto& group = by_pair[key];
            bool taps_equal = true;
            for (const Branch* br : group)
                if (br->tap_ratio != group.front()->tap_ratio) taps_equal = false;
            if (group.size() == 1 || !taps_equal) {
                for (const Branch* br : group) out.branches.push_back(*br);
                continue;
            }
            Branch merged = detail::merge_parallel(group);
            std::vector<Id> members;
            for (const Branch* br : group) members.push_back(br->id);
            std::sort(members.begin(), members.end(), natural_less);
            out.merged_branches[merged.id] = members;
            out.provenance.push_back("merged " + std::to_string(group.size()) +
                                     " parallel circuits " + join_ids(members, ",") + " -> " +
                                     merged.id);
            out.branches.push_back(merged);
        }
    }

    // --- same-bus machines ---
    std::map<Id, std::vector<const Machine*>> by_bus;
    std::vector<Id> mbus_order;
    for (const Machine& m : c.machines) {
        if (by_bus[m.bus].empty()) mbus_order.push_back(m.bus);
        by_bus[m.bus].push_back(&m);
    }
    bool any_machine_merge = false;
    for (const auto& [bus, group] : by_bus)
        if (group.size() > 1) any_machine_merge = true;
    if (any_machine_merge) {
        out.machines.clear();
        for (const Id& bus : mbus_order) {
            const auto& group = by_bus[bus];
            if (group.size() == 1) {
                out.machines.push_back(*group.front());
                continue;
            }
            out.machines.push_back(detail::merge_machines(group));
            out.provenance.push_back("aggregated " + std::to_string(group.size()) +
                                     " machines at bus " + bus + " into a single unit");
        }
    }

    return out;
}

}  // namespace gridseg
