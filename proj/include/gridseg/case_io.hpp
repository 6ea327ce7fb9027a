#pragma once

#include <nlohmann/json.hpp>

#include "gridseg/case.hpp"

namespace gridseg {

namespace detail {

using nlohmann::json;

inline std::string id_from_json(const json& j, const std::string& path) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    fail(path, "expected string or integer identifier");
}

inline double num(const json& obj, const char* key, const std::string& path,
                  std::optional<double> def = std::nullopt) {
    if (!obj.contains(key)) {
        if (def) return *def;
        fail(path + "." + key, "missing required field");
    }
    const json& v = obj.at(key);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

inline const json& member(const json& obj, const char* key, const std::string& path) {
    if (!obj.contains(key)) fail(path + "." + key, "missing required field");
    return obj.at(key);
}

}  // namespace detail

/// Parses a case file (JSON). Validates structure and invariants; per-km
/// line data is expanded to total pu on the spot. Throws ParseError with a
/// field path on any violation.
inline Case parse_case(const std::string& text) {
    using detail::fail;
    using nlohmann::json;

    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("case file: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError("case file: top level must be an object");

    Case c;
    const json& sys = detail::member(j, "system", "");
    c.system_base_mva = detail::num(sys, "base_mva", "system");
    c.frequency_hz = detail::num(sys, "frequency_hz", "system");

    const json& buses = detail::member(j, "buses", "");
    if (!buses.is_array()) fail("buses", "expected an array");
    for (size_t i = 0; i < buses.size(); ++i) {
        const json& jb = buses[i];
        const std::string path = "buses[" + std::to_string(i) + "]";
        Bus b;
        b.id = detail::id_from_json(detail::member(jb, "id", path), path + ".id");
        const std::string kind = detail::member(jb, "kind", path).get<std::string>();
        if (kind == "slack") b.kind = BusKind::slack;
        else if (kind == "pv") b.kind = BusKind::pv;
        else if (kind == "pq") b.kind = BusKind::pq;
        else fail(path + ".kind", "unknown bus kind '" + kind + "'");
        b.v_setpoint = detail::num(jb, "v_setpoint", path, 1.0);
        b.p_set = detail::num(jb, "p_set", path, 0.0);
        b.q_set = detail::num(jb, "q_set", path, 0.0);
        c.buses.push_back(b);
    }

    const json& branches = detail::member(j, "branches", "");
    if (!branches.is_array()) fail("branches", "expected an array");
    for (size_t i = 0; i < branches.size(); ++i) {
        const json& jb = branches[i];
        const std::string path = "branches[" + std::to_string(i) + "]";
        Branch br;
        br.id = detail::id_from_json(detail::member(jb, "id", path), path + ".id");
        br.from_bus = detail::id_from_json(detail::member(jb, "from_bus", path), path + ".from_bus");
        br.to_bus = detail::id_from_json(detail::member(jb, "to_bus", path), path + ".to_bus");
        if (jb.contains("per_km") || jb.contains("length_km")) {
            if (jb.contains("r") || jb.contains("x") || jb.contains("b_shunt"))
                fail(path, "give either explicit pu impedances or per_km+length_km, not both");
            const json& per = detail::member(jb, "per_km", path);
            BranchImpedance rate;
            rate.r = detail::num(per, "r", path + ".per_km", 0.0);
            rate.x = detail::num(per, "x", path + ".per_km");
            rate.b = detail::num(per, "b", path + ".per_km", 0.0);
            double length = detail::num(jb, "length_km", path);
            BranchImpedance tot;
            try {
                tot = branch_km_expand(length, rate);
            } catch (const ParseError& e) {
                fail(path, e.what());
            }
            br.r = tot.r;
            br.x = tot.x;
            br.b_shunt = tot.b;
        } else {
            br.r = detail::num(jb, "r", path, 0.0);
            br.x = detail::num(jb, "x", path);
            br.b_shunt = detail::num(jb, "b_shunt", path, 0.0);
        }
        br.tap_ratio = detail::num(jb, "tap_ratio", path, 1.0);
        br.rating_mva = detail::num(jb, "rating_mva", path, 0.0);
        c.branches.push_back(br);
    }

    const json& machines = detail::member(j, "machines", "");
    if (!machines.is_array()) fail("machines", "expected an array");
    for (size_t i = 0; i < machines.size(); ++i) {
        const json& jm = machines[i];
        const std::string path = "machines[" + std::to_string(i) + "]";
        Machine m;
        m.bus = detail::id_from_json(detail::member(jm, "bus", path), path + ".bus");
        m.rating_mva = detail::num(jm, "rating_mva", path);
        m.H = detail::num(jm, "H", path);
        m.D = detail::num(jm, "D", path, 0.0);
        m.Ra = detail::num(jm, "Ra", path, 0.0);
        m.Xd = detail::num(jm, "Xd", path);
        m.Xq = detail::num(jm, "Xq", path);
        m.Xd_p = detail::num(jm, "Xd_p", path);
        m.Xq_p = detail::num(jm, "Xq_p", path);
        m.Xd_pp = detail::num(jm, "Xd_pp", path);
        m.Xq_pp = detail::num(jm, "Xq_pp", path);
        m.Xl = detail::num(jm, "Xl", path);
        m.Td0_p = detail::num(jm, "Td0_p", path);
        m.Td0_pp = detail::num(jm, "Td0_pp", path);
        m.Tq0_p = detail::num(jm, "Tq0_p", path);
        m.Tq0_pp = detail::num(jm, "Tq0_pp", path);
        const json& je = detail::member(jm, "exciter", path);
        m.exciter.Tr = detail::num(je, "Tr", path + ".exciter");
        m.exciter.Ka = detail::num(je, "Ka", path + ".exciter");
        c.machines.push_back(m);
    }

    if (j.contains("loads")) {
        const json& loads = j.at("loads");
        if (!loads.is_array()) fail("loads", "expected an array");
        for (size_t i = 0; i < loads.size(); ++i) {
            const json& jl = loads[i];
            const std::string path = "loads[" + std::to_string(i) + "]";
            Load l;
            l.bus = detail::id_from_json(detail::member(jl, "bus", path), path + ".bus");
            l.p = detail::num(jl, "p", path);
            l.q = detail::num(jl, "q", path, 0.0);
            if (jl.contains("model")) {
                const std::string model = jl.at("model").get<std::string>();
                if (model != "constant_impedance")
                    fail(path + ".model", "only constant_impedance loads are supported");
            }
            c.loads.push_back(l);
        }
    }

    validate(c);
    return c;
}

/// Serializes the schema-visible fields (normalized representation):
/// impedances always explicit pu, aux injections and provenance omitted.
inline std::string serialize_case(const Case& c) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["system"] = {{"base_mva", c.system_base_mva}, {"frequency_hz", c.frequency_hz}};
    j["buses"] = ordered_json::array();
    for (const Bus& b : c.buses) {
        ordered_json jb;
        jb["id"] = b.id;
        jb["kind"] = to_string(b.kind);
        jb["v_setpoint"] = b.v_setpoint;
        jb["p_set"] = b.p_set;
        jb["q_set"] = b.q_set;
        j["buses"].push_back(jb);
    }
    j["branches"] = ordered_json::array();
    for (const Branch& br : c.branches) {
        ordered_json jb;
        jb["id"] = br.id;
        jb["from_bus"] = br.from_bus;
        jb["to_bus"] = br.to_bus;
        jb["r"] = br.r;
        jb["x"] = br.x;
        jb["b_shunt"] = br.b_shunt;
        jb["tap_ratio"] = br.tap_ratio;
        jb["rating_mva"] = br.rating_mva;
        j["branches"].push_back(jb);
    }
    j["machines"] = ordered_json::array();
    for (const Machine& m : c.machines) {
        ordered_json jm;
        jm["bus"] = m.bus;
        jm["rating_mva"] = m.rating_mva;
        jm["H"] = m.H;
        jm["D"] = m.D;
        jm["Ra"] = m.Ra;
        jm["Xd"] = m.Xd;
        jm["Xq"] = m.Xq;
        jm["Xd_p"] = m.Xd_p;
        jm["Xq_p"] = m.Xq_p;
        jm["Xd_pp"] = m.Xd_pp;
        jm["Xq_pp"] = m.Xq_pp;
        jm["Xl"] = m.Xl;
        jm["Td0_p"] = m.Td0_p;
        jm["Td0_pp"] = m.Td0_pp;
        jm["Tq0_p"] = m.Tq0_p;
        jm["Tq0_pp"] = m.Tq0_pp;
        jm["exciter"] = {{"Tr", m.exciter.Tr}, {"Ka", m.exciter.Ka}};
        j["machines"].push_back(jm);
    }
    j["loads"] = ordered_json::array();
    for (const Load& l : c.loads) {
        ordered_json jl;
        jl["bus"] = l.bus;
        jl["p"] = l.p;
        jl["q"] = l.q;
        jl["model"] = "constant_impedance";
        j["loads"].push_back(jl);
    }
    return j.dump(2) + "\n";
}

}  // namespace gridseg
