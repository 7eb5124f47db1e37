#include "gridprobe/json_io.hpp"

#include <fstream>
#include <sstream>

#include "gridprobe/errors.hpp"

namespace gridprobe {

namespace {

template <typename F>
auto guarded(const char* what, F&& body) {
    try {
        return body();
    } catch (const Json::exception& e) {
        throw ParseError(std::string(what) + ": " + e.what());
    }
}

Json zip_array(const ZipCoefficients& c) { return Json::array({c.alpha, c.beta, c.gamma}); }

ZipCoefficients zip_from_array(const Json& j) {
    if (!j.is_array() || j.size() != 3) throw ParseError("ZIP coefficients must be [alpha, beta, gamma]");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json estimates_to_json(const std::vector<LoadEstimate>& loads, bool with_u) {
    Json out = Json::array();
    for (const LoadEstimate& e : loads) {
        Json row = {{"bus", e.bus}, {"p", e.p}, {"q", e.q}};
        if (with_u) row["u"] = e.u;
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace

Json verdict_to_json(const IdentifiabilityVerdict& verdict) {
    Json matchings = Json::array();
    for (const auto& subset : verdict.matchings)
        for (const MatchedPair& pair : subset) matchings.push_back({{"o", pair.o}, {"m", pair.m}, {"copy", pair.copy}});
    return {{"success", verdict.success},
            {"mode", to_string(verdict.mode)},
            {"T", verdict.T},
            {"flow", verdict.flow},
            {"T_max", verdict.t_max},
            {"partition", verdict.partition},
            {"matchings", matchings}};
}

IdentifiabilityVerdict verdict_from_json(const Json& j) {
    return guarded("verdict", [&] {
        IdentifiabilityVerdict v;
        v.success = j.at("success").get<bool>();
        v.mode = parse_data_mode(j.at("mode").get<std::string>());
        v.T = j.at("T").get<int>();
        v.flow = j.at("flow").get<int>();
        v.t_max = j.at("T_max").get<int>();
        v.partition = j.at("partition").get<std::vector<std::vector<int>>>();
        // The flat matching list is regrouped by the subset holding each o.
        v.matchings.assign(v.partition.size(), {});
        for (const Json& m : j.at("matchings")) {
            MatchedPair pair{m.at("o").get<int>(), m.at("m").get<int>(), m.at("copy").get<bool>()};
            bool placed = false;
            for (std::size_t k = 0; k < v.partition.size() && !placed; ++k)
                for (int o : v.partition[k])
                    if (o == pair.o) {
                        v.matchings[k].push_back(pair);
                        placed = true;
                        break;
                    }
            if (!placed) throw ParseError("matched bus " + std::to_string(pair.o) + " is in no subset");
        }
        return v;
    });
}

Json rank_report_to_json(const RankReport& report) {
    return {{"structural_full_rank", report.structural_full_rank},
            {"structural_rank", report.structural_rank},
            {"numeric_rank", report.numeric_rank},
            {"required_rank", report.required_rank},
            {"smallest_singular_ratio", report.smallest_singular_ratio}};
}

Json assignment_to_json(const BlockAssignment& assignment) {
    Json blocks = Json::array();
    for (const auto& block : assignment.blocks) {
        Json rows = Json::array();
        for (const CouplingEquation& eq : block)
            rows.push_back({{"bus", eq.bus}, {"kind", eq.reactive ? "q" : "p"}, {"link", eq.link}});
        blocks.push_back(std::move(rows));
    }
    return {{"T", assignment.T}, {"blocks", blocks}, {"carried", assignment.carried}};
}

Json plan_to_json(const ProbingPlan& plan) {
    Json slots = Json::array();
    for (const auto& slot : plan.setpoints) {
        Json entries = Json::array();
        for (const auto& [bus, s] : slot) entries.push_back({{"bus", bus}, {"p", s.p}, {"q", s.q}});
        slots.push_back(std::move(entries));
    }
    return {{"T", plan.T}, {"setpoints", slots}};
}

ProbingPlan plan_from_json(const Json& j) {
    return guarded("plan", [&] {
        ProbingPlan plan;
        plan.T = j.at("T").get<int>();
        for (const Json& slot : j.at("setpoints")) {
            std::map<int, Injection> entries;
            for (const Json& e : slot) {
                const int bus = e.at("bus").get<int>();
                if (!entries.emplace(bus, Injection{e.at("p").get<double>(), e.at("q").get<double>()}).second)
                    throw ParseError("duplicate setpoint for bus " + std::to_string(bus));
            }
            plan.setpoints.push_back(std::move(entries));
        }
        return plan;
    });
}

Json dataset_to_json(const ProbingDataset& dataset) {
    const bool phasor = dataset.mode == DataMode::phasor;
    Json slots = Json::array();
    for (const auto& slot : dataset.slots) {
        Json readings = Json::array();
        for (const MeterReading& r : slot) {
            Json row = {{"bus", r.bus}, {"u_sq", r.u_sq}};
            if (phasor) row["theta"] = r.theta;
            row["p"] = r.p;
            row["q"] = r.q;
            readings.push_back(std::move(row));
        }
        slots.push_back(std::move(readings));
    }
    return {{"mode", to_string(dataset.mode)}, {"T", dataset.T}, {"slots", slots}};
}

ProbingDataset dataset_from_json(const Json& j) {
    return guarded("dataset", [&] {
        ProbingDataset d;
        d.mode = parse_data_mode(j.at("mode").get<std::string>());
        d.T = j.at("T").get<int>();
        for (const Json& slot : j.at("slots")) {
            std::vector<MeterReading> readings;
            for (const Json& r : slot) {
                MeterReading m;
                m.bus = r.at("bus").get<int>();
                m.u_sq = r.at("u_sq").get<double>();
                m.theta = d.mode == DataMode::phasor ? r.at("theta").get<double>() : 0.0;
                m.p = r.at("p").get<double>();
                m.q = r.at("q").get<double>();
                readings.push_back(m);
            }
            d.slots.push_back(std::move(readings));
        }
        return d;
    });
}

Json load_model_to_json(const LoadModel& loads) {
    Json rows = Json::array();
    for (const auto& [bus, load] : loads.loads) {
        if (const auto* c = std::get_if<ConstantLoad>(&load))
            rows.push_back({{"bus", bus}, {"p", c->p}, {"q", c->q}});
        else {
            const auto& z = std::get<ZipLoad>(load);
            rows.push_back({{"bus", bus}, {"zip_p", zip_array(z.p)}, {"zip_q", zip_array(z.q)}});
        }
    }
    return {{"loads", rows}};
}

LoadModel load_model_from_json(const Json& j) {
    return guarded("loads", [&] {
        LoadModel model;
        for (const Json& row : j.at("loads")) {
            const int bus = row.at("bus").get<int>();
            BusLoad load;
            if (row.contains("zip_p") || row.contains("zip_q")) {
                if (row.contains("p") || row.contains("q")) throw ParseError("load mixes constant and ZIP fields");
                load = ZipLoad{zip_from_array(row.at("zip_p")), zip_from_array(row.at("zip_q"))};
            } else {
                load = ConstantLoad{row.at("p").get<double>(), row.at("q").get<double>()};
            }
            if (!model.loads.emplace(bus, load).second) throw ParseError("duplicate load for bus " + std::to_string(bus));
        }
        return model;
    });
}

Json recovery_to_json(const RecoveryResult& result) {
    Json per_slot = Json::array();
    for (const auto& slot : result.per_slot) per_slot.push_back(estimates_to_json(slot, true));
    return {{"converged", result.converged},
            {"iterations", result.iterations},
            {"residual_norm", result.residual_norm},
            {"residual_history", result.residual_history},
            {"jacobian_rank", result.jacobian_rank},
            {"required_rank", result.required_rank},
            {"rank_deficient", result.rank_deficient},
            {"loads", estimates_to_json(result.loads, false)},
            {"per_slot", per_slot}};
}

Json diagnostics_to_json(const VandermondeDiagnostics& diag) {
    Json out;
    out["determinant"] = diag.determinant ? Json(*diag.determinant) : Json(nullptr);
    out["condition_number"] = diag.condition_number;
    return out;
}

Json zip_fit_to_json(const ZipFit& fit) {
    return {{"alpha", fit.coefficients.alpha},
            {"beta", fit.coefficients.beta},
            {"gamma", fit.coefficients.gamma},
            {"residual", fit.residual},
            {"ill_conditioned", fit.ill_conditioned},
            {"diagnostics", diagnostics_to_json(fit.diagnostics)}};
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << text;
        if (!out.flush()) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace gridprobe
