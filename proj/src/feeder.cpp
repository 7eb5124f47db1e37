#include "gridprobe/feeder.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "gridprobe/errors.hpp"

namespace gridprobe {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

Complex read_pair(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ParseError(std::string(what) + " must be a [real, imag] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

int read_int(const json& j, const char* key, const char* where) {
    if (!j.contains(key) || !j.at(key).is_number_integer())
        throw ParseError(std::string(where) + ": missing integer field '" + key + "'");
    return j.at(key).get<int>();
}

}  // namespace

FeederGraph::FeederGraph(std::vector<Bus> buses, std::vector<Line> lines, PerUnitBase base)
    : buses_(std::move(buses)), lines_(std::move(lines)), base_(base) {
    if (buses_.size() < 2) throw ValidationError("feeder needs at least 2 buses");
    if (!(base_.mva > 0.0) || !(base_.kv > 0.0))
        throw ValidationError("per-unit base must be positive");

    std::sort(buses_.begin(), buses_.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
    const int n = bus_count();
    int substations = 0;
    for (int i = 0; i < n; ++i) {
        if (buses_[i].id != i) throw ValidationError("bus ids must be contiguous 0..N");
        if (buses_[i].is_substation) ++substations;
    }
    if (substations == 0) throw ValidationError("no substation");
    if (substations > 1) throw ValidationError("more than one substation");
    if (!buses_[0].is_substation) throw ValidationError("substation must have id 0");

    adjacency_.assign(n, {});
    for (const Line& line : lines_) {
        if (line.from < 0 || line.from >= n || line.to < 0 || line.to >= n)
            throw ValidationError("line endpoint out of range");
        if (line.from == line.to) throw ValidationError("line connects bus " + std::to_string(line.from) + " to itself");
        if (line.series == Complex{0.0, 0.0}) throw ValidationError("line series admittance is zero");
        auto& adj = adjacency_[line.from];
        if (std::find(adj.begin(), adj.end(), line.to) != adj.end())
            throw ValidationError("duplicate line " + std::to_string(line.from) + "-" + std::to_string(line.to));
        adjacency_[line.from].push_back(line.to);
        adjacency_[line.to].push_back(line.from);
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());

    std::vector<bool> seen(n, false);
    std::queue<int> frontier;
    frontier.push(0);
    seen[0] = true;
    int reached = 1;
    while (!frontier.empty()) {
        const int bus = frontier.front();
        frontier.pop();
        for (int next : adjacency_[bus]) {
            if (!seen[next]) {
                seen[next] = true;
                ++reached;
                frontier.push(next);
            }
        }
    }
    if (reached != n) throw ValidationError("disconnected: " + std::to_string(n - reached) + " bus(es) unreachable from the substation");
}

std::vector<std::vector<int>> FeederGraph::structural_pattern() const {
    std::vector<std::vector<int>> pattern(adjacency_);
    for (int n = 0; n < bus_count(); ++n) {
        auto& row = pattern[n];
        row.insert(std::lower_bound(row.begin(), row.end(), n), n);
    }
    return pattern;
}

AdmittanceMatrix::AdmittanceMatrix(Sparse conductance, Sparse susceptance)
    : g_(std::move(conductance)), b_(std::move(susceptance)) {
    if (g_.rows() != g_.cols() || b_.rows() != g_.rows() || b_.cols() != g_.cols())
        throw ValidationError("admittance parts must be square and of equal size");
    pattern_.assign(g_.rows(), {});
    for (int col = 0; col < g_.outerSize(); ++col)
        for (Sparse::InnerIterator it(g_, col); it; ++it) pattern_[it.row()].push_back(col);
    for (auto& row : pattern_) std::sort(row.begin(), row.end());
}

AdmittanceMatrix build_admittance(const FeederGraph& feeder) {
    const int n = feeder.bus_count();
    std::vector<Eigen::Triplet<double>> g, b;
    auto add = [&](int r, int c, Complex y) {
        g.emplace_back(r, c, y.real());
        b.emplace_back(r, c, y.imag());
    };
    for (const Bus& bus : feeder.buses()) add(bus.id, bus.id, bus.shunt);
    for (const Line& line : feeder.lines()) {
        add(line.from, line.from, line.series + line.shunt_from);
        add(line.to, line.to, line.series + line.shunt_to);
        add(line.from, line.to, -line.series);
        add(line.to, line.from, -line.series);
    }
    AdmittanceMatrix::Sparse gm(n, n), bm(n, n);
    gm.setFromTriplets(g.begin(), g.end());
    bm.setFromTriplets(b.begin(), b.end());
    gm.makeCompressed();
    bm.makeCompressed();
    return AdmittanceMatrix(std::move(gm), std::move(bm));
}

FeederGraph parse_feeder(const std::string& json_text) {
    const json doc = parse_json(json_text);
    if (!doc.is_object()) throw ParseError("feeder file must be a JSON object");

    PerUnitBase base;
    if (!doc.contains("base") || !doc["base"].is_object())
        throw ParseError("feeder file must declare a per-unit base {\"mva\", \"kv\"}");
    try {
        base.mva = doc["base"].at("mva").get<double>();
        base.kv = doc["base"].at("kv").get<double>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid base: ") + e.what());
    }

    if (!doc.contains("buses") || !doc["buses"].is_array()) throw ParseError("missing 'buses' array");
    if (!doc.contains("lines") || !doc["lines"].is_array()) throw ParseError("missing 'lines' array");

    std::vector<Bus> buses;
    for (const json& jb : doc["buses"]) {
        if (!jb.is_object()) throw ParseError("bus entry must be an object");
        Bus bus;
        bus.id = read_int(jb, "id", "bus");
        if (jb.contains("substation")) {
            if (!jb["substation"].is_boolean()) throw ParseError("bus 'substation' must be boolean");
            bus.is_substation = jb["substation"].get<bool>();
        }
        if (jb.contains("shunt")) bus.shunt = read_pair(jb["shunt"], "bus shunt");
        if (jb.contains("name")) bus.name = jb["name"].get<std::string>();
        buses.push_back(std::move(bus));
    }
    {
        std::vector<int> ids;
        for (const Bus& b : buses) ids.push_back(b.id);
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw ValidationError("duplicate bus id");
    }

    // Parallel lines merge into one series admittance; shunt halves add up too.
    std::map<std::pair<int, int>, Line> merged;
    for (const json& jl : doc["lines"]) {
        if (!jl.is_object()) throw ParseError("line entry must be an object");
        Line line;
        line.from = read_int(jl, "from", "line");
        line.to = read_int(jl, "to", "line");
        const bool has_y = jl.contains("y");
        const bool has_z = jl.contains("z");
        if (has_y == has_z) throw ParseError("line must specify exactly one of 'y' or 'z'");
        if (has_y) {
            line.series = read_pair(jl["y"], "line y");
        } else {
            const Complex z = read_pair(jl["z"], "line z");
            if (z == Complex{0.0, 0.0}) throw ValidationError("line impedance is zero");
            line.series = 1.0 / z;
        }
        if (jl.contains("shunt_from")) line.shunt_from = read_pair(jl["shunt_from"], "line shunt_from");
        if (jl.contains("shunt_to")) line.shunt_to = read_pair(jl["shunt_to"], "line shunt_to");

        if (line.from > line.to) {
            std::swap(line.from, line.to);
            std::swap(line.shunt_from, line.shunt_to);
        }
        const auto key = std::make_pair(line.from, line.to);
        auto [it, inserted] = merged.try_emplace(key, line);
        if (!inserted) {
            it->second.series += line.series;
            it->second.shunt_from += line.shunt_from;
            it->second.shunt_to += line.shunt_to;
        }
    }
    std::vector<Line> lines;
    lines.reserve(merged.size());
    for (auto& [key, line] : merged) lines.push_back(line);

    return FeederGraph(std::move(buses), std::move(lines), base);
}

FeederGraph load_feeder(const std::filesystem::path& path) { return parse_feeder(read_file(path)); }

std::string serialize_feeder(const FeederGraph& feeder) {
    json doc;
    doc["base"] = {{"mva", feeder.base().mva}, {"kv", feeder.base().kv}};
    json buses = json::array();
    for (const Bus& b : feeder.buses()) {
        json jb = {{"id", b.id}, {"substation", b.is_substation}, {"shunt", {b.shunt.real(), b.shunt.imag()}}};
        if (!b.name.empty()) jb["name"] = b.name;
        buses.push_back(std::move(jb));
    }
    json lines = json::array();
    for (const Line& l : feeder.lines()) {
        json jl = {{"from", l.from}, {"to", l.to}, {"y", {l.series.real(), l.series.imag()}}};
        if (l.shunt_from != Complex{}) jl["shunt_from"] = {l.shunt_from.real(), l.shunt_from.imag()};
        if (l.shunt_to != Complex{}) jl["shunt_to"] = {l.shunt_to.real(), l.shunt_to.imag()};
        lines.push_back(std::move(jl));
    }
    doc["buses"] = std::move(buses);
    doc["lines"] = std::move(lines);
    return doc.dump(2) + "\n";
}

BusPartition validate_partition(const FeederGraph& feeder, const BusPartition& partition) {
    const int n = feeder.bus_count();
    std::vector<int> owner(n, -1);
    auto mark = [&](const std::vector<int>& ids, int tag) {
        for (int id : ids) {
            if (id < 0 || id >= n) throw ValidationError("coverage: bus " + std::to_string(id) + " does not exist");
            if (owner[id] != -1) throw ValidationError("overlap: bus " + std::to_string(id) + " listed twice");
            owner[id] = tag;
        }
    };
    mark(partition.metered, 0);
    mark(partition.non_metered, 1);
    if (owner[0] != 0) throw ValidationError("substation (bus 0) must be metered");
    for (int id = 0; id < n; ++id)
        if (owner[id] == -1) throw ValidationError("coverage: bus " + std::to_string(id) + " is in neither set");

    BusPartition checked = partition;
    std::sort(checked.metered.begin(), checked.metered.end());
    std::sort(checked.non_metered.begin(), checked.non_metered.end());
    return checked;
}

BusPartition parse_partition(const std::string& json_text) {
    const json doc = parse_json(json_text);
    BusPartition partition;
    try {
        partition.metered = doc.at("metered").get<std::vector<int>>();
        partition.non_metered = doc.at("non_metered").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ParseError(std::string("invalid partition file: ") + e.what());
    }
    return partition;
}

BusPartition load_partition(const std::filesystem::path& path) { return parse_partition(read_file(path)); }

}  // namespace gridprobe
