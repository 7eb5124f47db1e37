#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "gridprobe/certificate.hpp"
#include "gridprobe/errors.hpp"
#include "gridprobe/feeder.hpp"
#include "gridprobe/identifiability.hpp"
#include "gridprobe/json_io.hpp"
#include "gridprobe/pattern.hpp"
#include "gridprobe/powerflow.hpp"
#include "gridprobe/probing.hpp"
#include "gridprobe/zip.hpp"

namespace gridprobe::cli {

namespace {

struct RunConfig {
    std::string feeder;
    std::string partition;
    std::string mode = "phasor";
    std::string T = "auto";
    std::uint64_t seed = 1;
    std::string out;
    bool certify = false;
    bool pretty = false;
    // command specific
    std::string loads;
    std::string plan;
    std::string dataset;
    std::string dataset_out;
    std::string input;
    std::string pattern;
    int trials = 8;
    double amplitude = 0.05;
    bool per_slot = false;
};

struct Setup {
    FeederGraph feeder;
    BusPartition partition;
    AdmittanceMatrix Y;
    DataMode mode;
};

Setup load_setup(const RunConfig& cfg) {
    if (cfg.feeder.empty()) throw ValidationError("--feeder is required");
    if (cfg.partition.empty()) throw ValidationError("--partition is required");
    FeederGraph feeder = load_feeder(cfg.feeder);
    BusPartition partition = validate_partition(feeder, load_partition(cfg.partition));
    AdmittanceMatrix Y = build_admittance(feeder);
    return {std::move(feeder), std::move(partition), std::move(Y), parse_data_mode(cfg.mode)};
}

std::optional<int> parse_slot_count(const std::string& text) {
    if (text == "auto") return std::nullopt;
    std::size_t used = 0;
    int T = 0;
    try {
        T = std::stoi(text, &used);
    } catch (const std::exception&) {
        throw ValidationError("--T must be a positive integer or 'auto'");
    }
    if (used != text.size() || T < 1) throw ValidationError("--T must be a positive integer or 'auto'");
    return T;
}

// Verdict for an explicit slot count: single-slot test at T = 1, even-T test otherwise.
IdentifiabilityVerdict verdict_for(const Setup& s, int T, std::ostream& err) {
    if (T == 1) return test_single_slot(s.feeder, s.partition, s.mode);
    const auto [even, rounded] = normalize_slot_count(T);
    if (rounded) err << "warning: T=" << T << " rounded to " << even << "\n";
    return test_for_T(s.feeder, s.partition, s.mode, even);
}

void emit(const RunConfig& cfg, const Json& report, const std::string& pretty_text, std::ostream& out) {
    const std::string text = report.dump(2) + "\n";
    if (!cfg.out.empty()) write_file_atomic(cfg.out, text);
    if (cfg.pretty)
        out << pretty_text;
    else if (cfg.out.empty())
        out << text;
}

std::string fixed(double x, int digits = 6) {
    std::ostringstream s;
    s << std::setprecision(digits) << std::scientific << x;
    return s.str();
}

std::string render_verdict(const IdentifiabilityVerdict& v) {
    std::ostringstream s;
    s << "mode      " << to_string(v.mode) << "\n"
      << "T         " << v.T << "\n"
      << "T_max     " << v.t_max << "\n"
      << "flow      " << v.flow << "\n"
      << "verdict   " << (v.success ? "certified" : "not certified") << "\n";
    for (std::size_t k = 0; k < v.matchings.size(); ++k) {
        s << "subset " << k + 1 << ":";
        for (const MatchedPair& pair : v.matchings[k])
            s << "  " << pair.o << "->" << pair.m << (pair.copy ? "'" : "");
        s << "\n";
    }
    return s.str();
}

int cmd_check(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Setup s = load_setup(cfg);
    const std::optional<int> requested = parse_slot_count(cfg.T);
    const IdentifiabilityVerdict verdict =
        requested ? verdict_for(s, *requested, err) : search_min_T(s.feeder, s.partition, s.mode);

    Json report = verdict_to_json(verdict);
    report["summary"] = verdict.success ? "certified" : "not certified";
    report["seed"] = cfg.seed;
    std::string pretty = render_verdict(verdict);
    if (cfg.certify) {
        if (!verdict.success) {
            report["certificate"] = nullptr;
        } else {
            const auto g = s.feeder.structural_pattern();
            const BlockAssignment assignment = assign_coupling_equations(verdict, s.partition);
            const std::vector<bool> blocks = block_matching_check(assignment, verdict, s.partition, g);
            const bool perfect = certificate_matching(assignment, verdict, s.partition, g).has_value();

            std::mt19937_64 rng(cfg.seed);
            std::vector<StateVector> states;
            for (int t = 0; t < verdict.T; ++t) states.push_back(random_state(s.feeder.bus_count(), rng));
            const RankReport rank = numeric_rank_at_state(s.Y, s.partition, states, s.mode);

            Json cert;
            cert["assignment"] = assignment_to_json(assignment);
            cert["block_matching"] = blocks;
            cert["perfect_matching"] = perfect;
            cert["rank"] = rank_report_to_json(rank);
            report["certificate"] = std::move(cert);
            pretty += "blocks    " +
                      std::string(std::all_of(blocks.begin(), blocks.end(), [](bool b) { return b; }) ? "all matched"
                                                                                                    : "unmatched block") +
                      "\nrank      " + std::to_string(rank.numeric_rank) + " / " + std::to_string(rank.required_rank) +
                      "\n";
        }
    }
    emit(cfg, report, pretty, out);
    return verdict.success ? kSuccess : kNegative;
}

struct Recovery {
    Json report;
    bool ok = false;
    // estimates[t][i] over O buses in partition order
    std::vector<std::vector<LoadEstimate>> per_slot;
    std::vector<LoadEstimate> averaged;
};

Recovery run_recovery(const Setup& s, const ProbingDataset& dataset, bool per_slot) {
    Recovery r;
    if (!per_slot) {
        const RecoveryResult result = recover_loads(s.Y, s.partition, dataset);
        r.report = recovery_to_json(result);
        r.report["strategy"] = "joint";
        r.ok = result.converged && !result.rank_deficient;
        r.per_slot = result.per_slot;
        r.averaged = result.loads;
        return r;
    }
    const std::vector<RecoveryResult> runs = recover_loads_per_slot(s.Y, s.partition, dataset);
    Json run_reports = Json::array();
    Json slots = Json::array();
    r.ok = true;
    bool converged = true;
    bool deficient = false;
    for (const RecoveryResult& run : runs) {
        Json one = recovery_to_json(run);
        one.erase("per_slot");
        run_reports.push_back(std::move(one));
        r.per_slot.push_back(run.per_slot.at(0));
        converged = converged && run.converged;
        deficient = deficient || run.rank_deficient;
    }
    r.ok = converged && !deficient;
    for (const auto& slot : r.per_slot) {
        Json rows = Json::array();
        for (const LoadEstimate& e : slot) rows.push_back({{"bus", e.bus}, {"p", e.p}, {"q", e.q}, {"u", e.u}});
        slots.push_back(std::move(rows));
    }
    r.report = {{"strategy", "per-slot"},
                {"converged", converged},
                {"rank_deficient", deficient},
                {"runs", run_reports},
                {"per_slot", slots}};
    return r;
}

std::string render_recovery(const Recovery& r) {
    std::ostringstream s;
    s << "recovery  " << (r.ok ? "ok" : "FAILED (non-convergence or rank deficiency)") << "\n";
    s << std::left << std::setw(6) << "slot" << std::setw(6) << "bus" << std::setw(16) << "p" << std::setw(16) << "q"
      << "u\n";
    for (std::size_t t = 0; t < r.per_slot.size(); ++t)
        for (const LoadEstimate& e : r.per_slot[t])
            s << std::setw(6) << t + 1 << std::setw(6) << e.bus << std::setw(16) << fixed(e.p) << std::setw(16)
              << fixed(e.q) << fixed(e.u) << "\n";
    return s.str();
}

int cmd_simulate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
    const Setup s = load_setup(cfg);
    if (cfg.loads.empty()) throw ValidationError("--loads is required");
    const LoadModel loads = load_model_from_json(read_json_file(cfg.loads));
    std::mt19937_64 rng(cfg.seed);

    // Per-slot recovery relies on the single-slot certificate whatever T is.
    const bool per_slot = cfg.per_slot || !loads.all_constant();
    auto certify = [&](int T) { return per_slot ? test_single_slot(s.feeder, s.partition, s.mode) : verdict_for(s, T, err); };

    ProbingPlan plan;
    IdentifiabilityVerdict verdict;
    if (!cfg.plan.empty()) {
        plan = plan_from_json(read_json_file(cfg.plan));
        verdict = certify(plan.T);
    } else {
        const std::optional<int> requested = parse_slot_count(cfg.T);
        if (requested)
            verdict = certify(*requested);
        else
            verdict = per_slot ? test_single_slot(s.feeder, s.partition, s.mode)
                               : search_min_T(s.feeder, s.partition, s.mode);
        plan = default_probing_plan(s.partition, requested.value_or(verdict.T), rng, cfg.amplitude);
    }
    if (!verdict.success) err << "warning: setup is not certified identifiable for T=" << plan.T << "\n";

    const std::vector<StateVector> truth = simulate_states(s.Y, s.partition, loads, plan);
    const ProbingDataset dataset = record_dataset(s.Y, s.partition, truth, s.mode);
    if (!cfg.dataset_out.empty()) write_file_atomic(cfg.dataset_out, dataset_to_json(dataset).dump(2) + "\n");

    const Recovery rec = run_recovery(s, dataset, per_slot);

    // True injections at the simulated states, compared slot by slot.
    Json comparison = Json::array();
    double max_error = 0.0;
    for (std::size_t t = 0; t < truth.size(); ++t) {
        Eigen::VectorXd p, q;
        eval_injections(truth[t], s.Y, p, q);
        for (const LoadEstimate& e : rec.per_slot.at(t)) {
            const double err_p = std::abs(e.p - p[e.bus]);
            const double err_q = std::abs(e.q - q[e.bus]);
            max_error = std::max({max_error, err_p, err_q});
            comparison.push_back({{"slot", t + 1},
                                  {"bus", e.bus},
                                  {"p_true", p[e.bus]},
                                  {"q_true", q[e.bus]},
                                  {"p_est", e.p},
                                  {"q_est", e.q}});
        }
    }

    Json report;
    report["seed"] = cfg.seed;
    report["mode"] = to_string(s.mode);
    report["T"] = plan.T;
    report["certified"] = verdict.success;
    report["verdict"] = verdict_to_json(verdict);
    report["plan"] = plan_to_json(plan);
    report["loads"] = load_model_to_json(loads)["loads"];
    report["dataset"] = dataset_to_json(dataset);
    report["recovery"] = rec.report;
    report["comparison"] = comparison;
    report["max_abs_error"] = max_error;

    std::ostringstream pretty;
    pretty << "mode      " << to_string(s.mode) << "\nT         " << plan.T << "\ncertified " << (verdict.success ? "yes" : "no")
           << "\n"
           << render_recovery(rec) << "max |error| " << fixed(max_error) << "\n";
    emit(cfg, report, pretty.str(), out);
    return rec.ok ? kSuccess : kNegative;
}

int cmd_recover(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const Setup s = load_setup(cfg);
    if (cfg.dataset.empty()) throw ValidationError("--dataset is required");
    const ProbingDataset dataset = dataset_from_json(read_json_file(cfg.dataset));
    if (dataset.mode != s.mode)
        throw ValidationError("dataset mode " + to_string(dataset.mode) + " differs from --mode " + to_string(s.mode));
    const Recovery rec = run_recovery(s, dataset, cfg.per_slot);
    Json report = rec.report;
    report["mode"] = to_string(s.mode);
    report["T"] = dataset.T;
    emit(cfg, report, render_recovery(rec), out);
    return rec.ok ? kSuccess : kNegative;
}

struct ZipSeries {
    std::vector<double> u, p, q;  // p and q are injections
};

std::map<int, ZipSeries> zip_series_from(const Json& input) {
    std::map<int, ZipSeries> series;
    const Json* per_slot = nullptr;
    if (input.contains("per_slot"))
        per_slot = &input.at("per_slot");
    else if (input.contains("recovery") && input.at("recovery").contains("per_slot"))
        per_slot = &input.at("recovery").at("per_slot");
    try {
        if (per_slot) {
            for (const Json& slot : *per_slot)
                for (const Json& e : slot) {
                    ZipSeries& z = series[e.at("bus").get<int>()];
                    z.u.push_back(e.at("u").get<double>());
                    z.p.push_back(e.at("p").get<double>());
                    z.q.push_back(e.at("q").get<double>());
                }
        } else {
            for (const Json& b : input.at("buses")) {
                ZipSeries z{b.at("u").get<std::vector<double>>(), b.at("p").get<std::vector<double>>(),
                            b.at("q").get<std::vector<double>>()};
                if (!series.emplace(b.at("bus").get<int>(), std::move(z)).second) throw ParseError("duplicate bus");
            }
        }
    } catch (const Json::exception& e) {
        throw ParseError(std::string("fit-zip input: ") + e.what());
    }
    return series;
}

Json fit_or_flag(const std::vector<double>& u, const std::vector<double>& injection, bool& flagged) {
    std::vector<double> consumption(injection.size());
    std::transform(injection.begin(), injection.end(), consumption.begin(), [](double x) { return -x; });
    try {
        const ZipFit fit = fit_zip(u, consumption);
        flagged = flagged || fit.ill_conditioned;
        return zip_fit_to_json(fit);
    } catch (const IllPosedError& e) {
        flagged = true;
        return {{"ill_posed", true}, {"error", e.what()}, {"diagnostics", diagnostics_to_json(e.diagnostics())}};
    } catch (const std::invalid_argument& e) {
        flagged = true;
        return {{"ill_posed", true}, {"error", e.what()}};
    }
}

int cmd_fit_zip(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    if (cfg.input.empty()) throw ValidationError("--input is required");
    const std::map<int, ZipSeries> series = zip_series_from(read_json_file(cfg.input));
    Json buses = Json::array();
    std::ostringstream pretty;
    pretty << std::left << std::setw(6) << "bus" << std::setw(6) << "kind" << std::setw(16) << "alpha" << std::setw(16)
           << "beta" << std::setw(16) << "gamma" << std::setw(16) << "determinant" << "condition\n";
    for (const auto& [bus, z] : series) {
        bool flagged = false;
        Json row = {{"bus", bus}, {"p", fit_or_flag(z.u, z.p, flagged)}, {"q", fit_or_flag(z.u, z.q, flagged)}};
        row["flagged"] = flagged;
        for (const char* kind : {"p", "q"}) {
            const Json& f = row[kind];
            pretty << std::setw(6) << bus << std::setw(6) << kind;
            if (f.contains("alpha"))
                pretty << std::setw(16) << fixed(f["alpha"]) << std::setw(16) << fixed(f["beta"]) << std::setw(16)
                       << fixed(f["gamma"]);
            else
                pretty << std::setw(48) << "ill-posed";
            const Json* d = f.contains("diagnostics") ? &f["diagnostics"] : nullptr;
            pretty << std::setw(16) << (d && !(*d)["determinant"].is_null() ? fixed((*d)["determinant"]) : "-")
                   << (d ? fixed((*d)["condition_number"]) : "-") << "\n";
        }
        buses.push_back(std::move(row));
    }
    emit(cfg, Json{{"buses", buses}}, pretty.str(), out);
    return kSuccess;
}

int cmd_rank(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    if (cfg.pattern.empty()) throw ValidationError("--pattern is required");
    std::ifstream in(cfg.pattern);
    if (!in) throw ParseError("cannot open " + cfg.pattern);
    const SparsityPattern pattern = read_matrix_market(in);
    std::mt19937_64 rng(cfg.seed);
    const RankReport rank = generic_rank(pattern, cfg.trials, rng);
    Json report = rank_report_to_json(rank);
    report["rows"] = pattern.rows();
    report["cols"] = pattern.cols();
    report["trials"] = cfg.trials;
    report["seed"] = cfg.seed;
    std::ostringstream pretty;
    pretty << "size        " << pattern.rows() << " x " << pattern.cols() << "\nstructural  " << rank.structural_rank
           << "\nnumeric     " << rank.numeric_rank << "\nrequired    " << rank.required_rank << "\n";
    emit(cfg, report, pretty.str(), out);
    return rank.structural_full_rank ? kSuccess : kNegative;
}

int cmd_pattern(const RunConfig& cfg, std::ostream& out, std::ostream&) {
    const Setup s = load_setup(cfg);
    const std::optional<int> T = parse_slot_count(cfg.T);
    if (!T) throw ValidationError("pattern needs an explicit --T");
    std::ostringstream text;
    write_matrix_market(text, probing_jacobian_pattern(s.partition, s.feeder.structural_pattern(), *T, s.mode));
    if (cfg.out.empty())
        out << text.str();
    else
        write_file_atomic(cfg.out, text.str());
    return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Identifiability tests and load recovery for grid probing"};
    app.require_subcommand(1);

    auto common = [&](CLI::App* sub, bool grid) {
        if (grid) {
            sub->add_option("--feeder", cfg.feeder, "feeder JSON");
            sub->add_option("--partition", cfg.partition, "partition JSON");
            sub->add_option("--mode", cfg.mode, "phasor or non-phasor");
            sub->add_option("--T", cfg.T, "slot count or 'auto'");
        }
        sub->add_option("--seed", cfg.seed, "random seed");
        sub->add_option("--out", cfg.out, "report path");
        sub->add_flag("--pretty", cfg.pretty, "print a table instead of JSON");
    };

    CLI::App* check = app.add_subcommand("check", "run the identifiability test");
    common(check, true);
    check->add_flag("--certify", cfg.certify, "add coupling assignment and rank report");

    CLI::App* simulate = app.add_subcommand("simulate", "simulate probing and recover loads");
    common(simulate, true);
    simulate->add_option("--loads", cfg.loads, "load model JSON");
    simulate->add_option("--plan", cfg.plan, "probing plan JSON");
    simulate->add_option("--amplitude", cfg.amplitude, "default setpoint perturbation");
    simulate->add_option("--dataset-out", cfg.dataset_out, "write the simulated dataset");
    simulate->add_flag("--per-slot", cfg.per_slot, "recover each slot separately");

    CLI::App* recover = app.add_subcommand("recover", "recover loads from a dataset");
    common(recover, true);
    recover->add_option("--dataset", cfg.dataset, "dataset JSON");
    recover->add_flag("--per-slot", cfg.per_slot, "recover each slot separately");

    CLI::App* fit = app.add_subcommand("fit-zip", "fit ZIP coefficients per bus");
    common(fit, false);
    fit->add_option("--input", cfg.input, "recovery report or per-bus series JSON");

    CLI::App* rank = app.add_subcommand("rank", "generic rank of a pattern file");
    common(rank, false);
    rank->add_option("--pattern", cfg.pattern, "Matrix Market pattern");
    rank->add_option("--trials", cfg.trials, "random fills")->check(CLI::PositiveNumber);

    CLI::App* pattern = app.add_subcommand("pattern", "export the probing Jacobian pattern");
    common(pattern, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kSuccess : kError;
    }

    try {
        if (check->parsed()) return cmd_check(cfg, out, err);
        if (simulate->parsed()) return cmd_simulate(cfg, out, err);
        if (recover->parsed()) return cmd_recover(cfg, out, err);
        if (fit->parsed()) return cmd_fit_zip(cfg, out, err);
        if (rank->parsed()) return cmd_rank(cfg, out, err);
        if (pattern->parsed()) return cmd_pattern(cfg, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kError;
    }
    return kError;
}

}  // namespace gridprobe::cli
