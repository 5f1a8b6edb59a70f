#include "mrnet/cli_io.hpp"

#include "mrnet/errors.hpp"
#include "mrnet/rate_alloc.hpp"
#include "mrnet/renewal_transport.hpp"
#include "mrnet/tail_ldp.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace mrnet::cli {

double round_sig(double x, int digits) {
    if (!std::isfinite(x) || x == 0.0) return x;
    return std::stod(fmt::format("{:.{}g}", x, digits));
}

namespace {

Json num(double x) { return std::isfinite(x) ? Json(round_sig(x)) : Json(nullptr); }

Json num_array(std::span<const double> xs) {
    Json a = Json::array();
    for (double x : xs) a.push_back(num(x));
    return a;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view s) {
    const std::string text(trim(s));
    if (text.empty()) throw ConfigError("empty number");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("'{}' is not a number", text));
    }
    if (used != text.size()) throw ConfigError(fmt::format("'{}' is not a number", text));
    return v;
}

std::string cell(const Json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    if (v.is_number_float()) return fmt::format("{:.12g}", v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ConfigError("empty grid");
    std::vector<double> out;
    if (text.find(':') != std::string_view::npos) {
        std::vector<std::string_view> parts;
        std::size_t start = 0;
        while (true) {
            const auto pos = text.find(':', start);
            parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
            if (pos == std::string_view::npos) break;
            start = pos + 1;
        }
        if (parts.size() != 3) throw ConfigError(fmt::format("grid '{}' must be start:stop:step", text));
        const double a = parse_number(parts[0]), b = parse_number(parts[1]), step = parse_number(parts[2]);
        if (!(step > 0.0)) throw ConfigError("grid step must be positive");
        if (b < a) throw ConfigError("grid stop lies below start");
        const auto count = static_cast<long>(std::floor((b - a) / step * (1.0 + 1e-9) + 1e-9));
        if (count > 10000000) throw ConfigError("grid has too many points");
        for (long i = 0; i <= count; ++i) out.push_back(a + static_cast<double>(i) * step);
        return out;
    }
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(',', start);
        out.push_back(parse_number(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string emit_report(const ReportDocument& doc, ReportFormat format) {
    if (format == ReportFormat::kCsv) {
        if (!doc.table) throw std::invalid_argument("emit_report: this report has no table");
        std::string out;
        for (std::size_t i = 0; i < doc.table->header.size(); ++i) {
            if (i) out += ',';
            out += doc.table->header[i];
        }
        out += '\n';
        for (const auto& row : doc.table->rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += cell(row[i]);
            }
            out += '\n';
        }
        return out;
    }
    Json j = Json::object();
    j["metadata"] = doc.metadata;
    j["sections"] = doc.sections;
    if (doc.table) {
        Json rows = Json::array();
        for (const auto& row : doc.table->rows) rows.push_back(Json(row));
        j["table"] = Json{{"header", doc.table->header}, {"rows", rows}};
    }
    return j.dump(2) + "\n";
}

ReportDocument parse_report(std::string_view json_text) {
    ReportDocument doc;
    try {
        const auto j = Json::parse(json_text);
        doc.metadata = j.at("metadata");
        doc.sections = j.at("sections");
        if (j.contains("table")) {
            CsvTable t;
            t.header = j["table"].at("header").get<std::vector<std::string>>();
            for (const auto& row : j["table"].at("rows")) t.rows.push_back(row.get<std::vector<Json>>());
            doc.table = std::move(t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("malformed report: {}", e.what()));
    }
    return doc;
}

void write_text(const std::string& path, std::string_view text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open '{}' for writing", path));
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError(fmt::format("failed writing '{}'", path));
}

// ---------------------------------------------------------------------------
// JSON views of module results

Json to_json(const AlohaHopModel& hop) {
    Json j;
    j["p"] = num(hop.p());
    j["q"] = num(hop.q());
    j["theta"] = num(hop.theta());
    j["p0"] = num(hop.p0());
    j["a"] = num(hop.a());
    j["b"] = num(hop.b());
    j["c"] = num(hop.c());
    j["beta1"] = num(hop.beta1());
    j["beta2"] = num(hop.beta2());
    j["mean_X"] = num(hop.mean_X());
    j["var_X"] = num(hop.var_X());
    j["mean_T"] = num(hop.mean_T());
    j["var_T"] = num(hop.var_T());
    return j;
}

Json to_json(const SimReport& r) {
    auto cv = [](const ConfidenceValue& v) { return Json{{"mean", num(v.mean)}, {"half_width", num(v.half_width)}}; };
    Json j;
    j["mode"] = r.mode == SimMode::kTorus ? "torus" : "meanfield";
    if (r.mode == SimMode::kMeanField) j["p_used"] = num(r.p_used);
    j["measured_slots"] = r.measured_slots;
    j["theta"] = cv(r.theta);
    j["lambda"] = cv(r.lambda);
    j["mean_L"] = num(r.mean_L);
    j["lambda_times_mean_L"] = num(r.lambda.mean * r.mean_L);
    j["mean_T"] = cv(r.mean_T);
    j["mean_D"] = cv(r.mean_D);
    j["population"] = Json{{"time_average", num(r.population_time_avg)},
                           {"lambda_mean_D", num(r.population_nd)},
                           {"theta_mean_T", num(r.population_nt)}};
    j["max_queue"] = r.max_queue;
    j["packets"] = Json{{"generated", r.generated}, {"delivered", r.delivered}, {"in_network", r.in_network}};
    j["perhop_histogram"] = r.perhop_histogram;
    if (!r.delay_samples.empty()) j["delay_samples"] = r.delay_samples;
    return j;
}

Json to_json(const ShaperTrace& t) {
    std::vector<double> times_l(t.measured_lambda.size());
    for (std::size_t i = 0; i < times_l.size(); ++i) times_l[i] = t.measured_lambda[i] * static_cast<double>(i + 1);
    Json j;
    j["slots"] = t.slots;
    j["classes"] = t.classes;
    j["bucket_rates"] = num_array(t.bucket_rates);
    j["measured_lambda"] = num_array(t.measured_lambda);
    j["lambda_times_l"] = num_array(times_l);
    j["measured_lambda_total"] = num(t.measured_lambda_total);
    j["measured_workload"] = num(t.measured_workload);
    j["oversize"] = t.oversize;
    j["dropped"] = t.dropped;
    return j;
}

// ---------------------------------------------------------------------------
// Simulation config

ResolvedSimConfig sim_config_from_json(const Json& doc) {
    static const std::set<std::string> kKeys = {"mode",    "n",      "dist",   "q",      "lambda",
                                                "theta",   "saturated", "p",   "n_int",  "success_eq",
                                                "radius",  "slots",  "warmup", "seed",   "audit",
                                                "keep_delay_samples", "phi_continuous"};
    if (!doc.is_object()) throw ConfigError("simulation config must be a JSON object");
    for (const auto& [key, value] : doc.items())
        if (!kKeys.count(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
    if (doc.contains("lambda") && doc.contains("theta")) throw ConfigError("give lambda or theta, not both");

    ResolvedSimConfig out;
    SimConfig& c = out.config;
    try {
        const std::string mode = doc.value("mode", std::string("meanfield"));
        if (mode == "meanfield") c.mode = SimMode::kMeanField;
        else if (mode == "torus") c.mode = SimMode::kTorus;
        else throw ConfigError(fmt::format("unknown mode '{}'", mode));
        c.n = doc.value("n", c.n);
        const std::string dist = doc.value("dist", std::string("geometric:0.2"));
        const int phi_cont = doc.value("phi_continuous", 100);
        c.pmf = to_pmf(parse_dist_spec(dist), phi_cont);
        c.q = doc.value("q", c.q);
        c.saturated = doc.value("saturated", false);
        if (doc.contains("theta")) c.lambda = doc["theta"].get<double>() / distance_stats(c.pmf).mean;
        else c.lambda = doc.value("lambda", c.lambda);
        if (doc.contains("p") && !doc["p"].is_null()) c.p = doc["p"].get<double>();
        c.n_int = doc.value("n_int", c.n_int);
        const std::string eq = doc.value("success_eq", std::string("literal"));
        if (eq == "literal") c.success_eq = SuccessEquation::kLoadTimesP;
        else if (eq == "load-over-p") c.success_eq = SuccessEquation::kLoadOverP;
        else throw ConfigError(fmt::format("unknown success_eq '{}'", eq));
        c.radius = doc.value("radius", c.radius);
        c.slots = doc.value("slots", c.slots);
        c.warmup = doc.value("warmup", c.warmup);
        c.seed = doc.value("seed", c.seed);
        c.audit = doc.value("audit", false);
        c.keep_delay_samples = doc.value("keep_delay_samples", false);

        Json& r = out.resolved;
        r["mode"] = mode;
        r["n"] = c.n;
        r["dist"] = dist;
        r["phi_continuous"] = phi_cont;
        r["q"] = num(c.q);
        r["lambda"] = num(c.lambda);
        r["saturated"] = c.saturated;
        r["p"] = c.p ? num(*c.p) : Json(nullptr);
        r["n_int"] = num(c.n_int);
        r["success_eq"] = eq;
        r["radius"] = num(c.radius);
        r["slots"] = c.slots;
        r["warmup"] = c.warmup;
        r["seed"] = c.seed;
        r["audit"] = c.audit;
        r["keep_delay_samples"] = c.keep_delay_samples;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(fmt::format("bad simulation config: {}", e.what()));
    }
    c.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

SuccessEquation parse_success_eq(const std::string& s) {
    return s == "load-over-p" ? SuccessEquation::kLoadOverP : SuccessEquation::kLoadTimesP;
}

struct Output {
    std::string out_path;
    bool stamp = false;
};

Json base_metadata(const Output& o, const Json& config, std::optional<std::uint64_t> seed) {
    Json m;
    m["tool"] = kToolName;
    m["version"] = kToolVersion;
    if (seed) m["seed"] = *seed;
    if (o.stamp) {
        m["timestamp"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                                  std::chrono::system_clock::now())));
    }
    m["config"] = config;
    return m;
}

std::string resolve_path(const std::string& requested, const std::string& default_name) {
    const char* dir = std::getenv("MRNET_OUT_DIR");
    if (!requested.empty()) {
        std::filesystem::path p(requested);
        if (p.is_relative() && dir && *dir) p = std::filesystem::path(dir) / p;
        return p.string();
    }
    if (dir && *dir) return (std::filesystem::path(dir) / default_name).string();
    return {};
}

void deliver(const ReportDocument& doc, ReportFormat fmt_kind, const Output& o, const std::string& command,
             std::ostream& out) {
    const std::string text = emit_report(doc, fmt_kind);
    const std::string path = resolve_path(o.out_path, command + (fmt_kind == ReportFormat::kCsv ? ".csv" : ".json"));
    if (path.empty()) {
        out << text;
    } else {
        write_text(path, text);
    }
}

ReportFormat parse_format(const std::string& s) { return s == "csv" ? ReportFormat::kCsv : ReportFormat::kJson; }

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multihop random-access network analysis and simulation", std::string(kToolName)};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    Output o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--out", o.out_path, "Output file");
        sub->add_flag("--stamp", o.stamp, "Record the wall-clock time in the metadata");
    };
    const std::vector<std::string> eq_names{"literal", "load-over-p"};

    // analyze
    double theta = 0.03, q = 0.1, nint = 10.0, nodes = 1.0;
    std::string dist = "geometric:0.2", success_eq = "literal";
    int phi_cont = 100;
    auto* analyze = app.add_subcommand("analyze", "Per-hop, transport and flow statistics");
    analyze->add_option("--theta", theta, "Node throughput")->required();
    analyze->add_option("--q", q, "Retransmission probability")->required();
    analyze->add_option("--nint", nint, "Interfering nodes")->required();
    analyze->add_option("--dist", dist, "Hop-count distribution")->capture_default_str();
    analyze->add_option("--nodes", nodes, "Node count for population totals")->capture_default_str();
    analyze->add_option("--phi-continuous", phi_cont, "Support for continuous laws")->capture_default_str();
    analyze->add_option("--success-eq", success_eq, "Success-probability equation")->capture_default_str()
        ->check(CLI::IsMember(eq_names));
    add_common(analyze);

    // tail
    std::string el_list = "5,100", x_grid, format = "csv";
    long mc_samples = 0;
    std::uint64_t seed = 1;
    auto* tail = app.add_subcommand("tail", "Transport-delay tail bounds over an x grid");
    tail->add_option("--theta", theta, "Node throughput")->required();
    tail->add_option("--q", q, "Retransmission probability")->required();
    tail->add_option("--nint", nint, "Interfering nodes")->required();
    tail->add_option("--el", el_list, "Mean hop counts of geometric laws")->capture_default_str();
    tail->add_option("--x", x_grid, "x grid start:stop:step")->required();
    tail->add_option("--mc", mc_samples, "Monte Carlo samples per curve (0 for none)")->capture_default_str();
    tail->add_option("--seed", seed, "Seed")->capture_default_str();
    tail->add_option("--success-eq", success_eq, "Success-probability equation")->capture_default_str()->check(CLI::IsMember(eq_names));
    tail->add_option("--format", format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
    add_common(tail);

    // scaling
    double epsilon = 0.5, coverage = 0.99;
    std::string rt_grid;
    auto* scaling = app.add_subcommand("scaling", "Power-law exponent and relative throughput sweep");
    scaling->add_option("--epsilon", epsilon, "Minimum SD distance")->capture_default_str();
    scaling->add_option("--coverage", coverage, "Traffic fraction inside r_t")->capture_default_str();
    scaling->add_option("--rt", rt_grid, "r_t grid start:stop:step")->required();
    scaling->add_option("--format", format, "Output format")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
    add_common(scaling);

    // optimize
    int phi = 10;
    std::string fairness, objective = "log-sum";
    double u_target = 0.0;
    auto* optimize = app.add_subcommand("optimize", "Fairness and QoS-constrained rate allocations");
    optimize->add_option("--theta", theta, "Node throughput")->required();
    optimize->add_option("--phi", phi, "Maximum hop count")->required();
    auto* fair_opt = optimize->add_option("--fairness", fairness, "Closed-form criterion")
                         ->check(CLI::IsMember({"prop", "maxmin"}));
    auto* u_opt = optimize->add_option("--u-target", u_target, "Workload-bias target");
    optimize->add_option("--objective", objective, "QoS objective")->capture_default_str()
        ->check(CLI::IsMember({"log-sum", "total-rate"}));
    fair_opt->excludes(u_opt);
    add_common(optimize);

    // simulate
    std::string config_path, mode_override;
    std::optional<std::uint64_t> seed_override;
    auto* simulate_cmd = app.add_subcommand("simulate", "Slot-level network simulation");
    simulate_cmd->add_option("--config", config_path, "JSON config file")->required();
    simulate_cmd->add_option("--mode", mode_override, "Override the config mode")
        ->check(CLI::IsMember({"meanfield", "torus"}));
    simulate_cmd->add_option("--seed", seed_override, "Override the config seed");
    add_common(simulate_cmd);

    // shape
    double r = 1.0, b = 10.0;
    std::string rule = "equal", arrival = "saturated", trace_path;
    long slots = 100000;
    bool drop = false;
    auto* shape = app.add_subcommand("shape", "Token-bucket shaping run");
    shape->add_option("--r", r, "Total token rate")->required();
    shape->add_option("--b", b, "Bucket size")->required();
    shape->add_option("--phi", phi, "Hop classes")->required();
    shape->add_option("--rule", rule, "Bucket arrangement")->capture_default_str()->check(CLI::IsMember({"equal", "prop", "single"}));
    shape->add_option("--dist", dist, "Hop-count distribution for --rule single")->capture_default_str();
    shape->add_option("--arrival", arrival, "'saturated', or per-slot probabilities")->capture_default_str();
    shape->add_option("--slots", slots, "Slots")->capture_default_str();
    shape->add_option("--seed", seed, "Seed")->capture_default_str();
    shape->add_flag("--drop", drop, "Drop non-conforming packets instead of queueing");
    shape->add_option("--trace", trace_path, "Trace CSV path");
    add_common(shape);

    std::vector<const char*> argv;
    argv.reserve(args.size());
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return 2;
    }

    try {
        if (*analyze) {
            const auto spec = parse_dist_spec(dist);
            const auto pmf = to_pmf(spec, phi_cont);
            const auto eq = parse_success_eq(success_eq);
            const auto solved = solve_success_probability(theta, nint, eq);
            const AlohaHopModel hop(solved.p, q, theta);
            const auto ds = distance_stats(pmf);
            const auto ts = transport_stats(TransportModel{pmf, hop});
            const auto flow = flow_relations(pmf, hop, nodes);
            Json cfg{{"theta", num(theta)}, {"q", num(q)},   {"nint", num(nint)},
                     {"dist", spec.text},  {"phi_continuous", phi_cont}, {"nodes", num(nodes)},
                     {"success_eq", success_eq}};
            ReportDocument doc;
            doc.metadata = base_metadata(o, cfg, std::nullopt);
            Json h = to_json(hop);
            h["solver_residual"] = num(solved.residual);
            doc.sections["hop"] = h;
            doc.sections["distance"] = Json{{"phi", pmf.phi()},
                                            {"mean", num(ds.mean)},
                                            {"second_moment", num(ds.second_moment)},
                                            {"variance", num(ds.variance)},
                                            {"residual_mean", num(ds.residual_mean)},
                                            {"workload_bias", num(ds.workload_bias)}};
            doc.sections["transport"] = Json{{"mean_D", num(ts.mean)},
                                             {"second_moment", num(ts.second_moment)},
                                             {"variance", num(ts.variance)},
                                             {"residual_mean", num(ts.residual_mean)}};
            doc.sections["flow"] = Json{{"lambda", num(flow.lambda)},
                                        {"mean_D", num(flow.mean_D)},
                                        {"population_nd", num(flow.population_nd)},
                                        {"population_nt", num(flow.population_nt)}};
            deliver(doc, ReportFormat::kJson, o, "analyze", out);
            return 0;
        }

        if (*tail) {
            const auto eq = parse_success_eq(success_eq);
            const auto hop = hop_model_from_contention(theta, q, nint, eq);
            const auto grid = parse_grid(x_grid);
            const auto els = parse_grid(el_list);
            ReportDocument doc;
            Json cfg{{"theta", num(theta)}, {"q", num(q)}, {"nint", num(nint)}, {"el", num_array(els)},
                     {"x", x_grid},         {"mc", mc_samples}, {"success_eq", success_eq}};
            doc.metadata = base_metadata(o, cfg, mc_samples > 0 ? std::optional<std::uint64_t>(seed) : std::nullopt);
            doc.sections["hop"] = to_json(hop);
            CsvTable table{{"el", "x", "lower", "approx", "upper", "mc", "mc_half_width"}, {}};
            for (std::size_t k = 0; k < els.size(); ++k) {
                const double el = els[k];
                if (!(el >= 1.0)) throw DomainError("mean hop count must be at least 1");
                const auto pmf = el == 1.0 ? HopCountPmf::point_mass(1) : HopCountPmf::geometric(1.0 / el);
                const auto curve = tail_bounds(pmf, hop, grid);
                std::vector<TailEstimate> mc;
                if (mc_samples > 0) mc = estimate_tail(pmf, perhop_pmf(hop), grid, mc_samples, seed + k);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    table.rows.push_back({num(el), num(grid[i]), num(curve.lower[i]), num(curve.approx[i]),
                                          num(curve.upper[i]), mc.empty() ? Json(nullptr) : num(mc[i].probability),
                                          mc.empty() ? Json(nullptr) : num(mc[i].half_width)});
                }
            }
            doc.table = std::move(table);
            deliver(doc, parse_format(format), o, "tail", out);
            return 0;
        }

        if (*scaling) {
            const auto grid = parse_grid(rt_grid);
            ReportDocument doc;
            doc.metadata = base_metadata(
                o, Json{{"epsilon", num(epsilon)}, {"coverage", num(coverage)}, {"rt", rt_grid}}, std::nullopt);
            CsvTable table{{"rt", "alpha", "relative_throughput"}, {}};
            for (double rt : grid) {
                const double alpha = alpha_for_region(rt, epsilon, coverage);
                const auto rel = power_law_relative_throughput(alpha);
                table.rows.push_back({num(rt), num(alpha), rel ? num(*rel) : Json(nullptr)});
            }
            doc.table = std::move(table);
            deliver(doc, parse_format(format), o, "scaling", out);
            return 0;
        }

        if (*optimize) {
            ReportDocument doc;
            Json cfg{{"theta", num(theta)}, {"phi", phi}};
            auto fairness_json = [](const FairnessResult& f) {
                Json j;
                j["allocation"] = format_explicit(f.allocation.rates);
                j["rates"] = num_array(f.allocation.rates);
                j["network_throughput"] = num(f.network_throughput);
                j["workload_bias"] = num(f.workload_bias);
                j["resource_sum"] = num(f.allocation.theta);
                j["approx_throughput"] = f.approx_throughput ? num(*f.approx_throughput) : Json(nullptr);
                j["approx_workload_bias"] = f.approx_workload_bias ? num(*f.approx_workload_bias) : Json(nullptr);
                return j;
            };
            if (!fairness.empty()) {
                cfg["fairness"] = fairness;
                const auto res = fairness == "prop" ? proportional_allocation(theta, phi) : maxmin_allocation(theta, phi);
                doc.sections["fairness"] = fairness_json(res);
                doc.sections["fairness"]["criterion"] = fairness == "prop" ? "proportional" : "maxmin";
            } else {
                if (u_opt->count() == 0) throw CLI::RequiredError("--fairness or --u-target");
                cfg["u_target"] = num(u_target);
                cfg["objective"] = objective;
                const auto obj = objective == "log-sum" ? objectives::log_sum() : objectives::total_rate();
                const auto res = optimize_with_qos(obj, theta, u_target, phi);
                Json j = fairness_json(res.result);
                j["criterion"] = "custom";
                j["feasible"] = res.feasible;
                j["objective"] = num(res.objective);
                j["resource_residual"] = num(res.resource_residual);
                j["bias_residual"] = num(res.bias_residual);
                doc.sections["qos"] = j;
            }
            doc.metadata = base_metadata(o, cfg, std::nullopt);
            deliver(doc, ReportFormat::kJson, o, "optimize", out);
            return 0;
        }

        if (*simulate_cmd) {
            std::ifstream f(config_path);
            if (!f) throw ConfigError(fmt::format("cannot read config '{}'", config_path));
            Json raw;
            try {
                raw = Json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(fmt::format("config '{}' is not valid JSON: {}", config_path, e.what()));
            }
            if (!mode_override.empty()) raw["mode"] = mode_override;
            if (seed_override) raw["seed"] = *seed_override;
            auto resolved = sim_config_from_json(raw);
            const auto report = simulate(resolved.config);
            ReportDocument doc;
            doc.metadata = base_metadata(o, resolved.resolved, resolved.config.seed);
            doc.sections["sim_report"] = to_json(report);
            deliver(doc, ReportFormat::kJson, o, "simulate", out);
            return 0;
        }

        if (*shape) {
            ShaperOptions opt;
            opt.drop_nonconforming = drop;
            opt.record_trace = !trace_path.empty() || slots <= 1000000;
            ShaperTrace trace;
            Json cfg{{"r", num(r)}, {"b", num(b)},        {"phi", phi},   {"rule", rule},
                     {"arrival", arrival}, {"slots", slots}, {"drop", drop}};
            if (rule == "single") {
                cfg["dist"] = dist;
                const auto pmf = to_pmf(parse_dist_spec(dist), phi);
                const double prob = arrival == "saturated" ? 1.0 : parse_number(arrival);
                trace = run_single(TokenBucket(r, b), pmf, prob, slots, seed, opt);
            } else {
                ClassArrivals arr;
                if (arrival != "saturated") {
                    arr.saturated = false;
                    arr.probs = parse_grid(arrival);
                    if (arr.probs.size() == 1) arr.probs.assign(static_cast<std::size_t>(phi), arr.probs[0]);
                }
                const auto arrangement = rule == "equal" ? AllocationRule::kEqualSplit : AllocationRule::kProportionalToL;
                trace = run_parallel(ParallelShaper::make(arrangement, r, b, phi), arr, slots, seed, opt);
            }
            ReportDocument doc;
            doc.metadata = base_metadata(o, cfg, seed);
            Json s = to_json(trace);
            if (trace.recorded()) {
                s["max_window_excess"] = num(max_window_excess(trace));
                Json rates = Json::object();
                for (long tau : {1000L, 10000L, 100000L})
                    if (tau <= slots) rates[std::to_string(tau)] = num(max_window_rate(trace, tau));
                s["max_window_rate"] = rates;
            }
            doc.sections["shaper"] = s;
            if (!trace_path.empty()) write_text(resolve_path(trace_path, "trace.csv"), trace_csv(trace));
            deliver(doc, ReportFormat::kJson, o, "shape", out);
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace mrnet::cli
