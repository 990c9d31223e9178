// Batch front end: estimate / bandwidth / simulate / policy subcommands over
// CSV inputs, JSON or CSV reports out.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "cwlate/bandwidth.hpp"
#include "cwlate/csv.hpp"
#include "cwlate/estimators.hpp"
#include "cwlate/inference.hpp"
#include "cwlate/policy.hpp"
#include "cwlate/simulation.hpp"

using json = nlohmann::ordered_json;
using namespace cwlate;

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> parse_numbers(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& tok : split_list(s)) {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size())
            throw std::runtime_error(what + ": malformed number '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

KernelSpec parse_kernel(const std::string& name) {
    if (name == "triangular") return KernelSpec{KernelKind::triangular};
    if (name == "uniform") return KernelSpec{KernelKind::uniform};
    throw std::runtime_error("unknown kernel '" + name + "'");
}

EstimandKind parse_estimand(const std::string& name) {
    if (name == "cwlate") return EstimandKind::cwlate;
    if (name == "average") return EstimandKind::average;
    if (name == "counterfactual") return EstimandKind::counterfactual;
    if (name == "welfare") return EstimandKind::welfare;
    if (name == "custom") return EstimandKind::custom_instrument;
    if (name == "unconditional_wald") return EstimandKind::unconditional_wald;
    throw std::runtime_error("unknown estimand '" + name + "'");
}

double parse_field(const std::string& field, const std::string& column, std::size_t row) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(field, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != field.size() || field.empty()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu", row + 2);  // header is line 1
        throw std::runtime_error("column '" + column + "', line " + buf +
                                 ": cannot parse '" + field + "' as a number");
    }
    return v;
}

struct InputOptions {
    std::string path;
    std::string y_col = "y";
    std::string x_col = "x";
    std::string z_col = "z";
    std::string cells = "cell";
    double cutoff = 0.0;
};

void add_input_flags(CLI::App* cmd, InputOptions& in) {
    cmd->add_option("--input", in.path, "CSV file with a header row")->required();
    cmd->add_option("--y", in.y_col, "outcome column");
    cmd->add_option("--x", in.x_col, "treatment column (0/1)");
    cmd->add_option("--z", in.z_col, "running-variable column");
    cmd->add_option("--cells", in.cells,
                    "comma-separated cell columns; several are interacted into one label");
    cmd->add_option("--cutoff", in.cutoff, "cutoff on the running variable");
}

RddDataset load_dataset(const InputOptions& in) {
    CsvTable t = read_csv(in.path);
    const int yc = t.column(in.y_col);
    const int xc = t.column(in.x_col);
    const int zc = t.column(in.z_col);
    if (yc < 0) throw std::runtime_error("missing column '" + in.y_col + "'");
    if (xc < 0) throw std::runtime_error("missing column '" + in.x_col + "'");
    if (zc < 0) throw std::runtime_error("missing column '" + in.z_col + "'");
    std::vector<int> cell_cols;
    for (const auto& name : split_list(in.cells)) {
        const int c = t.column(name);
        if (c < 0) throw std::runtime_error("missing cell column '" + name + "'");
        cell_cols.push_back(c);
    }
    if (cell_cols.empty()) throw std::runtime_error("--cells must name at least one column");

    std::vector<double> y, x, z;
    std::vector<std::string> cell;
    y.reserve(t.rows.size());
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        y.push_back(parse_field(row[static_cast<std::size_t>(yc)], in.y_col, i));
        x.push_back(parse_field(row[static_cast<std::size_t>(xc)], in.x_col, i));
        z.push_back(parse_field(row[static_cast<std::size_t>(zc)], in.z_col, i));
        std::string label;
        for (std::size_t k = 0; k < cell_cols.size(); ++k) {
            if (k) label += "|";
            label += row[static_cast<std::size_t>(cell_cols[k])];
        }
        cell.push_back(std::move(label));
    }
    return make_dataset(std::move(y), std::move(x), std::move(z), std::move(cell), in.cutoff);
}

void emit(const json& doc, const std::string& out_path) {
    if (out_path.empty() || out_path == "-") {
        std::cout << doc.dump(2) << "\n";
        return;
    }
    std::ofstream f(out_path);
    if (!f) throw std::runtime_error("cannot open output file '" + out_path + "'");
    f << doc.dump(2) << "\n";
}

json estimate_row(const RddDataset& data, const CellPartition& part, const EstimandSpec& spec,
                  double h, double b, const KernelSpec& kernel, const EstimateOptions& opts) {
    RbcEstimate est = rbc_estimate(data, part, spec, h, b, kernel, opts);

    CellPartition eff = part;
    if (opts.pi_within_bandwidth) eff = pi_within_bandwidth(data, part, h);
    CellDiscontinuities disc;
    WlateResult res;
    if (spec.kind == EstimandKind::unconditional_wald) {
        res = unconditional_wald(data, opts.p, h, kernel);
        RddDataset pooled = pooled_copy(data);
        CellPartition pp = build_partition(pooled);
        disc = cell_discontinuities(pooled, pp, opts.p, h, kernel);
    } else {
        disc = cell_discontinuities(data, eff, opts.p, h, kernel);
        res = wlate(disc, spec);
    }

    json row;
    row["estimand"] = estimand_name(spec.kind);
    row["h"] = h;
    row["b"] = b;
    row["beta_hat"] = est.beta_hat;
    row["beta_bc"] = est.beta_bc;
    row["bias_hat"] = est.bias_hat;
    row["se"] = std::sqrt(est.var_rbc);
    row["se_conventional"] = std::sqrt(est.var_conventional);
    row["ci"] = {est.ci.first, est.ci.second};
    row["level"] = est.level;
    row["exact_fit"] = est.exact_fit;
    row["weak_id_ratio"] = est.weak_id_ratio;

    json cells = json::array();
    const CellPartition& cp =
        spec.kind == EstimandKind::unconditional_wald ? disc.partition : eff;
    for (std::size_t j = 0; j < cp.m(); ++j) {
        json c;
        c["cell"] = cp.labels[j];
        c["pi"] = cp.pi_hat[j];
        c["delta_y"] = disc.delta_y(static_cast<Eigen::Index>(j));
        c["delta_x"] = disc.delta_x(static_cast<Eigen::Index>(j));
        c["weight"] = res.weights(static_cast<Eigen::Index>(j));
        c["omega"] = res.omega(static_cast<Eigen::Index>(j));
        if (res.defined[j])
            c["conditional_late"] = res.conditional_lates(static_cast<Eigen::Index>(j));
        else
            c["conditional_late"] = nullptr;
        cells.push_back(std::move(c));
    }
    row["cells"] = std::move(cells);
    row["dropped_cells"] = res.dropped;
    if (!res.flagged_cells.empty()) row["flagged_cells"] = res.flagged_cells;
    return row;
}

void write_csv_rows(const json& rows, const std::string& path) {
    CsvTable t;
    t.header = {"estimand", "h",  "b",     "beta_hat", "beta_bc",
                "se",       "ci_lo", "ci_hi", "level"};
    char buf[40];
    auto fmt = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        t.rows.push_back({r["estimand"].get<std::string>(), fmt(r["h"].get<double>()),
                          fmt(r["b"].get<double>()), fmt(r["beta_hat"].get<double>()),
                          fmt(r["beta_bc"].get<double>()), fmt(r["se"].get<double>()),
                          fmt(r["ci"][0].get<double>()), fmt(r["ci"][1].get<double>()),
                          fmt(r["level"].get<double>())});
    }
    write_csv(path, t);
}

McConfig config_from_json(const json& j) {
    McConfig cfg;
    if (j.contains("alpha_dw")) cfg.alpha_dw = j["alpha_dw"].get<double>();
    if (j.contains("beta_xw")) cfg.beta_xw = j["beta_xw"].get<double>();
    if (j.contains("n")) cfg.n = j["n"].get<int>();
    if (j.contains("reps")) cfg.reps = j["reps"].get<int>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("estimands")) {
        cfg.estimands.clear();
        for (const auto& e : j["estimands"])
            cfg.estimands.push_back(parse_estimand(e.get<std::string>()));
    }
    if (j.contains("bandwidth_mode")) {
        const std::string m = j["bandwidth_mode"].get<std::string>();
        if (m == "fixed")
            cfg.bandwidth_mode = BandwidthMode::fixed;
        else if (m == "automatic")
            cfg.bandwidth_mode = BandwidthMode::automatic;
        else
            throw std::runtime_error("bandwidth_mode must be 'fixed' or 'automatic'");
    }
    if (j.contains("h")) cfg.h = j["h"].get<double>();
    if (j.contains("b")) cfg.b = j["b"].get<double>();
    if (j.contains("shared_bandwidth")) cfg.shared_bandwidth = j["shared_bandwidth"].get<bool>();
    if (j.contains("w_support")) {
        const std::string s = j["w_support"].get<std::string>();
        if (s == "binary")
            cfg.w_support = WSupport::binary;
        else if (s == "grid10")
            cfg.w_support = WSupport::grid10;
        else
            throw std::runtime_error("w_support must be 'binary' or 'grid10'");
    }
    if (j.contains("coarsen")) cfg.coarsen = j["coarsen"].get<bool>();
    if (j.contains("target")) {
        const std::string s = j["target"].get<std::string>();
        if (s == "own_estimand")
            cfg.target = McTarget::own_estimand;
        else if (s == "unconditional_late")
            cfg.target = McTarget::unconditional_late;
        else
            throw std::runtime_error("target must be 'own_estimand' or 'unconditional_late'");
    }
    if (j.contains("z_sigma")) cfg.z_sigma = j["z_sigma"].get<double>();
    if (j.contains("z_sigma_is_variance"))
        cfg.z_sigma_is_variance = j["z_sigma_is_variance"].get<bool>();
    if (j.contains("level")) cfg.level = j["level"].get<double>();
    if (j.contains("min_side_count")) cfg.min_side_count = j["min_side_count"].get<std::size_t>();
    if (j.contains("pi_within_bandwidth"))
        cfg.pi_within_bandwidth = j["pi_within_bandwidth"].get<bool>();
    if (j.contains("kernel")) cfg.kernel = parse_kernel(j["kernel"].get<std::string>());
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    return cfg;
}

int run(int argc, char** argv) {
    CLI::App app{"Weighted local average treatment effects in fuzzy regression discontinuity "
                 "designs with discrete covariates"};
    app.require_subcommand(1);
    app.set_help_flag("--help", "print usage");

    InputOptions in;
    std::string kernel_name = "triangular";
    std::vector<std::string> estimand_names;
    std::vector<double> h_grid;
    double b_opt = 0.0;
    bool auto_bw = false;
    double level = 0.95;
    bool within_pi = false;
    std::size_t min_side = 5;
    std::string fstar_arg, custom_b_arg;
    std::string out_path, format = "json";

    auto* est = app.add_subcommand("estimate", "point estimates with robust intervals");
    est->set_help_flag("--help", "print usage");
    add_input_flags(est, in);
    est->add_option("--kernel", kernel_name, "triangular or uniform");
    est->add_option("--estimand", estimand_names,
                    "cwlate, average, counterfactual, welfare, custom, unconditional_wald "
                    "(repeatable)");
    est->add_option("--h", h_grid, "main bandwidth; repeat for a grid");
    est->add_option("--b", b_opt, "bias-estimation bandwidth (defaults to h)");
    est->add_flag("--auto-bandwidth", auto_bw, "select h and b from the data");
    est->add_option("--level", level, "confidence level");
    est->add_flag("--within-bandwidth-pi", within_pi,
                  "recompute cell shares inside the estimation window");
    est->add_option("--min-side-count", min_side, "per-side observation floor for a cell");
    est->add_option("--fstar", fstar_arg, "counterfactual cell weights (comma list)");
    est->add_option("--custom-b", custom_b_arg, "custom instrument values (comma list)");
    est->add_option("--output", out_path, "report file; '-' for stdout");
    est->add_option("--format", format, "json or csv");

    InputOptions bw_in;
    std::string bw_kernel = "triangular";
    std::string bw_estimand = "cwlate";
    std::size_t bw_min_side = 5;
    std::string bw_out;
    auto* bwc = app.add_subcommand("bandwidth", "data-driven bandwidth selection");
    add_input_flags(bwc, bw_in);
    bwc->add_option("--kernel", bw_kernel, "triangular or uniform");
    bwc->add_option("--estimand", bw_estimand, "estimand the bandwidths are tuned for");
    bwc->add_option("--min-side-count", bw_min_side, "per-side observation floor for a cell");
    bwc->add_option("--output", bw_out, "report file; '-' for stdout");

    std::string sim_config, sim_out;
    std::uint64_t sim_seed = 0;
    bool sim_seed_set = false;
    auto* sim = app.add_subcommand("simulate", "Monte Carlo campaign from a JSON config");
    sim->add_option("--config", sim_config, "JSON file with the campaign settings")->required();
    auto* seed_opt = sim->add_option("--seed", sim_seed, "override the config seed");
    sim->add_option("--output", sim_out, "report file; '-' for stdout");

    std::string pol_p, pol_b, pol_f, pol_dx, pol_beta, pol_out;
    auto* pol = app.add_subcommand("policy", "incentive-targeting effects from cell vectors");
    pol->add_option("--p", pol_p, "targeting distribution over cells (comma list)");
    pol->add_option("--b-instrument", pol_b, "instrument values; converted to a policy");
    pol->add_option("--f", pol_f, "population cell probabilities")->required();
    pol->add_option("--delta-x", pol_dx, "first-stage discontinuities per cell")->required();
    pol->add_option("--beta", pol_beta, "treatment effects per cell")->required();
    pol->add_option("--output", pol_out, "report file; '-' for stdout");

    CLI11_PARSE(app, argc, argv);

    if (est->parsed()) {
        if (format != "json" && format != "csv")
            throw std::runtime_error("--format must be json or csv");
        if (estimand_names.empty()) estimand_names = {"cwlate"};
        if (h_grid.empty() && !auto_bw)
            throw std::runtime_error("give --h (repeatable) or --auto-bandwidth");
        const KernelSpec kernel = parse_kernel(kernel_name);
        RddDataset data = load_dataset(in);
        CellPartition part = build_partition(data, min_side);

        EstimateOptions opts;
        opts.level = level;
        opts.pi_within_bandwidth = within_pi;

        json rows = json::array();
        std::optional<double> beta_cw_at_first, beta_u_at_first;
        for (const auto& name : estimand_names) {
            EstimandSpec spec{parse_estimand(name)};
            if (spec.kind == EstimandKind::counterfactual) {
                if (fstar_arg.empty())
                    throw std::runtime_error("counterfactual estimand needs --fstar");
                spec.fstar = to_vec(parse_numbers(fstar_arg, "--fstar"));
            }
            if (spec.kind == EstimandKind::custom_instrument) {
                if (custom_b_arg.empty())
                    throw std::runtime_error("custom estimand needs --custom-b");
                spec.custom_b = to_vec(parse_numbers(custom_b_arg, "--custom-b"));
            }

            std::vector<std::pair<double, double>> grid;
            if (auto_bw) {
                BandwidthReport sel = select_bandwidths(data, part, spec, kernel, min_side);
                grid.emplace_back(sel.h_n, sel.b_n);
            } else {
                for (double h : h_grid) grid.emplace_back(h, b_opt > 0.0 ? b_opt : h);
            }
            for (auto [h, b] : grid) {
                json row = estimate_row(data, part, spec, h, b, kernel, opts);
                if (spec.kind == EstimandKind::cwlate && !beta_cw_at_first)
                    beta_cw_at_first = row["beta_hat"].get<double>();
                if (spec.kind == EstimandKind::unconditional_wald && !beta_u_at_first)
                    beta_u_at_first = row["beta_hat"].get<double>();
                rows.push_back(std::move(row));
            }
        }

        json doc;
        doc["input"] = in.path;
        doc["kernel"] = kernel_name;
        doc["n"] = data.n();
        doc["results"] = rows;
        if (beta_cw_at_first && beta_u_at_first) {
            GainsSign g = selection_on_gains_sign(*beta_cw_at_first, *beta_u_at_first, 1e-10);
            doc["selection_on_gains"] =
                g == GainsSign::positive ? "positive" : g == GainsSign::negative ? "negative"
                                                                                 : "zero";
        }
        if (format == "csv") {
            if (out_path.empty() || out_path == "-")
                throw std::runtime_error("--format csv needs --output");
            write_csv_rows(rows, out_path);
        } else {
            emit(doc, out_path);
        }
        return 0;
    }

    if (bwc->parsed()) {
        const KernelSpec kernel = parse_kernel(bw_kernel);
        RddDataset data = load_dataset(bw_in);
        CellPartition part = build_partition(data, bw_min_side);
        EstimandSpec spec{parse_estimand(bw_estimand)};
        BandwidthReport rep = select_bandwidths(data, part, spec, kernel, bw_min_side);
        json doc;
        doc["input"] = bw_in.path;
        doc["estimand"] = bw_estimand;
        doc["kernel"] = bw_kernel;
        doc["c_n"] = rep.c_n;
        doc["d_n"] = rep.d_n;
        doc["b_n"] = rep.b_n;
        doc["h_n"] = rep.h_n;
        doc["v_bc"] = rep.v_bc;
        doc["b_bc"] = rep.b_bc;
        doc["v_main"] = rep.v_main;
        doc["bias_main"] = rep.bias_main;
        doc["lower_clamp"] = rep.lower_clamp;
        doc["upper_clamp"] = rep.upper_clamp;
        doc["zero_bias_b"] = rep.zero_bias_b;
        doc["zero_bias_h"] = rep.zero_bias_h;
        emit(doc, bw_out);
        return 0;
    }

    if (sim->parsed()) {
        std::ifstream f(sim_config);
        if (!f) throw std::runtime_error("cannot open config file '" + sim_config + "'");
        json cfg_json = json::parse(f);
        McConfig cfg = config_from_json(cfg_json);
        sim_seed_set = seed_opt->count() > 0;
        if (sim_seed_set) cfg.seed = sim_seed;
        McReport rep = run_monte_carlo(cfg);

        json doc;
        doc["n"] = cfg.n;
        doc["reps"] = cfg.reps;
        doc["seed"] = cfg.seed;
        json by = json::object();
        for (const auto& [kind, s] : rep.by_estimand) {
            json e;
            e["reps_used"] = s.reps_used;
            e["failures"] = s.failures;
            e["target"] = s.target;
            e["mean"] = s.mean;
            e["mean_bc"] = s.mean_bc;
            e["bias"] = s.bias;
            e["variance"] = s.variance;
            e["mse"] = s.mse;
            e["coverage"] = s.coverage;
            e["mean_h"] = s.mean_h;
            e["mean_b"] = s.mean_b;
            by[estimand_name(kind)] = std::move(e);
        }
        doc["by_estimand"] = std::move(by);
        if (rep.by_estimand.count(EstimandKind::cwlate) &&
            rep.by_estimand.count(EstimandKind::unconditional_wald)) {
            const double mse_cw = rep.by_estimand.at(EstimandKind::cwlate).mse;
            const double mse_u = rep.by_estimand.at(EstimandKind::unconditional_wald).mse;
            if (mse_u > 0.0) doc["mse_ratio_cw_over_wald"] = mse_cw / mse_u;
        }
        emit(doc, sim_out);
        return 0;
    }

    // policy
    Eigen::VectorXd f = to_vec(parse_numbers(pol_f, "--f"));
    Eigen::VectorXd dx = to_vec(parse_numbers(pol_dx, "--delta-x"));
    Eigen::VectorXd beta = to_vec(parse_numbers(pol_beta, "--beta"));
    PolicySpec spec;
    if (!pol_p.empty() && !pol_b.empty())
        throw std::runtime_error("give --p or --b-instrument, not both");
    if (!pol_p.empty()) {
        spec.p = to_vec(parse_numbers(pol_p, "--p"));
        spec.f = f;
    } else if (!pol_b.empty()) {
        spec = policy_from_instrument(to_vec(parse_numbers(pol_b, "--b-instrument")), f);
    } else {
        throw std::runtime_error("give --p or --b-instrument");
    }
    if (spec.p.size() != f.size() || dx.size() != f.size() || beta.size() != f.size())
        throw std::runtime_error("--p/--f/--delta-x/--beta must have equal lengths");
    PolicyEffects eff = policy_effects(spec, beta, dx);
    json doc;
    doc["p"] = std::vector<double>(spec.p.data(), spec.p.data() + spec.p.size());
    doc["p_c"] = eff.p_c;
    doc["ape"] = eff.ape;
    if (eff.lape)
        doc["lape"] = *eff.lape;
    else
        doc["lape"] = nullptr;
    emit(doc, pol_out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
