// walkcause: CATE estimation toolkit for joint binary interventions on
// Likert-scale outcomes. Subcommands: design, simulate, estimate, benchmark,
// balance.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "walkcause/walkcause.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace walkcause;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool svg = true;
    int workers = 1;
    json config;  // parsed --config file ({} if absent)
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file (flags take precedence)");
    cmd->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--seed", args.seed, "master seed (fallback: WALKCAUSE_SEED env var)");
    cmd->add_flag("--svg,!--no-svg", args.svg, "emit SVG plots")->capture_default_str();
    cmd->add_option("--workers", args.workers, "worker thread cap")->capture_default_str();
}

void load_config(CommonArgs& args) {
    args.config = json::object();
    if (!args.config_path.empty()) {
        args.config = json::parse(read_file(args.config_path));
    }
}

std::uint64_t resolve_seed(const CommonArgs& args) {
    if (args.seed) return *args.seed;
    if (args.config.contains("seed")) return args.config.at("seed").get<std::uint64_t>();
    if (const char* env = std::getenv("WALKCAUSE_SEED")) {
        return static_cast<std::uint64_t>(std::strtoull(env, nullptr, 10));
    }
    return 0;
}

EstimationConfig estimation_from(const CommonArgs& args) {
    EstimationConfig est;
    if (args.config.contains("estimation")) {
        est = EstimationConfig::from_json(args.config.at("estimation"));
    }
    return est;
}

void write_run_config(const std::string& out_dir, const json& effective) {
    write_file((fs::path(out_dir) / "run_config.json").string(), effective.dump(2) + "\n");
}

std::vector<EstimatorKind> parse_estimators(const std::string& csv) {
    std::vector<EstimatorKind> out;
    std::string token;
    std::stringstream ss(csv);
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) out.push_back(estimator_from_name(token));
    }
    if (out.empty()) throw ParseError("empty estimator list");
    return out;
}

std::string estimators_to_string(const std::vector<EstimatorKind>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += estimator_name(v[i]);
    }
    return s;
}

ScenarioSpec parse_scenario(const std::string& text,
                            const std::vector<std::string>& treatment_names) {
    ScenarioSpec sc;
    std::string token;
    std::stringstream ss(text);
    while (std::getline(ss, token, '+')) {
        if (token.empty()) continue;
        const auto it = std::find(treatment_names.begin(), treatment_names.end(), token);
        if (it != treatment_names.end()) {
            sc.active.push_back(static_cast<int>(it - treatment_names.begin()) + 1);
        } else {
            sc.active.push_back(static_cast<int>(parse_long(token)));
        }
    }
    std::sort(sc.active.begin(), sc.active.end());
    sc.validate(treatment_names.size());
    return sc;
}

struct DataArgs {
    std::string data_path;
    std::string schema_path;
    std::string sim_config_path;
};

void add_data_source(CLI::App* cmd, DataArgs& args) {
    auto* data = cmd->add_option("--data", args.data_path, "dataset CSV");
    auto* schema = cmd->add_option("--schema", args.schema_path, "dataset schema JSON");
    auto* sim = cmd->add_option("--sim-config", args.sim_config_path,
                                "simulation config JSON (instead of --data)");
    data->needs(schema);
    sim->excludes(data);
    data->excludes(sim);
}

ObservationTable load_input(const DataArgs& args, const CommonArgs& common,
                            std::uint64_t seed, json& provenance) {
    if (!args.data_path.empty()) {
        const DatasetSchema schema =
            DatasetSchema::from_json(json::parse(read_file(args.schema_path)));
        provenance["data"] = args.data_path;
        provenance["schema"] = schema.to_json();
        return load_csv(args.data_path, schema);
    }
    SimulationConfig sim;
    if (!args.sim_config_path.empty()) {
        sim = SimulationConfig::from_json(json::parse(read_file(args.sim_config_path)));
    } else if (common.config.contains("simulation")) {
        sim = SimulationConfig::from_json(common.config.at("simulation"));
    } else {
        throw Error("no input: pass --data with --schema, or --sim-config");
    }
    provenance["simulation"] = sim.to_json();
    return generate_dataset(sim, seed == 0 ? sim.seed : seed).table;
}

int cmd_design(int num_attributes, std::string names_csv, const CommonArgs& common_in) {
    CommonArgs common = common_in;
    load_config(common);
    DesignMatrix design = generate_design(num_attributes);
    std::vector<std::string> names;
    if (!names_csv.empty()) {
        std::string token;
        std::stringstream ss(names_csv);
        while (std::getline(ss, token, ',')) names.push_back(token);
    } else if (num_attributes == 5) {
        names = {"LM", "BC", "RS", "OS", "GT"};
    } else {
        for (int i = 1; i <= num_attributes; ++i) names.push_back("A" + std::to_string(i));
    }
    const std::string csv = design_to_csv(design, names);
    const BalanceCheck check = validate_orthogonality(design);
    if (!check.passed) throw Error("generated design failed orthogonality validation");
    fs::create_directories(common.out_dir);
    write_file((fs::path(common.out_dir) / "design.csv").string(), csv);
    json effective = {{"subcommand", "design"},
                      {"num_attributes", num_attributes},
                      {"names", names}};
    write_run_config(common.out_dir, effective);
    std::cout << "wrote " << (fs::path(common.out_dir) / "design.csv").string() << " ("
              << design.runs() << " profiles, orthogonality ok)\n";
    return 0;
}

int cmd_simulate(const CommonArgs& common_in, CLI::App* cmd, std::optional<std::size_t> n,
                 std::optional<double> beta, bool discretize) {
    CommonArgs common = common_in;
    load_config(common);
    SimulationConfig sim;
    if (common.config.contains("simulation")) {
        sim = SimulationConfig::from_json(common.config.at("simulation"));
    }
    if (n) sim.n = *n;
    if (beta) sim.beta = *beta;
    if (cmd->count("--discretize")) sim.discretize = discretize;
    const std::uint64_t seed = resolve_seed(common);
    sim.seed = seed;
    const SimulatedDataset data = generate_dataset(sim, seed);
    fs::create_directories(common.out_dir);
    save_csv(data.table, (fs::path(common.out_dir) / "dataset.csv").string());
    write_file((fs::path(common.out_dir) / "schema.json").string(),
               simulation_schema(sim).to_json().dump(2) + "\n");
    json effective = {{"subcommand", "simulate"}, {"seed", seed},
                      {"simulation", sim.to_json()}};
    write_run_config(common.out_dir, effective);
    std::cout << "wrote " << (fs::path(common.out_dir) / "dataset.csv").string() << " (n="
              << data.table.n() << ")\n";
    return 0;
}

int cmd_estimate(const CommonArgs& common_in, const DataArgs& data_args,
                 const std::string& estimators_csv, bool no_se, int bootstrap_b,
                 const std::string& fluctuation, const std::string& svg_estimator,
                 const std::string& save_models_dir) {
    CommonArgs common = common_in;
    load_config(common);
    const std::uint64_t seed = resolve_seed(common);
    json provenance = {{"subcommand", "estimate"}, {"seed", seed}};
    const ObservationTable table = load_input(data_args, common, seed, provenance);

    EstimationConfig est = estimation_from(common);
    est.seed = seed;
    SweepOptions opts;
    opts.estimators = parse_estimators(estimators_csv);
    opts.with_se = !no_se;
    opts.bootstrap_b = bootstrap_b;
    opts.seed = seed;
    opts.workers = common.workers;
    opts.tmle_options.logistic_fluctuation = fluctuation == "logistic";

    const SweepResult result = scenario_sweep(table, est, opts);
    fs::create_directories(common.out_dir);
    write_file((fs::path(common.out_dir) / "results.csv").string(),
               results_to_csv(result, table.treatment_names));
    write_file((fs::path(common.out_dir) / "effect_by_count.csv").string(),
               effect_by_count_csv(result));
    if (common.svg) {
        write_file((fs::path(common.out_dir) / "effect_by_count.svg").string(),
                   effect_by_count_svg(result, svg_estimator));
    }
    if (!save_models_dir.empty()) {
        fs::create_directories(save_models_dir);
        const OutcomeModel om = fit_outcome(table, est);
        for (std::size_t i = 0; i < om.models.size(); ++i) {
            save_model(om.models[i], (fs::path(save_models_dir) /
                                      ("outcome_model_" + std::to_string(i) + ".bin"))
                                         .string());
        }
    }
    provenance["estimation"] = est.to_json();
    provenance["estimators"] = estimators_to_string(opts.estimators);
    provenance["with_se"] = opts.with_se;
    provenance["bootstrap_b"] = opts.bootstrap_b;
    provenance["fluctuation"] = fluctuation;
    write_run_config(common.out_dir, provenance);

    std::size_t errors = 0;
    for (const auto& r : result.rows) {
        if (!r.ok) {
            ++errors;
            std::cerr << "scenario " << r.scenario.label(table.treatment_names) << " ["
                      << r.estimator << "]: " << r.error << "\n";
        }
    }
    std::cout << "wrote " << (fs::path(common.out_dir) / "results.csv").string() << " ("
              << result.rows.size() << " rows, " << errors << " failed)\n";
    return errors == 0 ? 0 : 2;
}

int cmd_benchmark(const CommonArgs& common_in, const std::string& betas_csv, int replicates,
                  std::optional<std::size_t> n, const std::string& estimators_csv,
                  std::size_t oracle_draws, int max_interventions) {
    CommonArgs common = common_in;
    load_config(common);
    BenchmarkConfig bc;
    if (common.config.contains("simulation")) {
        bc.base = SimulationConfig::from_json(common.config.at("simulation"));
    }
    if (common.config.contains("estimation")) {
        bc.estimation = EstimationConfig::from_json(common.config.at("estimation"));
    } else {
        // Monte Carlo default: fast, well-specified parametric nuisances.
        bc.estimation.outcome_learner.kind = LearnerKind::linear_logistic;
        bc.estimation.propensity_learner.kind = LearnerKind::linear_logistic;
        bc.estimation.cross_fit_folds = 0;
    }
    if (!betas_csv.empty()) {
        bc.betas.clear();
        std::string token;
        std::stringstream ss(betas_csv);
        while (std::getline(ss, token, ',')) bc.betas.push_back(parse_double(token));
    }
    bc.replicates = replicates;
    if (n) bc.base.n = *n;
    bc.estimators = parse_estimators(estimators_csv);
    bc.oracle_draws = oracle_draws;
    bc.master_seed = resolve_seed(common);
    bc.workers = common.workers;
    bc.max_interventions = max_interventions;

    const BenchmarkReport report = run_benchmark(bc);
    fs::create_directories(common.out_dir);
    write_file((fs::path(common.out_dir) / "benchmark.csv").string(), benchmark_to_csv(report));
    write_file((fs::path(common.out_dir) / "benchmark_summary.csv").string(),
               benchmark_summary_csv(report));
    if (common.svg) {
        write_file((fs::path(common.out_dir) / "benchmark.svg").string(),
                   benchmark_svg(report));
    }
    json effective = {{"subcommand", "benchmark"},
                      {"seed", bc.master_seed},
                      {"betas", bc.betas},
                      {"replicates", bc.replicates},
                      {"estimators", estimators_to_string(bc.estimators)},
                      {"oracle_draws", bc.oracle_draws},
                      {"simulation", bc.base.to_json()},
                      {"estimation", bc.estimation.to_json()}};
    write_run_config(common.out_dir, effective);
    std::size_t errors = 0;
    for (const auto& r : report.rows) {
        if (!r.ok) ++errors;
    }
    std::cout << "wrote " << (fs::path(common.out_dir) / "benchmark.csv").string() << " ("
              << report.rows.size() << " rows, " << errors << " failed)\n";
    return errors == 0 ? 0 : 2;
}

int cmd_balance(const CommonArgs& common_in, const DataArgs& data_args,
                const std::string& scenario_text) {
    CommonArgs common = common_in;
    load_config(common);
    const std::uint64_t seed = resolve_seed(common);
    json provenance = {{"subcommand", "balance"}, {"seed", seed}};
    const ObservationTable table = load_input(data_args, common, seed, provenance);
    const ScenarioSpec scenario = parse_scenario(scenario_text, table.treatment_names);
    const ExposureAssignment exposure = composite_exposure(table, scenario);
    EstimationConfig est = estimation_from(common);
    est.seed = seed;
    const PropensityFit pf = fit_propensity(table, scenario, exposure, est);
    const std::vector<double> weights = iptw_weights(exposure, pf.propensity);
    const BalanceReport report = balance_report(table, scenario, exposure, weights, "iptw");
    fs::create_directories(common.out_dir);
    write_file((fs::path(common.out_dir) / "balance.csv").string(),
               balance_to_csv(report, table.treatment_names));
    if (common.svg) {
        write_file((fs::path(common.out_dir) / "balance.svg").string(), love_plot_svg(report));
    }
    const PositivityReport pos = positivity_report(pf.propensity, est.clip_lo, est.clip_hi);
    provenance["scenario"] = scenario.label(table.treatment_names);
    provenance["estimation"] = est.to_json();
    provenance["positivity"] = {{"n_eligible", pos.n_eligible},
                                {"fraction_clipped", pos.fraction_clipped},
                                {"flag", pos.flag}};
    write_run_config(common.out_dir, provenance);
    if (pos.flag) {
        std::cerr << "positivity warning: " << pos.fraction_clipped * 100.0
                  << "% of propensities clipped\n";
    }
    std::cout << "wrote " << (fs::path(common.out_dir) / "balance.csv").string() << " ("
              << report.rows.size() << " covariate rows)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"walkcause: CATE estimation for joint urban-design interventions on "
                 "Likert outcomes"};
    app.require_subcommand(1);

    // design
    auto* design = app.add_subcommand("design", "generate a two-level orthogonal array");
    int num_attributes = 5;
    std::string names_csv;
    CommonArgs design_common;
    design->add_option("num_attributes", num_attributes, "number of attributes (2..6)")
        ->required();
    design->add_option("--names", names_csv, "comma-separated attribute names");
    add_common(design, design_common);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    CommonArgs sim_common;
    std::optional<std::size_t> sim_n;
    std::optional<double> sim_beta;
    bool sim_discretize = false;
    simulate->add_option("--n", sim_n, "sample size");
    simulate->add_option("--beta", sim_beta, "confound ratio in [0,1]");
    simulate->add_flag("--discretize", sim_discretize, "round outcomes to Likert integers");
    add_common(simulate, sim_common);

    // estimate
    auto* estimate = app.add_subcommand("estimate", "scenario sweep CATE report");
    CommonArgs est_common;
    DataArgs est_data;
    std::string est_estimators = "raw_difference,g_formula,iptw,psm,tmle";
    bool est_no_se = false;
    int est_bootstrap_b = 200;
    std::string est_fluctuation = "linear";
    std::string est_svg_estimator = "tmle";
    std::string est_save_models;
    add_data_source(estimate, est_data);
    estimate->add_option("--estimators", est_estimators, "comma-separated estimator list")
        ->capture_default_str();
    estimate->add_flag("--no-se", est_no_se, "skip standard errors (fast point estimates)");
    estimate->add_option("--bootstrap-b", est_bootstrap_b, "bootstrap replicates for SEs")
        ->capture_default_str();
    estimate->add_option("--fluctuation", est_fluctuation, "TMLE update: linear|logistic")
        ->check(CLI::IsMember({"linear", "logistic"}))
        ->capture_default_str();
    estimate->add_option("--svg-estimator", est_svg_estimator,
                         "estimator shown in the effect-by-count plot")
        ->capture_default_str();
    estimate->add_option("--save-models", est_save_models,
                         "directory for serialized outcome models");
    add_common(estimate, est_common);

    // benchmark
    auto* benchmark = app.add_subcommand("benchmark", "Monte Carlo estimator comparison");
    CommonArgs bench_common;
    std::string bench_betas;
    int bench_replicates = 50;
    std::optional<std::size_t> bench_n;
    std::string bench_estimators = "raw_difference,g_formula,iptw,tmle";
    std::size_t bench_oracle = 1000000;
    int bench_max_k = 0;
    benchmark->add_option("--betas", bench_betas, "comma-separated confound ratios")
        ->capture_default_str();
    benchmark->add_option("--replicates", bench_replicates, "datasets per confound ratio")
        ->capture_default_str();
    benchmark->add_option("--n", bench_n, "sample size per dataset");
    benchmark->add_option("--estimators", bench_estimators, "comma-separated estimator list")
        ->capture_default_str();
    benchmark->add_option("--oracle-draws", bench_oracle, "Monte Carlo draws for true effects")
        ->capture_default_str();
    benchmark->add_option("--max-interventions", bench_max_k,
                          "cap on scenario size (0 = all treatments)");
    add_common(benchmark, bench_common);

    // balance
    auto* balance = app.add_subcommand("balance", "covariate balance report (Love plot)");
    CommonArgs bal_common;
    DataArgs bal_data;
    std::string bal_scenario;
    add_data_source(balance, bal_data);
    balance->add_option("--scenario", bal_scenario,
                        "active treatments joined by '+', names or 1-based indices")
        ->required();
    add_common(balance, bal_common);

    try {
        app.parse(argc, argv);
        if (design->parsed()) return cmd_design(num_attributes, names_csv, design_common);
        if (simulate->parsed()) {
            return cmd_simulate(sim_common, simulate, sim_n, sim_beta, sim_discretize);
        }
        if (estimate->parsed()) {
            return cmd_estimate(est_common, est_data, est_estimators, est_no_se,
                                est_bootstrap_b, est_fluctuation, est_svg_estimator,
                                est_save_models);
        }
        if (benchmark->parsed()) {
            return cmd_benchmark(bench_common, bench_betas, bench_replicates, bench_n,
                                 bench_estimators, bench_oracle, bench_max_k);
        }
        if (balance->parsed()) return cmd_balance(bal_common, bal_data, bal_scenario);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
