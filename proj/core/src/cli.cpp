#include "brt/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "brt/detector.hpp"
#include "brt/driver_estimator.hpp"
#include "brt/driver_store.hpp"
#include "brt/errors.hpp"
#include "brt/model_io.hpp"
#include "brt/observation.hpp"
#include "brt/simulate.hpp"
#include "brt/stats.hpp"
#include "brt/trajectory_io.hpp"
#include "brt/util.hpp"
#include "brt/warning.hpp"

namespace brt::cli {

namespace {

namespace fs = std::filesystem;

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    for (auto tok : split(csv, ',')) {
        double v = 0.0;
        if (!parse_double(tok, v)) {
            throw ValidationError(std::string("malformed ") + what + " list: '" + csv + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError(std::string("empty ") + what + " list");
    return out;
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    for (double v : parse_double_list(csv, what)) {
        int i = static_cast<int>(v);
        if (i < 0 || static_cast<double>(i) != v) {
            throw ValidationError(std::string(what) + " entries must be non-negative integers");
        }
        out.push_back(i);
    }
    return out;
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write output file: " + path.string());
    return out;
}

struct DetectArgs {
    std::string trajectories, signals, turns, out;
    DetectorConfig det;
};

void run_detect(const DetectArgs& a, std::ostream& out) {
    auto tracks = load_tracks(fs::path(a.trajectories));
    std::vector<SignalPhaseEvent> signals;
    if (!a.signals.empty()) signals = load_signals(fs::path(a.signals));
    if (!a.turns.empty()) {
        auto turning = load_turns(fs::path(a.turns));
        apply_turns(tracks, turning);
    }
    auto obs = detect_all(tracks, signals, a.det);
    auto stream = open_output(a.out);
    save_observations(stream, obs);
    out << "observations " << obs.size() << "\n";
    out << "out " << a.out << "\n";
}

struct TrainArgs {
    std::string observations, out;
    bool sim_correction = false;
    double sim_correction_delta = 0.3;
    double sim_correction_headway = 2.0;
    FitOptions fit;
};

void run_train(const TrainArgs& a, std::ostream& out) {
    auto obs = load_observations(fs::path(a.observations));
    auto train = build_design(obs);
    MixedModelParams params = fit(train, a.fit);
    if (a.sim_correction) {
        params = adjust_intercepts(params, a.sim_correction_delta, a.sim_correction_headway);
    }
    save_model(fs::path(a.out), params);
    out << "drivers " << params.meta.n_drivers << "\n";
    out << "observations " << params.meta.n_observations << "\n";
    out << "log_likelihood " << format_double(params.meta.log_likelihood) << "\n";
    out << "iterations " << params.meta.iterations << "\n";
    out << "gradient_norm " << format_double(params.meta.gradient_norm) << "\n";
    out << "model " << a.out << "\n";
}

struct EstimateArgs {
    std::string model, store, driver, add_obs;
    std::string stimulus = "steady";
    double t_star = 1.5;
    std::string quantiles = "0.1,0.5,0.9";
};

void run_estimate(const EstimateArgs& a, std::ostream& out) {
    auto params = load_model(fs::path(a.model));
    DriverStore store{fs::path(a.store)};
    if (!a.add_obs.empty()) {
        for (const auto& o : load_observations(fs::path(a.add_obs))) store.append(o);
    }
    auto stim = parse_stimulus(a.stimulus);
    if (!stim) throw ValidationError("unknown stimulus '" + a.stimulus + "'");
    auto history = store.history(a.driver);
    DriverEstimate est = estimate_from_history(a.driver, history, params);
    PbrtDistribution dist = pbrt_distribution(est, params, *stim, a.t_star);

    out << "driver " << a.driver << "\n";
    out << "observations " << est.n() << " steady=" << est.n_per_stimulus[0]
        << " nonsteady=" << est.n_per_stimulus[1] << " signal=" << est.n_per_stimulus[2] << "\n";
    out << "stimulus " << stimulus_name(*stim) << "\n";
    out << "t_star " << format_double(a.t_star) << "\n";
    out << "mu " << format_double(dist.mu) << "\n";
    out << "var " << format_double(dist.var) << "\n";
    for (double p : parse_double_list(a.quantiles, "quantile")) {
        if (!(p > 0.0 && p < 1.0)) throw ValidationError("quantiles must lie in (0, 1)");
        out << "quantile " << format_double(p) << ' ' << format_double(dist.quantile(p)) << "\n";
    }
    out << "mean " << format_double(dist.mean()) << "\n";
}

struct FarArgs {
    double mu = 0.17;
    double sigma = 0.44;
    double tau = -1.0;  // default: sigma / sqrt(2)
    double kappa = 0.0;
    std::string poa_grid = "0.001,0.002,0.005,0.01,0.02,0.05,0.1";
    std::int64_t samples = 100000;
    std::uint64_t seed = 1;
    std::string out_path;
};

void run_analyze_far(const FarArgs& a, std::ostream& out) {
    PopulationModel pop;
    pop.marginal = LognormalParams(a.mu, a.sigma);
    pop.tau = a.tau >= 0.0 ? a.tau : a.sigma / std::sqrt(2.0);
    pop.validate();
    ErrorModel err{a.kappa};
    auto grid = parse_double_list(a.poa_grid, "poa");

    auto rows = far_poa_curve(pop, err, grid, a.samples, a.seed);
    std::ostringstream table;
    table << "poa,far_pop,far_ind,far_ind_p10,far_ind_p90,realized_poa\n";
    for (const auto& r : rows) {
        table << format_double(r.poa) << ',' << format_double(r.far_pop) << ','
              << format_double(r.far_ind) << ',' << format_double(r.far_ind_p10) << ','
              << format_double(r.far_ind_p90) << ',' << format_double(r.realized_poa) << '\n';
    }
    if (a.out_path.empty()) {
        out << table.str();
    } else {
        auto stream = open_output(a.out_path);
        stream << table.str();
        out << "out " << a.out_path << "\n";
    }
}

struct SimulateArgs {
    std::string scenario;
    std::string out_dir;
    std::uint64_t seed = 1;
    int drivers = 200;
    int obs_per_stimulus = 10;
    double headway_min = 0.5;
    double headway_max = 6.0;
    double t_star = 1.5;
    int events = 30;
    int replications = 200;
    std::string sample_sizes = "0,5,30";
};

SimConfig make_sim_config(const SimulateArgs& a) {
    SimConfig cfg;
    cfg.seed = a.seed;
    cfg.n_drivers = a.drivers;
    cfg.obs_per_stimulus = {a.obs_per_stimulus, a.obs_per_stimulus, a.obs_per_stimulus};
    cfg.headway_min = a.headway_min;
    cfg.headway_max = a.headway_max;
    cfg.t_star = a.t_star;
    return cfg;
}

void run_simulate(const SimulateArgs& a, std::ostream& out) {
    fs::create_directories(a.out_dir);
    SimConfig cfg = make_sim_config(a);

    if (a.scenario == "observations") {
        auto sim = simulate_observations(cfg);
        fs::path obs_path = fs::path(a.out_dir) / "observations.csv";
        save_observations(obs_path, sim.observations);

        fs::path gamma_path = fs::path(a.out_dir) / "true_gamma.csv";
        auto gs = open_output(gamma_path);
        gs << "driver_id,g0,g1,g2,g3,g4,g5,g6,g7,g8\n";
        for (std::size_t d = 0; d < sim.driver_ids.size(); ++d) {
            gs << sim.driver_ids[d];
            for (int k = 0; k < kNumCoeffs; ++k) gs << ',' << format_double(sim.gamma[d][k]);
            gs << '\n';
        }

        MixedModelParams truth;
        truth.beta = cfg.true_beta;
        truth.sigma2 = cfg.true_sigma2;
        truth.sigma_gamma = cfg.true_sigma_gamma;
        truth.meta.n_observations = static_cast<int>(sim.observations.size());
        truth.meta.n_drivers = cfg.n_drivers;
        fs::path model_path = fs::path(a.out_dir) / "truth_model.txt";
        save_model(model_path, truth);

        out << "observations " << sim.observations.size() << "\n";
        out << "out " << obs_path.string() << "\n";
        out << "truth " << gamma_path.string() << "\n";
        out << "truth_model " << model_path.string() << "\n";
    } else if (a.scenario == "kinematics") {
        std::vector<PlantedEvent> planted;
        Rng rng(derive_seed(cfg.seed, 42));
        for (int s = 0; s < kNumStimuli; ++s) {
            for (int k = 0; k < a.events; ++k) {
                PlantedEvent e;
                e.stimulus = static_cast<StimulusType>(s);
                e.brt = rng.uniform(0.6, 2.2);
                e.time_headway = rng.uniform(1.5, 3.5);
                planted.push_back(e);
            }
        }
        auto scene = simulate_kinematics(cfg, planted);

        fs::path traj_path = fs::path(a.out_dir) / "trajectories.csv";
        save_tracks(traj_path, scene.tracks);
        fs::path sig_path = fs::path(a.out_dir) / "signals.csv";
        save_signals(sig_path, scene.signals);

        fs::path truth_path = fs::path(a.out_dir) / "planted.csv";
        auto ts = open_output(truth_path);
        ts << "lane_id,follower_vehicle,stimulus,t_stimulus,time_headway,brt,expect_detection\n";
        for (const auto& ev : scene.events) {
            ts << ev.lane_id << ',' << ev.follower_vehicle << ','
               << stimulus_name(ev.planted.stimulus) << ',' << format_double(ev.t_stimulus)
               << ',' << format_double(ev.planted.time_headway) << ','
               << format_double(ev.planted.brt) << ',' << (ev.expect_detection ? 1 : 0) << '\n';
        }

        out << "tracks " << scene.tracks.size() << "\n";
        out << "signals " << scene.signals.size() << "\n";
        out << "events " << scene.events.size() << "\n";
        out << "out " << traj_path.string() << "\n";
    } else if (a.scenario == "convergence") {
        auto sizes = parse_int_list(a.sample_sizes, "sample-sizes");
        auto report = convergence_study(cfg, sizes, a.replications);

        fs::path report_path = fs::path(a.out_dir) / "convergence.csv";
        auto rs = open_output(report_path);
        rs << "sample_size,mean_abs_p10_error,mean_abs_p90_error\n";
        for (const auto& cell : report.by_sample_size) {
            rs << cell.sample_size << ',' << format_double(cell.mean_abs_p10_error) << ','
               << format_double(cell.mean_abs_p90_error) << '\n';
        }
        fs::path alloc_path = fs::path(a.out_dir) / "allocation.csv";
        auto as = open_output(alloc_path);
        as << "comparison_size,same_stimulus_error,cross_stimulus_error\n";
        as << report.comparison_size << ',' << format_double(report.same_stimulus_error) << ','
           << format_double(report.cross_stimulus_error) << '\n';

        out << "replications " << report.replications << "\n";
        out << "out " << report_path.string() << "\n";
        out << "allocation " << alloc_path.string() << "\n";
    } else {
        throw ValidationError("unknown scenario '" + a.scenario +
                              "' (expected observations|kinematics|convergence)");
    }
}

void add_detector_options(CLI::App* cmd, DetectorConfig& det) {
    cmd->add_option("--steady-max-separation", det.steady_max_separation,
                    "Steady-state separation bound, m");
    cmd->add_option("--steady-speed-band", det.steady_speed_band,
                    "Steady-state speed difference band, m/s");
    cmd->add_option("--steady-duration", det.steady_duration, "Required steady time, s");
    cmd->add_option("--accel-threshold", det.accel_threshold,
                    "Braking/deceleration threshold, m/s^2");
    cmd->add_option("--headway-cutoff", det.headway_cutoff, "Maximum stimulus headway, s");
    cmd->add_option("--min-speed", det.min_speed, "Minimum follower speed, m/s");
    cmd->add_option("--sustain-window", det.sustain_window,
                    "Separation regression window, s");
    cmd->add_option("--response-cutoff", det.response_cutoff,
                    "Non-steady acceleration-reduction cutoff, m/s^2");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"brake response time modeling and collision-warning analysis"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a config file (flags win)");
    app.footer(
        "Exit codes:\n"
        "  0  success\n"
        "  1  numeric or fit failure\n"
        "  2  usage error (unknown flag or subcommand)\n"
        "  3  missing or unreadable file\n"
        "  4  malformed or invalid data");

    DetectArgs detect_args;
    auto* detect_cmd =
        app.add_subcommand("detect", "Extract brake response observations from trajectories");
    detect_cmd->add_option("--trajectories", detect_args.trajectories, "Trajectory file")
        ->required();
    detect_cmd->add_option("--signals", detect_args.signals, "Signal phase-change file");
    detect_cmd->add_option("--turns", detect_args.turns, "Turn-annotation file");
    detect_cmd->add_option("--out", detect_args.out, "Output observation file")->required();
    add_detector_options(detect_cmd, detect_args.det);

    TrainArgs train_args;
    auto* train_cmd =
        app.add_subcommand("train", "Fit the population mixed model from observations");
    train_cmd->add_option("--observations", train_args.observations, "Observation file")
        ->required();
    train_cmd->add_option("--out", train_args.out, "Output model file")->required();
    train_cmd->add_flag("--sim-correction", train_args.sim_correction,
                        "Raise intercepts for simulator-trained data");
    train_cmd->add_option("--sim-correction-delta", train_args.sim_correction_delta,
                          "Mean BRT increase, s");
    train_cmd->add_option("--sim-correction-headway", train_args.sim_correction_headway,
                          "Reference headway for the correction, s");
    train_cmd->add_flag("--reml", train_args.fit.reml, "Restricted maximum likelihood");
    train_cmd->add_flag("--diagonal-sigma-gamma", train_args.fit.diagonal_sigma_gamma,
                        "Restrict Sigma_gamma to a diagonal matrix");
    train_cmd->add_option("--max-iterations", train_args.fit.max_iterations, "Iteration cap");
    train_cmd->add_option("--gradient-tolerance", train_args.fit.gradient_tolerance,
                          "Convergence gradient norm");
    train_cmd->add_option("--min-drivers", train_args.fit.min_drivers, "Identifiability gate");
    train_cmd->add_option("--min-observations", train_args.fit.min_observations,
                          "Identifiability gate");

    EstimateArgs estimate_args;
    auto* estimate_cmd =
        app.add_subcommand("estimate", "Per-driver PBRT distribution from the driver store");
    estimate_cmd->add_option("--model", estimate_args.model, "Model file")->required();
    estimate_cmd->add_option("--store", estimate_args.store, "Driver store directory")
        ->required();
    estimate_cmd->add_option("--driver", estimate_args.driver, "Driver id")->required();
    estimate_cmd->add_option("--stimulus", estimate_args.stimulus,
                             "steady | nonsteady | signal");
    estimate_cmd->add_option("--t-star", estimate_args.t_star, "Reference headway, s");
    estimate_cmd->add_option("--add-obs", estimate_args.add_obs,
                             "Observation file to append to the store first");
    estimate_cmd->add_option("--quantiles", estimate_args.quantiles,
                             "Comma-separated probabilities to report");

    FarArgs far_args;
    auto* far_cmd =
        app.add_subcommand("analyze-far", "False-alarm-rate vs probability-of-accident table");
    far_cmd->add_option("--mu", far_args.mu, "Population log-mean");
    far_cmd->add_option("--sigma", far_args.sigma, "Population log-sd");
    far_cmd->add_option("--tau", far_args.tau, "Between-driver log-sd (default sigma/sqrt(2))");
    far_cmd->add_option("--kappa", far_args.kappa, "Estimation-error log-sd");
    far_cmd->add_option("--poa-grid", far_args.poa_grid, "Comma-separated accident targets");
    far_cmd->add_option("--samples", far_args.samples, "Monte Carlo drivers per grid point");
    far_cmd->add_option("--seed", far_args.seed, "Root seed");
    far_cmd->add_option("--out", far_args.out_path, "Output table file (default stdout)");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic datasets and studies");
    sim_cmd->add_option("--scenario", sim_args.scenario,
                        "observations | kinematics | convergence")
        ->required();
    sim_cmd->add_option("--out", sim_args.out_dir, "Output directory")->required();
    sim_cmd->add_option("--seed", sim_args.seed, "Root seed");
    sim_cmd->add_option("--drivers", sim_args.drivers, "Simulated driver count");
    sim_cmd->add_option("--obs-per-stimulus", sim_args.obs_per_stimulus,
                        "Observations per driver per stimulus");
    sim_cmd->add_option("--headway-min", sim_args.headway_min, "Headway range lower end, s");
    sim_cmd->add_option("--headway-max", sim_args.headway_max, "Headway range upper end, s");
    sim_cmd->add_option("--t-star", sim_args.t_star, "Reference headway, s");
    sim_cmd->add_option("--events", sim_args.events, "Planted events per stimulus type");
    sim_cmd->add_option("--replications", sim_args.replications, "Convergence replications");
    sim_cmd->add_option("--sample-sizes", sim_args.sample_sizes,
                        "Comma-separated convergence sample sizes");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("brt");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success)) {
            return app.exit(e, out, err);  // --help and friends
        }
        err << "error: usage: " << e.what() << "\n";
        return 2;
    }

    try {
        if (detect_cmd->parsed()) {
            run_detect(detect_args, out);
        } else if (train_cmd->parsed()) {
            run_train(train_args, out);
        } else if (estimate_cmd->parsed()) {
            run_estimate(estimate_args, out);
        } else if (far_cmd->parsed()) {
            run_analyze_far(far_args, out);
        } else if (sim_cmd->parsed()) {
            run_simulate(sim_args, out);
        }
    } catch (const IoError& e) {
        err << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const ParseError& e) {
        err << "error: data: " << e.what() << "\n";
        return 4;
    } catch (const ValidationError& e) {
        err << "error: data: " << e.what() << "\n";
        return 4;
    } catch (const FitError& e) {
        err << "error: fit: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        err << "error: data: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace brt::cli
