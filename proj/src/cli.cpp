#include "storey/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <functional>
#include <optional>
#include <random>

#include "storey/engine.hpp"
#include "storey/error.hpp"
#include "storey/io.hpp"

namespace storey::cli {

namespace {

using io::Json;

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
    if (c == '"') c = '\'';
  }
  return s;
}

void report(std::ostream& err, const std::string& kind, const std::string& command, const std::string& message) {
  err << "error kind=" << kind << " command=" << (command.empty() ? "-" : command) << " message=\""
      << one_line(message) << "\"\n";
}

// Environment overrides for the engine defaults (STOREY_NF and friends).
double env_number(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const double d = std::strtod(v, &end);
  if (end == v || *end != '\0' || !std::isfinite(d)) {
    throw Error(ErrorKind::Schema, std::string("environment variable ") + name + " is not a number");
  }
  return d;
}

std::uint64_t env_seed(std::uint64_t fallback) {
  const char* v = std::getenv("STOREY_SEED");
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (end == v || *end != '\0') throw Error(ErrorKind::Schema, "environment variable STOREY_SEED is not an integer");
  return s;
}

EngineParams engine_defaults() {
  EngineParams p;
  p.floor_window_s = env_number("STOREY_NF", p.floor_window_s);
  p.location_window_s = env_number("STOREY_NL", p.location_window_s);
  p.floor_weight_db = env_number("STOREY_WF", p.floor_weight_db);
  p.threshold = env_number("STOREY_LTHR", p.threshold);
  p.kf_window_s = env_number("STOREY_WK", p.kf_window_s);
  p.grid_resolution_m = env_number("STOREY_GRID", p.grid_resolution_m);
  return p;
}

void add_engine_flags(CLI::App* cmd, EngineParams& p) {
  cmd->add_option("--nf", p.floor_window_s, "Floor profile window N_f, seconds")->capture_default_str();
  cmd->add_option("--nl", p.location_window_s, "Location profile window N_l, seconds")->capture_default_str();
  cmd->add_option("--wf", p.floor_weight_db, "Floor attenuation factor W_f, dB per floor")->capture_default_str();
  cmd->add_option("--lthr", p.threshold, "Likelihood threshold l_thr")->capture_default_str();
  cmd->add_option("--grid", p.grid_resolution_m, "Grid resolution, meters")->capture_default_str();
}

struct Context {
  std::ostream& out;
  std::uint64_t seed = 1;
};

ApRegistry load_registry(const std::string& path) { return io::registry_from_json(io::read_json(path)); }

std::vector<int> truth_floors(const SimTrace& trace) {
  std::vector<int> floors;
  floors.reserve(trace.truth.size());
  for (const auto& t : trace.truth) floors.push_back(t.floor);
  return floors;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::string active;
  try {
    CLI::App app{"Pseudo-3D WiFi indoor localization and RF simulation", "storey"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");

    std::uint64_t seed = env_seed(1);
    EngineParams engine = engine_defaults();
    std::function<void()> action;

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a building, walk a trajectory and emit a scan trace");
    std::string sim_spec, sim_traj, sim_params, sim_out, sim_registry_out;
    sim->add_option("--spec", sim_spec, "Building spec JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--trajectory", sim_traj, "Trajectory config JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--params", sim_params, "Propagation parameters JSON")->check(CLI::ExistingFile);
    sim->add_option("--out", sim_out, "Output trace (JSON lines)")->required();
    sim->add_option("--registry-out", sim_registry_out, "Write the generated registry here");
    sim->add_option("--seed", seed, "Random seed")->capture_default_str();
    sim->callback([&] {
      action = [&] {
        BuildingSpec spec = io::building_spec_from_json(io::read_json(sim_spec));
        const SimBuilding building = generate_building(spec);
        PropagationParams params;
        if (!sim_params.empty()) params = io::propagation_from_json(io::read_json(sim_params));
        const Json traj_doc = io::read_json(sim_traj);
        Trajectory trajectory = io::trajectory_from_json(traj_doc);
        if (traj_doc.contains("random")) {
          const Json& r = traj_doc["random"];
          const int walks = r.value("walks", 1);
          const int waypoints = r.value("waypoints", 4);
          const double dwell = r.value("dwell_s", 0.0);
          if (walks < 1 || waypoints < 2) throw Error(ErrorKind::Schema, "trajectory: random walks need walks >= 1, waypoints >= 2");
          std::vector<int> floors = r.value("floors", std::vector<int>{});
          if (floors.empty()) {
            for (int f = 1; f <= building.registry.floor_count(); ++f) floors.push_back(f);
          }
          std::mt19937_64 rng(seed ^ 0x7261'6e64'6f6dULL);
          for (int w = 0; w < walks; ++w) {
            std::uniform_int_distribution<std::size_t> pick(0, floors.size() - 1);
            TrajectorySegment seg = random_walk(building.registry, floors[pick(rng)], waypoints, rng);
            seg.dwell_s = dwell;
            trajectory.segments.push_back(std::move(seg));
          }
        }
        if (trajectory.segments.empty()) throw Error(ErrorKind::Schema, "trajectory: no segments");
        const SimTrace trace = generate_trace(building, trajectory, params, seed);
        io::write_trace(sim_out, trace);
        if (!sim_registry_out.empty()) io::write_json(sim_registry_out, io::registry_to_json(building.registry));
        out << "scans=" << trace.scans.size() << " aps=" << building.registry.aps().size() << "\n";
      };
    });

    // synth-train
    auto* syn = app.add_subcommand("synth-train", "Synthesize floor-classifier training data from a registry");
    std::string syn_registry, syn_config, syn_out;
    double floor_height = 3.5, ap_height = 2.5, device_height = 1.2;
    std::optional<double> syn_sigma;
    std::optional<int> syn_per_floor, syn_width;
    bool no_augment = false;
    syn->add_option("--registry", syn_registry, "Registry JSON")->required()->check(CLI::ExistingFile);
    syn->add_option("--config", syn_config, "Synthesis config JSON")->check(CLI::ExistingFile);
    syn->add_option("--out", syn_out, "Output dataset JSON")->required();
    syn->add_option("--seed", seed, "Random seed")->capture_default_str();
    syn->add_option("--sigma", syn_sigma, "rss perturbation, dB");
    syn->add_option("--per-floor", syn_per_floor, "Instances per in-range floor label");
    syn->add_option("--width", syn_width, "Floor search width w");
    syn->add_option("--floor-height", floor_height, "Floor height, meters")->capture_default_str();
    syn->add_option("--ap-height", ap_height, "AP height above the slab, meters")->capture_default_str();
    syn->add_option("--device-height", device_height, "Device height above the slab, meters")->capture_default_str();
    syn->add_flag("--no-augment", no_augment, "Disable perturbation, balancing and count matching");
    syn->callback([&] {
      action = [&] {
        SynthConfig config;
        if (!syn_config.empty()) config = io::synth_config_from_json(io::read_json(syn_config));
        config.seed = seed;
        if (syn_sigma) config.sigma_db = *syn_sigma;
        if (syn_per_floor) config.instances_per_floor = *syn_per_floor;
        if (syn_width) config.width = *syn_width;
        if (no_augment) {
          config.sigma_db = 0.0;
          config.balance = false;
          config.match_window_counts = false;
        }
        const SimBuilding building = emulate_registry(load_registry(syn_registry), floor_height, ap_height, device_height);
        const LabeledFeatureSet data = synthesize_training_set(building, config);
        io::write_json(syn_out, io::dataset_to_json(data));
        out << "instances=" << data.size() << " width=" << data.width << "\n";
      };
    });

    // train-floor
    auto* trn = app.add_subcommand("train-floor", "Train the floor classifier");
    std::string trn_dataset, trn_config, trn_out, trn_loss;
    std::optional<int> trn_epochs;
    trn->add_option("--dataset", trn_dataset, "Dataset JSON")->required()->check(CLI::ExistingFile);
    trn->add_option("--config", trn_config, "Training config JSON")->check(CLI::ExistingFile);
    trn->add_option("--out", trn_out, "Output model JSON")->required();
    trn->add_option("--loss-csv", trn_loss, "Write the loss curve here");
    trn->add_option("--epochs", trn_epochs, "Maximum epochs");
    trn->add_option("--seed", seed, "Random seed")->capture_default_str();
    trn->callback([&] {
      action = [&] {
        TrainConfig config;
        if (!trn_config.empty()) config = io::train_config_from_json(io::read_json(trn_config));
        config.seed = seed;
        if (trn_epochs) config.epochs = *trn_epochs;
        config.validate();
        const LabeledFeatureSet data = io::dataset_from_json(io::read_json(trn_dataset));
        FloorClassifier model = FloorClassifier::make(data.width, seed);
        TrainResult result = train(model.network, data.to_dataset(model.normalization), config);
        model.network = std::move(result.model);
        io::write_json(trn_out, io::floor_model_to_json(model));
        if (!trn_loss.empty()) io::write_text(trn_loss, io::loss_curve_csv(result.curve));
        out << "epochs=" << result.curve.size() << " best_epoch=" << result.best_epoch << "\n";
      };
    });

    // fit-rank
    auto* frk = app.add_subcommand("fit-rank", "Fit per-rank distance Gaussians");
    std::string frk_samples, frk_trace, frk_registry, frk_out;
    double anomaly = 0.8;
    auto* samples_opt = frk->add_option("--samples", frk_samples, "Distance/rss samples (JSON lines)")->check(CLI::ExistingFile);
    auto* trace_opt = frk->add_option("--trace", frk_trace, "Trace with truth")->check(CLI::ExistingFile);
    frk->add_option("--registry", frk_registry, "Registry JSON (with --trace)")->check(CLI::ExistingFile)->needs(trace_opt);
    trace_opt->excludes(samples_opt);
    frk->add_option("--out", frk_out, "Output rank-model JSON")->required();
    frk->add_option("--anomaly", anomaly, "Retained fraction threshold per trimming pass")->capture_default_str();
    frk->add_option("--nl", engine.location_window_s, "Profile window, seconds")->capture_default_str();
    frk->add_option("--wf", engine.floor_weight_db, "W_f, dB per floor")->capture_default_str();
    frk->callback([&] {
      action = [&] {
        std::vector<DistanceSample> samples;
        std::string provenance;
        if (!frk_samples.empty()) {
          for (const Json& l : io::read_json_lines(frk_samples)) samples.push_back(io::distance_sample_from_json(l));
          provenance = "samples:" + std::filesystem::path(frk_samples).filename().string();
        } else if (!frk_trace.empty() && !frk_registry.empty()) {
          const SimTrace trace = io::to_sim_trace(io::read_trace(frk_trace));
          samples = collect_distance_samples(load_registry(frk_registry), trace.scans, trace.truth,
                                             engine.location_window_s, engine.floor_weight_db);
          provenance = "trace:" + std::filesystem::path(frk_trace).filename().string();
        } else {
          throw Error(ErrorKind::Schema, "fit-rank needs --samples, or --trace with --registry");
        }
        const RankGaussianModel model = fit_rank_model(samples, anomaly, provenance);
        io::write_json(frk_out, io::rank_model_to_json(model));
        out << "samples=" << samples.size() << "\n";
      };
    });

    // fit-quality
    auto* fq = app.add_subcommand("fit-quality", "Fit the fix-quality regression on a trace with truth");
    std::string fq_trace, fq_registry, fq_rank, fq_floor, fq_out;
    fq->add_option("--trace", fq_trace, "Trace with truth")->required()->check(CLI::ExistingFile);
    fq->add_option("--registry", fq_registry, "Registry JSON")->required()->check(CLI::ExistingFile);
    fq->add_option("--rank-model", fq_rank, "Rank-model JSON")->required()->check(CLI::ExistingFile);
    fq->add_option("--floor-model", fq_floor, "Floor model; true floors are used without it")->check(CLI::ExistingFile);
    fq->add_option("--out", fq_out, "Output quality-model JSON")->required();
    add_engine_flags(fq, engine);
    fq->callback([&] {
      action = [&] {
        const ApRegistry registry = load_registry(fq_registry);
        const RankGaussianModel rank = io::rank_model_from_json(io::read_json(fq_rank));
        const SimTrace trace = io::to_sim_trace(io::read_trace(fq_trace));
        std::optional<FloorClassifier> floor;
        if (!fq_floor.empty()) floor = io::floor_model_from_json(io::read_json(fq_floor));
        EngineParams p = engine;
        p.use_kf = false;
        const std::vector<int> known = floor ? std::vector<int>{} : truth_floors(trace);
        const auto fixes = locate_trace(registry, floor ? &*floor : nullptr, &rank, QualityModel{}, p, trace.scans, known);
        const auto samples = collect_quality_samples(fixes, trace.truth);
        const QualityModel model = fit_quality_model(samples);
        io::write_json(fq_out, io::quality_model_to_json(model));
        out << "samples=" << samples.size() << "\n";
      };
    });

    // locate
    auto* loc = app.add_subcommand("locate", "Estimate floor and position for every scan of a trace");
    std::string loc_trace, loc_registry, loc_floor, loc_rank, loc_quality, loc_out, loc_config_out;
    bool no_faf = false, no_kf = false, floors_only = false, truth_floor = false, user_floor_only = false;
    loc->add_option("--trace", loc_trace, "Trace (JSON lines)")->required()->check(CLI::ExistingFile);
    loc->add_option("--registry", loc_registry, "Registry JSON")->required()->check(CLI::ExistingFile);
    loc->add_option("--floor-model", loc_floor, "Floor model JSON")->check(CLI::ExistingFile);
    loc->add_option("--rank-model", loc_rank, "Rank-model JSON")->check(CLI::ExistingFile);
    loc->add_option("--quality-model", loc_quality, "Quality-model JSON")->check(CLI::ExistingFile);
    loc->add_option("--out", loc_out, "Output fixes (JSON lines)")->required();
    loc->add_option("--config-out", loc_config_out, "Also write the run configuration here");
    add_engine_flags(loc, engine);
    loc->add_option("--wk", engine.kf_window_s, "KF window w_k, seconds")->capture_default_str();
    loc->add_flag("--no-faf", no_faf, "Disable floor attenuation factoring");
    loc->add_flag("--no-kf", no_kf, "Disable Kalman refinement");
    loc->add_flag("--floors-only", floors_only, "Only estimate floors");
    loc->add_flag("--truth-floor", truth_floor, "Use the trace's true floors instead of the classifier");
    loc->add_flag("--user-floor-aps-only", user_floor_only, "Use only APs on the estimated floor for 2D");
    loc->add_option("--seed", seed, "Random seed (recorded in the run configuration)")->capture_default_str();
    loc->callback([&] {
      action = [&] {
        EngineParams p = engine;
        p.use_faf = !no_faf;
        p.use_kf = !no_kf;
        p.floors_only = floors_only;
        p.user_floor_aps_only = user_floor_only;
        p.validate();
        if (!truth_floor && loc_floor.empty()) throw Error(ErrorKind::Schema, "locate needs --floor-model or --truth-floor");
        if (!floors_only && loc_rank.empty()) throw Error(ErrorKind::Schema, "locate needs --rank-model unless --floors-only");
        const ApRegistry registry = load_registry(loc_registry);
        std::optional<FloorClassifier> floor;
        if (!loc_floor.empty()) floor = io::floor_model_from_json(io::read_json(loc_floor));
        std::optional<RankGaussianModel> rank;
        if (!loc_rank.empty()) rank = io::rank_model_from_json(io::read_json(loc_rank));
        QualityModel quality;
        if (!loc_quality.empty()) quality = io::quality_model_from_json(io::read_json(loc_quality));
        const auto records = io::read_trace(loc_trace);
        std::vector<WifiScan> scans;
        std::vector<int> known;
        for (const auto& r : records) {
          scans.push_back(r.scan);
          if (truth_floor) {
            if (!r.truth) throw Error(ErrorKind::Schema, "--truth-floor needs truth on every trace line");
            known.push_back(r.truth->floor);
          }
        }
        const auto fixes = locate_trace(registry, floor ? &*floor : nullptr, rank ? &*rank : nullptr, quality, p, scans, known);
        std::vector<FixRecord> out_fixes;
        out_fixes.reserve(fixes.size());
        for (const auto& f : fixes) out_fixes.push_back(io::to_record(f));
        io::write_fixes(loc_out, out_fixes);
        Json echo = io::engine_params_to_json(p);
        echo["truth_floor"] = truth_floor;
        echo["seed"] = seed;
        echo["trace"] = std::filesystem::path(loc_trace).filename().string();
        if (!loc_config_out.empty()) io::write_json(loc_config_out, echo);
        out << echo.dump() << "\n";
      };
    });

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score fixes against the truth attached to a trace");
    std::string ev_fixes, ev_trace, ev_out, ev_cdf, ev_config;
    ev->add_option("--fixes", ev_fixes, "Fixes (JSON lines)")->required()->check(CLI::ExistingFile);
    ev->add_option("--trace", ev_trace, "Trace with truth")->required()->check(CLI::ExistingFile);
    ev->add_option("--out", ev_out, "Metrics report JSON")->required();
    ev->add_option("--cdf", ev_cdf, "Error CDF CSV");
    ev->add_option("--config", ev_config, "Run configuration JSON to echo in the report")->check(CLI::ExistingFile);
    ev->callback([&] {
      action = [&] {
        const auto fixes = io::read_fixes(ev_fixes);
        const SimTrace trace = io::to_sim_trace(io::read_trace(ev_trace));
        MetricsReport report = evaluate(fixes, trace.truth);
        if (!ev_config.empty()) {
          const Json config = io::read_json(ev_config);
          for (const auto& [k, v] : config.items()) report.config[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        io::write_json(ev_out, io::metrics_to_json(report));
        if (!ev_cdf.empty()) io::write_text(ev_cdf, io::cdf_csv(report));
        Json summary = {{"fixes", report.fixes},
                        {"exact_floor_pct", report.exact_floor_pct},
                        {"median_error_m", report.error_p50_m}};
        out << summary.dump() << "\n";
      };
    });

    // grad-check
    auto* gc = app.add_subcommand("grad-check", "Compare backprop gradients with finite differences");
    std::string gc_model;
    int gc_samples = 200;
    gc->add_option("--model", gc_model, "Floor model JSON")->required()->check(CLI::ExistingFile);
    gc->add_option("--samples", gc_samples, "Parameters to check")->capture_default_str()->check(CLI::PositiveNumber);
    gc->add_option("--seed", seed, "Random seed")->capture_default_str();
    gc->callback([&] {
      action = [&] {
        const FloorClassifier model = io::floor_model_from_json(io::read_json(gc_model));
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        std::vector<double> x(static_cast<std::size_t>(model.network.input_dim()));
        for (double& v : x) v = u(rng);
        const int label = static_cast<int>(rng() % static_cast<std::uint64_t>(model.network.output_dim()));
        const GradCheckResult r = grad_check(model.network, x, label, gc_samples, seed);
        out << Json{{"max_relative_error", r.max_relative_error}, {"checked", r.checked}, {"skipped", r.skipped}}.dump()
            << "\n";
      };
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      const auto subs = app.get_subcommands();
      out << (subs.empty() ? app.help() : subs.back()->help());
      return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    } catch (const CLI::ParseError& e) {
      report(err, "usage", args.empty() ? "" : args.front(), e.what());
      return kExitSchema;
    }
    for (const auto* sub : app.get_subcommands()) active = sub->get_name();
    if (action) action();
    return kExitOk;
  } catch (const Error& e) {
    report(err, to_string(e.kind()), active, e.what());
    return e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Schema ? kExitSchema : kExitRuntime;
  } catch (const std::exception& e) {
    report(err, "internal", active, e.what());
    return kExitRuntime;
  }
}

}  // namespace storey::cli
