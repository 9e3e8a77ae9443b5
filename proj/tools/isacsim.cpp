// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 isacsim contributors

#include <CLI11.hpp>
#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <json.hpp>
#include <omp.h>
#include <string>

#include "isac/io.hpp"
#include "isac/probing.hpp"
#include "isac/scheduling.hpp"
#include "isac/sim.hpp"

namespace {

using nlohmann::json;

struct RunOpts {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
  std::string format = "csv";
  int threads = 1;
};

void add_common(CLI::App* cmd, RunOpts& opts, bool with_config = true) {
  if (with_config)
    cmd->add_option("--config", opts.config_path,
                    "scenario config path (default: built-in scene)")
        ->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed,
                  "RNG seed; required here or in the config")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out, "output path (default: stdout)");
  cmd->add_option("--format", opts.format, "output format")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--threads", opts.threads, "worker threads, 0 = all cores")
      ->check(CLI::Range(0, 1024));
}

// Applies the thread count and reports whether parallel regions should run.
bool configure_threads(int threads) {
  if (threads == 0) threads = omp_get_num_procs();
  omp_set_num_threads(threads);
  return threads != 1;
}

// Scenario from the config file or the subcommand's built-in scene. The seed
// must come from somewhere explicit; there is no wall-clock fallback.
isac::ScenarioConfig load_scenario(const RunOpts& opts,
                                   isac::Scene (*fallback_scene)(),
                                   double fallback_duration_s) {
  isac::ScenarioConfig cfg;
  bool has_seed = false;
  if (!opts.config_path.empty()) {
    const isac::ParsedConfig p = isac::load_config(opts.config_path);
    cfg = p.config;
    has_seed = p.has_seed;
  } else {
    cfg.scene = fallback_scene();
    cfg.duration_s = fallback_duration_s;
  }
  if (opts.seed_set) {
    cfg.seed = opts.seed;
    has_seed = true;
  }
  if (!has_seed)
    throw std::invalid_argument(
        "seed required: pass --seed or set seed in the config");
  return cfg;
}

void write_output(const RunOpts& opts, const std::string& subcommand,
                  const std::string& data) {
  if (opts.out.empty()) {
    std::cout << data;
    return;
  }
  isac::write_text_file(opts.out, data);
  // Run metadata lives next to the data so the data itself stays
  // reproducible byte for byte.
  json meta;
  meta["subcommand"] = subcommand;
  meta["seed"] = opts.seed_set ? json(opts.seed) : json(nullptr);
  meta["config"] =
      opts.config_path.empty() ? json(nullptr) : json(opts.config_path);
  meta["format"] = opts.format;
  meta["threads"] = opts.threads;
  isac::write_text_file(opts.out + ".meta.json", meta.dump() + "\n");
}

std::string spans_json(const isac::EmulationResult& r) {
  json arr = json::array();
  for (const isac::TrialSpans& row : r.rows) {
    json j;
    j["trial"] = row.trial;
    j["n_chains"] = r.n_chains;
    j["rr_span"] = row.rr;
    j["bcset_span"] = row.bc;
    j["opt_span"] = row.has_opt ? json(row.opt) : json(nullptr);
    arr.push_back(std::move(j));
  }
  return arr.dump() + "\n";
}

int run_schedule(const RunOpts& opts, int ues, int subjects, int trials,
                 int chains) {
  const bool parallel = configure_threads(opts.threads);
  isac::SchedParams params;
  const isac::EmulationResult r = isac::emulate_time_span(
      params, ues, subjects, trials, chains, opts.seed, parallel);
  write_output(opts, "schedule",
               opts.format == "json" ? spans_json(r) : isac::emulation_csv(r));
  std::cerr << "schedule: rr_mean=" << r.rr_mean
            << " bcset_mean=" << r.bc_mean << " opt_mean=" << r.opt_mean
            << " opt_trials=" << r.opt_count << "\n";
  return 0;
}

int run_probe(const RunOpts& opts, bool codebook) {
  configure_threads(opts.threads);
  const isac::ScenarioConfig cfg =
      load_scenario(opts, isac::respiration_scene, 60.0);
  isac::validate(cfg);
  const isac::Node& ap = cfg.scene.aps[0];

  if (codebook) {
    const std::vector<isac::Awv> cb =
        isac::sector_codebook(ap.array, cfg.sched.k_d);
    std::string data;
    if (opts.format == "json") {
      data = isac::codebook_json(cb);
    } else {
      data = "sector,element,amplitude,phase\n";
      for (std::size_t k = 0; k < cb.size(); ++k)
        for (int m = 0; m < cb[k].size(); ++m) {
          const isac::cxd w = cb[k].w[m];
          const double amp = std::abs(w);
          data += std::to_string(k) + "," + std::to_string(m) + "," +
                  isac::fmt_g9(amp) + "," +
                  isac::fmt_g9(amp > 0.0 ? std::arg(w) : 0.0) + "\n";
        }
    }
    write_output(opts, "probe", data);
    return 0;
  }

  if (cfg.scene.ues.empty())
    throw std::invalid_argument("probe needs a UE in the scene");
  isac::ProbeConfig probe = cfg.pipeline.probe;
  probe.n_sectors = cfg.sched.k_r;
  probe.comm = cfg.comm;
  const isac::BeamTrainingResult r =
      isac::beam_training(ap, cfg.scene.ues[0], cfg.ofdm, probe, cfg.seed);
  std::string data;
  if (opts.format == "json") {
    json j;
    j["ap_side"] = json::parse(isac::sweep_report_json(r.ap_side));
    j["ue_side"] = json::parse(isac::sweep_report_json(r.ue_side));
    data = j.dump() + "\n";
  } else {
    data = "side,sector,rssi_db,best\n";
    auto rows = [&data](const char* side, const isac::SweepReport& rep) {
      for (const isac::SweepEntry& e : rep.entries)
        data += std::string(side) + "," + std::to_string(e.sector) + "," +
                isac::fmt_g9(e.rssi_db) + "," +
                (e.sector == rep.best_sector ? "1" : "0") + "\n";
    };
    rows("ap", r.ap_side);
    rows("ue", r.ue_side);
  }
  write_output(opts, "probe", data);
  std::cerr << "probe: ap_best=" << r.ap_side.best_sector
            << " ue_best=" << r.ue_side.best_sector << "\n";
  return 0;
}

int run_cancel(const RunOpts& opts, int sector) {
  configure_threads(opts.threads);
  const isac::ScenarioConfig cfg =
      load_scenario(opts, isac::respiration_scene, 60.0);
  isac::validate(cfg);
  const isac::Node& ap = cfg.scene.aps[0];
  isac::PipelineConfig pc = cfg.pipeline;
  pc.probe.n_sectors = cfg.sched.k_d;
  if (sector >= 0) {
    pc.sector = sector;
  } else {
    if (cfg.scene.subjects.empty())
      throw std::invalid_argument(
          "cancel needs --sector or a subject to aim at");
    pc.sector = isac::nearest_sector(
        cfg.sched.k_d,
        isac::node_bearing(ap, cfg.scene.subjects[0].position));
  }
  if (pc.sector >= cfg.sched.k_d)
    throw std::invalid_argument("sector out of range");
  const isac::PipelineResult r = isac::cancel_pipeline(
      ap, cfg.scene.subjects, cfg.ofdm, pc, cfg.seed);
  write_output(opts, "cancel",
               opts.format == "json"
                   ? isac::cancellation_json({r.report})
                   : isac::cancellation_csv({r.report}));
  std::cerr << "cancel: sector=" << pc.sector
            << " total_gain_db=" << r.report.total_gain_db() << "\n";
  return 0;
}

int run_track(const RunOpts& opts) {
  configure_threads(opts.threads);
  const isac::ScenarioConfig cfg =
      load_scenario(opts, isac::tracking_scene, 8.0);
  isac::validate(cfg);
  const isac::Metrics m = isac::run_scenario(cfg);
  write_output(opts, "track",
               opts.format == "json" ? isac::track_json(m.track)
                                     : isac::track_csv(m.track));
  std::cerr << "track: points=" << m.track.size() << " rmse_m="
            << (m.tracking_rmse_m ? isac::fmt_g9(*m.tracking_rmse_m)
                                  : std::string("n/a"))
            << "\n";
  return 0;
}

int run_pointcloud(const RunOpts& opts, double rel_db) {
  configure_threads(opts.threads);
  const isac::ScenarioConfig cfg =
      load_scenario(opts, isac::pointcloud_scene, 60.0);
  isac::validate(cfg);
  const isac::ScanGrid scan =
      isac::scan_scene(cfg.scene, cfg.ofdm, isac::ScanParams{}, cfg.seed);
  const std::vector<isac::Point3> pts =
      isac::point_cloud(scan, scan.power_db.maxCoeff() - rel_db);
  write_output(opts, "pointcloud",
               opts.format == "json" ? isac::pointcloud_json(pts)
                                     : isac::xyz_text(pts));
  std::cerr << "pointcloud: points=" << pts.size()
            << " peak_db=" << isac::fmt_g9(scan.power_db.maxCoeff()) << "\n";
  return 0;
}

int run_respiration(const RunOpts& opts, const std::string& scheduler) {
  configure_threads(opts.threads);
  isac::ScenarioConfig cfg =
      load_scenario(opts, isac::respiration_scene, 60.0);
  if (!scheduler.empty()) cfg.scheduler = isac::parse_scheduler(scheduler);
  isac::validate(cfg);
  const isac::Metrics m = isac::run_scenario(cfg);
  write_output(opts, "respiration",
               opts.format == "json"
                   ? isac::metrics_json(m)
                   : isac::metrics_csv_header() + isac::metrics_csv_row(m));
  std::cerr << "respiration: scheduler=" << isac::scheduler_name(m.scheduler)
            << " throughput_bps=" << isac::fmt_g9(m.mean_throughput_bps)
            << " s_snr_db=" << isac::fmt_g9(m.mean_s_snr_db) << "\n";
  return 0;
}

int run_sweep(const RunOpts& opts, int case_id, int trials) {
  const bool parallel = configure_threads(opts.threads);
  isac::ScenarioConfig cfg =
      load_scenario(opts, isac::respiration_scene, 60.0);
  if (trials > 0) cfg.sweep.trials = trials;
  isac::validate(cfg);
  const isac::TrendTable t = isac::sweep_large_scale(case_id, cfg, parallel);
  write_output(opts, "sweep",
               opts.format == "json" ? isac::trend_json(t)
                                     : isac::trend_csv(t));
  std::cerr << "sweep: case=" << case_id << " settings=" << t.rows.size()
            << " trials=" << cfg.sweep.trials << "\n";
  return 0;
}

int run_baselines(const RunOpts& opts) {
  configure_threads(opts.threads);
  const isac::ScenarioConfig cfg =
      load_scenario(opts, isac::respiration_scene, 60.0);
  isac::validate(cfg);
  const isac::BaselineTable t = isac::run_baselines(cfg);
  write_output(opts, "baselines",
               opts.format == "json" ? isac::baselines_json(t)
                                     : isac::baselines_csv(t));
  std::cerr << "baselines: bcset_tput=" << isac::fmt_g9(
                   t.bcset.mean_throughput_bps)
            << " co_tput=" << isac::fmt_g9(t.co.mean_throughput_bps)
            << " so_ssnr=" << isac::fmt_g9(t.so.mean_s_snr_db) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mmWave ISAC simulator"};
  app.require_subcommand(1);

  RunOpts sched_opts;
  int ues = 6, subjects = 14, trials = 100, chains = 1;
  CLI::App* sched = app.add_subcommand(
      "schedule", "Emulate BC-Set, round-robin, and exhaustive spans");
  add_common(sched, sched_opts, /*with_config=*/false);
  sched->get_option("--seed")->required();
  sched->add_option("--ues", ues, "number of UEs")->check(CLI::Range(0, 1000));
  sched->add_option("--subjects", subjects, "number of sensing subjects")
      ->check(CLI::Range(0, 1000));
  sched->add_option("--trials", trials, "number of random trials")
      ->check(CLI::Range(1, 1000000));
  sched->add_option("--chains", chains, "number of Tx chains")
      ->check(CLI::Range(1, 64));

  RunOpts probe_opts;
  bool codebook = false;
  CLI::App* probe = app.add_subcommand(
      "probe", "Beam-training sector sweeps (or --codebook to dump beams)");
  add_common(probe, probe_opts);
  probe->add_flag("--codebook", codebook, "dump the sector codebook instead");

  RunOpts cancel_opts;
  int sector = -1;
  CLI::App* cancel = app.add_subcommand(
      "cancel", "Tx-leakage cancellation pipeline on one sector");
  add_common(cancel, cancel_opts);
  cancel->add_option("--sector", sector,
                     "operating sector (default: subject 0 bearing)")
      ->check(CLI::Range(0, 4096));

  RunOpts track_opts;
  CLI::App* track = app.add_subcommand(
      "track", "Track a moving subject; emits the filter history");
  add_common(track, track_opts);

  RunOpts pc_opts;
  double rel_db = 6.0;
  CLI::App* pointcloud = app.add_subcommand(
      "pointcloud", "Receive-scan the scene into an XYZ point cloud");
  add_common(pointcloud, pc_opts);
  pointcloud
      ->add_option("--rel-db", rel_db, "cloud threshold below the peak, dB")
      ->check(CLI::Range(0.0, 100.0));

  RunOpts resp_opts;
  std::string scheduler;
  CLI::App* respiration = app.add_subcommand(
      "respiration", "Joint scheduling scenario with a breathing subject");
  add_common(respiration, resp_opts);
  respiration
      ->add_option("--scheduler", scheduler, "bcset|rr|so|co (default bcset)")
      ->check(CLI::IsMember({"bcset", "rr", "so", "co"}));

  RunOpts sweep_opts;
  int case_id = 1;
  int sweep_trials = 0;
  CLI::App* sweep = app.add_subcommand(
      "sweep", "Deployment trend sweep over UE or AP counts");
  add_common(sweep, sweep_opts);
  sweep->add_option("--case", case_id, "1 = UE sweep, 2 = AP sweep")
      ->required()
      ->check(CLI::Range(1, 2));
  sweep->add_option("--trials", sweep_trials, "override sweep trial count")
      ->check(CLI::Range(1, 1000000));

  RunOpts base_opts;
  CLI::App* baselines = app.add_subcommand(
      "baselines", "All four schedulers on one scene, comparative table");
  add_common(baselines, base_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 1;
  }

  try {
    if (sched->parsed())
      return run_schedule(sched_opts, ues, subjects, trials, chains);
    if (probe->parsed()) return run_probe(probe_opts, codebook);
    if (cancel->parsed()) return run_cancel(cancel_opts, sector);
    if (track->parsed()) return run_track(track_opts);
    if (pointcloud->parsed()) return run_pointcloud(pc_opts, rel_db);
    if (respiration->parsed()) return run_respiration(resp_opts, scheduler);
    if (sweep->parsed()) return run_sweep(sweep_opts, case_id, sweep_trials);
    if (baselines->parsed()) return run_baselines(base_opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
