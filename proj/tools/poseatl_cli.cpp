// Command-line front end: synthetic dataset generation, single ATL runs,
// criterion sweeps and stopping-criterion reports. Machine-readable output
// goes to files (and stdout for generate); progress goes to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "poseatl/atl.hpp"
#include "poseatl/pose_data.hpp"
#include "poseatl/report.hpp"

namespace fs = std::filesystem;
using namespace poseatl;

namespace {

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
  std::vector<double> out;
  for (const auto& tok : split_csv(s)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw std::runtime_error(std::string("cannot parse ") + what + " entry \"" + tok + "\"");
    }
  }
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& tok : split_csv(s)) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      throw std::runtime_error("cannot parse seed \"" + tok + "\"");
    }
  }
  return out;
}

// Flat key = value file with [section] headers. Keys are looked up as
// "section.key"; command-line flags override anything found here.
std::map<std::string, std::string> load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::map<std::string, std::string> out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    out[section.empty() ? key : section + "." + key] = value;
  }
  return out;
}

struct GlobalOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = ".";
};

// Shared run-configuration flags and their config-file twins.
struct RunOptions {
  std::string criterion = "thc+wpu+duw";
  std::string sc = "none";
  double theta = 0.6;
  double margin = 0.05;
  double alpha = 250.0;
  double lambda = 0.01;
  std::string weighting = "const";
  double fixed_w = 0.5;
  std::string schedule_csv;
  int heatmap_h = 64;
  int heatmap_w = 48;
  int ae_pretrain_count = 500;
  int ae_pretrain_epochs = 300;
  double ae_pretrain_lr = 1.0e-3;
  int ae_retrain_epochs = 20;
  double ae_retrain_lr = 8.0e-4;
  std::uint64_t ae_seed = 7;

  AtlConfig to_config(std::uint64_t seed) const {
    AtlConfig cfg;
    cfg.criterion = criterion;
    cfg.sc = parse_stop_rule(sc);
    cfg.theta = theta;
    cfg.margin = margin;
    cfg.alpha = alpha;
    cfg.lambda = lambda;
    cfg.weighting = parse_weight_schedule(weighting);
    cfg.weighting_fixed_w = fixed_w;
    cfg.seed = seed;
    if (!schedule_csv.empty()) cfg.schedule = parse_double_list(schedule_csv, "schedule");
    cfg.sim.heatmap_h = heatmap_h;
    cfg.sim.heatmap_w = heatmap_w;
    cfg.ae.pretrain_count = ae_pretrain_count;
    cfg.ae.pretrain_epochs = ae_pretrain_epochs;
    cfg.ae.pretrain_lr = ae_pretrain_lr;
    cfg.ae.retrain_epochs = ae_retrain_epochs;
    cfg.ae.retrain_lr = ae_retrain_lr;
    cfg.ae.seed = ae_seed;
    cfg.validate();
    return cfg;
  }
};

void add_run_options(CLI::App* cmd, RunOptions& opt, const std::string& section,
                     const std::map<std::string, std::string>& file_cfg) {
  auto from_file = [&](const char* key, auto& target) {
    const auto it = file_cfg.find(section + "." + std::string(key));
    if (it == file_cfg.end()) return;
    std::stringstream ss(it->second);
    ss >> target;
    if (ss.fail()) throw std::runtime_error("config key " + section + "." + key + " is malformed");
  };
  auto from_file_str = [&](const char* key, std::string& target) {
    const auto it = file_cfg.find(section + "." + std::string(key));
    if (it != file_cfg.end()) target = it->second;
  };
  from_file_str("criterion", opt.criterion);
  from_file_str("sc", opt.sc);
  from_file("theta", opt.theta);
  from_file("margin", opt.margin);
  from_file("alpha", opt.alpha);
  from_file("lambda", opt.lambda);
  from_file_str("weighting", opt.weighting);
  from_file("fixed_w", opt.fixed_w);
  from_file_str("schedule", opt.schedule_csv);
  from_file("heatmap_h", opt.heatmap_h);
  from_file("heatmap_w", opt.heatmap_w);
  from_file("ae_pretrain_count", opt.ae_pretrain_count);
  from_file("ae_pretrain_epochs", opt.ae_pretrain_epochs);
  from_file("ae_pretrain_lr", opt.ae_pretrain_lr);
  from_file("ae_retrain_epochs", opt.ae_retrain_epochs);
  from_file("ae_retrain_lr", opt.ae_retrain_lr);
  from_file("ae_seed", opt.ae_seed);

  cmd->add_option("--criterion", opt.criterion,
                  "selection criterion: random|lc|mpe|tpc|thc|wpu|thc+wpu|kmeans|coreset|"
                  "thc+duw|wpu+duw|thc+wpu+duw|duw");
  cmd->add_option("--sc", opt.sc, "stopping criterion: none|min|all");
  cmd->add_option("--theta", opt.theta, "target OKS threshold");
  cmd->add_option("--m,--margin", opt.margin, "margin above theta for the misestimated set");
  cmd->add_option("--alpha", opt.alpha, "retraining epochs scale");
  cmd->add_option("--lambda", opt.lambda, "uncertainty weight in the DUW acquisition");
  cmd->add_option("--weighting", opt.weighting, "THC/WPU blend: fixed|increase|const|decrease");
  cmd->add_option("--fixed-w", opt.fixed_w, "THC weight for --weighting fixed");
  cmd->add_option("--schedule", opt.schedule_csv, "per-cycle budget fractions, comma separated");
  cmd->add_option("--heatmap-h", opt.heatmap_h, "heatmap rows");
  cmd->add_option("--heatmap-w", opt.heatmap_w, "heatmap columns");
  cmd->add_option("--ae-pretrain-count", opt.ae_pretrain_count, "autoencoder pre-training pose count");
  cmd->add_option("--ae-pretrain-epochs", opt.ae_pretrain_epochs, "autoencoder pre-training epochs");
  cmd->add_option("--ae-pretrain-lr", opt.ae_pretrain_lr, "autoencoder pre-training learning rate");
  cmd->add_option("--ae-retrain-epochs", opt.ae_retrain_epochs, "autoencoder per-cycle epochs");
  cmd->add_option("--ae-retrain-lr", opt.ae_retrain_lr, "autoencoder per-cycle learning rate");
  cmd->add_option("--ae-seed", opt.ae_seed, "autoencoder seed");
}

std::string run_basename(const std::string& criterion, const std::string& video_id,
                         std::uint64_t seed) {
  return criterion + "_" + video_id + "_" + std::to_string(seed);
}

void write_run_outputs(const RunResult& result, const fs::path& out_dir) {
  save_runlog(result.log,
              (out_dir / ("runlog_" +
                          run_basename(result.task.criterion, result.log.video_id, result.task.seed) +
                          ".json"))
                  .string());
}

int cmd_generate(const GlobalOptions& global, int videos, int frames, int tracks, int keypoints,
                 const std::string& prefix) {
  fs::create_directories(global.out_dir);
  for (int v = 0; v < videos; ++v) {
    SynthSpec spec;
    spec.frames = frames;
    spec.tracks = tracks;
    spec.K = keypoints;
    auto d = generate_synthetic_video(spec, global.seed + static_cast<std::uint64_t>(v));
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "%03d", v);
    d.video_id = prefix + "_" + suffix;
    save_dataset(d, (fs::path(global.out_dir) / (d.video_id + ".json")).string());
    std::cout << d.video_id << " N=" << d.sample_count() << "\n";
  }
  return 0;
}

int cmd_run(const GlobalOptions& global, const RunOptions& run_opt, const std::string& dataset_path) {
  const auto dataset = load_dataset(dataset_path);
  const auto cfg = run_opt.to_config(global.seed);
  fs::create_directories(global.out_dir);
  std::cerr << "running " << cfg.criterion << " on " << dataset.video_id
            << " (N=" << dataset.sample_count() << ")\n";
  SimulatedBackend backend(dataset, cfg.sim, cfg.seed);
  RunResult result{{cfg.criterion, 0, cfg.seed}, run_atl(dataset, backend, cfg)};
  write_run_outputs(result, global.out_dir);
  write_curve_csv({result},
                  (fs::path(global.out_dir) /
                   ("curve_" + run_basename(cfg.criterion, dataset.video_id, cfg.seed) + ".csv"))
                      .string());
  std::cerr << "alc " << format_double(result.log.alc_value)
            << (result.log.stopped_by_sc ? " (stopped by sc)" : "") << "\n";
  return 0;
}

std::vector<VideoDataset> load_datasets(const std::string& csv) {
  std::vector<VideoDataset> out;
  for (const auto& path : split_csv(csv)) out.push_back(load_dataset(path));
  if (out.empty()) throw std::runtime_error("no dataset files given");
  return out;
}

int cmd_sweep(const GlobalOptions& global, const RunOptions& run_opt, const std::string& datasets_csv,
              const std::string& criteria_csv, const std::string& seeds_csv) {
  const auto datasets = load_datasets(datasets_csv);
  SweepSpec spec;
  spec.criteria = split_csv(criteria_csv);
  spec.seeds = parse_seed_list(seeds_csv);
  if (spec.seeds.empty()) spec.seeds = {global.seed};
  for (const auto& d : datasets) spec.videos.push_back(&d);
  spec.base = run_opt.to_config(global.seed);
  spec.validate();

  std::cerr << "sweep: " << spec.criteria.size() << " criteria x " << datasets.size()
            << " videos x " << spec.seeds.size() << " seeds, jobs=" << global.jobs << "\n";
  const auto results = run_sweep(spec, global.jobs);

  fs::create_directories(global.out_dir);
  for (const auto& r : results) write_run_outputs(r, global.out_dir);
  const auto checkpoints = schedule_checkpoints(spec.base.schedule);
  const auto summaries = summarize_sweep(results, checkpoints);
  write_curve_csv(results, (fs::path(global.out_dir) / "curve.csv").string());
  write_summary_csv(summaries, checkpoints, (fs::path(global.out_dir) / "summary.csv").string());
  write_learning_curve_svg(summaries, checkpoints, (fs::path(global.out_dir) / "curves.svg").string());
  for (const auto& s : summaries)
    std::cerr << "  " << s.criterion << " mean alc " << format_double(s.alc_mean) << "\n";
  return 0;
}

int cmd_sc_report(const GlobalOptions& global, const RunOptions& run_opt,
                  const std::string& datasets_csv, const std::string& seeds_csv,
                  const std::string& thetas_csv) {
  const auto datasets = load_datasets(datasets_csv);
  auto base = run_opt.to_config(global.seed);
  if (run_opt.schedule_csv.empty()) base.schedule = std::vector<double>(10, 0.1);
  const auto thetas = parse_double_list(thetas_csv, "thetas");
  auto seeds = parse_seed_list(seeds_csv);
  if (seeds.empty()) seeds = {global.seed};
  std::vector<const VideoDataset*> videos;
  for (const auto& d : datasets) videos.push_back(&d);

  std::cerr << "sc-report: " << thetas.size() << " thresholds x " << videos.size() << " videos x "
            << seeds.size() << " seeds\n";
  const auto report = sc_report(videos, seeds, thetas, base, global.jobs);
  fs::create_directories(global.out_dir);
  write_sc_report_csv(report, (fs::path(global.out_dir) / "sc_report.csv").string(),
                      (fs::path(global.out_dir) / "sc_report_runs.csv").string());
  for (const auto& row : report.rows)
    std::cerr << "  sc_" << row.sc << " theta " << format_double(row.theta) << ": stopped "
              << format_double(row.stopped_pct_mean) << "% actual "
              << format_double(row.actual_pct_mean) << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"video-specific active transfer learning for pose estimation"};
  app.require_subcommand(1);

  GlobalOptions global;
  // the config file must be known before option defaults are settled
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") global.config_path = argv[i + 1];
  std::map<std::string, std::string> file_cfg;
  try {
    if (!global.config_path.empty()) file_cfg = load_config_file(global.config_path);
    if (file_cfg.count("global.seed")) global.seed = std::stoull(file_cfg["global.seed"]);
    if (file_cfg.count("global.jobs")) global.jobs = std::stoi(file_cfg["global.jobs"]);
    if (file_cfg.count("global.out_dir")) global.out_dir = file_cfg["global.out_dir"];
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  app.add_option("--config", global.config_path, "flat key = value config file");
  app.add_option("--seed", global.seed, "base seed");
  app.add_option("--jobs", global.jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", global.out_dir, "output directory");

  auto* gen = app.add_subcommand("generate", "write synthetic pose videos");
  int videos = 1, frames = 30, tracks = 3, keypoints = 15;
  std::string prefix = "video";
  try {
    if (file_cfg.count("generate.videos")) videos = std::stoi(file_cfg["generate.videos"]);
    if (file_cfg.count("generate.frames")) frames = std::stoi(file_cfg["generate.frames"]);
    if (file_cfg.count("generate.tracks")) tracks = std::stoi(file_cfg["generate.tracks"]);
    if (file_cfg.count("generate.keypoints")) keypoints = std::stoi(file_cfg["generate.keypoints"]);
    if (file_cfg.count("generate.prefix")) prefix = file_cfg["generate.prefix"];
  } catch (const std::exception& e) {
    std::cerr << "error: bad [generate] config value: " << e.what() << "\n";
    return 1;
  }
  gen->add_option("--videos", videos, "number of videos")->check(CLI::PositiveNumber);
  gen->add_option("--frames", frames, "frames per video")->check(CLI::PositiveNumber);
  gen->add_option("--tracks", tracks, "tracks per video")->check(CLI::PositiveNumber);
  gen->add_option("--keypoints", keypoints, "keypoints per pose")->check(CLI::Range(2, 64));
  gen->add_option("--prefix", prefix, "output file prefix");

  auto* run = app.add_subcommand("run", "one ATL run on one video");
  RunOptions run_opt;
  std::string run_dataset;
  std::string sweep_datasets, sweep_criteria = "random,coreset,thc+wpu+duw", sweep_seeds = "0";
  std::string sc_datasets, sc_seeds = "0", sc_thetas = "0.5,0.6,0.7,0.8";
  RunOptions sweep_opt, sc_opt;
  auto* sweep = app.add_subcommand("sweep", "criteria x videos x seeds comparison");
  auto* screp = app.add_subcommand("sc-report", "stopping-criterion stop points vs the oracle");
  try {
    add_run_options(run, run_opt, "run", file_cfg);
    add_run_options(sweep, sweep_opt, "sweep", file_cfg);
    add_run_options(screp, sc_opt, "sc-report", file_cfg);
    if (file_cfg.count("run.dataset")) run_dataset = file_cfg["run.dataset"];
    if (file_cfg.count("sweep.datasets")) sweep_datasets = file_cfg["sweep.datasets"];
    if (file_cfg.count("sweep.criteria")) sweep_criteria = file_cfg["sweep.criteria"];
    if (file_cfg.count("sweep.seeds")) sweep_seeds = file_cfg["sweep.seeds"];
    if (file_cfg.count("sc-report.datasets")) sc_datasets = file_cfg["sc-report.datasets"];
    if (file_cfg.count("sc-report.seeds")) sc_seeds = file_cfg["sc-report.seeds"];
    if (file_cfg.count("sc-report.thetas")) sc_thetas = file_cfg["sc-report.thetas"];
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  run->add_option("--dataset", run_dataset, "dataset file")->required(run_dataset.empty());
  sweep->add_option("--datasets", sweep_datasets, "dataset files, comma separated")
      ->required(sweep_datasets.empty());
  sweep->add_option("--criteria", sweep_criteria, "criteria, comma separated");
  sweep->add_option("--seeds", sweep_seeds, "seeds, comma separated");
  screp->add_option("--datasets", sc_datasets, "dataset files, comma separated")
      ->required(sc_datasets.empty());
  screp->add_option("--seeds", sc_seeds, "seeds, comma separated");
  screp->add_option("--thetas", sc_thetas, "OKS targets, comma separated");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(global, videos, frames, tracks, keypoints, prefix);
    if (run->parsed()) return cmd_run(global, run_opt, run_dataset);
    if (sweep->parsed()) return cmd_sweep(global, sweep_opt, sweep_datasets, sweep_criteria, sweep_seeds);
    if (screp->parsed()) return cmd_sc_report(global, sc_opt, sc_datasets, sc_seeds, sc_thetas);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
