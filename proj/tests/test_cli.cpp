// Exercises the installed command-line surface through real process
// invocations. Usage: test_cli <path-to-cli>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

int failures = 0;

#define REQUIRE_MSG(cond, msg)                                               \
  do {                                                                       \
    if (!(cond)) {                                                           \
      std::cerr << "[FAIL] " << __FILE__ << ":" << __LINE__ << " " << (msg) \
                << "\n";                                                     \
      ++failures;                                                            \
    }                                                                        \
  } while (0)

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cmd(const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); }

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: test_cli <cli-binary>\n";
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path root = fs::temp_directory_path() / "poseatl_cli_test";
  fs::remove_all(root);
  fs::create_directories(root);

  // generate: file count, sample count, reproducibility, usage errors
  {
    const fs::path d1 = root / "gen1", d2 = root / "gen2";
    REQUIRE_MSG(run_cmd(cli + " --seed 11 --out-dir " + d1.string() +
                        " generate --videos 3 --frames 30 --tracks 3") == 0,
                "generate failed");
    REQUIRE_MSG(run_cmd(cli + " --seed 11 --out-dir " + d2.string() +
                        " generate --videos 3 --frames 30 --tracks 3") == 0,
                "generate rerun failed");
    for (const char* name : {"video_000.json", "video_001.json", "video_002.json"}) {
      REQUIRE_MSG(fs::exists(d1 / name), std::string(name) + " missing");
      REQUIRE_MSG(slurp(d1 / name) == slurp(d2 / name), std::string(name) + " not reproducible");
      const auto j = nlohmann::json::parse(slurp(d1 / name));
      REQUIRE_MSG(j["samples"].size() == 90, std::string(name) + " does not have 90 samples");
    }
    REQUIRE_MSG(run_cmd(cli + " --out-dir " + (root / "bad").string() +
                        " generate --videos 1 --frames 0") != 0,
                "generate accepted --frames 0");
  }

  const std::string dataset = (root / "gen1" / "video_000.json").string();
  const std::string light_ae = " --ae-pretrain-count 120 --ae-pretrain-epochs 60";

  // run: defaults echoed in the log header, sc firing recorded
  {
    const fs::path out = root / "run_sc";
    REQUIRE_MSG(run_cmd(cli + " --seed 3 --out-dir " + out.string() + " run --dataset " + dataset +
                        " --criterion thc+wpu+duw --sc all --theta 0.6 --alpha 250 --m 0.05" +
                        light_ae) == 0,
                "run failed");
    const auto log = nlohmann::json::parse(slurp(out / "runlog_thc+wpu+duw_video_000_3.json"));
    REQUIRE_MSG(log["config"]["alpha"] == 250.0, "alpha not echoed");
    REQUIRE_MSG(log["config"]["margin"] == 0.05, "margin not echoed");
    REQUIRE_MSG(log["config"]["sc"] == "all", "sc not echoed");
    const bool last_fired = log["cycles"].back()["sc_fired"].get<bool>();
    const bool exhausted = log["curve"].back()[0].get<double>() >= 1.0 - 1e-12;
    REQUIRE_MSG(last_fired || exhausted, "run neither stopped by sc nor exhausted the schedule");
    REQUIRE_MSG(fs::exists(out / "curve_thc+wpu+duw_video_000_3.csv"), "curve csv missing");
  }

  // run: coreset with lambda 0 and duw with lambda 0 select identically
  {
    const fs::path out_a = root / "run_coreset", out_b = root / "run_duw0";
    REQUIRE_MSG(run_cmd(cli + " --seed 5 --out-dir " + out_a.string() + " run --dataset " + dataset +
                        " --criterion coreset --lambda 0" + light_ae) == 0,
                "coreset run failed");
    REQUIRE_MSG(run_cmd(cli + " --seed 5 --out-dir " + out_b.string() + " run --dataset " + dataset +
                        " --criterion duw --lambda 0" + light_ae) == 0,
                "duw run failed");
    const auto a = nlohmann::json::parse(slurp(out_a / "runlog_coreset_video_000_5.json"));
    const auto b = nlohmann::json::parse(slurp(out_b / "runlog_duw_video_000_5.json"));
    REQUIRE_MSG(a["cycles"].size() == b["cycles"].size(), "cycle counts differ");
    for (std::size_t c = 0; c < a["cycles"].size(); ++c)
      REQUIRE_MSG(a["cycles"][c]["selected"] == b["cycles"][c]["selected"],
                  "selections differ at cycle " + std::to_string(c));
  }

  // sweep: summary shape and the mean-within-bounds property
  {
    const fs::path out = root / "sweep";
    const std::string datasets =
        (root / "gen1" / "video_000.json").string() + "," + (root / "gen1" / "video_001.json").string();
    REQUIRE_MSG(run_cmd(cli + " --seed 2 --jobs 2 --out-dir " + out.string() + " sweep --datasets " +
                        datasets + " --criteria random,lc,thc+wpu+duw --seeds 0,1" + light_ae) == 0,
                "sweep failed");
    REQUIRE_MSG(fs::exists(out / "curves.svg"), "svg missing");
    const std::string svg = slurp(out / "curves.svg");
    REQUIRE_MSG(svg.find("<svg") != std::string::npos && svg.find("polyline") != std::string::npos,
                "svg lacks plot elements");

    std::ifstream summary(out / "summary.csv");
    std::string line;
    std::getline(summary, line);
    REQUIRE_MSG(line == "criterion,checkpoint,ap_mean,alc_mean", "summary header mismatch");
    std::map<std::string, double> alc_mean;
    int rows = 0;
    while (std::getline(summary, line)) {
      ++rows;
      std::stringstream ss(line);
      std::string criterion, checkpoint, ap, alc;
      std::getline(ss, criterion, ',');
      std::getline(ss, checkpoint, ',');
      std::getline(ss, ap, ',');
      std::getline(ss, alc, ',');
      alc_mean[criterion] = std::stod(alc);
    }
    REQUIRE_MSG(rows == 3 * 10, "expected 3 criteria x 10 checkpoints, got " + std::to_string(rows));
    REQUIRE_MSG(alc_mean.size() == 3, "expected 3 criteria in the summary");

    // each criterion's mean ALC lies within the min/max of its runs
    for (const auto& [criterion, mean] : alc_mean) {
      double lo = 1e9, hi = -1e9;
      for (const auto& video : {"video_000", "video_001"})
        for (const auto& seed : {"0", "1"}) {
          const fs::path logp =
              out / ("runlog_" + criterion + "_" + video + "_" + seed + ".json");
          REQUIRE_MSG(fs::exists(logp), logp.string() + " missing");
          const double alc = nlohmann::json::parse(slurp(logp))["alc"].get<double>();
          lo = std::min(lo, alc);
          hi = std::max(hi, alc);
        }
      REQUIRE_MSG(mean >= lo - 1e-12 && mean <= hi + 1e-12,
                  criterion + " mean alc outside its runs' range");
    }
  }

  // sc-report: table shape, unreachable target flagged, actual >= stopped for sc_all
  {
    const fs::path out = root / "screp";
    REQUIRE_MSG(run_cmd(cli + " --seed 4 --jobs 2 --out-dir " + out.string() + " sc-report --datasets " +
                        dataset + " --seeds 0,1 --thetas 0.6,0.99" + light_ae) == 0,
                "sc-report failed");
    std::ifstream rep(out / "sc_report.csv");
    std::string line;
    std::getline(rep, line);
    REQUIRE_MSG(line == "sc,theta,ap_at_stop,stopped_pct,actual_pct,never_stopped_runs",
                "sc report header mismatch");
    int rows = 0;
    bool saw_unreachable = false;
    while (std::getline(rep, line)) {
      ++rows;
      std::stringstream ss(line);
      std::string sc, theta, ap, stopped, actual, never;
      std::getline(ss, sc, ',');
      std::getline(ss, theta, ',');
      std::getline(ss, ap, ',');
      std::getline(ss, stopped, ',');
      std::getline(ss, actual, ',');
      std::getline(ss, never, ',');
      if (theta == "0.99" && std::stoi(never) > 0) {
        saw_unreachable = true;
        REQUIRE_MSG(std::stod(stopped) == 100.0, "never-stopping theta not reported as 100%");
      }
    }
    REQUIRE_MSG(rows == 4, "expected 2 rules x 2 thetas rows");
    REQUIRE_MSG(saw_unreachable, "theta 0.99 was not flagged as never stopped");
    REQUIRE_MSG(fs::exists(out / "sc_report_runs.csv"), "per-run detail csv missing");
  }

  // a config file provides defaults and flags override it
  {
    const fs::path cfg_path = root / "run.cfg";
    {
      std::ofstream cfg(cfg_path);
      cfg << "[global]\nseed = 9\nout_dir = " << (root / "cfg_out").string() << "\n\n"
          << "[run]\ndataset = " << dataset << "\ncriterion = random\nalpha = 100\n"
          << "ae_pretrain_count = 120\nae_pretrain_epochs = 60\n";
    }
    REQUIRE_MSG(run_cmd(cli + " --config " + cfg_path.string() + " run") == 0, "config-driven run failed");
    const auto log = nlohmann::json::parse(
        slurp(root / "cfg_out" / "runlog_random_video_000_9.json"));
    REQUIRE_MSG(log["config"]["alpha"] == 100.0, "config alpha not applied");

    REQUIRE_MSG(run_cmd(cli + " --config " + cfg_path.string() + " run --alpha 150") == 0,
                "flag-override run failed");
    const auto log2 = nlohmann::json::parse(
        slurp(root / "cfg_out" / "runlog_random_video_000_9.json"));
    REQUIRE_MSG(log2["config"]["alpha"] == 150.0, "flag did not override the config file");
  }

  // bad inputs exit nonzero
  REQUIRE_MSG(run_cmd(cli + " run --dataset /nonexistent.json") != 0, "missing dataset accepted");
  REQUIRE_MSG(run_cmd(cli + " run --dataset " + dataset + " --criterion bogus") != 0,
              "unknown criterion accepted");

  fs::remove_all(root);
  if (failures == 0) std::printf("cli surface: all checks passed\n");
  return failures == 0 ? 0 : 1;
}
