#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "poseatl/atl.hpp"
#include "poseatl/common.hpp"
#include "poseatl/metrics.hpp"

namespace poseatl {

struct RunTask {
  std::string criterion;
  std::size_t video_index = 0;
  std::uint64_t seed = 0;
};

struct RunResult {
  RunTask task;
  RunLog log;
};

struct SweepSpec {
  std::vector<std::string> criteria;
  std::vector<std::uint64_t> seeds;
  std::vector<const VideoDataset*> videos;
  AtlConfig base;

  void validate() const {
    if (criteria.empty()) throw std::invalid_argument("sweep: no criteria");
    if (seeds.empty()) throw std::invalid_argument("sweep: no seeds");
    if (videos.empty()) throw std::invalid_argument("sweep: no videos");
  }
};

namespace detail {

inline KeypointSchema bank_schema(int K) {
  if (K == 15) return default_schema();
  KeypointSchema s;
  for (int k = 0; k < K; ++k) {
    s.names.push_back("joint_" + std::to_string(k));
    s.kappas.push_back(0.08);
  }
  return s;
}

}  // namespace detail

// Pre-train one autoencoder per distinct keypoint count so the runs of a
// sweep can share it.
inline std::map<int, MlpAutoEncoder> pretrain_shared_autoencoders(const SweepSpec& spec) {
  std::map<int, MlpAutoEncoder> out;
  for (const auto* v : spec.videos) {
    const int K = v->keypoint_schema.keypoint_count();
    if (!out.count(K)) out.emplace(K, pretrain_autoencoder(K, spec.base.ae, detail::bank_schema(K)));
  }
  return out;
}

// Runs criteria x videos x seeds. Results come back in task order whatever
// the worker count, so downstream files are byte-stable.
inline std::vector<RunResult> run_sweep(const SweepSpec& spec, int jobs = 1) {
  spec.validate();
  const auto shared_ae = pretrain_shared_autoencoders(spec);

  std::vector<RunTask> tasks;
  for (const auto& crit : spec.criteria)
    for (std::size_t vi = 0; vi < spec.videos.size(); ++vi)
      for (std::uint64_t seed : spec.seeds) tasks.push_back({crit, vi, seed});

  std::vector<RunResult> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const RunTask& t = tasks[i];
      const VideoDataset& video = *spec.videos[t.video_index];
      AtlConfig cfg = spec.base;
      cfg.criterion = t.criterion;
      cfg.seed = t.seed;
      const auto& ae = shared_ae.at(video.keypoint_schema.keypoint_count());
      results[i] = {t, run_atl_simulated(video, cfg, &ae)};
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

// ---------------------------------------------------------------------------
// CSV and SVG emission.
// ---------------------------------------------------------------------------

inline void write_curve_csv(const std::vector<RunResult>& results, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "labeled_fraction,ap,criterion,seed,video_id\n";
  for (const auto& r : results)
    for (const auto& [frac, ap] : r.log.curve.points)
      out << format_double(frac) << "," << format_double(ap) << "," << r.task.criterion << ","
          << r.task.seed << "," << r.log.video_id << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Cumulative labeled fractions of a budget schedule, starting at 0.
inline std::vector<double> schedule_checkpoints(const std::vector<double>& schedule) {
  std::vector<double> cps = {0.0};
  double acc = 0.0;
  for (double f : schedule) {
    acc += f;
    cps.push_back(std::min(acc, 1.0));
  }
  cps.back() = 1.0;
  return cps;
}

struct CriterionSummary {
  std::string criterion;
  std::vector<double> checkpoint_ap_mean;  // parallel to checkpoints
  double alc_mean = 0.0;
  std::vector<double> alc_values;  // one per run, task order
};

inline std::vector<CriterionSummary> summarize_sweep(const std::vector<RunResult>& results,
                                                     const std::vector<double>& checkpoints) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<const RunResult*>> by_criterion;
  for (const auto& r : results) {
    if (!by_criterion.count(r.task.criterion)) order.push_back(r.task.criterion);
    by_criterion[r.task.criterion].push_back(&r);
  }
  std::vector<CriterionSummary> out;
  for (const auto& crit : order) {
    CriterionSummary s;
    s.criterion = crit;
    s.checkpoint_ap_mean.assign(checkpoints.size(), 0.0);
    const auto& runs = by_criterion[crit];
    for (const auto* r : runs) {
      for (std::size_t i = 0; i < checkpoints.size(); ++i)
        s.checkpoint_ap_mean[i] += curve_value_at(r->log.curve, checkpoints[i]);
      s.alc_mean += r->log.alc_value;
      s.alc_values.push_back(r->log.alc_value);
    }
    for (double& v : s.checkpoint_ap_mean) v /= runs.size();
    s.alc_mean /= runs.size();
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_summary_csv(const std::vector<CriterionSummary>& summaries,
                              const std::vector<double>& checkpoints, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "criterion,checkpoint,ap_mean,alc_mean\n";
  for (const auto& s : summaries)
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
      out << s.criterion << "," << format_double(checkpoints[i]) << ","
          << format_double(s.checkpoint_ap_mean[i]) << "," << format_double(s.alc_mean) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

// Learning-curve chart: labeled percentage against AP percentage, one line
// per criterion. Plain hand-written SVG, no plotting dependency.
inline void write_learning_curve_svg(const std::vector<CriterionSummary>& summaries,
                                     const std::vector<double>& checkpoints, const std::string& path) {
  const int width = 720, height = 480;
  const double ml = 70, mr = 180, mt = 30, mb = 55;
  const double px = width - ml - mr, py = height - mt - mb;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  auto x_of = [&](double frac) { return ml + frac * px; };
  auto y_of = [&](double ap) { return mt + (1.0 - ap) * py; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  // axes and grid
  for (int tick = 0; tick <= 100; tick += 20) {
    const double fx = x_of(tick / 100.0);
    const double fy = y_of(tick / 100.0);
    svg << "<line x1=\"" << format_double(fx) << "\" y1=\"" << format_double(mt) << "\" x2=\""
        << format_double(fx) << "\" y2=\"" << format_double(mt + py)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<line x1=\"" << format_double(ml) << "\" y1=\"" << format_double(fy) << "\" x2=\""
        << format_double(ml + px) << "\" y2=\"" << format_double(fy)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << format_double(fx) << "\" y=\"" << format_double(mt + py + 20)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << tick << "</text>\n";
    svg << "<text x=\"" << format_double(ml - 8) << "\" y=\"" << format_double(fy + 4)
        << "\" font-size=\"12\" text-anchor=\"end\">" << tick << "</text>\n";
  }
  svg << "<rect x=\"" << format_double(ml) << "\" y=\"" << format_double(mt) << "\" width=\""
      << format_double(px) << "\" height=\"" << format_double(py)
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << format_double(ml + px / 2) << "\" y=\"" << height - 12
      << "\" font-size=\"14\" text-anchor=\"middle\">labeled (%)</text>\n";
  svg << "<text x=\"18\" y=\"" << format_double(mt + py / 2)
      << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << format_double(mt + py / 2) << ")\">AP@0.6 (%)</text>\n";

  for (std::size_t s = 0; s < summaries.size(); ++s) {
    const char* color = palette[s % (sizeof(palette) / sizeof(palette[0]))];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < checkpoints.size(); ++i)
      svg << format_double(x_of(checkpoints[i])) << "," << format_double(y_of(summaries[s].checkpoint_ap_mean[i]))
          << (i + 1 < checkpoints.size() ? " " : "");
    svg << "\"/>\n";
    const double ly = mt + 20 + 20.0 * s;
    svg << "<line x1=\"" << format_double(ml + px + 12) << "\" y1=\"" << format_double(ly - 4)
        << "\" x2=\"" << format_double(ml + px + 36) << "\" y2=\"" << format_double(ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << format_double(ml + px + 42) << "\" y=\"" << format_double(ly)
        << "\" font-size=\"12\">" << summaries[s].criterion << "</text>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << svg.str();
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Stopping-criterion report. One non-stopping run per (video, seed) yields
// the stop points of both rules at every threshold, because a stopping rule
// only truncates the trajectory it is computed from.
// ---------------------------------------------------------------------------

struct ScRunDetail {
  std::string sc;  // "min" or "all"
  double theta = 0.0;
  std::string video_id;
  std::uint64_t seed = 0;
  double ap_at_stop = 0.0;    // AP@theta at the stopping cycle
  double stopped_pct = 0.0;   // labeled percentage when the rule fired
  double actual_pct = 0.0;    // labeled percentage when every sample reached theta
  bool never_stopped = false;
  bool never_reached = false;
};

struct ScReportRow {
  std::string sc;
  double theta = 0.0;
  double ap_at_stop_mean = 0.0;
  double stopped_pct_mean = 0.0;
  double actual_pct_mean = 0.0;
  int never_stopped_count = 0;
};

struct ScReport {
  std::vector<ScReportRow> rows;
  std::vector<ScRunDetail> details;
};

inline ScReport sc_report(const std::vector<const VideoDataset*>& videos,
                          const std::vector<std::uint64_t>& seeds, const std::vector<double>& thetas,
                          AtlConfig base, int jobs = 1) {
  if (videos.empty() || seeds.empty() || thetas.empty())
    throw std::invalid_argument("sc report: need videos, seeds and thetas");
  for (double t : thetas)
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("sc report: theta must be in (0,1)");

  base.sc = StopRule::None;  // full trajectories; stop points derived below
  base.extra_taus = thetas;  // AP@theta must be on record at every cycle
  SweepSpec spec;
  spec.criteria = {base.criterion};
  spec.seeds = seeds;
  spec.videos = videos;
  spec.base = base;
  const auto results = run_sweep(spec, jobs);

  ScReport report;
  for (const char* sc_name : {"min", "all"}) {
    for (double theta : thetas) {
      ScReportRow row;
      row.sc = sc_name;
      row.theta = theta;
      for (const auto& r : results) {
        ScRunDetail d;
        d.sc = sc_name;
        d.theta = theta;
        d.video_id = r.log.video_id;
        d.seed = r.task.seed;
        const CycleRecord* stop_rec = nullptr;
        for (const auto& rec : r.log.cycles) {
          const bool fired = std::string(sc_name) == "min" ? rec.q_mean_oks > theta
                                                           : rec.labeled_min_oks > theta;
          if (fired) {
            stop_rec = &rec;
            break;
          }
        }
        if (stop_rec) {
          d.stopped_pct = 100.0 * stop_rec->labeled_fraction;
          d.ap_at_stop = stop_rec->ap.at(tau_key(theta));
        } else {
          d.never_stopped = true;
          d.stopped_pct = 100.0;
          d.ap_at_stop = r.log.cycles.back().ap.at(tau_key(theta));
        }
        d.never_reached = true;
        for (const auto& rec : r.log.cycles) {
          if (rec.all_min_oks >= theta) {
            d.actual_pct = 100.0 * rec.labeled_fraction;
            d.never_reached = false;
            break;
          }
        }
        if (d.never_reached) d.actual_pct = 100.0;
        row.ap_at_stop_mean += d.ap_at_stop;
        row.stopped_pct_mean += d.stopped_pct;
        row.actual_pct_mean += d.actual_pct;
        if (d.never_stopped) ++row.never_stopped_count;
        report.details.push_back(std::move(d));
      }
      row.ap_at_stop_mean /= results.size();
      row.stopped_pct_mean /= results.size();
      row.actual_pct_mean /= results.size();
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

inline void write_sc_report_csv(const ScReport& report, const std::string& path,
                                const std::string& detail_path = "") {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "sc,theta,ap_at_stop,stopped_pct,actual_pct,never_stopped_runs\n";
  for (const auto& r : report.rows)
    out << r.sc << "," << format_double(r.theta) << "," << format_double(r.ap_at_stop_mean) << ","
        << format_double(r.stopped_pct_mean) << "," << format_double(r.actual_pct_mean) << ","
        << r.never_stopped_count << "\n";
  if (!detail_path.empty()) {
    std::ofstream det(detail_path);
    if (!det) throw std::runtime_error("cannot open " + detail_path + " for writing");
    det << "sc,theta,video_id,seed,ap_at_stop,stopped_pct,actual_pct,never_stopped,never_reached\n";
    for (const auto& d : report.details)
      det << d.sc << "," << format_double(d.theta) << "," << d.video_id << "," << d.seed << ","
          << format_double(d.ap_at_stop) << "," << format_double(d.stopped_pct) << ","
          << format_double(d.actual_pct) << "," << (d.never_stopped ? 1 : 0) << ","
          << (d.never_reached ? 1 : 0) << "\n";
  }
}

}  // namespace poseatl
