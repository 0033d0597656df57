#pragma once

// Figure-ready datasets projected from record streams: trajectories, error
// traces, velocity traces, reward curves, and sensing/avoidance series.

#include "formsim/csv.hpp"

namespace formsim {

struct FigureDataset {
  std::string id;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  CsvWriter to_csv() const {
    CsvWriter w(columns);
    for (const auto& r : rows) w.add_row(r);
    return w;
  }
};

namespace detail {

inline int uav_count_of(const CsvTable& t) {
  int p = 0;
  while (true) {
    const std::string probe = "u" + std::to_string(p + 1) + "_x";
    bool found = false;
    for (const auto& c : t.columns)
      if (c == probe) {
        found = true;
        break;
      }
    if (!found) break;
    ++p;
  }
  if (p == 0) throw InvalidArgumentError("records: no per-UAV columns found");
  return p;
}

inline FigureDataset project(const CsvTable& t, const std::string& id,
                             const std::vector<std::string>& names) {
  FigureDataset d;
  d.id = id;
  d.columns = names;
  std::vector<int> idx;
  for (const auto& n : names) idx.push_back(t.column_index(n));
  d.rows.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    std::vector<double> r;
    r.reserve(idx.size());
    for (int i : idx) r.push_back(row[i]);
    d.rows.push_back(std::move(r));
  }
  return d;
}

}  // namespace detail

// Deterministic projections keyed by figure id:
//   fig6          leader / VFT-following trajectories (positions per UAV)
//   fig7          per-UAV following error vs time
//   figv          mean formation speed and leader speed vs time
//   fig8          reward curve passthrough (episode, mean_reward)
//   fig9          formation-average following error vs time
//   fig10         true vs estimated obstacle track (sensing cycles)
//   fig11         obstacle positioning error and the predicted bound vs time
//   fig14, fig16  trajectories plus the obstacle track (avoidance runs)
//   fig15, fig17  per-UAV following error with the avoidance flag
inline FigureDataset extract(const CsvTable& records, const std::string& id) {
  if (records.rows.empty()) throw InvalidArgumentError("extract: no records");
  if (id == "fig8") {
    return detail::project(records, id, {"episode", "mean_reward"});
  }
  const int p = detail::uav_count_of(records);

  auto uav_cols = [&](const char* suffix) {
    std::vector<std::string> names;
    for (int i = 1; i <= p; ++i) names.push_back("u" + std::to_string(i) + "_" + suffix);
    return names;
  };

  if (id == "fig6" || id == "fig14" || id == "fig16") {
    std::vector<std::string> names{"t", "leader_x", "leader_y", "leader_z"};
    for (int i = 1; i <= p; ++i)
      for (const char* f : {"x", "y", "z"})
        names.push_back("u" + std::to_string(i) + "_" + f);
    if (id != "fig6")
      for (const char* f : {"obstacle_present", "obs_x", "obs_y", "obs_z"})
        names.push_back(f);
    return detail::project(records, id, names);
  }
  if (id == "fig7") {
    std::vector<std::string> names{"t"};
    for (const auto& n : uav_cols("ed")) names.push_back(n);
    return detail::project(records, id, names);
  }
  if (id == "fig15" || id == "fig17") {
    std::vector<std::string> names{"t"};
    for (const auto& n : uav_cols("ed")) names.push_back(n);
    for (const auto& n : uav_cols("avoid")) names.push_back(n);
    return detail::project(records, id, names);
  }
  if (id == "figv") {
    FigureDataset d;
    d.id = id;
    d.columns = {"t", "mean_speed", "leader_speed"};
    std::vector<int> vx, vy, vz;
    for (int i = 1; i <= p; ++i) {
      vx.push_back(records.column_index("u" + std::to_string(i) + "_vx"));
      vy.push_back(records.column_index("u" + std::to_string(i) + "_vy"));
      vz.push_back(records.column_index("u" + std::to_string(i) + "_vz"));
    }
    const int ti = records.column_index("t");
    const int lx = records.column_index("leader_vx");
    const int ly = records.column_index("leader_vy");
    const int lz = records.column_index("leader_vz");
    for (const auto& row : records.rows) {
      double mean = 0.0;
      for (int i = 0; i < p; ++i)
        mean += std::sqrt(row[vx[i]] * row[vx[i]] + row[vy[i]] * row[vy[i]] +
                          row[vz[i]] * row[vz[i]]);
      mean /= p;
      double leader = std::sqrt(row[lx] * row[lx] + row[ly] * row[ly] + row[lz] * row[lz]);
      d.rows.push_back({row[ti], mean, leader});
    }
    return d;
  }
  if (id == "fig9") {
    FigureDataset d;
    d.id = id;
    d.columns = {"t", "mean_ed"};
    std::vector<int> ed;
    for (int i = 1; i <= p; ++i)
      ed.push_back(records.column_index("u" + std::to_string(i) + "_ed"));
    const int ti = records.column_index("t");
    for (const auto& row : records.rows) {
      double mean = 0.0;
      for (int i : ed) mean += row[i];
      d.rows.push_back({row[ti], mean / p});
    }
    return d;
  }
  if (id == "fig10") {
    return detail::project(records, id,
                           {"t", "sensed", "obs_x", "obs_y", "obs_z", "est_x", "est_y",
                            "est_z"});
  }
  if (id == "fig11") {
    return detail::project(records, id,
                           {"t", "sensed", "est_pos_err", "eps_p", "vfeo_triggered",
                            "maneuver_active"});
  }
  throw InvalidArgumentError("extract: unknown figure id '" + id + "'");
}

}  // namespace formsim
