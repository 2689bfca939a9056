#include "dchlab/trajectory.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dchlab/errors.hpp"
#include "dchlab/wasserstein.hpp"

namespace dchlab {

void TrajectoryRecord::append(double t, DensityField f, const EnergyReport& report) {
  if (!times.empty() && !(t > times.back())) throw InvalidInput("trajectory times must be strictly increasing");
  times.push_back(t);
  stats.push_back({f.min(), f.max(), f.mass()});
  snapshots.push_back(std::move(f));
  reports.push_back(report);
  speeds.push_back(0.0);
}

void TrajectoryRecord::log(double t, std::string kind, std::string detail) {
  events.push_back({t, std::move(kind), std::move(detail)});
}

void TrajectoryRecord::compute_speeds(std::size_t m) {
  speeds.assign(times.size(), 0.0);
  for (std::size_t k = 0; k + 1 < snapshots.size(); ++k) speeds[k + 1] = metric_speed(*this, k, m);
}

double TrajectoryRecord::audit_energy(std::size_t k) const {
  return flow == "limit" ? reports.at(k).e_star : reports.at(k).e_eps;
}

double TrajectoryRecord::audit_slope(std::size_t k) const {
  return flow == "limit" ? reports.at(k).slope_star : reports.at(k).slope_eps;
}

void write_trajectory_csv(const TrajectoryRecord& traj, std::ostream& os) {
  os << "# flow=" << traj.flow << "\n";
  os << "t,min,max,mass,e_eps,e_star,slope_eps,slope_star,gap,speed\n";
  os << std::setprecision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& s = traj.stats[k];
    const auto& r = traj.reports[k];
    os << traj.times[k] << ',' << s.min << ',' << s.max << ',' << s.mass << ',' << r.e_eps << ',' << r.e_star << ','
       << r.slope_eps << ',' << r.slope_star << ',' << r.gap << ',' << traj.speeds[k] << '\n';
  }
}

void write_trajectory_csv(const TrajectoryRecord& traj, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  write_trajectory_csv(traj, os);
}

TrajectoryRecord read_trajectory_csv(std::istream& is) {
  TrajectoryRecord traj;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("flow=");
      if (pos != std::string::npos) traj.flow = line.substr(pos + 5);
      continue;
    }
    if (!header_seen) {
      if (line.rfind("t,min,max,mass,e_eps,e_star,slope_eps,slope_star,gap,speed", 0) != 0)
        throw InvalidInput("trajectory CSV has an unexpected header: " + line);
      header_seen = true;
      continue;
    }
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cols.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidInput("trajectory CSV line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (cols.size() != 10) throw InvalidInput("trajectory CSV line " + std::to_string(lineno) + ": expected 10 columns");
    traj.times.push_back(cols[0]);
    traj.stats.push_back({cols[1], cols[2], cols[3]});
    traj.reports.push_back({cols[4], cols[5], cols[6], cols[7], cols[8]});
    traj.speeds.push_back(cols[9]);
  }
  if (!header_seen) throw InvalidInput("trajectory CSV has no header");
  return traj;
}

TrajectoryRecord read_trajectory_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open trajectory '" + path + "'");
  return read_trajectory_csv(is);
}

void write_snapshots_json(const TrajectoryRecord& traj, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (std::size_t k = 0; k < traj.snapshots.size(); ++k) {
    const auto v = traj.snapshots[k].values();
    doc.push_back({{"t", traj.times[k]}, {"values", std::vector<double>(v.begin(), v.end())}});
  }
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  os << doc.dump() << '\n';
}

}  // namespace dchlab
