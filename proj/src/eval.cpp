#include "throwsim/eval.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "throwsim/config.hpp"

namespace throwsim {

const char* outcome_name(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::Collided: return "collided";
    case Termination::Limits: return "limits";
    case Termination::Landed: return "landed";
    case Termination::Timeout: return "timeout";
  }
  return "unknown";
}

Termination outcome_from_name(const std::string& name) {
  if (name == "running") return Termination::Running;
  if (name == "collided") return Termination::Collided;
  if (name == "limits") return Termination::Limits;
  if (name == "landed") return Termination::Landed;
  if (name == "timeout") return Termination::Timeout;
  throw std::invalid_argument("unknown outcome tag '" + name + "'");
}

std::vector<ImpactRecord> run_target_sweep(const PolicyFn& policy, const MachineModel& model,
                                           const EnvConfig& base_cfg, const SweepConfig& sweep) {
  if (sweep.repeats < 1) throw std::invalid_argument("run_target_sweep: repeats must be >= 1");
  const int n_dist = static_cast<int>(sweep.distances.size());
  const int total = n_dist * sweep.repeats;
  std::vector<ImpactRecord> records(total);

#pragma omp parallel for schedule(dynamic, 1)
  for (int job = 0; job < total; ++job) {
    const int di = job / sweep.repeats;
    const int rep = job % sweep.repeats;
    const double distance = sweep.distances[di];

    EnvConfig cfg = base_cfg;
    cfg.fixed_target = true;
    cfg.fixed_target_distance = distance;
    cfg.fixed_target_heading = 0.0;  // downrange axis = +x
    cfg.randomize_reset = sweep.randomize_init;
    // Evaluation is deterministic: no exploration aids or training noise.
    cfg.assist_enabled = false;
    cfg.noise = ObservationNoise{};
    cfg.cmd_randomization = CommandRandomization{};
    cfg.friction_scale_min = 1.0;
    cfg.friction_scale_max = 1.0;

    const std::uint64_t seed =
        derive_seed(sweep.seed, static_cast<std::uint64_t>(di) * 1000003ULL + rep);
    ThrowEnv env(model, cfg, seed);

    ImpactRecord rec;
    rec.distance = distance;
    rec.repeat = rep;
    rec.seed = seed;
    rec.target = env.target().position;

    Eigen::VectorXd obs = env.observation();
    Termination outcome = Termination::Timeout;
    for (int step = 0; step < cfg.max_steps; ++step) {
      const ThrowEnv::StepResult res = env.step(policy(obs));
      obs = env.observation();
      if (res.done) {
        outcome = res.termination;
        break;
      }
    }
    rec.outcome = outcome;
    rec.release_step = env.release_control_step();
    if (outcome == Termination::Landed) {
      rec.impact = env.ball().impact_point;
      const Eigen::Vector3d err = rec.impact - rec.target;
      rec.err_downrange = err.x();   // downrange axis = +x for the sweep
      rec.err_crossrange = err.y();
      rec.err_3d = err.norm();
    }
    records[job] = rec;
  }
  return records;
}

std::vector<DistanceStats> impact_statistics(const std::vector<ImpactRecord>& records) {
  // Group by exact distance, preserving first-seen order.
  std::vector<double> order;
  std::map<double, std::vector<const ImpactRecord*>> groups;
  for (const ImpactRecord& rec : records) {
    if (groups.find(rec.distance) == groups.end()) order.push_back(rec.distance);
    groups[rec.distance].push_back(&rec);
  }

  std::vector<DistanceStats> out;
  for (double distance : order) {
    const auto& group = groups[distance];
    DistanceStats st;
    st.distance = distance;
    st.episodes = static_cast<int>(group.size());
    double sum_down = 0, sum_cross = 0, sum_err = 0, sum_dist = 0;
    for (const ImpactRecord* rec : group) {
      if (rec->outcome != Termination::Landed) continue;
      ++st.landed;
      sum_down += rec->impact.x();
      sum_cross += rec->impact.y();
      sum_err += rec->err_3d;
      sum_dist += rec->impact.head<2>().norm();
    }
    st.landing_rate = st.episodes > 0 ? static_cast<double>(st.landed) / st.episodes : 0.0;
    if (st.landed > 0) {
      st.mean_impact_downrange = sum_down / st.landed;
      st.mean_impact_crossrange = sum_cross / st.landed;
      st.mean_err3d = sum_err / st.landed;
      st.mean_impact_distance = sum_dist / st.landed;
      double ss_down = 0, ss_cross = 0;
      for (const ImpactRecord* rec : group) {
        if (rec->outcome != Termination::Landed) continue;
        ss_down += std::pow(rec->impact.x() - st.mean_impact_downrange, 2);
        ss_cross += std::pow(rec->impact.y() - st.mean_impact_crossrange, 2);
      }
      if (st.landed > 1) {
        st.std_downrange = std::sqrt(ss_down / (st.landed - 1));
        st.std_crossrange = std::sqrt(ss_cross / (st.landed - 1));
      }
    }
    out.push_back(st);
  }
  return out;
}

namespace {
const char* kRecordsHeader =
    "distance,repeat,seed,outcome,release_step,target_x,target_y,target_z,"
    "impact_x,impact_y,impact_z,err_downrange,err_crossrange,err_3d";
}

void export_report(const std::vector<DistanceStats>& stats,
                   const std::vector<ImpactRecord>& records, const std::string& dir) {
  std::filesystem::create_directories(dir);

  std::ofstream rec_out(dir + "/records.csv", std::ios::trunc);
  if (!rec_out) throw std::runtime_error("cannot write " + dir + "/records.csv");
  rec_out << kRecordsHeader << "\n";
  for (const ImpactRecord& r : records) {
    rec_out << format_double(r.distance) << ',' << r.repeat << ',' << r.seed << ','
            << outcome_name(r.outcome) << ',' << r.release_step << ','
            << format_double(r.target.x()) << ',' << format_double(r.target.y()) << ','
            << format_double(r.target.z()) << ',' << format_double(r.impact.x()) << ','
            << format_double(r.impact.y()) << ',' << format_double(r.impact.z()) << ','
            << format_double(r.err_downrange) << ',' << format_double(r.err_crossrange) << ','
            << format_double(r.err_3d) << "\n";
  }

  std::ofstream sum_out(dir + "/summary.csv", std::ios::trunc);
  if (!sum_out) throw std::runtime_error("cannot write " + dir + "/summary.csv");
  sum_out << "distance,episodes,landed,landing_rate,mean_impact_downrange,"
             "mean_impact_crossrange,std_downrange,std_crossrange,mean_err3d,"
             "mean_impact_distance\n";
  for (const DistanceStats& s : stats) {
    sum_out << format_double(s.distance) << ',' << s.episodes << ',' << s.landed << ','
            << format_double(s.landing_rate) << ',' << format_double(s.mean_impact_downrange)
            << ',' << format_double(s.mean_impact_crossrange) << ','
            << format_double(s.std_downrange) << ',' << format_double(s.std_crossrange) << ','
            << format_double(s.mean_err3d) << ',' << format_double(s.mean_impact_distance)
            << "\n";
  }

  // Plot-ready long format: one row per landed impact.
  std::ofstream scatter(dir + "/scatter.csv", std::ios::trunc);
  if (!scatter) throw std::runtime_error("cannot write " + dir + "/scatter.csv");
  scatter << "target_distance,impact_downrange,impact_crossrange\n";
  for (const ImpactRecord& r : records) {
    if (r.outcome != Termination::Landed) continue;
    scatter << format_double(r.distance) << ',' << format_double(r.impact.x()) << ','
            << format_double(r.impact.y()) << "\n";
  }
}

std::vector<ImpactRecord> parse_records_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kRecordsHeader) {
    throw std::runtime_error(path + ": unexpected records.csv header");
  }
  std::vector<ImpactRecord> records;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string token;
    std::vector<std::string> tokens;
    while (std::getline(ss, token, ',')) tokens.push_back(token);
    if (tokens.size() != 14) throw std::runtime_error(path + ": malformed row");
    ImpactRecord r;
    r.distance = std::stod(tokens[0]);
    r.repeat = std::stoi(tokens[1]);
    r.seed = std::stoull(tokens[2]);
    r.outcome = outcome_from_name(tokens[3]);
    r.release_step = std::stoi(tokens[4]);
    r.target = Eigen::Vector3d(std::stod(tokens[5]), std::stod(tokens[6]), std::stod(tokens[7]));
    r.impact = Eigen::Vector3d(std::stod(tokens[8]), std::stod(tokens[9]), std::stod(tokens[10]));
    r.err_downrange = std::stod(tokens[11]);
    r.err_crossrange = std::stod(tokens[12]);
    r.err_3d = std::stod(tokens[13]);
    records.push_back(r);
  }
  return records;
}

}  // namespace throwsim
