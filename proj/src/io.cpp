#include "difstring/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace difstring {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_atomic(path, j.dump(2) + "\n"); }

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

namespace {

void coordinate_header(std::ostringstream& os, Eigen::Index d) {
  for (Eigen::Index k = 0; k < d; ++k) os << ",x" << k;
}

} // namespace

std::string string_csv(const MatrixXd& images, double t) {
  std::ostringstream os;
  os << "index,t";
  coordinate_header(os, images.rows());
  os << '\n';
  for (Eigen::Index i = 0; i < images.cols(); ++i) {
    os << i << ',' << format_double(t);
    for (Eigen::Index k = 0; k < images.rows(); ++k) os << ',' << format_double(images(k, i));
    os << '\n';
  }
  return os.str();
}

std::string walkers_csv(const WalkerEnsemble& walkers) {
  std::ostringstream os;
  os << "index";
  coordinate_header(os, walkers.walkers.rows());
  os << ",reject_count\n";
  for (Eigen::Index i = 0; i < walkers.walkers.cols(); ++i) {
    os << i;
    for (Eigen::Index k = 0; k < walkers.walkers.rows(); ++k) os << ',' << format_double(walkers.walkers(k, i));
    os << ',' << walkers.reject_counts[static_cast<std::size_t>(i)] << '\n';
  }
  return os.str();
}

std::string diagnostics_csv(const PathDiagnostics& diagnostics) {
  std::ostringstream os;
  os << "step,t,arc_length,max_displacement";
  const Eigen::Index n = diagnostics.rows.empty() ? 0 : diagnostics.rows.front().logp.size();
  for (Eigen::Index i = 0; i < n; ++i) os << ",logp_" << i;
  os << '\n';
  for (const auto& r : diagnostics.rows) {
    os << r.step << ',' << format_double(r.t) << ',' << format_double(r.arc_length) << ','
       << format_double(r.max_displacement);
    for (Eigen::Index i = 0; i < r.logp.size(); ++i) os << ',' << format_double(r.logp(i));
    os << '\n';
  }
  return os.str();
}

std::string error_curve_csv(const std::vector<ScoreErrorRow>& rows) {
  std::ostringstream os;
  os << "t,mean_error,n_excluded\n";
  for (const auto& r : rows) os << format_double(r.t) << ',' << format_double(r.mean_error) << ',' << r.n_excluded << '\n';
  return os.str();
}

std::string trajectory_csv(const Trajectory& trajectory) {
  std::ostringstream os;
  os << 't';
  coordinate_header(os, trajectory.points.rows());
  os << '\n';
  for (Eigen::Index k = 0; k < trajectory.points.cols(); ++k) {
    os << format_double(trajectory.times(k));
    for (Eigen::Index i = 0; i < trajectory.points.rows(); ++i) os << ',' << format_double(trajectory.points(i, k));
    os << '\n';
  }
  return os.str();
}

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::size_t a = pos, b = end;
    while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
    while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' || line[b - 1] == '\r')) --b;
    double v = 0.0;
    const auto res = std::from_chars(line.data() + a, line.data() + b, v);
    if (a == b || res.ec != std::errc() || res.ptr != line.data() + b) return false;
    out.push_back(v);
    pos = end + 1;
  }
  return true;
}

} // namespace

MatrixXd read_points_csv(const std::filesystem::path& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::vector<double> vals;
  int lineno = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!parse_row(line, vals)) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    first = false;
    const std::size_t want = expected_dim > 0 ? static_cast<std::size_t>(expected_dim)
                                              : (rows.empty() ? vals.size() : rows.front().size());
    if (vals.size() != want)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(want) +
                        " columns, found " + std::to_string(vals.size()));
    rows.push_back(vals);
  }
  const Eigen::Index d = rows.empty() ? std::max(expected_dim, 0) : static_cast<Eigen::Index>(rows.front().size());
  MatrixXd out(d, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (Eigen::Index k = 0; k < d; ++k) out(k, static_cast<Eigen::Index>(j)) = rows[j][static_cast<std::size_t>(k)];
  return out;
}

} // namespace difstring
