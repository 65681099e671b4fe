#include "tclsafe/reference.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "tclsafe/error.hpp"
#include "tclsafe/rng.hpp"

namespace tclsafe::reference {

namespace {

bool parse_number(std::string_view text, double& out) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty()) return false;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

}  // namespace

Signal load_csv(const std::filesystem::path& path, double dt_seconds, int steps, double start_seconds) {
  if (!(dt_seconds > 0.0)) throw ConfigError("reference resampling step must be positive");
  if (steps < 1) throw ConfigError("reference needs at least one step");
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reference signal " + path.string());

  std::vector<double> times;
  std::vector<double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    double t = 0.0;
    double v = 0.0;
    const bool ok = comma != std::string::npos &&
                    parse_number(std::string_view(line).substr(0, comma), t) &&
                    parse_number(std::string_view(line).substr(comma + 1), v);
    if (!ok) {
      if (times.empty() && line_no == 1) continue;
      throw ConfigError("reference signal " + path.string() + ": malformed line " + std::to_string(line_no));
    }
    if (!times.empty() && !(t > times.back()))
      throw ConfigError("reference signal " + path.string() + ": times must increase (line " +
                        std::to_string(line_no) + ")");
    times.push_back(t);
    values.push_back(v);
  }
  if (times.empty()) throw ConfigError("reference signal " + path.string() + " has no samples");

  const double last_needed = start_seconds + (steps - 1) * dt_seconds;
  if (start_seconds < times.front() || last_needed > times.back())
    throw ConfigError("reference signal " + path.string() + " covers [" + std::to_string(times.front()) + ", " +
                      std::to_string(times.back()) + "] s but the horizon needs [" +
                      std::to_string(start_seconds) + ", " + std::to_string(last_needed) + "] s");

  Signal out{dt_seconds, {}};
  out.values.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double t = start_seconds + k * dt_seconds;
    const auto it = std::upper_bound(times.begin(), times.end(), t);
    out.values.push_back(values[static_cast<std::size_t>(it - times.begin()) - 1]);
  }
  return out;
}

Signal synthetic_regd(int steps, double dt_seconds, std::uint64_t seed) {
  if (steps < 1) throw ConfigError("reference needs at least one step");
  if (!(dt_seconds > 0.0)) throw ConfigError("reference step must be positive");
  Stream rng = make_stream(seed, StreamDomain::reference_signal);
  std::normal_distribution<double> noise(0.0, 1.0);
  // Time constants in seconds; the walk decorrelates over a few minutes.
  const double keep = std::exp(-dt_seconds / 300.0);
  const double shock = 0.45 * std::sqrt(1.0 - keep * keep);
  Signal out{dt_seconds, {}};
  out.values.reserve(static_cast<std::size_t>(steps));
  double level = 0.0;
  double drift_target = 0.0;
  for (int k = 0; k < steps; ++k) {
    if (rng.uniform() < dt_seconds / 900.0) drift_target = 1.6 * rng.uniform() - 0.8;
    level = keep * level + (1.0 - keep) * drift_target + shock * noise(rng);
    out.values.push_back(std::clamp(level, -1.0, 1.0));
  }
  return out;
}

void save_csv(const Signal& signal, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write reference signal " + path.string());
  out << "time_s,value\n";
  char buf[64];
  for (std::size_t k = 0; k < signal.values.size(); ++k) {
    const auto end = std::to_chars(buf, buf + sizeof buf, signal.values[k]).ptr;
    out << static_cast<double>(k) * signal.dt_seconds << ',' << std::string_view(buf, end - buf) << '\n';
  }
}

}  // namespace tclsafe::reference
