#include "tclsafe/scenario_config.hpp"

#include <fstream>
#include <set>

#include "tclsafe/error.hpp"

namespace tclsafe::harness {

using nlohmann::json;

namespace {

constexpr double hour = 3600.0;

// Object reader that rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + " must be an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : doc_.items())
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where());
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key) && !doc_.at(key).is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return doc_.at(key);
  }

  Section child(const std::string& key) { return Section(raw(key), path_ + "." + key); }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "." + key + " has the wrong type");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    if (doc_.at(key).is_null()) {
      out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  void range(const std::string& key, Range& out) {
    if (!has(key)) return;
    const auto& v = doc_.at(key);
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw ConfigError(where() + "." + key + " must be a [lo, hi] pair");
    out = {v[0].get<double>(), v[1].get<double>()};
  }

  void path(const std::string& key, std::optional<std::filesystem::path>& out, const std::filesystem::path& base) {
    std::optional<std::string> s;
    get(key, s);
    if (!s) return;
    std::filesystem::path p(*s);
    out = p.is_relative() && !base.empty() ? std::filesystem::weakly_canonical(std::filesystem::absolute(base / p)) : p;
  }

  std::string where() const { return path_; }

 private:
  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

void read_ranges(Section s, tcl::ParameterRanges& r) {
  s.range("ambient_temp", r.ambient_temp);
  s.range("thermal_capacitance", r.thermal_capacitance);
  s.range("thermal_resistance", r.thermal_resistance);
  s.range("transfer_rate", r.transfer_rate);
  s.range("cop", r.cop);
  s.range("setpoint", r.setpoint);
  s.range("deadband_width", r.deadband_width);
  s.range("power_factor", r.power_factor);
}

void read_feeder(Section s, FeederSpec& f, const std::filesystem::path& base) {
  s.path("file", f.file, base);
  if (s.has("generator")) {
    Section g = s.child("generator");
    auto& spec = f.generator;
    std::string shape = grid::to_string(spec.shape);
    g.get("shape", shape);
    spec.shape = grid::parse_feeder_shape(shape);
    g.get("nodes", spec.nodes);
    g.range("resistance", spec.resistance);
    g.range("reactance", spec.reactance);
    g.get("substation_voltage", spec.substation_voltage);
    if (g.has("base")) {
      Section b = g.child("base");
      b.get("power_mva", spec.base.power_mva);
      b.get("voltage_kv", spec.base.voltage_kv);
    }
    g.get("seed", spec.seed);
  }
  if (f.file && s.has("generator")) throw ConfigError("feeder takes either a file or a generator, not both");
  f.calibration_margin = 0.01;
  s.get("calibration_margin", f.calibration_margin);
}

void read_loads(Section s, LoadSpec& l) {
  s.get("nominal_real_kw", l.nominal_real_kw);
  s.get("nominal_reactive_kvar", l.nominal_reactive_kvar);
  s.range("nominal_real_range_kw", l.nominal_real_range_kw);
  s.get("power_factor", l.power_factor);
  if (s.has("profile_hours")) {
    const auto& v = s.raw("profile_hours");
    if (!v.is_array() || v.empty()) throw ConfigError("loads.profile_hours must be a nonempty array");
    l.profile.knots.clear();
    for (const auto& k : v) {
      if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number())
        throw ConfigError("loads.profile_hours entries must be [hour, multiplier] pairs");
      l.profile.knots.emplace_back(k[0].get<double>() * hour, k[1].get<double>());
    }
    l.profile.validate();
  }
  s.get("sd_fraction", l.sd_fraction);
  s.range("truncation_fraction", l.truncation_fraction);
  s.get("correlation", l.correlation);
}

void read_population(Section s, PopulationSpec& p) {
  s.get("penetration", p.penetration);
  if (s.has("basis")) {
    std::string basis;
    s.get("basis", basis);
    if (basis == "rated") {
      p.basis = PenetrationBasis::rated;
    } else if (basis == "expected") {
      p.basis = PenetrationBasis::expected;
    } else {
      throw ConfigError("population.basis must be 'rated' or 'expected'");
    }
  }
  s.get("count", p.count);
  if (s.has("ranges")) read_ranges(s.child("ranges"), p.ranges);
}

void read_reference(Section s, ReferenceSpec& r, const std::filesystem::path& base) {
  s.path("file", r.file, base);
  if (s.has("file_start_hour")) {
    double h = 0.0;
    s.get("file_start_hour", h);
    r.file_start_seconds = h * hour;
  }
  s.get("offset_fraction", r.offset_fraction);
  s.get("scale_fraction", r.scale_fraction);
  s.get("offset_kw", r.offset_kw);
  s.get("scale_kw", r.scale_kw);
}

void read_safety(Section s, utility::SafetyConfig& c) {
  s.get("epsilon", c.epsilon);
  s.get("beta", c.beta);
  s.get("v_floor", c.v_floor);
  s.get("max_samples", c.max_samples);
  s.get("batch_size", c.batch_size);
  s.get("bisection_tol", c.bisection_tol);
  s.get("use_lindistflow_in_mc", c.use_lindistflow_in_mc);
  s.get("check_over_voltage", c.check_over_voltage);
  s.get("v_ceiling", c.v_ceiling);
  s.get("futility_stop", c.futility_stop);
  s.get("workers", c.workers);
}

}  // namespace

ScenarioConfig scenario_from_json(const json& doc, const std::filesystem::path& base_dir) {
  ScenarioConfig cfg;
  {
    Section s(doc, "config");
    s.get("name", cfg.name);
    s.get("seed", cfg.seed);
    if (s.has("controller")) {
      std::string c;
      s.get("controller", c);
      cfg.controller = parse_controller(c);
    }
    s.get("dt_seconds", cfg.dt_seconds);
    s.get("horizon", cfg.horizon);
    if (s.has("start_hour")) {
      double h = 0.0;
      s.get("start_hour", h);
      cfg.start_seconds = h * hour;
    }
    if (s.has("feeder")) read_feeder(s.child("feeder"), cfg.feeder, base_dir);
    if (s.has("loads")) read_loads(s.child("loads"), cfg.loads);
    if (s.has("population")) read_population(s.child("population"), cfg.population);
    if (s.has("reference")) read_reference(s.child("reference"), cfg.reference, base_dir);
    if (s.has("safety")) read_safety(s.child("safety"), cfg.safety);
    if (s.has("aggregator")) {
      Section a = s.child("aggregator");
      a.get("bins_per_mode", cfg.bins_per_mode);
      a.get("command_grid_step", cfg.command_grid_step);
    }
    if (s.has("curve")) {
      Section c = s.child("curve");
      if (c.has("time_hour")) {
        double h = 0.0;
        c.get("time_hour", h);
        cfg.curve.time_seconds = h * hour;
      }
      c.get("points", cfg.curve.points);
      c.get("samples", cfg.curve.samples);
    }
  }
  cfg.validate();
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return scenario_from_json(doc, path.parent_path());
}

json scenario_to_json(const ScenarioConfig& c) {
  json feeder;
  if (c.feeder.file) {
    feeder["file"] = c.feeder.file->string();
  } else {
    const auto& g = c.feeder.generator;
    feeder["generator"] = {{"shape", grid::to_string(g.shape)},
                           {"nodes", g.nodes},
                           {"resistance", range_json(g.resistance)},
                           {"reactance", range_json(g.reactance)},
                           {"substation_voltage", g.substation_voltage},
                           {"base", {{"power_mva", g.base.power_mva}, {"voltage_kv", g.base.voltage_kv}}},
                           {"seed", g.seed}};
  }
  feeder["calibration_margin"] = c.feeder.calibration_margin ? json(*c.feeder.calibration_margin) : json(nullptr);

  json profile = json::array();
  for (const auto& [t, m] : c.loads.profile.knots) profile.push_back({t / hour, m});
  json loads = {{"nominal_real_range_kw", range_json(c.loads.nominal_real_range_kw)},
                {"power_factor", c.loads.power_factor},
                {"profile_hours", profile},
                {"sd_fraction", c.loads.sd_fraction},
                {"truncation_fraction", range_json(c.loads.truncation_fraction)},
                {"correlation", c.loads.correlation}};
  if (!c.loads.nominal_real_kw.empty()) loads["nominal_real_kw"] = c.loads.nominal_real_kw;
  if (!c.loads.nominal_reactive_kvar.empty()) loads["nominal_reactive_kvar"] = c.loads.nominal_reactive_kvar;

  const auto& r = c.population.ranges;
  json population = {{"penetration", c.population.penetration},
                     {"basis", c.population.basis == PenetrationBasis::rated ? "rated" : "expected"},
                     {"ranges",
                      {{"ambient_temp", range_json(r.ambient_temp)},
                       {"thermal_capacitance", range_json(r.thermal_capacitance)},
                       {"thermal_resistance", range_json(r.thermal_resistance)},
                       {"transfer_rate", range_json(r.transfer_rate)},
                       {"cop", range_json(r.cop)},
                       {"setpoint", range_json(r.setpoint)},
                       {"deadband_width", range_json(r.deadband_width)},
                       {"power_factor", range_json(r.power_factor)}}}};
  if (c.population.count) population["count"] = *c.population.count;

  json reference = {{"file_start_hour", c.reference.file_start_seconds / hour},
                    {"offset_fraction", c.reference.offset_fraction},
                    {"scale_fraction", c.reference.scale_fraction}};
  if (c.reference.file) reference["file"] = c.reference.file->string();
  if (c.reference.offset_kw) reference["offset_kw"] = *c.reference.offset_kw;
  if (c.reference.scale_kw) reference["scale_kw"] = *c.reference.scale_kw;

  const auto& s = c.safety;
  return {{"name", c.name},
          {"seed", c.seed},
          {"controller", to_string(c.controller)},
          {"dt_seconds", c.dt_seconds},
          {"horizon", c.horizon},
          {"start_hour", c.start_seconds / hour},
          {"feeder", feeder},
          {"loads", loads},
          {"population", population},
          {"reference", reference},
          {"safety",
           {{"epsilon", s.epsilon},
            {"beta", s.beta},
            {"v_floor", s.v_floor},
            {"max_samples", s.max_samples},
            {"batch_size", s.batch_size},
            {"bisection_tol", s.bisection_tol},
            {"use_lindistflow_in_mc", s.use_lindistflow_in_mc},
            {"check_over_voltage", s.check_over_voltage},
            {"v_ceiling", s.v_ceiling},
            {"futility_stop", s.futility_stop}}},
          {"aggregator", {{"bins_per_mode", c.bins_per_mode}, {"command_grid_step", c.command_grid_step}}},
          {"curve",
           {{"time_hour", c.curve.time_seconds / hour},
            {"points", c.curve.points},
            {"samples", c.curve.samples}}}};
}

}  // namespace tclsafe::harness
