#include "oilid/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "oilid/errors.hpp"
#include "oilid/units.hpp"

namespace oilid::config {

namespace {

using nlohmann::json;

// Wraps one JSON object; every key read is remembered so that leftovers
// (typos, mostly) can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_ + " must be an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  const json& raw(const std::string& key) {
    if (!has(key)) throw SchemaError("missing key " + where(key));
    return j_.at(key);
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw SchemaError(where(key) + " must be a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  int integer(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) throw SchemaError(where(key) + " must be an integer");
    return v.get<int>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_unsigned()) throw SchemaError(where(key) + " must be a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw SchemaError(where(key) + " must be true or false");
    return v.get<bool>();
  }
  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw SchemaError(where(key) + " must be a string");
    return v.get<std::string>();
  }
  Section child(const std::string& key) {
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, where(key));
  }
  const json& array(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_array()) throw SchemaError(where(key) + " must be an array");
    return v;
  }
  int node(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<int>() < 1)
      throw SchemaError(where(key) + " must be a node number >= 1");
    return v.get<int>() - 1;
  }

  template <class Enum>
  Enum choice(const std::string& key, Enum fallback,
              const std::vector<std::pair<std::string, Enum>>& options) {
    if (!has(key)) return fallback;
    const std::string v = text(key);
    std::string allowed;
    for (const auto& [name, value] : options) {
      if (name == v) return value;
      allowed += (allowed.empty() ? "" : "|") + name;
    }
    throw SchemaError(where(key) + " must be one of " + allowed + ", got '" + v + "'");
  }

  std::string where(const std::string& key) const { return path_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw SchemaError("unknown key " + where(it.key()));
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(source + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

rotor::RotorModel parse_rotor(Section s) {
  rotor::RotorModel m;
  Section mat = s.child("material");
  m.material.young_modulus = mat.number("young_modulus_pa", m.material.young_modulus);
  m.material.poisson_ratio = mat.number("poisson_ratio", m.material.poisson_ratio);
  m.material.density = mat.number("density_kg_m3", m.material.density);
  mat.finish();

  const json& elements = s.array("elements_mm");
  for (std::size_t i = 0; i < elements.size(); ++i) {
    const json& e = elements[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
      throw SchemaError(s.where("elements_mm") + "[" + std::to_string(i) +
                        "] must be [length_mm, diameter_mm]");
    m.elements.push_back({units::mm_to_m(e[0].get<double>()), units::mm_to_m(e[1].get<double>())});
  }
  if (s.has("discs")) {
    const json& discs = s.array("discs");
    for (std::size_t i = 0; i < discs.size(); ++i) {
      Section d(discs[i], s.where("discs") + "[" + std::to_string(i) + "]");
      rotor::Disc disc;
      disc.node = d.node("node");
      disc.width = units::mm_to_m(d.number("width_mm"));
      disc.external_diameter = units::mm_to_m(d.number("outer_diameter_mm"));
      if (d.has("inner_diameter_mm")) disc.internal_diameter = units::mm_to_m(d.number("inner_diameter_mm"));
      d.finish();
      m.discs.push_back(disc);
    }
  }
  Section bn = s.child("bearing_nodes");
  m.bearing_nodes = {bn.node("first"), bn.node("second")};
  bn.finish();
  m.speed = units::hz_to_rad_s(s.number("speed_hz"));
  m.gravity = s.number("gravity_m_s2", m.gravity);
  Section damp = s.child("proportional_damping");
  m.damping_mass_factor = damp.number("mass_factor_per_s", 0.0);
  m.damping_stiffness_factor = damp.number("stiffness_factor_s", 0.0);
  damp.finish();

  Section u = s.child("unbalance");
  m.unbalance.node = u.node("node");
  m.unbalance.phase = u.number("phase_deg", 0.0) * units::kPi / 180.0;
  const bool by_grade = u.has("grade_mm_s");
  const bool by_moment = u.has("moment_kg_m");
  if (by_grade == by_moment)
    throw SchemaError(s.where("unbalance") + " needs exactly one of grade_mm_s, moment_kg_m");
  s.finish();
  m.validate();
  m.unbalance.moment = by_moment ? u.number("moment_kg_m")
                                 : rotor::g25_unbalance_moment(rotor::total_mass(m), m.speed,
                                                               u.number("grade_mm_s") * 1e-3);
  u.finish();
  return m;
}

void parse_bearing(Section s, bearing::BearingSetup& b) {
  auto& g = b.geometry;
  g.radius = units::mm_to_m(s.number("radius_mm", g.radius * 1e3));
  g.width = units::mm_to_m(s.number("width_mm", g.width * 1e3));
  g.radial_clearance = units::um_to_m(s.number("clearance_um", units::m_to_um(g.radial_clearance)));
  g.groove_angle = s.number("groove_angle_deg", g.groove_angle * 180.0 / units::kPi) * units::kPi / 180.0;
  g.groove_circumferential_length =
      units::mm_to_m(s.number("groove_length_mm", g.groove_circumferential_length * 1e3));
  g.groove_axial_width = units::mm_to_m(s.number("groove_width_mm", g.groove_axial_width * 1e3));
  Section mesh = s.child("mesh");
  b.n_circ = mesh.integer("circumferential", b.n_circ);
  b.n_axial = mesh.integer("axial", b.n_axial);
  mesh.finish();
  Section solver = s.child("solver");
  b.solver.tolerance = solver.number("tolerance", b.solver.tolerance);
  b.solver.max_sweeps = solver.integer("max_sweeps", b.solver.max_sweeps);
  b.solver.relaxation = solver.number("relaxation", b.solver.relaxation);
  b.equilibrium_tolerance = solver.number("equilibrium_tolerance", b.equilibrium_tolerance);
  solver.finish();
  s.finish();
  g.validate();
}

void parse_lubricant(Section s, bearing::Lubricant& l) {
  l.viscosity = s.number("viscosity_pa_s", l.viscosity);
  l.supply_pressure = s.number("supply_pressure_bar", l.supply_pressure / 1e5) * 1e5;
  l.cavitation_pressure = s.number("cavitation_pressure_bar", l.cavitation_pressure / 1e5) * 1e5;
  s.finish();
  l.validate();
}

// Scenario keys shared by the study defaults and scenario files.
void parse_scenario_fields(Section& s, scenario::ScenarioSpec& spec) {
  spec.duration = s.number("duration_s", spec.duration);
  spec.discard = s.number("discard_s", spec.discard);
  spec.sigma_v = units::um_to_m(s.number("sigma_um", units::m_to_um(spec.sigma_v)));
  spec.seed = s.unsigned_integer("seed", spec.seed);
  spec.substeps = s.integer("substeps", spec.substeps);
  spec.coefficient_mismatch = s.number("coefficient_mismatch_percent", spec.coefficient_mismatch * 100) / 100;
  spec.velocity = s.choice<scenario::VelocitySource>(
      "velocity", spec.velocity,
      {{"differentiated", scenario::VelocitySource::Differentiated},
       {"independent_noise", scenario::VelocitySource::IndependentNoise}});
  spec.integrator = s.choice<scenario::TruthIntegrator>(
      "integrator", spec.integrator,
      {{"newmark", scenario::TruthIntegrator::Newmark},
       {"discrete_plant", scenario::TruthIntegrator::DiscretePlant}});
}

scenario::FlowrateProfile parse_profile(Section p) {
  using scenario::FlowrateProfile;
  const std::string type = p.text("type");
  FlowrateProfile out;
  if (type == "constant") {
    out = FlowrateProfile::constant(units::ml_min_to_m3s(p.number("q_ml_min")));
  } else if (type == "sigmoid") {
    out = FlowrateProfile::sigmoid(units::ml_min_to_m3s(p.number("start_ml_min")),
                                   units::ml_min_to_m3s(p.number("end_ml_min")),
                                   p.number("center_s"), p.number("transition_s"));
  } else if (type == "piecewise") {
    std::vector<std::pair<double, double>> pts;
    const json& a = p.array("points_s_ml_min");
    for (const auto& e : a) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw SchemaError(p.where("points_s_ml_min") + " entries must be [time_s, q_ml_min]");
      pts.emplace_back(e[0].get<double>(), units::ml_min_to_m3s(e[1].get<double>()));
    }
    out = FlowrateProfile::piecewise(std::move(pts));
  } else {
    throw SchemaError(p.where("type") + " must be constant|sigmoid|piecewise, got '" + type + "'");
  }
  p.finish();
  return out;
}

}  // namespace

std::string content_hash(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StudyConfig parse_study(const std::string& text, const std::string& source) {
  const json doc = parse_json(text, source);
  Section root(doc, source);
  StudyConfig c;
  c.source = source;
  c.hash = content_hash(text);

  c.rotor = parse_rotor(root.child("rotor"));
  parse_bearing(root.child("bearing"), c.bearing);
  parse_lubricant(root.child("lubricant"), c.bearing.lubricant);
  c.bearing.speed = c.rotor.speed;

  Section loads = root.child("static_loads");
  c.static_loads = loads.choice<StaticLoads>("mode", c.static_loads,
                                             {{"computed", StaticLoads::Computed},
                                              {"equal", StaticLoads::Equal}});
  c.equal_load = loads.number("equal_load_n", c.equal_load);
  loads.finish();
  if (!(c.equal_load > 0)) throw ModelError("equal static load must be positive");

  Section flow = root.child("flowrate");
  c.nominal_flowrate = units::ml_min_to_m3s(flow.number("nominal_ml_min", 596.3));
  if (flow.has("flooded_threshold_ml_min"))
    c.flooded_threshold = units::ml_min_to_m3s(flow.number("flooded_threshold_ml_min"));
  c.grid_points = flow.integer("grid_points", c.grid_points);
  flow.finish();
  if (!(c.nominal_flowrate > 0)) throw ModelError("nominal flowrate must be positive");
  if (c.grid_points < 2) throw ModelError("coefficient grid needs at least 2 points");

  Section plant = root.child("plant");
  c.sample_period = plant.number("sample_period_s", c.sample_period);
  c.mode = plant.choice<ss::Discretization>(
      "mode", c.mode, {{"cached", ss::Discretization::CachedGrid}, {"exact", ss::Discretization::Exact}});
  c.input_hold = plant.choice<ss::InputHold>(
      "input_hold", c.input_hold, {{"harmonic", ss::InputHold::Harmonic}, {"end_value", ss::InputHold::EndValue}});
  c.exact_threshold = units::ml_min_to_m3s(plant.number("exact_threshold_ml_min", 1.0));
  plant.finish();
  if (!(c.sample_period > 0)) throw ModelError("sample period must be positive");

  Section f = root.child("filter");
  auto& n = c.noise;
  n.displacement_std = units::um_to_m(f.number("process_displacement_um", units::m_to_um(n.displacement_std)));
  n.velocity_std = units::um_to_m(f.number("process_velocity_um_s", units::m_to_um(n.velocity_std)));
  n.flowrate_std = units::ml_min_to_m3s(f.number("process_flowrate_ml_min", units::m3s_to_ml_min(n.flowrate_std)));
  n.initial_displacement_std =
      units::um_to_m(f.number("initial_displacement_um", units::m_to_um(n.initial_displacement_std)));
  n.initial_velocity_std = f.number("initial_velocity_mm_s", n.initial_velocity_std * 1e3) * 1e-3;
  n.initial_flowrate_fraction = f.number("initial_flowrate_percent", n.initial_flowrate_fraction * 100) / 100;
  n.corrected_velocity_variance = f.boolean("corrected_velocity_variance", n.corrected_velocity_variance);
  n.jacobian_step = units::ml_min_to_m3s(f.number("jacobian_step_ml_min", units::m3s_to_ml_min(n.jacobian_step)));
  c.convergence_window = f.number("convergence_window_s", c.convergence_window);
  c.convergence_fraction = f.number("convergence_percent", c.convergence_fraction * 100) / 100;
  f.finish();

  Section sc = root.child("scenario");
  c.scenario.sample_period = c.sample_period;
  parse_scenario_fields(sc, c.scenario);
  sc.finish();
  c.scenario.profiles = {scenario::FlowrateProfile::constant(c.nominal_flowrate),
                         scenario::FlowrateProfile::constant(c.nominal_flowrate)};
  c.scenario.validate();
  root.finish();
  return c;
}

StudyConfig load_study(const std::string& path) {
  return parse_study(read_file(path), path);
}

std::array<Eigen::Vector2d, 2> bearing_loads(const StudyConfig& c) {
  if (c.static_loads == StaticLoads::Equal)
    return {Eigen::Vector2d(0, c.equal_load), Eigen::Vector2d(0, c.equal_load)};
  return rotor::static_bearing_loads(c.rotor);
}

double flooded_threshold(const StudyConfig& c) {
  if (c.flooded_threshold) return *c.flooded_threshold;
  return bearing::flooded_threshold(c.bearing, bearing_loads(c)[0], 0.5 * c.nominal_flowrate,
                                    1.5 * c.nominal_flowrate);
}

std::array<bearing::CoefficientTable, 2> build_tables(const StudyConfig& c, ss::Build build) {
  const auto loads = bearing_loads(c);
  const auto grid = bearing::default_flowrate_grid(flooded_threshold(c), c.grid_points);
  auto make = [&](const Eigen::Vector2d& load) {
    return build == ss::Build::Parallel ? bearing::build_coefficient_table_parallel(c.bearing, load, grid)
                                        : bearing::build_coefficient_table(c.bearing, load, grid);
  };
  const auto first = make(loads[0]);
  // Identical bearings under identical loads share one table.
  if (loads[0] == loads[1]) return {first, first};
  return {first, make(loads[1])};
}

ss::PlantConfig plant_config(const StudyConfig& c, const std::array<bearing::CoefficientTable, 2>& tables) {
  ss::PlantConfig p;
  p.global = rotor::assemble_global(c.rotor);
  p.speed = c.rotor.speed;
  p.bearing_nodes = c.rotor.bearing_nodes;
  p.tables = tables;
  p.unbalance = c.rotor.unbalance;
  p.sample_period = c.sample_period;
  p.mode = c.mode;
  p.input_hold = c.input_hold;
  p.exact_threshold = c.exact_threshold;
  return p;
}

scenario::SensitivityModel sensitivity_model(const StudyConfig& c) {
  scenario::SensitivityModel m;
  m.global = rotor::assemble_global(c.rotor);
  m.speed = c.rotor.speed;
  m.bearing_nodes = c.rotor.bearing_nodes;
  m.unbalance = c.rotor.unbalance;
  m.bearing = c.bearing;
  m.loads = bearing_loads(c);
  return m;
}

scenario::IdentificationSetup identification_setup(const StudyConfig& c, const ss::Plant& plant) {
  scenario::IdentificationSetup s;
  s.plant = &plant;
  s.nominal_flowrate = c.nominal_flowrate;
  s.noise = c.noise;
  s.filter.convergence_window = c.convergence_window;
  s.filter.convergence_fraction = c.convergence_fraction;
  s.filter.nominal_flowrate = c.nominal_flowrate;
  s.filter.jacobian_step = c.noise.jacobian_step;
  return s;
}

scenario::ScenarioSpec parse_scenario(const std::string& text, const StudyConfig& study,
                                      const std::string& source) {
  const json doc = parse_json(text, source);
  Section root(doc, source);
  scenario::ScenarioSpec spec = study.scenario;
  parse_scenario_fields(root, spec);
  const json& profiles = root.array("profiles");
  if (profiles.size() != 2) throw SchemaError(root.where("profiles") + " must hold one profile per bearing");
  for (std::size_t b = 0; b < 2; ++b)
    spec.profiles[b] = parse_profile(Section(profiles[b], root.where("profiles") + "[" + std::to_string(b) + "]"));
  root.finish();
  spec.validate();
  return spec;
}

scenario::ScenarioSpec load_scenario(const std::string& path, const StudyConfig& study) {
  return parse_scenario(read_file(path), study, path);
}

}  // namespace oilid::config
