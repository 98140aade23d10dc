#include "cbfaux/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace cbfaux {

namespace {

// Typed reader over one JSON object; remembers which keys were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw SchemaError(field(key) + ": " + msg);
  }

  std::string field(const std::string& key) const {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  const Json* raw(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  double number(const std::string& key, std::optional<double> def) {
    const Json* v = raw(key);
    if (v == nullptr) {
      if (!def) fail(key, "required field missing");
      return *def;
    }
    if (!v->is_number()) fail(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }

  double positive(const std::string& key, std::optional<double> def) {
    const double x = number(key, def);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }

  int integer(const std::string& key, std::optional<int> def, int min) {
    const Json* v = raw(key);
    if (v == nullptr) {
      if (!def) fail(key, "required field missing");
      return *def;
    }
    if (!v->is_number_integer()) fail(key, "expected an integer");
    const auto x = v->get<long long>();
    if (x < min || x > 1000000) fail(key, "out of range");
    return static_cast<int>(x);
  }

  bool boolean(const std::string& key, bool def) {
    const Json* v = raw(key);
    if (v == nullptr) return def;
    if (!v->is_boolean()) fail(key, "expected true or false");
    return v->get<bool>();
  }

  std::string text(const std::string& key, std::optional<std::string> def,
                   const std::set<std::string>& allowed) {
    const Json* v = raw(key);
    if (v == nullptr) {
      if (!def) fail(key, "required field missing");
      return *def;
    }
    if (!v->is_string()) fail(key, "expected a string");
    const auto s = v->get<std::string>();
    if (!allowed.empty() && !allowed.contains(s)) {
      std::string opts;
      for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
      fail(key, "unknown value '" + s + "' (expected one of: " + opts + ")");
    }
    return s;
  }

  StateVec vector(const std::string& key, std::optional<StateVec> def, int size) {
    const Json* v = raw(key);
    if (v == nullptr) {
      if (!def) fail(key, "required field missing");
      return *def;
    }
    return parse_vector(*v, field(key), size);
  }

  Section object(const std::string& key) {
    static const Json kEmpty = Json::object();
    const Json* v = raw(key);
    return Section(v == nullptr ? kEmpty : *v, field(key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.contains(it.key())) fail(it.key(), "unknown key");
    }
  }

  static StateVec parse_vector(const Json& v, const std::string& where, int size) {
    if (!v.is_array()) throw SchemaError(where + ": expected an array of numbers");
    if (size >= 0 && static_cast<int>(v.size()) != size) {
      throw SchemaError(where + ": expected " + std::to_string(size) + " entries, got " +
                        std::to_string(v.size()));
    }
    StateVec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        throw SchemaError(where + "[" + std::to_string(i) + "]: expected a finite number");
      }
      out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
    }
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

SystemKind system_from(const std::string& s) {
  if (s == "single_integrator") return SystemKind::SingleIntegrator;
  if (s == "double_integrator") return SystemKind::DoubleIntegrator;
  if (s == "unicycle") return SystemKind::Unicycle;
  return SystemKind::Mechanical;
}

AuxKind default_aux(SystemKind k) {
  switch (k) {
    case SystemKind::SingleIntegrator:
      return AuxKind::PositionAngle;
    case SystemKind::Unicycle:
      return AuxKind::RelativeHeading;
    default:
      return AuxKind::VelocityHeading;
  }
}

int state_dim(SystemKind k) { return SystemModel{k, {}}.state_dim(); }

Json to_json(const StateVec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Json to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Vec2 vec2(const StateVec& v) { return Vec2(v(0), v(1)); }

StateVec to_vec(const Vec2& v) {
  StateVec out(2);
  out << v.x(), v.y();
  return out;
}

void parse_sweep(Section sec, Scenario& s) {
  SweepSpec sw;
  const int n = state_dim(s.system);
  const std::string kind = sec.text("kind", std::nullopt, {"ring", "grid", "list"});
  if (kind == "ring") {
    sw.kind = SweepKind::Ring;
    sw.ring_center = vec2(sec.vector("center", to_vec(s.barrier().obstacle.center0), 2));
    sw.ring_radius = sec.positive("radius", 3.0);
    sw.count = sec.integer("count", 8, 0);
    sw.center_angle = sec.number("center_angle", std::numbers::pi / 2.0);
    sw.spacing = sec.number("spacing", 0.3);
    if (const Json* h = sec.raw("heading"); h != nullptr) {
      if (h->is_string() && h->get<std::string>() == "toward_goal") {
        sw.heading.reset();
      } else if (h->is_number()) {
        sw.heading = h->get<double>();
      } else {
        sec.fail("heading", "expected a number or \"toward_goal\"");
      }
    }
  } else if (kind == "grid") {
    sw.kind = SweepKind::Grid;
    sw.lower = sec.vector("lower", std::nullopt, n);
    sw.upper = sec.vector("upper", std::nullopt, n);
    const Json* c = sec.raw("counts");
    if (c == nullptr) sec.fail("counts", "required field missing");
    if (!c->is_array() || static_cast<int>(c->size()) != n) {
      sec.fail("counts", "expected " + std::to_string(n) + " integers");
    }
    for (const auto& e : *c) {
      if (!e.is_number_integer() || e.get<long long>() < 1 || e.get<long long>() > 10000) {
        sec.fail("counts", "entries must be integers in [1, 10000]");
      }
      sw.counts.push_back(e.get<int>());
    }
  } else {
    sw.kind = SweepKind::List;
    const Json* st = sec.raw("states");
    if (st == nullptr || !st->is_array()) sec.fail("states", "expected an array of states");
    for (std::size_t i = 0; i < st->size(); ++i) {
      sw.states.push_back(
          Section::parse_vector((*st)[i], sec.field("states") + "[" + std::to_string(i) + "]", n));
    }
  }
  sec.finish();
  s.sweep = std::move(sw);
}

}  // namespace

std::string to_string(ControllerKind kind) {
  return kind == ControllerKind::Proposed ? "proposed" : "baseline";
}

Scenario parse_scenario(const Json& doc) {
  Section root(doc, "");
  Scenario s;
  const Json* name = root.raw("name");
  if (name != nullptr) {
    if (!name->is_string()) root.fail("name", "expected a string");
    s.name = name->get<std::string>();
  } else {
    s.name = "scenario";
  }

  {
    Section sec = root.object("system");
    s.system = system_from(sec.text(
        "kind", std::nullopt, {"single_integrator", "double_integrator", "unicycle", "mechanical"}));
    if (s.system == SystemKind::Mechanical) {
      const Json* mm = sec.raw("mass_matrix");
      if (mm != nullptr) {
        if (!mm->is_array() || mm->size() != 2) sec.fail("mass_matrix", "expected a 2x2 array");
        for (int i = 0; i < 2; ++i) {
          const StateVec row = Section::parse_vector(
              (*mm)[i], sec.field("mass_matrix") + "[" + std::to_string(i) + "]", 2);
          s.mass_matrix.row(i) = row.transpose();
        }
      }
      if ((s.mass_matrix - s.mass_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 ||
          Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(s.mass_matrix).eigenvalues().minCoeff() <=
              0.0) {
        sec.fail("mass_matrix", "must be symmetric positive definite");
      }
      s.gravity = vec2(sec.vector("gravity", to_vec(Vec2::Zero()), 2));
    }
    sec.finish();
  }
  const int n = state_dim(s.system);

  {
    Section sec = root.object("obstacle");
    auto& ob = s.hocbf.base.obstacle;
    ob.center0 = vec2(sec.vector("center", to_vec(Vec2(0.0, 3.0)), 2));
    ob.velocity = vec2(sec.vector("velocity", to_vec(Vec2::Zero()), 2));
    ob.radius = sec.positive("radius", 1.5);
    sec.finish();
  }
  {
    Section sec = root.object("barrier");
    s.hocbf.base.alpha_h.gain = sec.positive("alpha0", 1.0);
    s.hocbf.alpha1 = sec.positive("alpha1", 1.0);
    s.hocbf.alpha2 = sec.positive("alpha2", 1.0);
    sec.finish();
  }
  {
    Section sec = root.object("controller");
    s.controller = sec.text("kind", "proposed", {"proposed", "baseline"}) == "proposed"
                       ? ControllerKind::Proposed
                       : ControllerKind::Baseline;
    Section clf = sec.object("clf");
    s.clf.gamma = clf.number("gamma", 1.0);
    s.clf.m = clf.number("m", 1.0);
    s.clf.c_v = clf.positive("c_v", 0.5);
    clf.finish();
    if (s.clf.gamma < 1.0) clf.fail("gamma", "must be >= 1");
    if (s.clf.m < 1.0) clf.fail("m", "must be >= 1");

    Section nom = sec.object("nominal");
    const std::string def_kind = s.system == SystemKind::Unicycle ? "aicardi" : "pd";
    const std::string kind = nom.text("kind", def_kind, {"pd", "aicardi"});
    s.nominal.kind = kind == "pd" ? NominalKind::PD : NominalKind::AicardiPolar;
    s.nominal.k_p = nom.number("k_p", 1.0);
    s.nominal.k_d = nom.number("k_d", 2.0);
    s.nominal.k_rho = nom.number("k_rho", 0.8);
    s.nominal.k_alpha = nom.number("k_alpha", 2.5);
    s.nominal.k_beta = nom.number("k_beta", -0.6);
    nom.finish();
    if (s.system == SystemKind::Unicycle && s.nominal.kind != NominalKind::AicardiPolar) {
      nom.fail("kind", "the unicycle requires the aicardi nominal law");
    }
    if ((s.system == SystemKind::DoubleIntegrator || s.system == SystemKind::Mechanical) &&
        s.nominal.kind != NominalKind::PD) {
      nom.fail("kind", "second-order systems require the pd nominal law");
    }
    try {
      s.nominal.validate();
    } catch (const std::invalid_argument& e) {
      nom.fail("", e.what());
    }
    sec.finish();
  }
  {
    Section sec = root.object("auxiliary");
    const AuxKind def = default_aux(s.system);
    const std::string kind = sec.text("kind", std::string(to_string(def)),
                                      {"position_angle", "velocity_heading", "relative_heading"});
    if (kind != to_string(def)) {
      sec.fail("kind", "'" + kind + "' does not apply to " + std::string(to_string(s.system)));
    }
    switch (def) {
      case AuxKind::PositionAngle:
        s.aux = AuxiliarySpec::position_angle(sec.positive("eta", 0.8),
                                              sec.positive("h_gate", 0.12));
        break;
      case AuxKind::VelocityHeading: {
        const double eta = sec.positive("eta", 0.1);
        const double hg = sec.positive("h_gate", 0.25);
        s.aux = AuxiliarySpec::velocity_heading(eta, hg, sec.positive("v_min", 0.05));
        break;
      }
      case AuxKind::RelativeHeading: {
        const double eta = sec.positive("eta", 0.5);
        const double kp = sec.positive("k_psi", 2.0);
        const double dg = sec.positive("d_gate", 0.5);
        s.aux = AuxiliarySpec::relative_heading(eta, kp, dg, sec.integer("p_gate", 2, 1));
        break;
      }
    }
    sec.finish();
  }
  {
    Section sec = root.object("sim");
    s.sim.dt = sec.positive("dt", 1e-3);
    s.sim.horizon = sec.positive("horizon", 30.0);
    s.sim.t0 = sec.number("t0", 0.0);
    s.sim.controller_rate_divisor = sec.integer("controller_rate_divisor", 1, 1);
    s.sim.goal = vec2(sec.vector("goal", to_vec(Vec2::Zero()), 2));
    s.sim.goal_tol = sec.positive("goal_tol", 0.1);
    s.sim.safety_tol = sec.number("safety_tol", 1e-6);
    s.sim.stop_at_goal = sec.boolean("stop_at_goal", true);
    s.sim.strict = sec.boolean("strict", false);
    sec.finish();
    try {
      s.sim.validate();
    } catch (const std::invalid_argument& e) {
      sec.fail("", e.what());
    }
    if (s.sim.horizon / s.sim.dt > 5e7) sec.fail("dt", "too many steps for the horizon");
  }
  s.clf.goal = s.sim.goal;
  {
    Section sec = root.object("analysis");
    const double def_rho = s.system == SystemKind::Unicycle ? 0.25 : 0.06;
    const Json* r = sec.raw("rho");
    if (r == nullptr) {
      s.rhos = {def_rho};
    } else {
      const StateVec rv = Section::parse_vector(*r, sec.field("rho"), -1);
      if (rv.size() == 0) sec.fail("rho", "expected at least one value");
      for (Eigen::Index i = 0; i < rv.size(); ++i) {
        if (!(rv(i) > 0.0)) sec.fail("rho", "values must be positive");
        s.rhos.push_back(rv(i));
      }
    }
    Section box = sec.object("bound_box");
    s.bound_box.lower = box.vector("lower", StateVec::Constant(n, -10.0), n);
    s.bound_box.upper = box.vector("upper", StateVec::Constant(n, 10.0), n);
    box.finish();
    try {
      s.bound_box.validate();
    } catch (const std::invalid_argument& e) {
      box.fail("", e.what());
    }
    sec.finish();
  }
  {
    const Json* ics = root.raw("initial_states");
    if (ics != nullptr) {
      if (!ics->is_array()) root.fail("initial_states", "expected an array of states");
      for (std::size_t i = 0; i < ics->size(); ++i) {
        s.initial_states.push_back(Section::parse_vector(
            (*ics)[i], "initial_states[" + std::to_string(i) + "]", n));
      }
    }
  }
  if (root.has("sweep")) parse_sweep(root.object("sweep"), s);
  root.finish();
  return s;
}

namespace {

std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Scenario parse_scenario_text(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("parse error at " + location(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      e.what());
  }
  return parse_scenario(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError(path + ": cannot open scenario file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario_text(buf.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

Json effective_config(const Scenario& s) {
  Json j;
  j["name"] = s.name;
  Json sys;
  sys["kind"] = std::string(to_string(s.system));
  if (s.system == SystemKind::Mechanical) {
    sys["mass_matrix"] = Json::array({to_json(Vec2(s.mass_matrix.row(0).transpose())),
                                      to_json(Vec2(s.mass_matrix.row(1).transpose()))});
    sys["gravity"] = to_json(s.gravity);
  }
  j["system"] = sys;
  const auto& ob = s.barrier().obstacle;
  j["obstacle"] = {{"center", to_json(ob.center0)},
                   {"velocity", to_json(ob.velocity)},
                   {"radius", ob.radius}};
  j["barrier"] = {{"alpha0", s.barrier().alpha_h.gain},
                  {"alpha1", s.hocbf.alpha1},
                  {"alpha2", s.hocbf.alpha2}};
  j["controller"] = {
      {"kind", to_string(s.controller)},
      {"clf", {{"gamma", s.clf.gamma}, {"m", s.clf.m}, {"c_v", s.clf.c_v}}},
      {"nominal",
       {{"kind", s.nominal.kind == NominalKind::PD ? "pd" : "aicardi"},
        {"k_p", s.nominal.k_p},
        {"k_d", s.nominal.k_d},
        {"k_rho", s.nominal.k_rho},
        {"k_alpha", s.nominal.k_alpha},
        {"k_beta", s.nominal.k_beta}}}};
  Json aux;
  aux["kind"] = std::string(to_string(s.aux.kind));
  aux["eta"] = s.aux.eta;
  switch (s.aux.kind) {
    case AuxKind::PositionAngle:
      aux["h_gate"] = s.aux.gate.h_gate;
      break;
    case AuxKind::VelocityHeading:
      aux["h_gate"] = s.aux.gate.h_gate;
      aux["v_min"] = s.aux.speed_gate.v_min;
      break;
    case AuxKind::RelativeHeading:
      aux["k_psi"] = s.aux.k_psi;
      aux["d_gate"] = s.aux.gate.d_gate;
      aux["p_gate"] = s.aux.gate.p_gate;
      break;
  }
  j["auxiliary"] = aux;
  j["sim"] = {{"dt", s.sim.dt},
              {"horizon", s.sim.horizon},
              {"t0", s.sim.t0},
              {"controller_rate_divisor", s.sim.controller_rate_divisor},
              {"goal", to_json(s.sim.goal)},
              {"goal_tol", s.sim.goal_tol},
              {"safety_tol", s.sim.safety_tol},
              {"stop_at_goal", s.sim.stop_at_goal},
              {"strict", s.sim.strict}};
  j["analysis"] = {{"rho", s.rhos},
                   {"bound_box",
                    {{"lower", to_json(s.bound_box.lower)}, {"upper", to_json(s.bound_box.upper)}}}};
  Json ics = Json::array();
  for (const auto& x : s.initial_states) ics.push_back(to_json(x));
  j["initial_states"] = ics;
  if (s.sweep) {
    const SweepSpec& sw = *s.sweep;
    Json w;
    switch (sw.kind) {
      case SweepKind::Ring:
        w["kind"] = "ring";
        w["center"] = to_json(sw.ring_center);
        w["radius"] = sw.ring_radius;
        w["count"] = sw.count;
        w["center_angle"] = sw.center_angle;
        w["spacing"] = sw.spacing;
        if (sw.heading) {
          w["heading"] = *sw.heading;
        } else {
          w["heading"] = "toward_goal";
        }
        break;
      case SweepKind::Grid:
        w["kind"] = "grid";
        w["lower"] = to_json(sw.lower);
        w["upper"] = to_json(sw.upper);
        w["counts"] = sw.counts;
        break;
      case SweepKind::List: {
        w["kind"] = "list";
        Json st = Json::array();
        for (const auto& x : sw.states) st.push_back(to_json(x));
        w["states"] = st;
        break;
      }
    }
    j["sweep"] = w;
  }
  return j;
}

SystemModel Scenario::model() const {
  switch (system) {
    case SystemKind::SingleIntegrator:
      return SystemModel::single_integrator();
    case SystemKind::DoubleIntegrator:
      return SystemModel::double_integrator();
    case SystemKind::Unicycle:
      return SystemModel::unicycle();
    case SystemKind::Mechanical:
      return SystemModel::mechanical_system(MechanicalModel::constant(mass_matrix, gravity));
  }
  return {};
}

std::unique_ptr<FeedbackLaw> Scenario::make_law() const {
  const bool enforce = controller == ControllerKind::Proposed;
  switch (system) {
    case SystemKind::SingleIntegrator:
      return std::make_unique<SingleIntegratorLaw>(clf, barrier(), aux, enforce);
    case SystemKind::DoubleIntegrator:
      return std::make_unique<SecondOrderLaw>(nominal, hocbf, aux, enforce, sim.goal);
    case SystemKind::Mechanical:
      return std::make_unique<SecondOrderLaw>(nominal, hocbf, aux, enforce, sim.goal,
                                              MechanicalModel::constant(mass_matrix, gravity));
    case SystemKind::Unicycle:
      return std::make_unique<UnicycleLaw>(nominal, barrier(), aux, enforce, sim.goal);
  }
  return nullptr;
}

std::vector<StateVec> Scenario::sweep_states() const {
  if (!sweep) return initial_states;
  const SweepSpec& sw = *sweep;
  const int n = SystemModel{system, {}}.state_dim();
  std::vector<StateVec> out;
  switch (sw.kind) {
    case SweepKind::Ring:
      for (int k = 0; k < sw.count; ++k) {
        const double ang = sw.center_angle + (k - 0.5 * (sw.count - 1)) * sw.spacing;
        const Vec2 p = sw.ring_center + sw.ring_radius * Vec2(std::cos(ang), std::sin(ang));
        StateVec x = StateVec::Zero(n);
        x.head<2>() = p;
        if (system == SystemKind::Unicycle) {
          const Vec2 to_goal = sim.goal - p;
          x(2) = sw.heading ? *sw.heading : std::atan2(to_goal.y(), to_goal.x());
        }
        out.push_back(x);
      }
      break;
    case SweepKind::Grid: {
      std::vector<int> idx(n, 0);
      while (true) {
        StateVec x(n);
        for (int i = 0; i < n; ++i) {
          x(i) = sw.counts[i] == 1 ? sw.lower(i)
                                   : sw.lower(i) + (sw.upper(i) - sw.lower(i)) * idx[i] /
                                                       (sw.counts[i] - 1);
        }
        out.push_back(x);
        int d = n - 1;
        while (d >= 0 && ++idx[d] == sw.counts[d]) idx[d--] = 0;
        if (d < 0) break;
      }
      break;
    }
    case SweepKind::List:
      out = sw.states;
      break;
  }
  return out;
}

}  // namespace cbfaux
