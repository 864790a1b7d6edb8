#include "unravel/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

namespace unravel {

namespace {

double number(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("'") + key + "' must be a number");
  return j.at(key).get<double>();
}

double required_number(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing '") + key + "'");
  return number(j, key, 0.0);
}

Complex parse_complex(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("complex entries are [re, im] pairs");
}

std::optional<CMatrix> named_matrix(const std::string& name, Index d) {
  if (name == "identity") return CMatrix::Identity(d, d);
  if (name == "zero") return CMatrix::Zero(d, d);
  static const std::map<std::string, CMatrix (*)()> paulis = {
      {"sigma_x", pauli::x},         {"sigma_y", pauli::y},
      {"sigma_z", pauli::z},         {"sigma_plus", pauli::plus},
      {"sigma_minus", pauli::minus}, {"sx", pauli::x},
      {"sy", pauli::y},              {"sz", pauli::z}};
  const auto it = paulis.find(name);
  if (it == paulis.end()) return std::nullopt;
  if (d != 2) throw ConfigError("matrix '" + name + "' needs d = 2");
  return it->second();
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// A string that is not a builtin name is treated as a file reference.
Json resolve(const Json& j, const std::string& base_dir) {
  if (!j.is_string()) return j;
  const std::filesystem::path p = std::filesystem::path(base_dir) / j.get<std::string>();
  return read_json(p.string());
}

ScalarFunction parse_coupling(const Json& j) {
  if (j.is_number()) {
    const double v = j.get<double>();
    return [v](double) { return v; };
  }
  const std::string kind = j.value("kind", "");
  if (kind == "constant") {
    const double v = required_number(j, "value");
    return [v](double) { return v; };
  }
  if (kind == "spin_boson_w") {
    const SpinBosonParams p{required_number(j, "delta"), required_number(j, "g")};
    return [p](double t) { return spin_boson_w(t, p); };
  }
  if (kind == "table") {
    const auto ts = j.at("times").get<std::vector<double>>();
    const auto vs = j.at("values").get<std::vector<double>>();
    if (ts.size() != vs.size() || ts.size() < 2)
      throw ConfigError("coupling table needs matching times and values");
    if (!std::is_sorted(ts.begin(), ts.end()) ||
        std::adjacent_find(ts.begin(), ts.end()) != ts.end())
      throw ConfigError("coupling table times must increase");
    // Linear between entries, held constant outside.
    return [ts, vs](double t) {
      if (t <= ts.front()) return vs.front();
      if (t >= ts.back()) return vs.back();
      const std::size_t k = std::size_t(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
      const double u = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
      return (1.0 - u) * vs[k - 1] + u * vs[k];
    };
  }
  throw ConfigError("unknown coupling kind '" + kind + "'");
}

MatrixFunction parse_hamiltonian(const Json& j, Index d) {
  if (j.is_object()) {
    const std::string kind = j.value("kind", "");
    if (kind != "spin_boson_h") throw ConfigError("unknown hamiltonian kind '" + kind + "'");
    if (d != 2) throw ConfigError("spin_boson_h needs d = 2");
    const SpinBosonParams p{required_number(j, "delta"), required_number(j, "g")};
    const CMatrix n = pauli::plus() * pauli::minus();
    return [p, n](double t) { return CMatrix(-spin_boson_h(t, p) * n); };
  }
  const CMatrix h = parse_matrix(j, d);
  if (hermiticity_defect(h) > 1e-10) throw ConfigError("hamiltonian must be Hermitian");
  return [h](double) { return h; };
}

CVector named_state(const std::string& name) {
  CVector psi(2);
  if (name == "excited")
    psi << 1.0, 0.0;
  else if (name == "ground")
    psi << 0.0, 1.0;
  else if (name == "superposition")
    psi << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  else
    throw ConfigError("unknown initial state '" + name + "'");
  return psi;
}

}  // namespace

CMatrix parse_matrix(const Json& j, Index d) {
  if (j.is_string()) {
    if (auto m = named_matrix(j.get<std::string>(), d)) return *m;
    throw ConfigError("unknown matrix name '" + j.get<std::string>() + "'");
  }
  if (!j.is_array()) throw ConfigError("matrix must be a name or an array");
  CMatrix m(d, d);
  const bool rows = j.size() == std::size_t(d) && d > 0 && j[0].is_array() && !j[0].empty() &&
                    j[0][0].is_array();
  if (rows) {
    for (Index r = 0; r < d; ++r) {
      if (j[r].size() != std::size_t(d)) throw ShapeError("matrix row has wrong length");
      for (Index c = 0; c < d; ++c) m(r, c) = parse_complex(j[r][c]);
    }
    return m;
  }
  if (j.size() != std::size_t(d * d)) throw ShapeError("matrix needs d*d entries");
  for (Index k = 0; k < d * d; ++k) m(k / d, k % d) = parse_complex(j[k]);
  return m;
}

CVector parse_vector(const Json& j, Index d) {
  if (!j.is_array() || j.size() != std::size_t(d)) throw ShapeError("vector needs d entries");
  CVector v(d);
  for (Index k = 0; k < d; ++k) v(k) = parse_complex(j[k]);
  return v;
}

CanonicalModel parse_model(const Json& j) {
  if (!j.is_object()) throw ConfigError("model must be an object");
  if (j.contains("model")) {
    const std::string name = j.at("model").get<std::string>();
    if (name != "spin_boson") throw ConfigError("unknown builtin model '" + name + "'");
    return spin_boson_model({required_number(j, "delta"), required_number(j, "g")});
  }
  if (!j.contains("d") || !j.at("d").is_number_integer() || j.at("d").get<int>() < 1)
    throw ConfigError("model needs an integer 'd'");
  CanonicalModel m;
  m.dim = j.at("d").get<int>();
  m.label = j.value("label", "generic");
  m.hamiltonian = parse_hamiltonian(j.value("hamiltonian", Json("zero")), m.dim);
  for (const auto& c : j.value("channels", Json::array())) {
    if (!c.contains("L") || !c.contains("w")) throw ConfigError("channels need 'L' and 'w'");
    m.channels.push_back({parse_matrix(c.at("L"), m.dim), parse_coupling(c.at("w"))});
  }
  for (const auto& op : j.value("completion", Json::array()))
    m.completion.push_back(parse_matrix(op, m.dim));
  return m;
}

BosonEnvironment parse_environment(const Json& j, Index d) {
  BosonEnvironment env;
  for (const auto& mode : j.value("modes", Json::array()))
    env.modes.push_back({required_number(mode, "omega"),
                         Complex(number(mode, "g_re", 0.0), number(mode, "g_im", 0.0))});
  if (env.modes.empty()) throw ConfigError("environment needs at least one mode");
  const Json beta = j.value("beta", Json("inf"));
  if (beta.is_string()) {
    if (beta.get<std::string>() != "inf") throw ConfigError("beta must be a number or \"inf\"");
    env.beta = InverseTemperature::vacuum();
  } else {
    env.beta = InverseTemperature::finite(beta.get<double>());
    for (const auto& mode : env.modes)
      if (!(env.beta.value * mode.omega > 0.0))
        throw ConfigError("finite beta needs beta*omega > 0 for every mode");
  }
  env.L = parse_matrix(j.value("L", Json("sigma_minus")), d);
  return env;
}

std::string to_string(Engine e) {
  switch (e) {
    case Engine::oracle: return "oracle";
    case Engine::jump: return "jump";
    case Engine::ostensible: return "ostensible";
    case Engine::dgs: return "dgs";
    case Engine::check_cp: return "check_cp";
    case Engine::compare: return "compare";
  }
  return "?";
}

Engine engine_from_string(const std::string& s) {
  for (Engine e : {Engine::oracle, Engine::jump, Engine::ostensible, Engine::dgs,
                   Engine::check_cp, Engine::compare})
    if (to_string(e) == s) return e;
  throw ConfigError("unknown engine '" + s + "'");
}

RunConfig parse_run_config(const Json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ConfigError("run config must be an object");
  RunConfig cfg;
  try {
    cfg.source = j;
    cfg.engine = engine_from_string(j.value("engine", "oracle"));

    const Json grid = j.value("grid", Json::object());
    cfg.grid = TimeGrid(number(grid, "t0", 0.0), required_number(grid, "t_final"),
                        grid.value("n_steps", 0));

    if (j.contains("n_traj")) {
      if (!j.at("n_traj").is_number_integer() || j.at("n_traj").get<long long>() < 2)
        throw ConfigError("n_traj must be an integer >= 2");
      cfg.n_traj = j.at("n_traj").get<std::size_t>();
    }
    if (j.contains("seed")) {
      if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be an unsigned integer");
      cfg.seed = j.at("seed").get<std::uint64_t>();
    }

    const Json policy = j.value("policy", Json::object());
    RatePolicy& pol = cfg.jump.policy;
    if (policy.contains("c0") && policy.at("c0").is_string()) {
      if (policy.at("c0").get<std::string>() != "auto") throw ConfigError("c0 must be a number or \"auto\"");
      pol.c0_auto = true;
    } else {
      pol.c0 = number(policy, "c0", pol.c0);
    }
    if (!pol.c0_auto && !(pol.c0 > 0.0)) throw ConfigError("c0 must be positive");
    pol.r_max = number(policy, "r_max", pol.r_max);
    pol.w_max = number(policy, "w_max", pol.w_max);
    const std::string sampling = j.value("sampling", "waiting_time");
    if (sampling == "waiting_time")
      cfg.jump.sampling = JumpSampling::waiting_time;
    else if (sampling == "bernoulli")
      cfg.jump.sampling = JumpSampling::bernoulli;
    else
      throw ConfigError("unknown sampling '" + sampling + "'");
    cfg.jump.p_max = number(j, "p_max", cfg.jump.p_max);
    cfg.estimator = estimator_from_string(j.value("estimator", "normalized"));
    if (cfg.estimator != EstimatorKind::raw && cfg.estimator != EstimatorKind::normalized)
      throw ConfigError("jump estimator must be raw or normalized");
    if (j.contains("compare")) {
      cfg.compare_with = engine_from_string(j.at("compare").get<std::string>());
      if (cfg.compare_with != Engine::jump && cfg.compare_with != Engine::ostensible)
        throw ConfigError("compare supports jump and ostensible");
    }

    const Json tol = j.value("tolerances", Json::object());
    cfg.oracle.tol.self_adjoint = number(tol, "self_adjoint", cfg.oracle.tol.self_adjoint);
    cfg.oracle.tol.cp = number(tol, "cp", cfg.oracle.tol.cp);
    cfg.oracle.tol.kraus_cutoff = number(tol, "kraus_cutoff", cfg.oracle.tol.kraus_cutoff);
    cfg.oracle.tol.channel_sum = number(tol, "channel_sum", cfg.oracle.tol.channel_sum);
    const Json oracle = j.value("oracle", Json::object());
    cfg.oracle.clip.enabled = oracle.value("clip", false);
    cfg.oracle.clip.w_max = number(oracle, "w_max", pol.w_max);
    cfg.oracle.trace_tol = number(oracle, "trace_tol", cfg.oracle.trace_tol);

    Index d = 0;
    if (cfg.engine == Engine::dgs) {
      if (!j.contains("dgs")) throw ConfigError("engine dgs needs a 'dgs' section");
      Json dgs = j.at("dgs");
      if (!dgs.contains("d") || !dgs.at("d").is_number_integer()) throw ConfigError("dgs needs 'd'");
      d = dgs.at("d").get<int>();
      cfg.system_hamiltonian = parse_matrix(dgs.value("hamiltonian", Json("zero")), d);
      if (hermiticity_defect(cfg.system_hamiltonian) > 1e-10)
        throw ConfigError("hamiltonian must be Hermitian");
      if (!dgs.contains("environment")) throw ConfigError("dgs needs 'environment'");
      dgs["environment"] = resolve(dgs.at("environment"), base_dir);
      cfg.environment = parse_environment(dgs.at("environment"), d);
      const std::string disc = dgs.value("discretization", "cell_average");
      if (disc == "cell_average")
        cfg.driving.discretization = NoiseDiscretization::cell_average;
      else if (disc == "point")
        cfg.driving.discretization = NoiseDiscretization::point;
      else
        throw ConfigError("unknown discretization '" + disc + "'");
      cfg.source["dgs"] = dgs;
    } else {
      if (!j.contains("model")) throw ConfigError("missing 'model'");
      const Json model = resolve(j.at("model"), base_dir);
      cfg.model = parse_model(model);
      cfg.source["model"] = model;
      d = cfg.model.dim;
    }

    const Json init = j.value("initial_state", Json("ground"));
    if (init.is_string()) {
      if (d != 2) throw ConfigError("named initial states need d = 2");
      cfg.psi0 = named_state(init.get<std::string>());
    } else {
      cfg.psi0 = parse_vector(init, d);
    }
    const double norm = cfg.psi0.norm();
    if (!(norm > 0.0)) throw ConfigError("initial state must be nonzero");
    cfg.psi0 /= norm;

    if (j.contains("observables")) {
      int k = 0;
      for (const auto& o : j.at("observables")) {
        if (o.is_string()) {
          cfg.observable_names.push_back(o.get<std::string>());
          cfg.observables.push_back(parse_matrix(o, d));
        } else {
          cfg.observable_names.push_back(o.value("name", "o" + std::to_string(++k)));
          cfg.observables.push_back(parse_matrix(o.at("matrix"), d));
        }
      }
    } else {
      cfg.observables = default_observables(d);
      if (d == 2)
        cfg.observable_names = {"sx", "sy", "sz"};
      else
        for (Index k = 1; k <= Index(cfg.observables.size()); ++k)
          cfg.observable_names.push_back("g" + std::to_string(k));
    }
    cfg.prefix = j.value("output", Json::object()).value("prefix", "run");
  } catch (const Json::exception& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  const std::filesystem::path p(path);
  return parse_run_config(read_json(path), p.has_parent_path() ? p.parent_path().string() : ".");
}

}  // namespace unravel
