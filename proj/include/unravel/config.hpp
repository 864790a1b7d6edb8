#ifndef UNRAVEL_CONFIG_HPP_
#define UNRAVEL_CONFIG_HPP_

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "unravel/gaussian_engine.hpp"
#include "unravel/jump_engine.hpp"
#include "unravel/oracle.hpp"

namespace unravel {

using Json = nlohmann::json;

// Named matrices (sigma_x, sigma_y, sigma_z, sigma_plus, sigma_minus, identity, zero),
// a flat row-major list of [re, im] pairs, or a list of rows of [re, im] pairs.
CMatrix parse_matrix(const Json& j, Index d);
CVector parse_vector(const Json& j, Index d);

// {"model": "spin_boson", "delta", "g"} or
// {"d", "hamiltonian", "channels": [{"L", "w": {"kind": ...}}], "completion"}.
CanonicalModel parse_model(const Json& j);

// {"modes": [{"omega", "g_re", "g_im"}], "beta": number | "inf", "L"}.
BosonEnvironment parse_environment(const Json& j, Index d = 2);

enum class Engine { oracle, jump, ostensible, dgs, check_cp, compare };

std::string to_string(Engine e);
Engine engine_from_string(const std::string& s);

struct RunConfig {
  Json source;  // resolved document, model inlined
  Engine engine = Engine::oracle;
  Engine compare_with = Engine::jump;  // stochastic side of engine=compare
  CanonicalModel model;
  std::optional<BosonEnvironment> environment;
  CMatrix system_hamiltonian;  // dgs only
  TimeGrid grid{0.0, 1.0, 100};
  std::size_t n_traj = 1000;
  std::uint64_t seed = 1;
  JumpOptions jump;
  EstimatorKind estimator = EstimatorKind::normalized;
  DrivingOptions driving;
  OracleOptions oracle;
  std::vector<std::string> observable_names;
  std::vector<CMatrix> observables;
  CVector psi0;
  std::string prefix = "run";
};

// Relative model/environment file references are resolved against base_dir.
RunConfig parse_run_config(const Json& j, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

}  // namespace unravel

#endif  // UNRAVEL_CONFIG_HPP_
