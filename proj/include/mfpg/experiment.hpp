#pragma once

#include "mfpg/mdp.hpp"
#include "mfpg/meanfield.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

namespace mfpg {

enum class Mode { bandit, mdp, verify, chaos };

std::string_view to_string(Mode mode) noexcept;
Mode parse_mode(std::string_view text);

/// Flat run configuration. Field names double as config-file keys.
struct ExperimentConfig {
  Mode mode = Mode::bandit;
  int n_s = 1;
  int n_a = 100;
  double gamma = 0.0;
  double tau = 0.2;
  double beta = 1e-3;
  long steps = 10000;
  long record_every = 10;
  int student_n = 800;
  int teacher_n = 5;
  std::uint64_t seed = 1;
  double sigma2 = 4.0;
  FeatureKind feature = FeatureKind::relu;
  std::string out_dir = "out";
  long checkpoint_every = 0;

  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig default_config(Mode mode);

/// `key = value` lines, `#` starts a comment. Starts from default_config(mode);
/// a `mode` key must agree with `mode`. Throws ConfigError.
ExperimentConfig parse_config(std::string_view text, Mode mode);

/// Parses text that carries its own `mode` key (defaults to bandit).
ExperimentConfig parse_config(std::string_view text);

std::string serialize_config(const ExperimentConfig& config);

/// Throws ConfigError when a field is out of range for the mode.
void validate_config(const ExperimentConfig& config);

struct Teacher {
  Ensemble ensemble;
  QTable q_star;
  Matrix reward;
};

/// Teacher network with every weight i.i.d. N(0, sigma2), Q* = tau f_teacher,
/// and the reward that makes Q* soft-optimal on the skeleton dynamics.
Teacher gen_teacher(int n, std::uint64_t seed, double sigma2, FeatureConfig cfg, const MdpSpec& skeleton);

/// P(s, a, s') = 0.9 [s' = a] + 0.1 / n on an n x n grid.
Matrix build_experiment_b_transition(int n_s, int n_a);

/// Problem instance for a config: the bandit embedding for bandit/chaos modes
/// or the 0.9/0.1 grid MDP, with rewards from the teacher.
struct Problem {
  MdpSpec mdp;
  Teacher teacher;
  double oracle_energy = 0.0;
};

Problem build_problem(const ExperimentConfig& config);

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int config = 1;
inline constexpr int io = 2;
inline constexpr int divergence = 3;
inline constexpr int verification = 4;
}  // namespace exit_code

struct RunOptions {
  bool measure_time = false;
};

/// Runs one experiment, writing outputs under config.out_dir. Returns one of
/// the exit_code values; messages go to `log`.
int run(const ExperimentConfig& config, std::ostream& log, const RunOptions& options = {});

}  // namespace mfpg
