#include "mfpg/experiment.hpp"

#include "mfpg/bandit.hpp"
#include "mfpg/diagnostics.hpp"
#include "mfpg/dynamics.hpp"
#include "mfpg/errors.hpp"
#include "mfpg/rng.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <vector>

namespace mfpg {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kTeacherStream = 0x54;  // 'T'
constexpr std::uint64_t kStudentStream = 0x53;  // 'S'

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string gamma_tag(double g) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "gamma=%g", g);
  return buf;
}

void apply_key(ExperimentConfig& c, std::string_view key, std::string_view value) {
  if (key == "mode") {
    if (parse_mode(value) != c.mode) {
      throw ConfigError("config file sets mode '" + std::string(value) + "' but the run mode is '" +
                        std::string(to_string(c.mode)) + "'");
    }
  } else if (key == "n_s") {
    c.n_s = parse_number<int>(key, value);
  } else if (key == "n_a") {
    c.n_a = parse_number<int>(key, value);
  } else if (key == "gamma") {
    c.gamma = parse_number<double>(key, value);
  } else if (key == "tau") {
    c.tau = parse_number<double>(key, value);
  } else if (key == "beta") {
    c.beta = parse_number<double>(key, value);
  } else if (key == "steps") {
    c.steps = parse_number<long>(key, value);
  } else if (key == "record_every") {
    c.record_every = parse_number<long>(key, value);
  } else if (key == "student_n") {
    c.student_n = parse_number<int>(key, value);
  } else if (key == "teacher_n") {
    c.teacher_n = parse_number<int>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "sigma2") {
    c.sigma2 = parse_number<double>(key, value);
  } else if (key == "feature") {
    c.feature = parse_feature_kind(value);
  } else if (key == "out_dir") {
    if (value.empty()) throw ConfigError("out_dir must not be empty");
    c.out_dir = std::string(value);
  } else if (key == "checkpoint_every") {
    c.checkpoint_every = parse_number<long>(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void save_checkpoint(const fs::path& path, const Ensemble& e) {
  std::ofstream out = open_output(path);
  write_checkpoint(out, e);
  finish_output(out, path);
}

std::string checkpoint_name(long step) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "ckpt_%08ld.txt", step);
  return buf;
}

int run_training(const ExperimentConfig& config, const fs::path& dir, std::ostream& log, const RunOptions& options) {
  const Problem problem = build_problem(config);
  save_checkpoint(dir / "teacher.txt", problem.teacher.ensemble);

  const Ensemble student = init_ensemble(config.student_n, derive_seed(config.seed, kStudentStream), config.sigma2,
                                         0.0, FeatureConfig{config.feature, 2});
  TrainOptions train_options;
  train_options.measure_time = options.measure_time;
  if (config.checkpoint_every > 0) {
    train_options.on_step = [&](long step, const Ensemble& e) {
      if (step % config.checkpoint_every == 0) save_checkpoint(dir / checkpoint_name(step), e);
    };
  }
  const TrainResult result =
      train(problem.mdp, student, config.steps, config.beta, config.record_every, problem.oracle_energy, train_options);

  const fs::path csv = dir / "train.csv";
  std::ofstream out = open_output(csv);
  write_records_csv(out, result.records);
  finish_output(out, csv);
  save_checkpoint(dir / "final.txt", result.ensemble);

  char line[200];
  std::snprintf(line, sizeof line, "%s: oracle energy %.10g, error %.6e -> %.6e over %ld steps\n",
                std::string(to_string(config.mode)).c_str(), problem.oracle_energy, result.records.front().error,
                result.records.back().error, config.steps);
  log << line;
  return exit_code::ok;
}

std::vector<CheckReport> verification_suite(const ExperimentConfig& config) {
  std::vector<CheckReport> reports;
  auto add = [&reports](CheckReport r, const std::string& tag) {
    r.name += "/" + tag;
    reports.push_back(std::move(r));
  };
  const std::uint64_t seed = config.seed;

  std::set<double> gammas{0.0, 0.5, config.gamma, 0.95};
  for (double g : gammas) {
    const MdpSpec mdp = random_mdp(config.n_s, config.n_a, g, config.tau, derive_seed(seed, 10));
    add(check_contraction(mdp, 100, derive_seed(seed, 11)), gamma_tag(g));
    add(check_soft_oracle(mdp, 1e-12), gamma_tag(g));
    add(check_inversion_roundtrip(mdp, random_q(mdp, derive_seed(seed, 12), -2.0, 2.0), 1e-12, 1e-10),
        gamma_tag(g));
    add(check_occupancy_mass(mdp, random_policy(mdp, derive_seed(seed, 13))), gamma_tag(g));
  }
  {
    const MdpSpec mdp = random_mdp(config.n_s, config.n_a, 0.5, config.tau, derive_seed(seed, 14));
    add(check_occupancy_series(mdp, random_policy(mdp, derive_seed(seed, 15)), 60, 1e-10), "gamma=0.5");
  }
  for (std::uint64_t k = 0; k < 5; ++k) {
    const MdpSpec mdp = random_mdp(config.n_s, config.n_a, config.gamma, config.tau, derive_seed(seed, 100 + k));
    const Ensemble e = random_ensemble(config.student_n, derive_seed(seed, 200 + k), 1.0, {FeatureKind::tanh, 2});
    add(check_gradient(mdp, e, 1e-5), "instance=" + std::to_string(k));
  }
  {
    const MdpSpec mdp = random_mdp(config.n_s, config.n_a, config.gamma, config.tau, derive_seed(seed, 20));
    const Ensemble e = random_ensemble(config.student_n, derive_seed(seed, 21), config.sigma2, {config.feature, 2});
    for (CheckReport& r : check_invariances(mdp, e)) add(std::move(r), "random_mdp");
  }

  // Teacher-driven instances from the configured grid.
  ExperimentConfig grid = config;
  grid.mode = Mode::mdp;
  grid.n_a = config.n_s;
  ExperimentConfig bandit = config;
  bandit.mode = Mode::bandit;
  bandit.n_s = 1;
  bandit.gamma = 0.0;
  bandit.n_a = config.n_a;
  for (const ExperimentConfig* c : {&grid, &bandit}) {
    const Problem problem = build_problem(*c);
    const int copies = std::max(1, config.student_n / config.teacher_n);
    const Ensemble optimal = replicate(problem.teacher.ensemble, copies);
    for (CheckReport& r : check_fixed_point(problem.mdp, optimal, config.steps, config.beta)) {
      add(std::move(r), std::string(to_string(c->mode)));
    }
  }
  {
    const Problem problem = build_problem(bandit);
    const BanditSpec spec = make_bandit(problem.mdp.mean_reward.row(0).transpose(), config.tau);
    const Ensemble e = random_ensemble(config.student_n, derive_seed(seed, 30), config.sigma2, {config.feature, 2});
    add(check_bandit_equivalence(spec, e), "bandit");
  }
  return reports;
}

int run_verify(const ExperimentConfig& config, const fs::path& dir, std::ostream& log) {
  const std::vector<CheckReport> reports = verification_suite(config);
  const fs::path csv = dir / "verify.csv";
  std::ofstream out = open_output(csv);
  write_reports_csv(out, reports);
  finish_output(out, csv);
  int failed = 0;
  for (const CheckReport& r : reports) {
    if (!r.pass) {
      ++failed;
      log << "FAIL " << r.name << " measured=" << format_double(r.measured) << " threshold=" << format_double(r.threshold)
          << '\n';
    }
  }
  log << "verify: " << reports.size() - failed << "/" << reports.size() << " checks passed\n";
  return failed == 0 ? exit_code::ok : exit_code::verification;
}

int run_chaos(const ExperimentConfig& config, const fs::path& dir, std::ostream& log) {
  const Problem problem = build_problem(config);
  const int top = config.student_n;
  const std::vector<int> widths{top / 8, top / 4, top / 2, top};
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 5; ++k) seeds.push_back(config.seed + k);
  const ChaosStudy study = chaos_study(problem.mdp, widths, seeds, config.steps, config.beta,
                                       ChaosOptions{config.sigma2, FeatureConfig{config.feature, 2}});

  const fs::path csv = dir / "chaos.csv";
  std::ofstream out = open_output(csv);
  out << "width,discrepancy\n";
  for (std::size_t k = 0; k < study.widths.size(); ++k) {
    out << study.widths[k] << ',' << format_double(study.discrepancies[k]) << '\n';
  }
  finish_output(out, csv);
  log << "chaos: reference width " << study.reference_width << ", discrepancies";
  for (double d : study.discrepancies) log << ' ' << format_double(d);
  log << (study.nonincreasing(0.10) ? " (nonincreasing within 10%)\n" : " (NOT nonincreasing within 10%)\n");
  return exit_code::ok;
}

}  // namespace

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::bandit:
      return "bandit";
    case Mode::mdp:
      return "mdp";
    case Mode::verify:
      return "verify";
    case Mode::chaos:
      return "chaos";
  }
  return "bandit";
}

Mode parse_mode(std::string_view text) {
  for (Mode m : {Mode::bandit, Mode::mdp, Mode::verify, Mode::chaos}) {
    if (text == to_string(m)) return m;
  }
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

ExperimentConfig default_config(Mode mode) {
  ExperimentConfig c;
  c.mode = mode;
  switch (mode) {
    case Mode::bandit:
      c.out_dir = "out/bandit";
      break;
    case Mode::mdp:
      c.n_s = 20;
      c.n_a = 20;
      c.gamma = 0.7;
      c.steps = 5000;
      c.student_n = 100;
      c.out_dir = "out/mdp";
      break;
    case Mode::verify:
      c.n_s = 5;
      c.n_a = 5;
      c.gamma = 0.7;
      c.steps = 100;
      c.record_every = 1;
      c.student_n = 8;
      c.out_dir = "out/verify";
      break;
    case Mode::chaos:
      c.n_a = 64;
      c.steps = 2000;
      c.student_n = 400;
      c.out_dir = "out/chaos";
      break;
  }
  return c;
}

ExperimentConfig parse_config(std::string_view text, Mode mode) {
  ExperimentConfig c = default_config(mode);
  std::set<std::string, std::less<>> seen;
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!seen.insert(std::string(key)).second) throw ConfigError("duplicate config key '" + std::string(key) + "'");
    apply_key(c, key, value);
  }
  return c;
}

ExperimentConfig parse_config(std::string_view text) {
  Mode mode = Mode::bandit;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view l = line;
    if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
    const auto eq = l.find('=');
    if (eq != std::string_view::npos && trim(l.substr(0, eq)) == "mode") mode = parse_mode(trim(l.substr(eq + 1)));
  }
  return parse_config(text, mode);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  out << "mode = " << to_string(c.mode) << '\n'
      << "n_s = " << c.n_s << '\n'
      << "n_a = " << c.n_a << '\n'
      << "gamma = " << format_double(c.gamma) << '\n'
      << "tau = " << format_double(c.tau) << '\n'
      << "beta = " << format_double(c.beta) << '\n'
      << "steps = " << c.steps << '\n'
      << "record_every = " << c.record_every << '\n'
      << "student_n = " << c.student_n << '\n'
      << "teacher_n = " << c.teacher_n << '\n'
      << "seed = " << c.seed << '\n'
      << "sigma2 = " << format_double(c.sigma2) << '\n'
      << "feature = " << to_string(c.feature) << '\n'
      << "out_dir = " << c.out_dir << '\n'
      << "checkpoint_every = " << c.checkpoint_every << '\n';
  return out.str();
}

void validate_config(const ExperimentConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(c.n_s >= 1 && c.n_a >= 1, "n_s and n_a must be positive");
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma must lie in [0, 1)");
  require(c.tau > 0.0, "tau must be positive");
  require(c.beta > 0.0, "beta must be positive");
  require(c.steps >= 0, "steps must be nonnegative");
  require(c.record_every >= 1, "record_every must be at least 1");
  require(c.student_n >= 1, "student_n must be positive");
  require(c.teacher_n >= 1, "teacher_n must be positive");
  require(c.sigma2 > 0.0, "sigma2 must be positive");
  require(c.checkpoint_every >= 0, "checkpoint_every must be nonnegative (0 disables periodic checkpoints)");
  require(!c.out_dir.empty(), "out_dir must not be empty");
  switch (c.mode) {
    case Mode::bandit:
      require(c.n_s == 1, "bandit mode requires n_s = 1");
      require(c.gamma == 0.0, "bandit mode requires gamma = 0");
      break;
    case Mode::mdp:
      require(c.n_s == c.n_a, "mdp mode requires n_s = n_a (actions select successor states)");
      break;
    case Mode::verify:
      break;
    case Mode::chaos:
      require(c.n_s == 1 && c.gamma == 0.0, "chaos mode runs on the bandit instance (n_s = 1, gamma = 0)");
      require(c.student_n >= 8, "chaos mode needs student_n >= 8 (widths are student_n/8 ... student_n)");
      require(c.steps >= 1, "chaos mode needs at least one step");
      break;
  }
}

Teacher gen_teacher(int n, std::uint64_t seed, double sigma2, FeatureConfig cfg, const MdpSpec& skeleton) {
  if (n < 1) throw PreconditionError("gen_teacher: n must be at least 1");
  Teacher t;
  t.ensemble = random_ensemble(n, seed, sigma2, cfg);
  t.q_star = QTable{skeleton.tau * energy_field(t.ensemble, skeleton)};
  t.reward = invert_soft_bellman(t.q_star, skeleton);
  return t;
}

Matrix build_experiment_b_transition(int n_s, int n_a) {
  if (n_s != n_a) throw ConfigError("the 0.9/0.1 transition needs n_s = n_a");
  if (n_s < 1) throw ConfigError("grid size must be positive");
  const int n = n_s;
  const double spread = 0.1 / n;
  Matrix p = Matrix::Constant(static_cast<Eigen::Index>(n) * n, n, spread);
  for (int s = 0; s < n; ++s) {
    for (int a = 0; a < n; ++a) p(s * n + a, a) = 0.9 + spread;
  }
  return p;
}

Problem build_problem(const ExperimentConfig& config) {
  const FeatureConfig teacher_feature{FeatureKind::relu, 2};
  const std::uint64_t teacher_seed = derive_seed(config.seed, kTeacherStream);
  Problem problem;
  if (config.mode == Mode::mdp) {
    MdpSpec skeleton = make_mdp(build_experiment_b_transition(config.n_s, config.n_a), Matrix::Zero(config.n_s, config.n_a),
                                config.gamma, config.tau, uniform_distribution(config.n_s));
    problem.teacher = gen_teacher(config.teacher_n, teacher_seed, config.sigma2, teacher_feature, skeleton);
    skeleton.mean_reward = problem.teacher.reward;
    problem.mdp = std::move(skeleton);
    const SoftOptimum opt = soft_value_iteration(problem.mdp, 1e-12, 1000000);
    problem.oracle_energy = problem.mdp.rho0.dot(opt.value.values);
    return problem;
  }
  const MdpSpec skeleton = embed_bandit(make_bandit(Vector::Zero(config.n_a), config.tau));
  problem.teacher = gen_teacher(config.teacher_n, teacher_seed, config.sigma2, teacher_feature, skeleton);
  const BanditSpec spec = make_bandit(problem.teacher.reward.row(0).transpose(), config.tau);
  problem.mdp = embed_bandit(spec);
  problem.oracle_energy = bandit_optimal(spec).value;
  return problem;
}

int run(const ExperimentConfig& config, std::ostream& log, const RunOptions& options) {
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return exit_code::config;
  }
  try {
    const fs::path dir = prepare_out_dir(config.out_dir);
    {
      const fs::path cfg = dir / "config.txt";
      std::ofstream out = open_output(cfg);
      out << serialize_config(config);
      finish_output(out, cfg);
    }
    switch (config.mode) {
      case Mode::bandit:
      case Mode::mdp:
        return run_training(config, dir, log, options);
      case Mode::verify:
        return run_verify(config, dir, log);
      case Mode::chaos:
        return run_chaos(config, dir, log);
    }
    return exit_code::config;
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const IoError& e) {
    log << "i/o error: " << e.what() << '\n';
    return exit_code::io;
  } catch (const DivergenceError& e) {
    log << "divergence: " << e.what() << '\n';
    return exit_code::divergence;
  } catch (const NonConvergenceError& e) {
    log << "divergence: " << e.what() << '\n';
    return exit_code::divergence;
  } catch (const std::invalid_argument& e) {
    log << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::domain_error& e) {
    log << "config error: " << e.what() << '\n';
    return exit_code::config;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return exit_code::divergence;
  }
}

}  // namespace mfpg
