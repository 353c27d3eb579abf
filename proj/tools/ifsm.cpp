// ifsm: steady states, dynamics and validation runs from a config file.
//
// Exit codes: 0 success, 1 other error, 2 validation failure,
// 3 solver divergence, 4 config error.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ifsm/ifsm.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitConfig = 4;

int exit_for(const ifsm::Error& e) {
  switch (e.kind()) {
    case ifsm::ErrorKind::config: return kExitConfig;
    case ifsm::ErrorKind::divergence: return kExitDivergence;
    default: return kExitOther;
  }
}

void print_summary(const ifsm::ResultTable& t) {
  std::cout << "# " << t.command() << " (config " << ifsm::hex64(t.config_hash) << ")\n" << t.csv();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral and grid experiments for the infinitesimal model with selection"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::optional<std::uint64_t> seed;
  bool override_admissibility = false;
  app.add_option("--config", config_path, "experiment file (key = value)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory (default: the config's `out`)");
  app.add_option("--jobs", jobs, "worker threads for per-eps tasks")->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "seed for sampled property checks");
  app.add_flag("--override-admissibility", override_admissibility, "solve at an inadmissible extremum");

  const std::string names[] = {"nondim", "steady", "evolve", "sweep", "validate"};
  const std::string help[] = {"non-dimensionalize the raw model", "spectral steady states with grid cross-checks",
                              "perturbed dynamics and decay-rate fits", "steady and evolve over the eps list with rate ratios",
                              "operator, moment and bound property suites"};
  for (int i = 0; i < 5; ++i) app.add_subcommand(names[i], help[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ifsm::Config c = ifsm::Config::parse_file(config_path);
    if (seed) c.set("seed", std::to_string(*seed));
    if (override_admissibility) c.set("override_admissibility", "true");
    const ifsm::ExperimentConfig cfg = ifsm::load_experiment(c);
    const std::filesystem::path out = out_dir.empty() ? cfg.out : std::filesystem::path(out_dir);

    int code = 0;
    auto finish = [&](const ifsm::CommandOutput& o) {
      ifsm::write_outputs(o, out);
      print_summary(o.table);
      if (o.has_status("divergence")) code = kExitDivergence;
    };
    if (command == "nondim") {
      finish(ifsm::cmd_nondim(cfg));
    } else if (command == "steady") {
      finish(ifsm::cmd_steady(cfg, jobs));
    } else if (command == "evolve") {
      finish(ifsm::cmd_evolve(cfg, jobs));
    } else if (command == "sweep") {
      const auto s = ifsm::cmd_sweep(cfg, jobs);
      finish(s.steady);
      finish(s.evolve);
      finish(s.summary);
    } else {
      const auto v = ifsm::cmd_validate(cfg);
      finish(v);
      if (code == 0 && ifsm::validation_failed(v.table)) code = kExitValidation;
    }
    std::cerr << "ifsm " << command << ": outputs in " << out.string() << '\n';
    return code;
  } catch (const ifsm::Error& e) {
    std::cerr << "ifsm " << command << ": " << e.what() << '\n';
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "ifsm " << command << ": " << e.what() << '\n';
    return kExitOther;
  }
}
