#include <gmsfem/config.hpp>
#include <gmsfem/error.hpp>
#include <gmsfem/experiments.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

using namespace gmsfem;

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

void write_text(const std::string& path, const std::string& text)
{
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write output file '" + path + "'");
  out << text;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Generalized multiscale finite elements with randomized oversampled snapshots"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string dump_path;
  int threads = 1;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--out", out_path, "write CSV (or the field for gen-field) here instead of stdout");
  app.add_option("--dump-solution", dump_path, "write the computed fine-grid solution in the grid format");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  // every configuration key is also a flag; flags override the file
  std::vector<std::string> keys = config_key_names();
  std::vector<std::string> values(keys.size());
  for (std::size_t k = 0; k < keys.size(); ++k) app.add_option("--" + keys[k], values[k]);

  using Runner = std::function<ExperimentOutput(const RunConfig&, int)>;
  const std::vector<std::tuple<std::string, std::string, Runner>> commands = {
      {"solve-fine", "fine-grid reference solve", run_solve_fine},
      {"compare", "full vs random snapshots over k_nb", run_compare},
      {"buffer-study", "random snapshots over the buffer size", run_buffer_study},
      {"oversample-study", "random snapshots over the oversampling width", run_oversampling_study},
      {"skin-compare", "skin-layer vs random snapshots", run_skin_compare},
      {"adaptive", "residual-driven enrichment", run_adaptive},
      {"lemma-check", "approximation bound certificates", run_lemma_check},
      {"gen-field", "write the coefficient field",
       [](const RunConfig& c, int) { return ExperimentOutput{run_gen_field(c), std::nullopt}; }},
  };
  for (const auto& [name, help, run] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (std::size_t k = 0; k < keys.size(); ++k)
      if (app.count("--" + keys[k]) > 0) set_config_value(cfg, keys[k], values[k]);
    cfg.validate();

    for (const auto& [name, help, run] : commands) {
      if (!app.got_subcommand(name)) continue;
      const ExperimentOutput result = run(cfg, threads);
      write_text(out_path, result.csv);
      if (!dump_path.empty()) {
        if (!result.solution) throw ConfigError("subcommand '" + name + "' has no solution to dump");
        const GridGeometry geom = build_geometry(cfg.coarse_nx, cfg.coarse_ny, cfg.fine_per_coarse);
        save_nodal(dump_path, geom, {result.solution->data(), static_cast<std::size_t>(result.solution->size())});
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return exit_numerical;
  }
  return 0;
}
