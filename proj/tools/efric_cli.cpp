// efric <command> --manifest <path> [--out <dir>] [--threads N] [--plot]
#include <CLI11.hpp>
#include <utility>

#include "efric/runner.hpp"

int main(int argc, char** argv) {
  using namespace efric::cli;
  CLI::App app{"Electronic friction toolkit"};
  app.require_subcommand(1, 1);
  RunRequest req;
  int threads = 0;
  const std::pair<Command, const char*> commands[] = {
      {Command::geometry, "quantum geometric tensor, connection, curvature and Berry loops on a grid"},
      {Command::kernels, "friction, memory and geometric kernels of a Fermi-sea model"},
      {Command::propagate_exact, "exact nuclear-electronic wavepacket propagation and force analysis"},
      {Command::propagate_friction, "nuclear packet on one surface with a friction propagator"},
      {Command::lite, "local-in-time error and spawning probability scan"},
      {Command::validate, "built-in invariant suite"}};
  for (auto [c, help] : commands) {
    auto* sub = app.add_subcommand(to_string(c), help);
    sub->add_option("--manifest", req.manifest_path, "run manifest (JSON)")->required();
    sub->add_option("--out", req.out, "output directory (overrides output.directory)");
    sub->add_option("--threads", threads, "worker threads (overrides EFRIC_THREADS)")->check(CLI::PositiveNumber);
    sub->add_flag("--plot", req.plot, "emit SVG plots");
    sub->callback([&req, c] { req.command = c; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }
  if (threads > 0) req.threads = threads;
  return run(req);
}
