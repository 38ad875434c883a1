#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "commands.hpp"
#include "janus/errors.hpp"

// Exit codes:
//   0  success
//   2  invalid usage or configuration
//   3  request provably unsatisfiable (error bound, deadline, divergence)
//   4  transfer or decode failure at runtime
int main(int argc, char** argv) {
  CLI::App app{
      "janus - resilient bulk transfer of hierarchically refactored data"};
  app.require_subcommand(1);
  janus::cli::setup_plan(app);
  janus::cli::setup_scenario(app);
  janus::cli::setup_simulate(app);
  janus::cli::setup_gen_data(app);
  janus::cli::setup_send(app);
  janus::cli::setup_recv(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const janus::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const janus::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const janus::UnsatisfiableBoundError& e) {
    std::fprintf(stderr, "unsatisfiable: %s\n", e.what());
    return 3;
  } catch (const janus::InfeasibleDeadlineError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const janus::DivergenceError& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const janus::TransferAbortedError& e) {
    std::fprintf(stderr, "transfer failed: %s\n", e.what());
    return 4;
  } catch (const janus::DecodeError& e) {
    std::fprintf(stderr, "decode failed: %s\n", e.what());
    return 4;
  } catch (const janus::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 4;
  }
  return 0;
}
