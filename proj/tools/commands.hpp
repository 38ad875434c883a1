#pragma once

#include <CLI11.hpp>

namespace janus::cli {

void setup_plan(CLI::App& app);
void setup_scenario(CLI::App& app);
void setup_simulate(CLI::App& app);
void setup_gen_data(CLI::App& app);
void setup_send(CLI::App& app);
void setup_recv(CLI::App& app);

}  // namespace janus::cli
