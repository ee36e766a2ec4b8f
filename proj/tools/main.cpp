#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

#include "sast_triage/cli.hpp"

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("sast-triage"));
  return sast_triage::run_cli(argc, argv, std::cout, std::cerr);
}
