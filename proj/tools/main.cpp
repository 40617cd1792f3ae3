#include <iostream>

#include "cli.hpp"
#include "smpbe/error.hpp"

int main(int argc, char** argv) {
  try {
    int code = 0;
    const auto spec = smpbe::cli::parse_command_line(argc, argv, code);
    if (!spec) return code;
    return smpbe::cli::run(*spec, std::cout);
  } catch (const smpbe::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
