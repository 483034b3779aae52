#include <iostream>
#include <string>
#include <vector>

#include "ghosty/api/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return ghosty::api::cli_dispatch(std::move(args), ghosty::Environment::from_process(), std::cout, std::cerr);
  } catch (const ghosty::Error& e) {
    std::cerr << ghosty::code_name(e.code()) << ": " << e.what() << "\n";
    return ghosty::is_storage_error(e.code()) ? ghosty::api::kExitStorage : ghosty::api::kExitValidation;
  }
}
