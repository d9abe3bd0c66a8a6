// Writes every built-in scenario as <dir>/<name>.json.
#include <filesystem>
#include <iostream>

#include "memplan/profile.hpp"
#include "memplan/scenarios.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: memplan_scenarios DIR\n";
    return 1;
  }
  const std::filesystem::path dir(argv[1]);
  std::filesystem::create_directories(dir);
  for (const auto& s : memplan::scenarios::all()) {
    const auto path = dir / (std::string(s.name) + ".json");
    memplan::save_profile(s.make(), path);
    std::cout << path.string() << '\n';
  }
  return 0;
}
