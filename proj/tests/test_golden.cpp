#include "doctest.h"

#include <fstream>
#include <set>
#include <sstream>

#include "mesopt/scenario.hpp"

using namespace mesopt;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::set<std::string> listing(const fs::path& dir) {
  std::set<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out.insert(e.path().filename().string());
  return out;
}

std::vector<fs::path> shipped() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(MESOPT_SCENARIOS))
    if (fs::exists(e.path() / "scenario.json")) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("shipped scenarios reproduce their golden files") {
  auto dirs = shipped();
  REQUIRE(dirs.size() >= 6);
  for (const auto& dir : dirs) {
    const std::string name = dir.filename().string();
    CAPTURE(name);
    auto out = fs::temp_directory_path() / ("mesopt_golden_" + name);
    fs::remove_all(out);
    write_results(run_scenario(load_scenario(dir / "scenario.json")), out);
    REQUIRE(fs::is_directory(dir / "golden"));
    CHECK(listing(out) == listing(dir / "golden"));
    for (const auto& file : listing(dir / "golden")) {
      CAPTURE(file);
      CHECK(slurp(out / file) == slurp(dir / "golden" / file));
    }
  }
}
