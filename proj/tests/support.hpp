// Helpers shared by the unit, integration and acceptance tests.
#pragma once

#include "cfimend/config.hpp"
#include "cfimend/trace.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace cfimend::testing {

namespace fs = std::filesystem;

fs::path fixturesDir();
fs::path oraclesDir();

/// Fresh directory under the system temp dir, removed on destruction unless
/// CFIMEND_KEEP_TMP is set.
class TempDir {
public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  const fs::path &path() const { return Path; }

private:
  fs::path Path;
};

/// Copies fixtures/projects/<Name> into Dest/<Name> and returns that path.
fs::path copyProject(const std::string &Name, const fs::path &Dest);

/// Config of a copied fixture project.
ProjectConfig projectConfig(const fs::path &ProjectDir);

std::string readFile(const fs::path &P);
void writeFile(const fs::path &P, const std::string &Text);

/// The trap fixture (DWARF 4, frame pointers) with an lld map next to it.
struct TrapBinary {
  fs::path Binary;
  fs::path Map;
};
TrapBinary buildTrapFixture(const fs::path &Dir, bool Pie = false);

/// Output of a shell command run in Dir; throws if it fails.
std::string mustRun(const std::string &Script, const fs::path &Dir);

/// Address of a symbol as listed in an lld -Map file.
std::optional<Address> mapSymbolAddress(const fs::path &Map, const std::string &Symbol);

/// Deterministic generator for property tests; CFIMEND_SEED overrides the seed.
std::mt19937_64 &rng();

} // namespace cfimend::testing
