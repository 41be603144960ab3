#include "support.hpp"

#include "cfimend/error.hpp"
#include "cfimend/process.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cfimend::testing {

fs::path fixturesDir() { return CFIMEND_FIXTURES_DIR; }
fs::path oraclesDir() { return CFIMEND_ORACLES_DIR; }

TempDir::TempDir() {
  std::string Tmpl = (fs::temp_directory_path() / "cfimend-test-XXXXXX").string();
  if (!mkdtemp(Tmpl.data()))
    throw std::runtime_error("mkdtemp failed");
  Path = Tmpl;
}

TempDir::~TempDir() {
  if (std::getenv("CFIMEND_KEEP_TMP"))
    return;
  std::error_code EC;
  fs::remove_all(Path, EC);
}

fs::path copyProject(const std::string &Name, const fs::path &Dest) {
  fs::path To = Dest / Name;
  fs::copy(fixturesDir() / "projects" / Name, To, fs::copy_options::recursive);
  return To;
}

ProjectConfig projectConfig(const fs::path &ProjectDir) {
  return loadConfig(ProjectDir / "cfimend.json");
}

std::string readFile(const fs::path &P) {
  std::ifstream In(P, std::ios::binary);
  std::stringstream SS;
  SS << In.rdbuf();
  return SS.str();
}

void writeFile(const fs::path &P, const std::string &Text) {
  std::ofstream Out(P, std::ios::binary | std::ios::trunc);
  Out << Text;
}

std::string mustRun(const std::string &Script, const fs::path &Dir) {
  ShellCommand C;
  C.WorkingDir = Dir;
  C.Script = Script;
  auto R = runShell(C);
  if (R.Signalled || R.ExitCode != 0)
    throw std::runtime_error("command failed: " + Script + "\n" + R.Output);
  return R.Output;
}

TrapBinary buildTrapFixture(const fs::path &Dir, bool Pie) {
  std::string Name = Pie ? "traps-pie" : "traps";
  TrapBinary T{Dir / Name, Dir / (Name + ".map")};
  mustRun(std::string("clang -O1 -g -gdwarf-4 -fno-omit-frame-pointer ") +
              (Pie ? "-fPIE -pie" : "-no-pie") + " -fuse-ld=lld -Wl,-Map," +
              shellQuote(T.Map.string()) + " " +
              shellQuote((fixturesDir() / "traps" / "traps.c").string()) + " -o " +
              shellQuote(T.Binary.string()),
          Dir);
  return T;
}

std::optional<Address> mapSymbolAddress(const fs::path &Map, const std::string &Symbol) {
  std::ifstream In(Map);
  std::string Line;
  // VMA LMA Size Align Out In Symbol; symbol rows leave Out/In blank.
  while (std::getline(In, Line)) {
    std::istringstream SS(Line);
    std::string Vma, Lma, Size, Align, Name;
    if (!(SS >> Vma >> Lma >> Size >> Align >> Name) || Name != Symbol)
      continue;
    std::string Extra;
    if (SS >> Extra)
      continue;
    return std::stoull(Vma, nullptr, 16);
  }
  return std::nullopt;
}

std::mt19937_64 &rng() {
  static std::mt19937_64 G = [] {
    const char *S = std::getenv("CFIMEND_SEED");
    return std::mt19937_64(S ? std::strtoull(S, nullptr, 10) : 0x5eed);
  }();
  return G;
}

} // namespace cfimend::testing
