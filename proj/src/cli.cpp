#include "cfimend/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <fstream>
#include <ostream>
#include <sstream>

namespace cfimend {

namespace {

constexpr int ExitOk = 0;
constexpr int ExitUnresolvable = 1;
constexpr int ExitFailure = 2;
constexpr int ExitUsage = 64;

void printCensus(std::ostream &Out, const CensusResult &C) {
  const auto &T = C.Totals;
  const std::pair<const char *, std::uint64_t> Rows[] = {
      {"fp_calls", T.FpCalls},       {"virtual_calls", T.VirtualCalls},
      {"callback_stores", T.CallbackStores}, {"jt_switch", T.JtSwitch},
      {"jt_lowered", T.JtLowered},   {"inline_asm", T.InlineAsm},
      {"total_sites", totalSites(T)}};
  for (const auto &[Name, N] : Rows)
    Out << fmt::format("{:<16} {:>10}\n", Name, N);
  Out << fmt::format("{:<16} {:>10}\n", "functions", C.Functions.size());
  if (!C.Diagnostics.empty())
    Out << fmt::format("{} unparsed line(s)\n", C.Diagnostics.size());
}

int runHeal(const std::string &ConfigPath, bool Revert, bool Fresh, bool Quiet,
            std::ostream &Out, std::ostream &Err) {
  ProjectConfig Cfg = loadConfig(ConfigPath);
  if (Revert) {
    int N = revertPatches(Cfg);
    Out << fmt::format("reverted {} visibility patch(es)\n", N);
    return ExitOk;
  }
  HealOptions Opts;
  Opts.Log = Quiet ? nullptr : &Err;
  Opts.Fresh = Fresh;
  HealResult R = heal(Cfg, Opts);
  const auto &S = R.Report["summary"];
  const auto &Cov = R.Report["coverage"];
  Out << fmt::format("violations: {}  fixed: {}  unresolvable: {}  functional: {}\n",
                     S["violations"].get<int>(), S["fixed"].get<int>(),
                     S["unresolvable"].get<int>(), S["functional"].get<int>());
  Out << fmt::format("visibility patches: {} new, {} total\n", R.NewPatches,
                     R.State.Ledger.Patches.size());
  Out << fmt::format("ignorelist entries: {} new\n", R.NewEntries);
  for (const auto &L : R.Report["ignorelist"])
    Out << "  " << L.get<std::string>() << "\n";
  Out << fmt::format("coverage per function:  {:.2f} / {:.2f} / {:.2f}\n",
                     Cov["per_function"]["protected"].get<double>(),
                     Cov["per_function"]["default_visibility"].get<double>(),
                     Cov["per_function"]["ignored"].get<double>());
  Out << fmt::format("coverage per call site: {:.2f} / {:.2f} / {:.2f}\n",
                     Cov["per_call_site"]["protected"].get<double>(),
                     Cov["per_call_site"]["default_visibility"].get<double>(),
                     Cov["per_call_site"]["ignored"].get<double>());
  Out << "report: " << (Cfg.ReportDir / "report.html").string() << "\n";
  return R.exitCode() == 0 ? ExitOk : ExitUnresolvable;
}

int runBuildCommand(const std::string &ConfigPath, const std::string &ModeName,
                    std::ostream &Out) {
  ProjectConfig Cfg = loadConfig(ConfigPath);
  BuildMode Mode = BuildMode::baseline();
  if (ModeName == "cfi") {
    auto List = ignorelistPath(Cfg.ReportDir);
    if (!fs::exists(List))
      writeIgnorelist(Cfg.ReportDir, {});
    Mode = BuildMode::cfi(Cfg.CfiVariants, List);
  }
  BuildOutcome B = runBuild(Cfg, Mode, {1, true});
  Out << fmt::format("{} build {} in {:.1f}s; log: {}\n", Mode.name(),
                     B.Succeeded ? "succeeded" : "failed", B.WallSeconds, B.LogFile.string());
  for (const auto &D : B.Diagnostics)
    Out << fmt::format("  {} {} {}\n", diagnosticKindName(D.DiagKind), D.Symbol.value_or("-"),
                       D.Message);
  return B.Succeeded ? ExitOk : ExitFailure;
}

int runReport(const fs::path &StateDir, std::ostream &Out) {
  std::ifstream In(StateDir / "state.json");
  if (!In)
    throw Error("no state.json in " + StateDir.string());
  auto J = nlohmann::json::parse(In);
  auto Cfg = parseConfig(J.at("config").dump(), StateDir);
  PipelineState St = stateFromJson(J);
  for (const auto &P : emitReport(buildReport(St, Cfg), StateDir))
    Out << P.string() << "\n";
  return St.unresolvableCount() > 0 ? ExitUnresolvable : ExitOk;
}

} // namespace

int cliMain(int Argc, const char *const *Argv, std::ostream &Out, std::ostream &Err) {
  CLI::App App{"Self-healing forward-edge CFI for C/C++ projects", "cfimend"};
  App.require_subcommand(1);

  std::string ConfigPath, ModeName = "baseline", IrDir, StateDir;
  bool Revert = false, Fresh = false, Quiet = false;

  auto *Heal = App.add_subcommand("heal", "Build, test, repair and report until a fixed point");
  Heal->add_option("config", ConfigPath, "Project configuration (JSON)")->required();
  Heal->add_flag("--revert", Revert, "Undo every journaled visibility patch and exit");
  Heal->add_flag("--fresh", Fresh, "Ignore the ignorelist left by a previous run");
  Heal->add_flag("-q,--quiet", Quiet, "No progress output");

  auto *Build = App.add_subcommand("build", "Run one baseline or CFI build");
  Build->add_option("config", ConfigPath, "Project configuration (JSON)")->required();
  Build->add_option("--mode", ModeName, "baseline or cfi")
      ->check(CLI::IsMember({"baseline", "cfi"}));

  auto *Census = App.add_subcommand("census", "Classify indirect control flow in *.ll files");
  Census->add_option("ir-dir", IrDir, "Directory searched recursively for *.ll")->required();

  auto *Report = App.add_subcommand("report", "Regenerate report.json/html from state.json");
  Report->add_option("state-dir", StateDir, "Directory holding state.json")->required();

  try {
    App.parse(Argc, Argv);
  } catch (const CLI::CallForHelp &) {
    Out << App.help();
    return ExitOk;
  } catch (const CLI::ParseError &E) {
    Err << E.what() << "\n\n" << App.help();
    return ExitUsage;
  }

  try {
    if (*Heal)
      return runHeal(ConfigPath, Revert, Fresh, Quiet, Out, Err);
    if (*Build)
      return runBuildCommand(ConfigPath, ModeName, Out);
    if (*Census) {
      printCensus(Out, censusDirectory(IrDir));
      return ExitOk;
    }
    if (*Report)
      return runReport(StateDir, Out);
  } catch (const PipelineFailure &E) {
    Err << "cfimend: " << E.what() << "\n";
    if (E.build())
      for (const auto &D : E.build()->Diagnostics)
        Err << "  " << D.Message << "\n";
    return ExitFailure;
  } catch (const ConfigParseError &E) {
    Err << fmt::format("cfimend: {} (line {}, column {})\n", E.what(), E.line(), E.column());
    return ExitFailure;
  } catch (const std::exception &E) {
    Err << "cfimend: " << E.what() << "\n";
    return ExitFailure;
  }
  Err << App.help();
  return ExitUsage;
}

} // namespace cfimend
