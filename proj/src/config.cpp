#include "cfimend/config.hpp"
#include "cfimend/error.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cfimend {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> VariantNames = {
    "cfi-icall",       "cfi-vcall",        "cfi-nvcall",        "cfi-mfcall",
    "cfi-cast-strict", "cfi-derived-cast", "cfi-unrelated-cast"};

std::pair<int, int> lineColumnAt(std::string_view Text, std::size_t Offset) {
  int Line = 1, Column = 1;
  Offset = std::min(Offset, Text.size());
  for (std::size_t I = 0; I < Offset; ++I) {
    if (Text[I] == '\n') {
      ++Line;
      Column = 1;
    } else {
      ++Column;
    }
  }
  return {Line, Column};
}

fs::path anchor(const fs::path &P, const fs::path &Base) {
  if (P.is_absolute())
    return P.lexically_normal();
  return (Base / P).lexically_normal();
}

std::string requireString(const json &Doc, const char *Key) {
  auto It = Doc.find(Key);
  if (It == Doc.end())
    throw ConfigValidationError(fmt::format("missing required field '{}'", Key));
  if (!It->is_string())
    throw ConfigValidationError(fmt::format("field '{}' must be a string", Key));
  return It->get<std::string>();
}

std::optional<std::string> optionalString(const json &Doc, const char *Key) {
  auto It = Doc.find(Key);
  if (It == Doc.end() || It->is_null())
    return std::nullopt;
  if (!It->is_string())
    throw ConfigValidationError(fmt::format("field '{}' must be a string", Key));
  return It->get<std::string>();
}

std::vector<std::string> stringList(const json &Doc, const char *Key) {
  std::vector<std::string> Out;
  auto It = Doc.find(Key);
  if (It == Doc.end())
    return Out;
  if (!It->is_array())
    throw ConfigValidationError(fmt::format("field '{}' must be a list", Key));
  for (const auto &E : *It) {
    if (!E.is_string())
      throw ConfigValidationError(
          fmt::format("field '{}' must contain only strings", Key));
    Out.push_back(E.get<std::string>());
  }
  return Out;
}

int optionalInt(const json &Doc, const char *Key, int Default) {
  auto It = Doc.find(Key);
  if (It == Doc.end())
    return Default;
  if (!It->is_number_integer())
    throw ConfigValidationError(fmt::format("field '{}' must be an integer", Key));
  return It->get<int>();
}

} // namespace

std::string_view variantName(CfiVariant V) {
  return VariantNames[static_cast<std::size_t>(V)];
}

std::optional<CfiVariant> parseVariant(std::string_view Name) {
  for (std::size_t I = 0; I < VariantNames.size(); ++I)
    if (VariantNames[I] == Name)
      return AllCfiVariants[I];
  return std::nullopt;
}

ProjectConfig parseConfig(std::string_view Text, const fs::path &BaseDir) {
  json Doc;
  try {
    Doc = json::parse(Text.begin(), Text.end());
  } catch (const json::parse_error &E) {
    // The reported byte is one past the offending character.
    auto [Line, Column] = lineColumnAt(Text, E.byte > 0 ? E.byte - 1 : 0);
    throw ConfigParseError(
        fmt::format("config syntax error at {}:{}: {}", Line, Column, E.what()),
        Line, Column);
  }
  if (!Doc.is_object())
    throw ConfigParseError("config syntax error at 1:1: document must be an object",
                           1, 1);

  ProjectConfig Cfg;
  Cfg.ProjectRoot = anchor(requireString(Doc, "project_root"), BaseDir);
  Cfg.ConfigureCmd = optionalString(Doc, "configure_cmd");
  Cfg.BuildCmd = requireString(Doc, "build_cmd");
  Cfg.CleanCmd = optionalString(Doc, "clean_cmd");
  Cfg.TestCmd = requireString(Doc, "test_cmd");
  Cfg.Executables = stringList(Doc, "executables");
  Cfg.ExtraCompileFlags = stringList(Doc, "extra_compile_flags");

  if (!Doc.contains("cfi_variants"))
    throw ConfigValidationError("missing required field 'cfi_variants'");
  for (const auto &Name : stringList(Doc, "cfi_variants")) {
    auto V = parseVariant(Name);
    if (!V)
      throw ConfigValidationError(fmt::format("unknown CFI variant '{}'", Name));
    if (std::find(Cfg.CfiVariants.begin(), Cfg.CfiVariants.end(), *V) !=
        Cfg.CfiVariants.end())
      throw ConfigValidationError(fmt::format("duplicate CFI variant '{}'", Name));
    Cfg.CfiVariants.push_back(*V);
  }

  Cfg.TestTimeoutSeconds = optionalInt(Doc, "test_timeout", 120);
  Cfg.MaxRepairIterations = optionalInt(Doc, "max_repair_iterations", 64);
  if (Cfg.MaxRepairIterations < 1)
    throw ConfigValidationError("max_repair_iterations must be >= 1");
  if (Cfg.TestTimeoutSeconds < 1)
    throw ConfigValidationError("test_timeout must be >= 1");

  auto Report = optionalString(Doc, "report_dir");
  Cfg.ReportDir = Report ? anchor(*Report, BaseDir) : Cfg.ProjectRoot / "cfi-report";
  auto Ir = optionalString(Doc, "ir_dir");
  Cfg.IrDir = Ir ? anchor(*Ir, BaseDir) : Cfg.ProjectRoot;
  return Cfg;
}

ProjectConfig loadConfig(const fs::path &File) {
  std::ifstream In(File);
  if (!In)
    throw ConfigValidationError(
        fmt::format("cannot read config '{}'", File.string()));
  std::stringstream SS;
  SS << In.rdbuf();
  fs::path Base = fs::absolute(File).parent_path();
  return parseConfig(SS.str(), Base);
}

std::string renderConfig(const ProjectConfig &Cfg) {
  json Doc = json::object();
  Doc["project_root"] = Cfg.ProjectRoot.string();
  if (Cfg.ConfigureCmd)
    Doc["configure_cmd"] = *Cfg.ConfigureCmd;
  Doc["build_cmd"] = Cfg.BuildCmd;
  if (Cfg.CleanCmd)
    Doc["clean_cmd"] = *Cfg.CleanCmd;
  Doc["test_cmd"] = Cfg.TestCmd;
  Doc["executables"] = Cfg.Executables;
  json Variants = json::array();
  for (auto V : Cfg.CfiVariants)
    Variants.push_back(std::string(variantName(V)));
  Doc["cfi_variants"] = Variants;
  Doc["extra_compile_flags"] = Cfg.ExtraCompileFlags;
  Doc["test_timeout"] = Cfg.TestTimeoutSeconds;
  Doc["report_dir"] = Cfg.ReportDir.string();
  Doc["ir_dir"] = Cfg.IrDir.string();
  Doc["max_repair_iterations"] = Cfg.MaxRepairIterations;
  return Doc.dump(2) + "\n";
}

std::vector<std::string> validateConfig(const ProjectConfig &Cfg) {
  std::vector<std::string> Findings;
  std::error_code EC;
  if (!fs::is_directory(Cfg.ProjectRoot, EC))
    Findings.push_back(
        fmt::format("root missing: '{}' is not a directory", Cfg.ProjectRoot.string()));
  if (Cfg.BuildCmd.find_first_not_of(" \t") == std::string::npos)
    Findings.push_back("build_cmd is empty");
  if (Cfg.TestCmd.find_first_not_of(" \t") == std::string::npos)
    Findings.push_back("test_cmd is empty");
  if (Cfg.ConfigureCmd && Cfg.ConfigureCmd->find_first_not_of(" \t") == std::string::npos)
    Findings.push_back("configure_cmd is empty");
  if (Cfg.CleanCmd && Cfg.CleanCmd->find_first_not_of(" \t") == std::string::npos)
    Findings.push_back("clean_cmd is empty");
  if (Cfg.CfiVariants.empty())
    Findings.push_back("at least one variant required");
  if (Cfg.MaxRepairIterations < 1)
    Findings.push_back("max_repair_iterations must be >= 1");
  if (Cfg.TestTimeoutSeconds < 1)
    Findings.push_back("test_timeout must be >= 1");
  for (const auto &Exe : Cfg.Executables) {
    fs::path P(Exe);
    auto Rel = P.is_absolute()
                   ? P.lexically_normal().lexically_relative(Cfg.ProjectRoot)
                   : P.lexically_normal();
    if (Rel.empty() || *Rel.begin() == "..")
      Findings.push_back(
          fmt::format("executable '{}' resolves outside project_root", Exe));
  }
  return Findings;
}

} // namespace cfimend
