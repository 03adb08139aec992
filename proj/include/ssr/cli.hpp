#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ssr/dictlearn.hpp"

namespace ssr::cli {

// Exit codes of run().
constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;  // I/O, numerical or acceptance failures
constexpr int kExitUsage = 2;    // bad flags or arguments

// Entry point of the `ssr` tool; argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct ManifestRow {
  std::filesystem::path image;
  std::filesystem::path mask;
  std::string class_name;
};

// Lines "image<TAB>mask<TAB>class"; blank lines and lines starting with '#'
// are skipped. Relative paths resolve against the manifest's directory.
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

std::filesystem::path dictionary_path(const std::filesystem::path& dir,
                                      const std::string& class_name, Role role);

// Every *.ssrdict in dir, in file-name order.
std::vector<CoupledDictionary> load_dictionaries(const std::filesystem::path& dir);

void save_dict_stats_csv(const DictionaryStats& stats, const std::filesystem::path& path);
// Paired bars per cluster: foreground red, background blue.
RasterImage render_dict_stats(const DictionaryStats& stats);

}  // namespace ssr::cli
