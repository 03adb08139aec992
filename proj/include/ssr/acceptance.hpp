#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace ssr {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

constexpr int kCriterionCount = 9;

// Runs the numbered acceptance checks (all when `only` is empty). Criterion 8
// writes its pipeline artifacts under work_dir. Each result line is written
// to `progress` as soon as it is known.
std::vector<CriterionResult> run_acceptance(const std::filesystem::path& work_dir,
                                            const std::vector<int>& only = {},
                                            std::ostream* progress = nullptr);

CriterionResult run_criterion(int id, const std::filesystem::path& work_dir);

// "PASS [id] name: detail (t s)".
std::string format_result(const CriterionResult& r);

}  // namespace ssr
