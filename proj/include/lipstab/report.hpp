#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "lipstab/config.hpp"
#include "lipstab/stability.hpp"

namespace lipstab {

const char* version();

struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::string fixture;
  int dim = 3;
  int grid_n = 0;
  std::uint64_t fixture_hash = 0;
};

Provenance make_provenance(const std::string& command, const ExperimentConfig& c);

/// Shortest round-trip decimal; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

/// "# key: value" lines.
void write_provenance(std::ostream& out, const Provenance& p);
nlohmann::ordered_json provenance_json(const Provenance& p);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
};

/// Provenance lines, then a CSV header and the rows.
void write_csv(std::ostream& out, const Provenance& p, const Table& t);
/// Array of objects keyed by column; values that parse as numbers stay numbers.
nlohmann::ordered_json table_json(const Table& t);

Table sweep_table(const SweepResult& r);
nlohmann::ordered_json sweep_summary_json(const Provenance& p, const SweepResult& r);
Table trace_table(const ReconstructionResult& r);

}  // namespace lipstab
