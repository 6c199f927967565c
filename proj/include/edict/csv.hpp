#pragma once

#include <ostream>
#include <string_view>

namespace edict {

// Every CSV starts with "# edict-<name> v<version>" ahead of its header row.
inline constexpr int kCsvSchemaVersion = 1;

inline void write_csv_schema(std::ostream& out, std::string_view name) {
  out << "# edict-" << name << " v" << kCsvSchemaVersion << "\n";
}

}  // namespace edict
