#pragma once

#include <map>
#include <string>
#include <vector>

#include "cfrf/common.hpp"

namespace cfrf {

enum class ColumnRole { Covariate, Treatment, Outcome, Ignore };
enum class ColumnKind { Numeric, Categorical, Ordinal };

struct ColumnSchema {
  ColumnRole role = ColumnRole::Covariate;
  ColumnKind kind = ColumnKind::Numeric;
};

// name -> role/kind. Loaded from a flat "name = role[,kind]" sidecar.
using Schema = std::map<std::string, ColumnSchema>;

Schema load_schema(const std::string& path);

struct LoadedDataset {
  Dataset data;
  std::vector<std::string> covariate_names;  // post-expansion column names
};

// Header + delimited text (tab or comma, detected from the header line).
// Categoricals expand to indicator columns with the lexicographically first
// level as reference; ordinals integer-code their sorted levels.
LoadedDataset load_dataset(const std::string& path, const Schema& schema);

void save_dataset(const std::string& path, const Dataset& data,
                  const std::vector<std::string>& covariate_names);

std::vector<double> load_tau_file(const std::string& path);
void save_tau_file(const std::string& path, const std::vector<double>& tau);

// Flat key=value document; '#' starts a comment line.
std::map<std::string, std::string> parse_config_file(const std::string& path);

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

std::string format_double(double v);  // shortest round-trip-exact form

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace cfrf
