#include "cfrf/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace cfrf {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan";
}

bool parse_number(const std::string& s, double& out) {
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != s.c_str() && *end == '\0';
}

}  // namespace

Schema load_schema(const std::string& path) {
  Schema schema;
  for (const auto& [key, value] : parse_config_file(path)) {
    ColumnSchema cs;
    auto parts = split(value, ',');
    if (parts.empty()) throw IngestionError("empty schema entry for column " + key);
    const std::string& role = parts[0];
    if (role == "covariate") cs.role = ColumnRole::Covariate;
    else if (role == "treatment") cs.role = ColumnRole::Treatment;
    else if (role == "outcome") cs.role = ColumnRole::Outcome;
    else if (role == "ignore") cs.role = ColumnRole::Ignore;
    else throw IngestionError("unknown column role '" + role + "' for " + key);
    if (parts.size() > 1) {
      const std::string& kind = parts[1];
      if (kind == "numeric") cs.kind = ColumnKind::Numeric;
      else if (kind == "categorical") cs.kind = ColumnKind::Categorical;
      else if (kind == "ordinal") cs.kind = ColumnKind::Ordinal;
      else throw IngestionError("unknown column kind '" + kind + "' for " + key);
    }
    schema[key] = cs;
  }
  return schema;
}

LoadedDataset load_dataset(const std::string& path, const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IngestionError("empty dataset file: " + path);
  const char delim = line.find('\t') != std::string::npos ? '\t' : ',';
  auto header = split(line, delim);
  const std::size_t n_cols = header.size();

  for (const auto& [name, cs] : schema)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw IngestionError("schema names unknown column '" + name + "'");

  std::vector<ColumnSchema> cols(n_cols);
  int treatment_col = -1, outcome_col = -1;
  for (std::size_t j = 0; j < n_cols; ++j) {
    auto it = schema.find(header[j]);
    if (it != schema.end()) cols[j] = it->second;
    if (cols[j].role == ColumnRole::Treatment) {
      if (treatment_col >= 0) throw IngestionError("two treatment columns in schema");
      treatment_col = static_cast<int>(j);
    }
    if (cols[j].role == ColumnRole::Outcome) {
      if (outcome_col >= 0) throw IngestionError("two outcome columns in schema");
      outcome_col = static_cast<int>(j);
    }
  }
  if (treatment_col < 0) throw IngestionError("schema does not name a treatment column");
  if (outcome_col < 0) throw IngestionError("schema does not name an outcome column");

  std::vector<std::vector<std::string>> raw;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, delim);
    if (fields.size() != n_cols)
      throw IngestionError(path + " row " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(n_cols));
    if (is_missing(fields[treatment_col]) || is_missing(fields[outcome_col]))
      throw IngestionError(path + " row " + std::to_string(line_no) +
                           ": missing treatment or outcome");
    raw.push_back(std::move(fields));
  }
  const std::size_t n = raw.size();
  if (n == 0) throw IngestionError("dataset has no data rows: " + path);

  LoadedDataset out;
  out.data.t.resize(n);
  out.data.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double tv;
    if (!parse_number(raw[i][treatment_col], tv) || (tv != 0.0 && tv != 1.0))
      throw IngestionError(path + " row " + std::to_string(i + 2) + " column '" +
                           header[treatment_col] + "': treatment must be 0 or 1");
    out.data.t[i] = static_cast<int>(tv);
    double yv;
    if (!parse_number(raw[i][outcome_col], yv) || !std::isfinite(yv))
      throw IngestionError(path + " row " + std::to_string(i + 2) + " column '" +
                           header[outcome_col] + "': unparseable outcome");
    out.data.y[i] = yv;
  }

  std::vector<std::vector<double>> mat_cols;
  for (std::size_t j = 0; j < n_cols; ++j) {
    if (cols[j].role != ColumnRole::Covariate) continue;
    if (cols[j].kind == ColumnKind::Numeric) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) {
        if (!parse_number(raw[i][j], col[i]) || !std::isfinite(col[i]))
          throw IngestionError(path + " row " + std::to_string(i + 2) + " column '" +
                               header[j] + "': unparseable numeric value");
      }
      mat_cols.push_back(std::move(col));
      out.covariate_names.push_back(header[j]);
    } else if (cols[j].kind == ColumnKind::Ordinal) {
      std::set<std::string> levels;
      for (std::size_t i = 0; i < n; ++i) levels.insert(raw[i][j]);
      std::map<std::string, double> code;
      double k = 0;
      for (const auto& lv : levels) code[lv] = k++;
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = code[raw[i][j]];
      mat_cols.push_back(std::move(col));
      out.covariate_names.push_back(header[j]);
    } else {
      std::set<std::string> levels;
      for (std::size_t i = 0; i < n; ++i) levels.insert(raw[i][j]);
      if (levels.size() < 2) {
        log_warning("categorical column '" + header[j] + "' is constant; dropped");
        continue;
      }
      bool first = true;  // lexicographically smallest level is the reference
      for (const auto& lv : levels) {
        if (first) {
          first = false;
          continue;
        }
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) col[i] = raw[i][j] == lv ? 1.0 : 0.0;
        mat_cols.push_back(std::move(col));
        out.covariate_names.push_back(header[j] + "=" + lv);
      }
    }
  }
  if (mat_cols.empty()) throw IngestionError("no covariate columns after expansion");

  out.data.x = Matrix(n, mat_cols.size());
  for (std::size_t j = 0; j < mat_cols.size(); ++j)
    std::copy(mat_cols[j].begin(), mat_cols[j].end(), out.data.x.col(j));
  out.data.validate();
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_dataset(const std::string& path, const Dataset& data,
                  const std::vector<std::string>& covariate_names) {
  std::string out;
  for (std::size_t j = 0; j < data.p(); ++j) {
    out += covariate_names.at(j);
    out += '\t';
  }
  out += "t\ty\n";
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < data.p(); ++j) {
      out += format_double(data.x(i, j));
      out += '\t';
    }
    out += std::to_string(data.t[i]);
    out += '\t';
    out += format_double(data.y[i]);
    out += '\n';
  }
  write_text_file(path, out);
}

std::vector<double> load_tau_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open file: " + path);
  std::vector<double> tau;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    double v;
    if (!parse_number(trim(line), v) || !std::isfinite(v))
      throw IngestionError(path + " line " + std::to_string(line_no) + ": bad value");
    tau.push_back(v);
  }
  return tau;
}

void save_tau_file(const std::string& path, const std::vector<double>& tau) {
  std::string out;
  for (double v : tau) {
    out += format_double(v);
    out += '\n';
  }
  write_text_file(path, out);
}

std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw IngestionError(path + " line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(t.substr(0, eq));
    if (kv.count(key))
      throw IngestionError(path + " line " + std::to_string(line_no) + ": duplicate key " + key);
    kv[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  write_text_file(path, out);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write file: " + path);
  out << content;
  if (!out) throw IngestionError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cfrf
