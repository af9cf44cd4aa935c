#include "condgen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "condgen/errors.hpp"

namespace condgen {

std::vector<double> Normalizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size()) {
    throw std::invalid_argument("normalize: covariate has dimension " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(mean.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / stddev[k];
  return out;
}

Normalizer Normalizer::fit(const std::vector<CovariateGroup>& groups, int dim) {
  Normalizer n;
  n.mean.assign(static_cast<std::size_t>(dim), 0.0);
  n.stddev.assign(static_cast<std::size_t>(dim), 1.0);
  if (groups.empty()) return n;
  const double count = static_cast<double>(groups.size());
  for (const auto& g : groups) {
    for (int k = 0; k < dim; ++k) n.mean[static_cast<std::size_t>(k)] += g.x[static_cast<std::size_t>(k)];
  }
  for (double& m : n.mean) m /= count;
  for (int k = 0; k < dim; ++k) {
    double ss = 0.0;
    for (const auto& g : groups) {
      const double d = g.x[static_cast<std::size_t>(k)] - n.mean[static_cast<std::size_t>(k)];
      ss += d * d;
    }
    const double sd = std::sqrt(ss / count);
    n.stddev[static_cast<std::size_t>(k)] = sd > 0.0 ? sd : 1.0;
  }
  return n;
}

std::size_t Dataset::total_observations() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.responses.size();
  return n;
}

std::vector<std::vector<double>> Dataset::normalized_covariates() const {
  std::vector<std::vector<double>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.push_back(normalizer.apply(g.x));
  return out;
}

void SplitSpec::validate() const {
  if (val_min_freq >= test_min_freq) {
    throw std::invalid_argument("SplitSpec: val_min_freq must be < test_min_freq");
  }
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end != nullptr && (*end == ' ' || *end == '\t')) ++end;
  if (end == begin || end == nullptr || *end != '\0' || !std::isfinite(v)) {
    throw LoadError("csv: non-numeric cell '" + cell + "' in column '" + column +
                    "' at data row " + std::to_string(row));
  }
  return v;
}

// Bitwise key for exact covariate equality (grouping contract).
std::string byte_key(const std::vector<double>& x) {
  std::string key(x.size() * sizeof(double), '\0');
  std::memcpy(key.data(), x.data(), key.size());
  return key;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == '\n' || s.back() == ' ')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& response_column) {
  std::ifstream is(path);
  if (!is) throw LoadError("csv: cannot open " + path.string());

  std::string line;
  if (!std::getline(is, line)) throw LoadError("csv: empty file " + path.string());
  std::vector<std::string> header = split_line(trim(line));
  for (auto& h : header) h = trim(h);

  int response_index = -1;
  Dataset ds;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == response_column) {
      if (response_index >= 0) {
        throw LoadError("csv: duplicate response column '" + response_column + "'");
      }
      response_index = static_cast<int>(c);
    } else {
      ds.covariate_names.push_back(header[c]);
    }
  }
  if (response_index < 0) {
    throw LoadError("csv: response column '" + response_column + "' not found in " +
                    path.string());
  }
  ds.dim = static_cast<int>(header.size()) - 1;
  ds.response_name = response_column;

  std::unordered_map<std::string, std::size_t> index_by_key;
  std::size_t row = 0;
  std::vector<double> x(static_cast<std::size_t>(ds.dim));
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    ++row;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size()) {
      throw LoadError("csv: row " + std::to_string(row) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    double response = 0.0;
    std::size_t xi = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = parse_cell(trim(cells[c]), row, header[c]);
      if (static_cast<int>(c) == response_index) {
        response = v;
      } else {
        x[xi++] = v;
      }
    }
    const std::string key = byte_key(x);
    auto it = index_by_key.find(key);
    if (it == index_by_key.end()) {
      index_by_key.emplace(key, ds.groups.size());
      ds.groups.push_back(CovariateGroup{x, {response}});
    } else {
      ds.groups[it->second].responses.push_back(response);
    }
  }
  if (ds.groups.empty()) throw LoadError("csv: no data rows in " + path.string());
  ds.normalizer = Normalizer::fit(ds.groups, ds.dim);
  return ds;
}

void save_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw LoadError("csv: cannot open for write " + path.string());
  for (const auto& name : dataset.covariate_names) os << name << ',';
  os << dataset.response_name << '\n';
  char buf[40];
  for (const auto& g : dataset.groups) {
    for (double y : g.responses) {
      for (double v : g.x) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf << ',';
      }
      std::snprintf(buf, sizeof(buf), "%.17g", y);
      os << buf << '\n';
    }
  }
  if (!os) throw LoadError("csv: write failed " + path.string());
}

SplitResult split(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  SplitResult r;
  for (Dataset* part : {&r.train, &r.val, &r.test}) {
    part->dim = dataset.dim;
    part->covariate_names = dataset.covariate_names;
    part->response_name = dataset.response_name;
  }
  for (const auto& g : dataset.groups) {
    if (g.count() > spec.test_min_freq) {
      r.test.groups.push_back(g);
    } else if (g.count() > spec.val_min_freq) {
      r.val.groups.push_back(g);
    } else {
      r.train.groups.push_back(g);
    }
  }
  const Normalizer n = Normalizer::fit(r.train.groups, dataset.dim);
  r.train.normalizer = n;
  r.val.normalizer = n;
  r.test.normalizer = n;
  return r;
}

std::vector<double> normalize_covariate(const Dataset& dataset, std::span<const double> x) {
  return dataset.normalizer.apply(x);
}

}  // namespace condgen
