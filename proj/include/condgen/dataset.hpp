#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace condgen {

// One distinct covariate vector with all responses observed for it.
struct CovariateGroup {
  std::vector<double> x;
  std::vector<double> responses;

  int count() const { return static_cast<int>(responses.size()); }
};

// Per-dimension z-score transform fitted on training covariates. Dimensions
// that are constant on the fit set get std 1 (identity scaling).
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::vector<double> apply(std::span<const double> x) const;
  static Normalizer fit(const std::vector<CovariateGroup>& groups, int dim);
};

// Immutable after construction; safe for shared concurrent reads.
struct Dataset {
  std::vector<CovariateGroup> groups;
  int dim = 0;
  Normalizer normalizer;
  std::vector<std::string> covariate_names;  // header order
  std::string response_name = "y";

  std::size_t total_observations() const;
  std::vector<std::vector<double>> normalized_covariates() const;
};

struct SplitSpec {
  int test_min_freq = 30;  // N_i >  test_min_freq         -> test
  int val_min_freq = 20;   // val_min_freq < N_i <= test   -> val, else train

  void validate() const;  // requires val_min_freq < test_min_freq
};

struct SplitResult {
  Dataset train, val, test;
};

// Reads a UTF-8 comma-separated file with a header row. Every non-response
// column is a numeric covariate; rows with byte-identical covariate vectors
// merge into one group, ordered by first appearance.
Dataset load_csv(const std::filesystem::path& path, const std::string& response_column);

// Inverse of load_csv up to text round-trip; values printed with 17
// significant digits so doubles survive exactly.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);

// Frequency split per group count; the normalizer is fitted on the train
// covariates only and shared by all three parts.
SplitResult split(const Dataset& dataset, const SplitSpec& spec);

std::vector<double> normalize_covariate(const Dataset& dataset, std::span<const double> x);

}  // namespace condgen
