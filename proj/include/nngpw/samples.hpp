#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "nngpw/errors.hpp"

namespace nngpw {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Provenance { network, gaussian, external };

inline std::string to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::network: return "network";
    case Provenance::gaussian: return "gaussian";
    case Provenance::external: return "external";
  }
  return "external";
}

inline Provenance provenance_from_string(const std::string& text) {
  if (text == "network") return Provenance::network;
  if (text == "gaussian") return Provenance::gaussian;
  if (text == "external") return Provenance::external;
  throw ConfigError("unknown provenance '" + text + "'");
}

/// N draws of a flattened layer output, one draw per row.
///
/// Flattening is output-neuron major: column index = neuron * k + input.
struct OutputSampleSet {
  Matrix rows;
  Provenance provenance = Provenance::external;
  std::string source_id;  // kernel id for gaussian draws, config hash for network draws

  Eigen::Index n_samples() const { return rows.rows(); }
  Eigen::Index dim() const { return rows.cols(); }

  void validate() const {
    require(rows.rows() >= 1, "sample set must contain at least one row");
    require(rows.allFinite(), "sample set contains non-finite entries");
  }
};

inline std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

/// CSV layout: a header line `n_samples,dim,provenance,source_id`, one
/// metadata line, then N row-major data lines with `dim` fields each.
inline void write_samples_csv(std::ostream& out, const OutputSampleSet& samples) {
  out << "n_samples,dim,provenance,source_id\n";
  out << samples.n_samples() << ',' << samples.dim() << ',' << to_string(samples.provenance) << ','
      << samples.source_id << '\n';
  for (Eigen::Index r = 0; r < samples.rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < samples.rows.cols(); ++c) {
      if (c) out << ',';
      out << format_double(samples.rows(r, c));
    }
    out << '\n';
  }
}

inline OutputSampleSet read_samples_csv(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("n_samples,dim", 0) == 0,
          "sample CSV: missing header");
  require(static_cast<bool>(std::getline(in, line)), "sample CSV: missing metadata line");
  std::istringstream meta(line);
  std::string field;
  OutputSampleSet samples;
  long n = 0;
  long dim = 0;
  std::getline(meta, field, ',');
  n = std::stol(field);
  std::getline(meta, field, ',');
  dim = std::stol(field);
  std::getline(meta, field, ',');
  samples.provenance = provenance_from_string(field);
  std::getline(meta, samples.source_id);
  require(n >= 1 && dim >= 1, "sample CSV: bad dimensions");
  samples.rows.resize(n, dim);
  for (long r = 0; r < n; ++r) {
    require(static_cast<bool>(std::getline(in, line)), "sample CSV: truncated body");
    std::istringstream row(line);
    for (long c = 0; c < dim; ++c) {
      require(static_cast<bool>(std::getline(row, field, ',')), "sample CSV: short row");
      samples.rows(r, c) = std::stod(field);
    }
  }
  samples.validate();
  return samples;
}

}  // namespace nngpw
