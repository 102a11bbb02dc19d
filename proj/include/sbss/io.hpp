#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sbss/spatial.hpp"
#include "sbss/types.hpp"

namespace sbss {

/// Numeric table read from a CSV file with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Matrix data;
};

/// Parses a header line followed by rows of decimal numbers. Errors carry the
/// 1-based line number.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Shortest form of %.17g; parses back to the same double.
std::string format_double(double value);

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data);
void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const Matrix& data);

/// Header "c1,...,cm" for a matrix without named columns.
std::vector<std::string> numbered_header(const std::string& prefix, Index count);

void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

/// Locations file: header x1,...,xd.
void write_locations_csv(const std::string& path, const LocationSet& locations);
LocationSet read_locations_csv(const std::string& path, const LocationOptions& options = {});

/// Sample file: header x1,...,xd,v1,...,vp. Coordinate columns are the ones
/// whose header starts with 'x'; when `dim` is positive it overrides that.
void write_field_sample_csv(const std::string& path, const FieldSample& sample);
FieldSample read_field_sample_csv(const std::string& path, int dim = 0,
                                  const LocationOptions& options = {});

}  // namespace sbss
