#include "sbss/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "sbss/error.hpp"

namespace sbss {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (line_no == 0 || trim(line).empty()) throw ParseError("missing header row", line_no);
  table.header = split(line);

  std::vector<double> values;
  Index rows = 0;
  const std::size_t cols = table.header.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (fields.size() != cols)
      throw ParseError("expected " + std::to_string(cols) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    for (std::size_t k = 0; k < cols; ++k) {
      const std::string& f = fields[k];
      double v = 0.0;
      const char* first = f.data();
      if (!f.empty() && f.front() == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size())
        throw ParseError("field " + std::to_string(k + 1) + " is not a number: '" + f + "'", line_no);
      values.push_back(v);
    }
    ++rows;
  }
  table.data.resize(rows, static_cast<Index>(cols));
  for (Index i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols; ++k)
      table.data(i, static_cast<Index>(k)) = values[static_cast<std::size_t>(i) * cols + k];
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return read_csv(in);
  } catch (const ParseError& e) {
    throw e.with_context(path + ": ");
  }
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<std::string>& header, const Matrix& data) {
  if (static_cast<Index>(header.size()) != data.cols())
    throw InvalidArgument("header width does not match the matrix");
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index k = 0; k < data.cols(); ++k) out << (k ? "," : "") << format_double(data(i, k));
    out << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<std::string>& header,
                    const Matrix& data) {
  auto out = open_out(path);
  write_csv(out, header, data);
}

std::vector<std::string> numbered_header(const std::string& prefix, Index count) {
  std::vector<std::string> h;
  for (Index k = 1; k <= count; ++k) h.push_back(prefix + std::to_string(k));
  return h;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  write_csv_file(path, numbered_header("c", m.cols()), m);
}

Matrix read_matrix_csv(const std::string& path) { return read_csv_file(path).data; }

void write_locations_csv(const std::string& path, const LocationSet& locations) {
  write_csv_file(path, numbered_header("x", locations.dim()), locations.coords());
}

LocationSet read_locations_csv(const std::string& path, const LocationOptions& options) {
  return LocationSet(read_csv_file(path).data, options);
}

void write_field_sample_csv(const std::string& path, const FieldSample& sample) {
  auto header = numbered_header("x", sample.locations().dim());
  const auto vh = numbered_header("v", sample.variables());
  header.insert(header.end(), vh.begin(), vh.end());
  Matrix all(sample.size(), sample.locations().dim() + sample.variables());
  all << sample.locations().coords(), sample.values();
  write_csv_file(path, header, all);
}

FieldSample read_field_sample_csv(const std::string& path, int dim, const LocationOptions& options) {
  CsvTable t = read_csv_file(path);
  if (dim <= 0) {
    dim = 0;
    while (dim < static_cast<int>(t.header.size()) && !t.header[dim].empty() &&
           t.header[dim][0] == 'x')
      ++dim;
  }
  if (dim < 1 || dim >= t.data.cols())
    throw ParseError(path + ": cannot split columns into coordinates and variables", 1);
  return FieldSample(LocationSet(t.data.leftCols(dim), options), t.data.rightCols(t.data.cols() - dim));
}

}  // namespace sbss
