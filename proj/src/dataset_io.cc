#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "loco/synth_env.h"

namespace loco {

namespace {

void write_vector(std::ostream& out, const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out << v(i) << ',';
}

int parse_header_field(const std::string& header, const std::string& key) {
  const std::string tag = key + "=";
  const auto pos = header.find(tag);
  if (pos == std::string::npos) {
    throw std::runtime_error("dataset header missing '" + key + "'");
  }
  return std::stoi(header.substr(pos + tag.size()));
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& data) {
  out << "# d_x=" << data.d_x << " d_phi=" << data.d_phi
      << " n=" << data.records.size() << " split=" << data.split_index << '\n';
  for (int i = 0; i < data.d_x; ++i) out << "x" << i << ',';
  for (int i = 0; i < data.d_phi; ++i) out << "phi1_" << i << ',';
  for (int i = 0; i < data.d_phi; ++i) out << "phi0_" << i << ',';
  out << "y\n";
  out << std::setprecision(17);
  for (const auto& rec : data.records) {
    write_vector(out, rec.context);
    write_vector(out, rec.phi1);
    write_vector(out, rec.phi0);
    out << rec.label << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("#", 0) != 0) {
    throw std::runtime_error("dataset: missing dimension header");
  }
  Dataset data;
  data.d_x = parse_header_field(line, "d_x");
  data.d_phi = parse_header_field(line, "d_phi");
  const int n = parse_header_field(line, "n");
  data.split_index = parse_header_field(line, "split");
  if (data.d_x < 1 || data.d_phi < 1 || n < 0 || data.split_index < 0 ||
      data.split_index > n) {
    throw std::runtime_error("dataset: invalid header values");
  }
  std::getline(in, line);  // column names
  const int width = data.d_x + 2 * data.d_phi + 1;
  data.records.reserve(n);
  std::vector<double> cells(width);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    int c = 0;
    while (std::getline(row, cell, ',')) {
      if (c >= width) throw std::runtime_error("dataset: too many columns");
      cells[c++] = std::stod(cell);
    }
    if (c != width) throw std::runtime_error("dataset: wrong column count");
    ComparisonRecord rec;
    rec.context = Eigen::Map<const Vector>(cells.data(), data.d_x);
    rec.phi1 = Eigen::Map<const Vector>(cells.data() + data.d_x, data.d_phi);
    rec.phi0 = Eigen::Map<const Vector>(cells.data() + data.d_x + data.d_phi, data.d_phi);
    rec.label = static_cast<int>(cells[width - 1]);
    rec.validate();
    data.records.push_back(std::move(rec));
  }
  if (static_cast<int>(data.records.size()) != n) {
    throw std::runtime_error("dataset: record count does not match header");
  }
  return data;
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(out, data);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in);
}

}  // namespace loco
