#include "dcem/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dcem {

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "unknown";
}

namespace {

bool is_bit(int v) { return v == 0 || v == 1; }

double parse_double(std::string_view field, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw std::runtime_error("line " + std::to_string(line) + ": bad number '" +
                             std::string(field) + "'");
  }
  return v;
}

int parse_bit(std::string_view field, std::size_t line) {
  if (field == "0") return 0;
  if (field == "1") return 1;
  throw std::runtime_error("line " + std::to_string(line) + ": expected 0/1, got '" +
                           std::string(field) + "'");
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void Dataset::validate() const {
  const std::size_t d = dim();
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    if (e.x.size() != d) {
      throw std::invalid_argument("example " + std::to_string(i) + " has dimension " +
                                  std::to_string(e.x.size()) + ", expected " +
                                  std::to_string(d));
    }
    if (!is_bit(e.a) || !is_bit(e.t) || !is_bit(e.y) || !is_bit(e.y_obs)) {
      throw std::invalid_argument("example " + std::to_string(i) + " has a non-binary field");
    }
    if (e.y_obs != e.y * e.t) {
      throw std::invalid_argument("example " + std::to_string(i) + " violates y_obs = y * t");
    }
  }
}

Eigen::MatrixXd feature_matrix(const Dataset& data, FeatureSet features,
                               const std::vector<std::size_t>& rows) {
  const Eigen::Index d = static_cast<Eigen::Index>(data.dim());
  const Eigen::Index rows_out = features == FeatureSet::kXAndGroup ? d + 1 : d;
  Eigen::MatrixXd m(rows_out, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto& e = data.examples.at(rows[c]);
    for (Eigen::Index j = 0; j < d; ++j) m(j, static_cast<Eigen::Index>(c)) = e.x[j];
    if (features == FeatureSet::kXAndGroup) m(d, static_cast<Eigen::Index>(c)) = e.a;
  }
  return m;
}

Eigen::MatrixXd feature_matrix(const Dataset& data, FeatureSet features) {
  return feature_matrix(data, features, all_rows(data));
}

std::vector<std::size_t> all_rows(const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return rows;
}

void write_csv(const Dataset& data, std::ostream& out) {
  const std::size_t d = data.dim();
  for (std::size_t j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "a,t,y,y_obs\n";
  char buf[64];
  for (const auto& e : data.examples) {
    for (double v : e.x) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << e.a << ',' << e.t << ',' << e.y << ',' << e.y_obs << '\n';
  }
}

void write_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(data, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Dataset read_csv(std::istream& in, Split split) {
  Dataset data;
  data.split = split;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty dataset file");
  const auto header = split_commas(line);
  if (header.size() < 4 || header[header.size() - 4] != "a" || header[header.size() - 3] != "t" ||
      header[header.size() - 2] != "y" || header[header.size() - 1] != "y_obs") {
    throw std::runtime_error("line 1: header must end with a,t,y,y_obs");
  }
  const std::size_t d = header.size() - 4;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[j] != "x" + std::to_string(j)) {
      throw std::runtime_error("line 1: expected column x" + std::to_string(j));
    }
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields");
    }
    LabeledExample e;
    e.x.resize(d);
    for (std::size_t j = 0; j < d; ++j) e.x[j] = parse_double(fields[j], lineno);
    e.a = parse_bit(fields[d], lineno);
    e.t = parse_bit(fields[d + 1], lineno);
    e.y = parse_bit(fields[d + 2], lineno);
    e.y_obs = parse_bit(fields[d + 3], lineno);
    data.examples.push_back(std::move(e));
  }
  data.validate();
  return data;
}

Dataset read_csv(const std::string& path, Split split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_csv(in, split);
}

}  // namespace dcem
