#include "synth/json_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

namespace synth {

namespace {

double mass_value(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_decimal(v.get<std::string>());
  throw DomainError("mass entries must be numbers or decimal strings");
}

std::vector<int> symbols_of(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  std::vector<int> s;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_integer()) throw DomainError(std::string(key) + " must hold integers");
    s.push_back(v.get<int>());
  }
  return s;
}

Eigen::MatrixXd matrix_of(const json& j) {
  if (!j.contains("mass")) throw DomainError("missing \"mass\"");
  const json& m = j.at("mass");
  if (!m.is_array() || m.empty()) throw DomainError("\"mass\" must be a nonempty array");
  if (m.front().is_array()) {
    const auto rows = static_cast<Index>(m.size());
    const auto cols = static_cast<Index>(m.front().size());
    Eigen::MatrixXd out(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      const json& row = m.at(static_cast<std::size_t>(r));
      if (!row.is_array() || static_cast<Index>(row.size()) != cols)
        throw DomainError("ragged mass matrix");
      for (Index c = 0; c < cols; ++c) out(r, c) = mass_value(row.at(static_cast<std::size_t>(c)));
    }
    return out;
  }
  if (!j.contains("shape")) throw DomainError("flat matrix mass needs \"shape\"");
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Index>(m.size()))
    throw DomainError("\"shape\" does not match mass length");
  Eigen::MatrixXd out(shape[0], shape[1]);
  for (Index r = 0; r < shape[0]; ++r)
    for (Index c = 0; c < shape[1]; ++c)
      out(r, c) = mass_value(m.at(static_cast<std::size_t>(r * shape[1] + c)));
  return out;
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw DomainError("expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw DomainError("unknown key \"" + key + "\"");
  }
}

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

Pmf pmf_from_json(const json& j) {
  reject_unknown(j, {"symbols", "mass"});
  if (!j.contains("mass") || !j.at("mass").is_array()) throw DomainError("Pmf needs a \"mass\" array");
  const json& m = j.at("mass");
  Eigen::VectorXd v(static_cast<Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) v(static_cast<Index>(i)) = mass_value(m[i]);
  return Pmf(v, symbols_of(j, "symbols"));
}

JointPmf joint_from_json(const json& j) {
  reject_unknown(j, {"row_symbols", "col_symbols", "mass", "shape"});
  return JointPmf(matrix_of(j), symbols_of(j, "row_symbols"), symbols_of(j, "col_symbols"));
}

Channel channel_from_json(const json& j) {
  reject_unknown(j, {"input_symbols", "output_symbols", "mass", "shape"});
  return Channel(matrix_of(j), symbols_of(j, "input_symbols"), symbols_of(j, "output_symbols"));
}

json to_json(const Pmf& p) {
  json m = json::array();
  for (Index i = 0; i < p.size(); ++i) m.push_back(p(i));
  return {{"symbols", p.symbols()}, {"mass", m}};
}

json to_json(const JointPmf& j) {
  return {{"row_symbols", j.row_symbols()}, {"col_symbols", j.col_symbols()},
          {"mass", matrix_json(j.mass())}};
}

json to_json(const Channel& c) {
  return {{"input_symbols", c.input_symbols()}, {"output_symbols", c.output_symbols()},
          {"mass", matrix_json(c.matrix())}};
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DomainError(path + ": " + e.what());
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_decimal(const std::string& s) {
  const auto slash = s.find('/');
  if (slash != std::string::npos)
    return parse_decimal(s.substr(0, slash)) / parse_decimal(s.substr(slash + 1));
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw DomainError("bad decimal \"" + s + "\"");
  return v;
}

}  // namespace synth
