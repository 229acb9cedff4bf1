#include "dsmpc/model_io.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace dsmpc {

namespace {

using nlohmann::json;

Mat parse_matrix(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ParseError("model: missing key '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_array() || v.empty() || !v.front().is_array())
    throw ParseError("model: '" + key + "' must be a nested array of rows");
  const size_t rows = v.size();
  const size_t cols = v.front().size();
  Mat out(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    const json& row = v.at(i);
    if (!row.is_array() || row.size() != cols)
      throw ParseError("model: '" + key + "' rows have unequal lengths");
    for (size_t c = 0; c < cols; ++c) {
      if (!row.at(c).is_number())
        throw ParseError("model: '" + key + "' has a non-numeric entry");
      out(Eigen::Index(i), Eigen::Index(c)) = row.at(c).get<double>();
    }
  }
  return out;
}

Vec parse_vector(const json& j, const std::string& key) {
  if (!j.contains(key)) throw ParseError("model: missing key '" + key + "'");
  const json& v = j.at(key);
  if (!v.is_array()) throw ParseError("model: '" + key + "' must be a flat array");
  Vec out(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    if (!v.at(i).is_number())
      throw ParseError("model: '" + key + "' has a non-numeric entry");
    out(Eigen::Index(i)) = v.at(i).get<double>();
  }
  return out;
}

double parse_scalar(const json& j, const std::string& key) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ParseError("model: missing or non-numeric key '" + key + "'");
  return j.at(key).get<double>();
}

json matrix_to_json(const Mat& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(i, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

SystemModel model_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& ex) {
    throw ParseError(std::string("model: invalid JSON: ") + ex.what());
  }
  if (!j.is_object()) throw ParseError("model: top level must be an object");

  SystemModel m;
  m.A = parse_matrix(j, "A");
  m.B = parse_matrix(j, "B");
  m.W = parse_matrix(j, "W");
  m.C = parse_matrix(j, "C");
  m.Q = parse_matrix(j, "Q");
  m.R = parse_matrix(j, "R");
  m.x_ref = parse_vector(j, "x_ref");
  m.u_ref = parse_vector(j, "u_ref");
  m.t = parse_scalar(j, "t");
  m.e = parse_scalar(j, "e");
  m.gamma = parse_scalar(j, "gamma");
  if (!j.contains("N") || !j.at("N").is_number_integer())
    throw ParseError("model: missing or non-integer key 'N'");
  m.N = j.at("N").get<int>();

  if (j.contains("K")) {
    m.K = parse_matrix(j, "K");
  } else {
    // Default prediction feedback: the unconstrained LQ gain.
    m.K = lq_gain(m).K_lq;
  }
  return m;
}

SystemModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("model: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json_text(buf.str());
}

std::string model_to_json_text(const SystemModel& m) {
  json j;
  j["A"] = matrix_to_json(m.A);
  j["B"] = matrix_to_json(m.B);
  j["W"] = matrix_to_json(m.W);
  j["C"] = matrix_to_json(m.C);
  j["Q"] = matrix_to_json(m.Q);
  j["R"] = matrix_to_json(m.R);
  j["x_ref"] = vector_to_json(m.x_ref);
  j["u_ref"] = vector_to_json(m.u_ref);
  j["K"] = matrix_to_json(m.K);
  j["t"] = m.t;
  j["e"] = m.e;
  j["gamma"] = m.gamma;
  j["N"] = m.N;
  return j.dump();  // nlohmann::json keeps object keys sorted
}

std::string model_hash(const SystemModel& m) {
  const std::string text = model_to_json_text(m);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace dsmpc
