#include "ssde/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ssde/errors.hpp"

namespace ssde::io {

namespace fs = std::filesystem;

namespace {

const json& require_key(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(where + ": missing key '" + key + "'");
  return j.at(key);
}

double number(const json& j, const std::string& what) {
  if (!j.is_number()) throw ValidationError(what + ": expected a number");
  return j.get<double>();
}

std::string quote_field(const std::string& f) {
  if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("csv line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

double parse_double(const std::string& s, int line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && *begin == ' ') ++begin;
  while (end > begin && end[-1] == ' ') --end;
  if (begin < end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) {
    throw ValidationError("csv line " + std::to_string(line_no) + ": invalid number '" + s + "'");
  }
  return v;
}

std::string mode_label(int z) { return std::to_string(z + 1); }

}  // namespace

// ---------------------------------------------------------------------------

Mat matrix_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError(what + ": expected a non-empty matrix");
  if (!j.front().is_array()) {
    Mat m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = number(j[i], what);
    return m;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ValidationError("dimension mismatch: " + what + " has ragged rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], what);
  }
  return m;
}

Vec vector_from_json(const json& j, const std::string& what) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError(what + ": expected a non-empty vector");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], what);
  return v;
}

json to_json(const Mat& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

json to_json(const Vec& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

ModelParams model_from_json(const json& doc) {
  ModelParams p;
  // An all-zero diagonal means "fill in from the off-diagonal rates"; otherwise the
  // matrix is taken as a full generator and checked.
  const Mat rates = matrix_from_json(require_key(doc, "rates", "model"), "rates");
  if (rates.rows() != rates.cols()) throw ValidationError("dimension mismatch: rates must be square");
  p.rates = rates.diagonal().isZero(0.0) ? RateMatrix::from_offdiagonal(rates) : RateMatrix(rates);
  const auto& modes = require_key(doc, "modes", "model");
  if (!modes.is_array()) throw ValidationError("model: 'modes' must be an array");
  for (std::size_t z = 0; z < modes.size(); ++z) {
    const std::string where = "modes[" + std::to_string(z) + "]";
    Mat A = matrix_from_json(require_key(modes[z], "A", where), where + ".A");
    Vec b = vector_from_json(require_key(modes[z], "b", where), where + ".b");
    Mat Q = matrix_from_json(require_key(modes[z], "Q", where), where + ".Q");
    if (A.rows() != b.size() || A.cols() != b.size() || Q.rows() != b.size()) {
      throw ValidationError("dimension mismatch: " + where);
    }
    p.modes.emplace_back(std::move(A), std::move(b), std::move(Q));
  }
  const auto& init = require_key(doc, "init", "model");
  p.init.pi = vector_from_json(require_key(init, "pi", "init"), "init.pi");
  p.init.mu0 = vector_from_json(require_key(init, "mu0", "init"), "init.mu0");
  p.init.Sigma0 = matrix_from_json(require_key(init, "Sigma0", "init"), "init.Sigma0");
  const auto& obs = require_key(doc, "obs", "model");
  p.obs.Sigma_x = matrix_from_json(require_key(obs, "Sigma_x", "obs"), "obs.Sigma_x");
  validate_params(p);
  return p;
}

json model_to_json(const ModelParams& p) {
  json doc;
  doc["rates"] = to_json(p.rates.matrix());
  doc["modes"] = json::array();
  for (const auto& m : p.modes) doc["modes"].push_back({{"A", to_json(m.A())}, {"b", to_json(m.b())}, {"Q", to_json(m.Q())}});
  doc["init"] = {{"pi", to_json(p.init.pi)}, {"mu0", to_json(p.init.mu0)}, {"Sigma0", to_json(p.init.Sigma0)}};
  doc["obs"] = {{"Sigma_x", to_json(p.obs.Sigma_x)}};
  return doc;
}

PriorHyperparams hyper_from_json(const json& j, const PriorHyperparams& defaults) {
  if (!j.is_object()) throw ValidationError("hyper: expected an object");
  PriorHyperparams h = defaults;
  auto per_mode = [&](const char* key, std::vector<Mat>& out) {
    if (!j.contains(key)) return;
    const auto& arr = j.at(key);
    if (!arr.is_array()) throw ValidationError(std::string("hyper.") + key + ": expected an array per mode");
    out.clear();
    for (const auto& m : arr) out.push_back(matrix_from_json(m, std::string("hyper.") + key));
  };
  if (j.contains("alpha")) h.alpha = vector_from_json(j.at("alpha"), "hyper.alpha");
  if (j.contains("eta")) h.eta = vector_from_json(j.at("eta"), "hyper.eta");
  if (j.contains("lambda")) h.lambda = number(j.at("lambda"), "hyper.lambda");
  if (j.contains("Psi")) h.Psi = matrix_from_json(j.at("Psi"), "hyper.Psi");
  if (j.contains("kappa")) h.kappa = number(j.at("kappa"), "hyper.kappa");
  if (j.contains("s")) h.s = number(j.at("s"), "hyper.s");
  if (j.contains("r")) h.r = number(j.at("r"), "hyper.r");
  per_mode("M", h.M);
  per_mode("K", h.K);
  per_mode("Psi_D", h.Psi_D);
  if (j.contains("lambda_D")) {
    h.lambda_D.clear();
    for (const auto& v : j.at("lambda_D")) h.lambda_D.push_back(number(v, "hyper.lambda_D"));
  }
  if (j.contains("Psi_x")) h.Psi_x = matrix_from_json(j.at("Psi_x"), "hyper.Psi_x");
  if (j.contains("lambda_x")) h.lambda_x = number(j.at("lambda_x"), "hyper.lambda_x");
  if (j.contains("xi")) h.xi = number(j.at("xi"), "hyper.xi");
  h.validate();
  return h;
}

json hyper_to_json(const PriorHyperparams& h) {
  json j;
  j["alpha"] = to_json(h.alpha);
  j["eta"] = to_json(h.eta);
  j["lambda"] = h.lambda;
  j["Psi"] = to_json(h.Psi);
  j["kappa"] = h.kappa;
  j["s"] = h.s;
  j["r"] = h.r;
  j["M"] = json::array();
  j["K"] = json::array();
  j["Psi_D"] = json::array();
  for (std::size_t z = 0; z < h.M.size(); ++z) {
    j["M"].push_back(to_json(h.M[z]));
    j["K"].push_back(to_json(h.K[z]));
    j["Psi_D"].push_back(to_json(h.Psi_D[z]));
  }
  j["lambda_D"] = h.lambda_D;
  j["Psi_x"] = to_json(h.Psi_x);
  j["lambda_x"] = h.lambda_x;
  j["xi"] = h.xi;
  return j;
}

json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
}

// ---------------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

CsvWriter::CsvWriter(const fs::path& path) : path_(path) {}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) buffer_ += ',';
    buffer_ += quote_field(fields[i]);
  }
  buffer_ += "\r\n";
}

void CsvWriter::row(double first, const Vec& rest) {
  buffer_ += format_double(first);
  for (Eigen::Index i = 0; i < rest.size(); ++i) {
    buffer_ += ',';
    buffer_ += format_double(rest[i]);
  }
  buffer_ += "\r\n";
}

void CsvWriter::close() {
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path_.string());
  out << buffer_;
  if (!out) throw IoError("write failed for " + path_.string());
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ValidationError("missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, line_no);
    if (table.header.empty()) {
      for (auto& f : fields) {
        const auto b = f.find_first_not_of(' ');
        const auto e = f.find_last_not_of(' ');
        f = b == std::string::npos ? "" : f.substr(b, e - b + 1);
      }
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError("csv line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    }
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f, line_no));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw ValidationError(path.string() + ": empty CSV (no header)");
  return table;
}

ObservationSet read_observations(const fs::path& path, std::optional<int> dim) {
  const auto table = read_csv(path);
  const std::size_t tcol = table.column("t");
  int n = 0;
  if (dim) {
    n = *dim;
  } else {
    auto has = [&](const std::string& name) {
      for (const auto& h : table.header)
        if (h == name) return true;
      return false;
    };
    while (has("x" + std::to_string(n + 1))) ++n;
    if (n == 0) throw ValidationError("missing column 'x1'");
  }
  std::vector<std::size_t> xcols;
  for (int i = 0; i < n; ++i) xcols.push_back(table.column("x" + std::to_string(i + 1)));

  ObservationSet obs;
  obs.values.resize(n, static_cast<Eigen::Index>(table.rows.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    obs.times.push_back(table.rows[r][tcol]);
    for (int i = 0; i < n; ++i) obs.values(i, static_cast<Eigen::Index>(r)) = table.rows[r][xcols[static_cast<std::size_t>(i)]];
  }
  return obs;
}

void write_observations(const fs::path& path, const ObservationSet& obs) {
  CsvWriter w(path);
  std::vector<std::string> header{"t"};
  for (int i = 0; i < obs.dim(); ++i) header.push_back("x" + std::to_string(i + 1));
  w.row(header);
  for (int k = 0; k < obs.size(); ++k) w.row(obs.times[static_cast<std::size_t>(k)], obs.values.col(k));
  w.close();
}

void write_mode_path(const fs::path& path, const MjpPath& z, const TimeGrid& grid) {
  CsvWriter w(path);
  w.row({"t", "z"});
  const auto modes = z.on_grid(grid);
  for (int l = 0; l < grid.points(); ++l) w.row({format_double(grid.time(l)), mode_label(modes[static_cast<std::size_t>(l)])});
  w.close();
}

void write_diffusion_path(const fs::path& path, const DiffusionPath& y, const TimeGrid& grid) {
  CsvWriter w(path);
  std::vector<std::string> header{"t"};
  for (int i = 0; i < y.dim(); ++i) header.push_back("y" + std::to_string(i + 1));
  w.row(header);
  for (int l = 0; l < y.points(); ++l) w.row(grid.time(l), y.at(l));
  w.close();
}

void write_marginals(const fs::path& dir, const EmpiricalMarginals& m) {
  {
    CsvWriter w(dir / "z_marginal.csv");
    std::vector<std::string> header{"t"};
    for (Eigen::Index k = 0; k < m.z_prob.rows(); ++k) header.push_back("p" + std::to_string(k + 1));
    w.row(header);
    for (std::size_t l = 0; l < m.z_times.size(); ++l) w.row(m.z_times[l], m.z_prob.col(static_cast<Eigen::Index>(l)));
    w.close();
  }
  CsvWriter w(dir / "y_marginal.csv");
  const auto n = m.y_mean.rows();
  std::vector<std::string> header{"t"};
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("mean" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("q05_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("q95_" + std::to_string(i + 1));
  w.row(header);
  Vec row(3 * n);
  for (std::size_t l = 0; l < m.y_times.size(); ++l) {
    const auto c = static_cast<Eigen::Index>(l);
    row << m.y_mean.col(c), m.y_q05.col(c), m.y_q95.col(c);
    w.row(m.y_times[l], row);
  }
  w.close();
}

// ---------------------------------------------------------------------------

json record_to_json(const ParamRecord& r) {
  const auto& p = r.params;
  json j;
  j["sweep"] = r.sweep;
  j["rates"] = to_json(p.rates.matrix());
  j["modes"] = json::array();
  for (const auto& m : p.modes) j["modes"].push_back({{"A", to_json(m.A())}, {"b", to_json(m.b())}, {"D", to_json(m.D())}});
  j["pi"] = to_json(p.init.pi);
  j["mu0"] = to_json(p.init.mu0);
  j["Sigma0"] = to_json(p.init.Sigma0);
  j["Sigma_x"] = to_json(p.obs.Sigma_x);
  j["mala_accepted"] = r.mala_accepted;
  j["sweep_seconds"] = r.sweep_seconds;
  return j;
}

std::vector<std::pair<std::string, double>> record_scalars(const json& j) {
  const Mat rates = matrix_from_json(require_key(j, "rates", "record"), "rates");
  const auto& modes = require_key(j, "modes", "record");
  const Vec pi = vector_from_json(require_key(j, "pi", "record"), "pi");
  const Vec mu0 = vector_from_json(require_key(j, "mu0", "record"), "mu0");
  const Mat Sigma0 = matrix_from_json(require_key(j, "Sigma0", "record"), "Sigma0");
  const Mat Sigma_x = matrix_from_json(require_key(j, "Sigma_x", "record"), "Sigma_x");
  const auto K = rates.rows();
  const auto n = mu0.size();
  if (rates.cols() != K || static_cast<Eigen::Index>(modes.size()) != K || pi.size() != K) {
    throw ValidationError("record: inconsistent number of modes");
  }
  auto idx = [](Eigen::Index i) { return std::to_string(i + 1); };
  std::vector<std::pair<std::string, double>> out;
  for (Eigen::Index a = 0; a < K; ++a)
    for (Eigen::Index c = 0; c < K; ++c)
      if (a != c) out.emplace_back("Lambda_" + idx(a) + "_" + idx(c), rates(a, c));
  for (Eigen::Index m = 0; m < K; ++m) {
    const auto& mode = modes[static_cast<std::size_t>(m)];
    const Mat A = matrix_from_json(require_key(mode, "A", "record mode"), "A");
    const Vec b = vector_from_json(require_key(mode, "b", "record mode"), "b");
    const Mat D = matrix_from_json(require_key(mode, "D", "record mode"), "D");
    if (A.rows() != n || A.cols() != n || b.size() != n || D.rows() != n || D.cols() != n) {
      throw ValidationError("record: mode dimension mismatch");
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) out.emplace_back("A_" + idx(m) + "_" + idx(i) + "_" + idx(k), A(i, k));
    for (Eigen::Index i = 0; i < n; ++i) out.emplace_back("b_" + idx(m) + "_" + idx(i), b[i]);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k <= i; ++k) out.emplace_back("D_" + idx(m) + "_" + idx(i) + "_" + idx(k), D(i, k));
  }
  for (Eigen::Index m = 0; m < K; ++m) out.emplace_back("pi_" + idx(m), pi[m]);
  for (Eigen::Index i = 0; i < n; ++i) out.emplace_back("mu0_" + idx(i), mu0[i]);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) out.emplace_back("Sigma0_" + idx(i) + "_" + idx(k), Sigma0(i, k));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k <= i; ++k) out.emplace_back("Sigma_x_" + idx(i) + "_" + idx(k), Sigma_x(i, k));
  return out;
}

void write_params_jsonl(const fs::path& path, const std::vector<ParamRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

TraceTable read_params_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TraceTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const auto flags = require_key(j, "mala_accepted", "record").get<std::vector<int>>();
      table.append(record_scalars(j), flags, number(require_key(j, "sweep_seconds", "record"), "sweep_seconds"));
    } catch (const json::exception& e) {
      throw ValidationError(path.filename().string() + " line " + std::to_string(line_no) + ": corrupt record (" +
                            e.what() + ")");
    } catch (const ValidationError& e) {
      throw ValidationError(path.filename().string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

json diagnostics_to_json(const Diagnostics& d) {
  json ess = json::object();
  for (const auto& [name, value] : d.ess) ess[name] = value;
  return {{"ess", ess},
          {"mala_acceptance", d.mala_acceptance},
          {"mean_sweep_seconds", d.mean_sweep_seconds},
          {"total_seconds", d.total_seconds},
          {"retained", d.retained}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

void write_raw_samples(const fs::path& dir, const SampleStore& store, const TimeGrid& grid) {
  fs::create_directories(dir);
  {
    CsvWriter w(dir / "z_draws.csv");
    w.row({"draw", "t", "z"});
    for (std::size_t d = 0; d < store.z_paths.size(); ++d) {
      const auto& z = store.z_paths[d];
      const std::string draw = std::to_string(d + 1);
      w.row({draw, format_double(0.0), mode_label(z.states().front())});
      for (std::size_t k = 0; k < z.num_jumps(); ++k) {
        w.row({draw, format_double(z.jump_times()[k]), mode_label(z.states()[k + 1])});
      }
    }
    w.close();
  }
  CsvWriter w(dir / "y_draws.csv");
  if (store.y_paths.empty()) {
    w.row({"draw", "t"});
    w.close();
    return;
  }
  std::vector<std::string> header{"draw", "t"};
  for (Eigen::Index i = 0; i < store.y_paths.front().rows(); ++i) header.push_back("y" + std::to_string(i + 1));
  w.row(header);
  for (std::size_t d = 0; d < store.y_paths.size(); ++d) {
    const auto& y = store.y_paths[d];
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      std::vector<std::string> fields{std::to_string(d + 1), format_double(grid.time(static_cast<int>(c) * store.stride))};
      for (Eigen::Index i = 0; i < y.rows(); ++i) fields.push_back(format_double(y(i, c)));
      w.row(fields);
    }
  }
  w.close();
}

}  // namespace ssde::io
