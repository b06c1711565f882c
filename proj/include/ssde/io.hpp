#ifndef SSDE_IO_HPP
#define SSDE_IO_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "ssde/core.hpp"
#include "ssde/sampler.hpp"

namespace ssde::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON <-> model types

Mat matrix_from_json(const json& j, const std::string& what);
Vec vector_from_json(const json& j, const std::string& what);
json to_json(const Mat& m);
json to_json(const Vec& v);

/// Parses the `rates`, `modes`, `init` and `obs` keys of a model document.
ModelParams model_from_json(const json& doc);
json model_to_json(const ModelParams& p);

/// Parses a `hyper` object; keys mirror PriorHyperparams field names. Missing
/// keys keep the values of `defaults`.
PriorHyperparams hyper_from_json(const json& j, const PriorHyperparams& defaults);
json hyper_to_json(const PriorHyperparams& h);

json load_json(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// CSV

/// Formats a double with 17 significant digits and a '.' decimal separator.
std::string format_double(double x);

/// Writes RFC-4180 rows with CRLF line endings.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);
  void row(double first, const Vec& rest);
  void close();

 private:
  std::filesystem::path path_;
  std::string buffer_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column index of `name`; throws ValidationError "missing column '<name>'".
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Observation CSV with header t,x1..xn. With `dim` unset, n is the number of
/// consecutive x columns present.
ObservationSet read_observations(const std::filesystem::path& path, std::optional<int> dim = std::nullopt);

void write_observations(const std::filesystem::path& path, const ObservationSet& obs);
void write_mode_path(const std::filesystem::path& path, const MjpPath& z, const TimeGrid& grid);
void write_diffusion_path(const std::filesystem::path& path, const DiffusionPath& y, const TimeGrid& grid);
void write_marginals(const std::filesystem::path& dir, const EmpiricalMarginals& m);

// ---------------------------------------------------------------------------
// Sample store

json record_to_json(const ParamRecord& r);
/// Named scalars of one params.jsonl record, in the order of scalar_parameters.
std::vector<std::pair<std::string, double>> record_scalars(const json& record);

void write_params_jsonl(const std::filesystem::path& path, const std::vector<ParamRecord>& records);
/// Reads params.jsonl into trace form; throws ValidationError on a corrupt line.
TraceTable read_params_jsonl(const std::filesystem::path& path);

json diagnostics_to_json(const Diagnostics& d);
void write_json(const std::filesystem::path& path, const json& j);

/// Raw retained draws: z in jump form and y at the stored grid points.
void write_raw_samples(const std::filesystem::path& dir, const SampleStore& store, const TimeGrid& grid);

}  // namespace ssde::io

#endif  // SSDE_IO_HPP
