#include <algorithm>
#include <cmath>
#include <string>

#include "ssde/errors.hpp"
#include "ssde/sampler.hpp"

namespace ssde {

namespace {

std::string idx(int i) { return std::to_string(i + 1); }

}  // namespace

std::vector<std::pair<std::string, double>> scalar_parameters(const ModelParams& p) {
  std::vector<std::pair<std::string, double>> out;
  const int K = p.num_modes();
  const int n = p.dim();
  for (int a = 0; a < K; ++a)
    for (int c = 0; c < K; ++c)
      if (a != c) out.emplace_back("Lambda_" + idx(a) + "_" + idx(c), p.rates(a, c));
  for (int m = 0; m < K; ++m) {
    const auto& mode = p.modes[static_cast<std::size_t>(m)];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.emplace_back("A_" + idx(m) + "_" + idx(i) + "_" + idx(j), mode.A()(i, j));
    for (int i = 0; i < n; ++i) out.emplace_back("b_" + idx(m) + "_" + idx(i), mode.b()[i]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) out.emplace_back("D_" + idx(m) + "_" + idx(i) + "_" + idx(j), mode.D()(i, j));
  }
  for (int m = 0; m < K; ++m) out.emplace_back("pi_" + idx(m), p.init.pi[m]);
  for (int i = 0; i < n; ++i) out.emplace_back("mu0_" + idx(i), p.init.mu0[i]);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) out.emplace_back("Sigma0_" + idx(i) + "_" + idx(j), p.init.Sigma0(i, j));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) out.emplace_back("Sigma_x_" + idx(i) + "_" + idx(j), p.obs.Sigma_x(i, j));
  return out;
}

double ess_batch_means(std::span<const double> trace) {
  const std::size_t n = trace.size();
  if (n == 0) return 0.0;
  if (n < 4) return static_cast<double>(n);
  const auto batch = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  const std::size_t batches = n / batch;
  const std::size_t used = batches * batch;

  double mean = 0.0;
  for (std::size_t i = 0; i < used; ++i) mean += trace[i];
  mean /= static_cast<double>(used);
  double var = 0.0;
  for (std::size_t i = 0; i < used; ++i) var += (trace[i] - mean) * (trace[i] - mean);
  var /= static_cast<double>(used - 1);

  double bm = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < batch; ++i) s += trace[b * batch + i];
    const double d = s / static_cast<double>(batch) - mean;
    bm += d * d;
  }
  bm *= static_cast<double>(batch) / static_cast<double>(batches - 1);

  if (!(var > 0.0) || !(bm > 0.0)) return static_cast<double>(n);
  const double ess = static_cast<double>(used) * var / bm;
  return std::clamp(ess, 1e-12, static_cast<double>(n));
}

void TraceTable::append(const std::vector<std::pair<std::string, double>>& scalars, const std::vector<int>& flags,
                        double seconds) {
  if (names.empty() && traces.empty()) {
    for (const auto& [name, value] : scalars) names.push_back(name);
    traces.resize(names.size());
  }
  if (scalars.size() != names.size()) throw ValidationError("trace table: inconsistent parameter count");
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    if (scalars[k].first != names[k]) throw ValidationError("trace table: parameter order mismatch at " + names[k]);
    traces[k].push_back(scalars[k].second);
  }
  mala_flags.push_back(flags);
  sweep_seconds.push_back(seconds);
}

Diagnostics compute_diagnostics(const TraceTable& table) {
  Diagnostics d;
  d.retained = static_cast<int>(table.size());
  if (table.size() == 0) return d;
  for (std::size_t k = 0; k < table.names.size(); ++k) d.ess.emplace_back(table.names[k], ess_batch_means(table.traces[k]));
  double accepted = 0.0;
  double proposals = 0.0;
  for (const auto& flags : table.mala_flags) {
    for (int f : flags) accepted += f;
    proposals += static_cast<double>(flags.size());
  }
  for (double s : table.sweep_seconds) d.total_seconds += s;
  d.mala_acceptance = proposals > 0.0 ? accepted / proposals : 0.0;
  d.mean_sweep_seconds = d.total_seconds / static_cast<double>(table.size());
  return d;
}

Diagnostics compute_diagnostics(std::span<const ParamRecord> records) {
  TraceTable table;
  for (const auto& r : records) table.append(scalar_parameters(r.params), r.mala_accepted, r.sweep_seconds);
  return compute_diagnostics(table);
}

}  // namespace ssde
