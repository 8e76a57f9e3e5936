#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lumber/evaluation.hpp"
#include "lumber/sampler.hpp"
#include "lumber/simulator.hpp"
#include "lumber/types.hpp"

namespace lumber {

/// 17 significant digits; round-trips every finite double.
std::string format_double(double x);

/// Write to `path.tmp` then rename over `path`.
void atomic_write(const std::filesystem::path& path, const std::string& content);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< 1-based source line per row

  std::size_t column(const std::string& name, const std::string& source) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Source-file column names for each field the model consumes. Defaults match
/// the files written by `simulate`. A mapping file has one `field = column`
/// per line, e.g. `specimens.uts = UTS_ksi`; `#` starts a comment.
struct ColumnMapping {
  std::map<std::string, std::string> columns = {
      {"specimens.id", "id"},          {"specimens.moe", "moe_psi_e6"},
      {"specimens.uts", "uts_psi_e3"}, {"specimens.failure_cell", "failure_cell"},
      {"knots.specimen_id", "specimen_id"}, {"knots.lx", "lx_in"},
      {"knots.ly", "ly_in"},           {"knots.volume", "volume_in3"},
      {"knots.edge", "edge"}};

  const std::string& operator[](const std::string& field) const { return columns.at(field); }
};

ColumnMapping load_column_mapping(const std::filesystem::path& path);

/// Join knots to specimens by id and validate every record against `grid`.
/// Errors name the file and line.
std::vector<Specimen> ingest(const std::filesystem::path& specimens_path,
                             const std::filesystem::path& knots_path, const CellGrid& grid,
                             const ColumnMapping& mapping = {});

std::string specimens_csv(const std::vector<Specimen>& specimens);
std::string knots_csv(const std::vector<Specimen>& specimens);
std::string truth_csv(const std::vector<TruthRecord>& truth);

/// chain, iteration, eta0..gamma1, log_posterior. Iterations count from 1
/// and include warmup, so the first retained row of a chain is warmup + 1.
std::string draws_csv(const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::filesystem::path& path);

std::string diagnostics_csv(const Diagnostics& diagnostics);
std::string chain_stats_csv(const PosteriorDraws& draws);
std::string summary_csv(const std::vector<QuantileRow>& rows);
std::string ppc_csv(const PpcReport& report);
std::string histogram_csv(const Histogram& h);
std::string cv_csv(const CvReport& report);
std::string cv_predictions_csv(const CvReport& report, const std::vector<Specimen>& specimens);

struct PredictionRow {
  std::string id;
  PredictiveSummary summary;
};
std::string predictions_csv(const std::vector<PredictionRow>& rows);

}  // namespace lumber
