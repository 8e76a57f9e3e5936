#include "lumber/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lumber/errors.hpp"

namespace lumber {

namespace fs = std::filesystem;

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open " + tmp.string() + " for writing");
    out << content;
    if (!out.flush()) throw ValidationError("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  out.push_back(trim(field));
  return out;
}

std::string csv_field(const std::string& text) {
  if (text.find_first_of(",\"") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string where(const fs::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

double parse_number(const std::string& text, const fs::path& file, std::size_t line,
                    const std::string& field) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError(where(file, line) + ": cannot parse " + field + " '" + text + "'");
  }
  return v;
}

int parse_int(const std::string& text, const fs::path& file, std::size_t line,
              const std::string& field) {
  int v = 0;
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), last, v);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ValidationError(where(file, line) + ": cannot parse " + field + " '" + text + "'");
  }
  return v;
}

bool parse_flag(const std::string& text, const fs::path& file, std::size_t line) {
  if (text == "1" || text == "true" || text == "TRUE") return true;
  if (text == "0" || text == "false" || text == "FALSE") return false;
  throw ValidationError(where(file, line) + ": edge flag must be 0/1, got '" + text + "'");
}

}  // namespace

std::size_t CsvTable::column(const std::string& name, const std::string& source) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return c;
  }
  throw ValidationError(source + ": missing column '" + name + "'");
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    auto fields = split_row(line);
    if (!have_header) {
      t.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw ValidationError(where(path, number) + ": expected " + std::to_string(t.header.size()) +
                            " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_numbers.push_back(number);
  }
  if (!have_header) throw ValidationError(path.string() + ": empty file (no header)");
  return t;
}

ColumnMapping load_column_mapping(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open column mapping " + path.string());
  ColumnMapping mapping;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(where(path, number) + ": expected 'field = column'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!mapping.columns.contains(key)) {
      throw ValidationError(where(path, number) + ": unknown mapping field '" + key + "'");
    }
    mapping.columns[key] = value;
  }
  return mapping;
}

std::vector<Specimen> ingest(const fs::path& specimens_path, const fs::path& knots_path,
                             const CellGrid& grid, const ColumnMapping& mapping) {
  grid.validate();
  const CsvTable st = read_csv(specimens_path);
  const std::string sname = specimens_path.filename().string();
  const std::size_t c_id = st.column(mapping["specimens.id"], sname);
  const std::size_t c_moe = st.column(mapping["specimens.moe"], sname);
  const std::size_t c_uts = st.column(mapping["specimens.uts"], sname);
  const std::size_t c_cell = st.column(mapping["specimens.failure_cell"], sname);

  std::vector<Specimen> specimens;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t r = 0; r < st.rows.size(); ++r) {
    const auto& row = st.rows[r];
    const std::size_t line = st.line_numbers[r];
    Specimen s;
    s.id = row[c_id];
    if (s.id.empty()) throw ValidationError(where(specimens_path, line) + ": empty specimen id");
    if (index.contains(s.id)) {
      throw ValidationError(where(specimens_path, line) + ": duplicate specimen id '" + s.id + "'");
    }
    s.moe = parse_number(row[c_moe], specimens_path, line, "moe");
    const bool has_uts = !row[c_uts].empty();
    const bool has_cell = !row[c_cell].empty();
    if (has_uts) s.uts = parse_number(row[c_uts], specimens_path, line, "uts");
    if (has_cell) s.failure_cell = parse_int(row[c_cell], specimens_path, line, "failure_cell");
    try {
      s.validate(grid);
    } catch (const ValidationError& e) {
      throw ValidationError(where(specimens_path, line) + ": " + e.what());
    }
    index.emplace(s.id, specimens.size());
    specimens.push_back(std::move(s));
  }

  // A zero-byte knots file means every specimen is clear.
  if (fs::exists(knots_path) && fs::file_size(knots_path) == 0) return specimens;
  const CsvTable kt = read_csv(knots_path);
  const std::string kname = knots_path.filename().string();
  const std::size_t k_id = kt.column(mapping["knots.specimen_id"], kname);
  const std::size_t k_lx = kt.column(mapping["knots.lx"], kname);
  const std::size_t k_ly = kt.column(mapping["knots.ly"], kname);
  const std::size_t k_vol = kt.column(mapping["knots.volume"], kname);
  const std::size_t k_edge = kt.column(mapping["knots.edge"], kname);
  for (std::size_t r = 0; r < kt.rows.size(); ++r) {
    const auto& row = kt.rows[r];
    const std::size_t line = kt.line_numbers[r];
    const auto it = index.find(row[k_id]);
    if (it == index.end()) {
      throw ValidationError(where(knots_path, line) + ": unknown specimen id '" + row[k_id] + "'");
    }
    Knot k;
    k.lx = parse_number(row[k_lx], knots_path, line, "lx");
    k.ly = parse_number(row[k_ly], knots_path, line, "ly");
    k.volume = parse_number(row[k_vol], knots_path, line, "volume");
    k.edge = parse_flag(row[k_edge], knots_path, line);
    if (k.volume < 0.0) throw ValidationError(where(knots_path, line) + ": negative knot volume");
    if (k.ly < 0.0 || k.ly > grid.width) {
      throw ValidationError(where(knots_path, line) + ": ly outside [0, width]");
    }
    specimens[it->second].knots.push_back(k);
  }
  for (const Specimen& s : specimens) s.validate(grid);
  return specimens;
}

std::string specimens_csv(const std::vector<Specimen>& specimens) {
  std::ostringstream out;
  out << "id,moe_psi_e6,uts_psi_e3,failure_cell\n";
  for (const Specimen& s : specimens) {
    out << csv_field(s.id) << ',' << format_double(s.moe) << ',' << (s.uts ? format_double(*s.uts) : "")
        << ',' << (s.failure_cell ? std::to_string(*s.failure_cell) : "") << '\n';
  }
  return out.str();
}

std::string knots_csv(const std::vector<Specimen>& specimens) {
  std::ostringstream out;
  out << "specimen_id,lx_in,ly_in,volume_in3,edge\n";
  for (const Specimen& s : specimens) {
    for (const Knot& k : s.knots) {
      out << csv_field(s.id) << ',' << format_double(k.lx) << ',' << format_double(k.ly) << ','
          << format_double(k.volume) << ',' << (k.edge ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string truth_csv(const std::vector<TruthRecord>& truth) {
  std::ostringstream out;
  out << "id";
  const Eigen::Index cells = truth.empty() ? 0 : truth.front().clear.size();
  for (Eigen::Index j = 1; j <= cells; ++j) out << ",X" << j;
  for (Eigen::Index j = 1; j <= cells; ++j) out << ",Y" << j;
  out << '\n';
  for (const TruthRecord& t : truth) {
    out << csv_field(t.id);
    for (Eigen::Index j = 0; j < cells; ++j) out << ',' << format_double(t.clear(j));
    for (Eigen::Index j = 0; j < cells; ++j) out << ',' << format_double(t.adjusted(j));
    out << '\n';
  }
  return out.str();
}

std::string draws_csv(const PosteriorDraws& draws) {
  std::ostringstream out;
  out << "chain,iteration";
  for (auto name : ModelParams::kNames) out << ',' << name;
  out << ",log_posterior\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const ChainDraws& ch = draws.chains[c];
    for (Eigen::Index r = 0; r < ch.params.rows(); ++r) {
      out << c + 1 << ',' << draws.warmup + r + 1;
      for (Eigen::Index k = 0; k < ch.params.cols(); ++k) out << ',' << format_double(ch.params(r, k));
      out << ',' << format_double(ch.log_posterior(r)) << '\n';
    }
  }
  return out.str();
}

PosteriorDraws read_draws_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::string src = path.filename().string();
  const std::size_t c_chain = t.column("chain", src);
  const std::size_t c_iter = t.column("iteration", src);
  const std::size_t c_lp = t.column("log_posterior", src);
  std::array<std::size_t, ModelParams::kCount> cols{};
  for (std::size_t k = 0; k < cols.size(); ++k) cols[k] = t.column(std::string(ModelParams::kNames[k]), src);

  std::map<int, std::vector<std::size_t>> by_chain;
  int first_iter = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int chain = parse_int(t.rows[r][c_chain], path, t.line_numbers[r], "chain");
    const int iter = parse_int(t.rows[r][c_iter], path, t.line_numbers[r], "iteration");
    if (first_iter < 0 || iter < first_iter) first_iter = iter;
    by_chain[chain].push_back(r);
  }
  if (by_chain.empty()) throw ValidationError(src + ": no draws");
  PosteriorDraws out;
  out.warmup = first_iter - 1;
  for (const auto& [chain, rows] : by_chain) {
    ChainDraws c;
    c.params.resize(static_cast<Eigen::Index>(rows.size()), ModelParams::kCount);
    c.log_posterior.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = t.rows[rows[r]];
      const std::size_t line = t.line_numbers[rows[r]];
      for (std::size_t k = 0; k < cols.size(); ++k) {
        c.params(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
            parse_number(row[cols[k]], path, line, std::string(ModelParams::kNames[k]));
      }
      c.log_posterior(static_cast<Eigen::Index>(r)) = parse_number(row[c_lp], path, line, "log_posterior");
      std::array<double, ModelParams::kCount> a{};
      for (std::size_t k = 0; k < a.size(); ++k) {
        a[k] = c.params(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k));
      }
      if (!ModelParams::from_array(a).satisfies_constraints()) {
        throw ValidationError(where(path, line) + ": draw violates parameter constraints");
      }
    }
    out.chains.push_back(std::move(c));
  }
  return out;
}

std::string diagnostics_csv(const Diagnostics& d) {
  std::ostringstream out;
  out << "parameter,rhat,ess_bulk\n";
  for (std::size_t k = 0; k < ModelParams::kCount; ++k) {
    out << ModelParams::kNames[k] << ',' << (d.rhat[k] ? format_double(*d.rhat[k]) : "NA") << ','
        << format_double(d.ess[k]) << '\n';
  }
  return out.str();
}

std::string chain_stats_csv(const PosteriorDraws& draws) {
  std::ostringstream out;
  out << "chain,divergences,mean_accept,step_size,max_leapfrog_steps\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const ChainDraws& ch = draws.chains[c];
    out << c + 1 << ',' << ch.divergences << ',' << format_double(ch.mean_accept) << ','
        << format_double(ch.step_size) << ',' << ch.max_steps << '\n';
  }
  return out.str();
}

std::string summary_csv(const std::vector<QuantileRow>& rows) {
  std::ostringstream out;
  out << "parameter,q50,q2.5,q97.5\n";
  for (const QuantileRow& r : rows) {
    out << r.parameter;
    for (double v : r.values) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

std::string ppc_csv(const PpcReport& report) {
  std::ostringstream out;
  out << "quantity,observed,lower_2.5,upper_97.5,p_value,replicates,covered\n";
  for (const PpcQuantity& q : report.quantities) {
    out << q.name << ',' << format_double(q.observed) << ',' << format_double(q.lower) << ','
        << format_double(q.upper) << ',' << format_double(q.p_value) << ',' << q.replicated.size()
        << ',' << (q.covered() ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream out;
  out << "bin_lower,bin_upper,count\n";
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << format_double(h.edges[b]) << ',' << format_double(h.edges[b + 1]) << ',' << h.counts[b]
        << '\n';
  }
  return out.str();
}

std::string cv_csv(const CvReport& report) {
  std::ostringstream out;
  out << "model,metric,value,se\n";
  for (const ModelScores& m : report.models) {
    auto row = [&](const char* metric, const Metric& v) {
      out << m.model << ',' << metric << ',' << format_double(v.value) << ',' << format_double(v.se)
          << '\n';
    };
    row("mean_prediction", m.mean_prediction);
    row("mspe", m.mspe);
    row("mape", m.mape);
    row("interval_length", m.interval_length);
  }
  return out.str();
}

std::string cv_predictions_csv(const CvReport& report, const std::vector<Specimen>& specimens) {
  std::ostringstream out;
  out << "id,fold,observed,model,mean,lower,upper\n";
  for (const ModelScores& m : report.models) {
    for (std::size_t i = 0; i < specimens.size(); ++i) {
      const Prediction& p = m.predictions[i];
      out << csv_field(specimens[i].id) << ',' << report.fold_of[i] + 1 << ','
          << format_double(report.observed[i]) << ',' << m.model << ',' << format_double(p.mean)
          << ',' << format_double(p.lower) << ',' << format_double(p.upper) << '\n';
    }
  }
  return out.str();
}

std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::ostringstream out;
  out << "id,mean,q2.5,q97.5,draws\n";
  for (const PredictionRow& r : rows) {
    out << csv_field(r.id) << ',' << format_double(r.summary.mean) << ',' << format_double(r.summary.lower)
        << ',' << format_double(r.summary.upper) << ',' << r.summary.draws << '\n';
  }
  return out.str();
}

}  // namespace lumber
