#include "lpc/formats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "lpc/errors.hpp"
#include "lpc/sampler.hpp"

namespace lpc {

namespace {

bool needs_quoting(const std::string& s) {
  return s.find_first_of(",\"\n") != std::string::npos;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

}  // namespace

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header, bool append)
    : out_(path, append ? std::ios::app : std::ios::trunc),
      width_(header.size()) {
  if (!out_) throw IoError("csv: cannot open '" + path + "' for write");
  if (!append || out_.tellp() == 0) {
    row(header);
  }
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw Error("csv: row width " + std::to_string(cells.size()) +
                " does not match header width " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << (needs_quoting(cells[i]) ? quote(cells[i]) : cells[i]);
  }
  out_ << '\n';
}

std::string CsvWriter::num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("csv: cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    bool in_quotes = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      char c = line[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cell += '"';
            ++i;
          } else {
            in_quotes = false;
          }
        } else {
          cell += c;
        }
      } else if (c == '"') {
        in_quotes = true;
      } else if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(cell);
    if (first) {
      table.header = cells;
      first = false;
    } else {
      table.rows.push_back(cells);
    }
  }
  return table;
}

void write_pgm(const std::string& path, const Mat& image, double lo,
               double hi) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("pgm: cannot open '" + path + "' for write");
  out << "P5\n" << image.cols << " " << image.rows << "\n255\n";
  double span = hi - lo;
  if (span <= 0.0) span = 1.0;
  for (std::int64_t i = 0; i < image.rows; ++i) {
    for (std::int64_t j = 0; j < image.cols; ++j) {
      double v = (image.at(i, j) - lo) / span;
      v = std::min(std::max(v, 0.0), 1.0);
      out.put(static_cast<char>(std::lround(v * 255.0)));
    }
  }
  if (!out) throw IoError("pgm: write failed for '" + path + "'");
}

void write_sample_grid_pgm(const std::string& path, const Mat& samples,
                           std::int64_t image_rows, std::int64_t image_cols,
                           std::int64_t per_row) {
  if (image_rows * image_cols != samples.cols) {
    throw ShapeError("pgm grid: sample width does not match image geometry");
  }
  const std::int64_t n = samples.rows;
  const std::int64_t grid_cols = std::min(per_row, n);
  const std::int64_t grid_rows = (n + grid_cols - 1) / grid_cols;
  Mat canvas(grid_rows * image_rows, grid_cols * image_cols, 0.0);
  for (std::int64_t s = 0; s < n; ++s) {
    std::int64_t gr = s / grid_cols;
    std::int64_t gc = s % grid_cols;
    for (std::int64_t r = 0; r < image_rows; ++r) {
      for (std::int64_t c = 0; c < image_cols; ++c) {
        canvas.at(gr * image_rows + r, gc * image_cols + c) =
            samples.at(s, r * image_cols + c);
      }
    }
  }
  write_pgm(path, canvas, 0.0, 1.0);
}

void write_trace_csv(const std::string& path, const StepTrace& trace) {
  CsvWriter csv(path, {"step", "logp", "delta_logp", "grad_norm", "chain_id"});
  for (std::int64_t t = 0; t < trace.steps(); ++t) {
    for (std::int64_t c = 0; c < trace.chains(); ++c) {
      csv.row({std::to_string(t), CsvWriter::num(trace.logp[t][c]),
               CsvWriter::num(trace.delta_logp[t][c]),
               CsvWriter::num(trace.grad_norm[t][c]), std::to_string(c)});
    }
  }
}

void write_metric_report_csv(const std::string& path, const MetricReport& r) {
  CsvWriter csv(path, {"density", "coverage", "mmd", "real_count",
                       "fake_count", "k", "bandwidth"});
  csv.row({CsvWriter::num(r.density), CsvWriter::num(r.coverage),
           CsvWriter::num(r.mmd), std::to_string(r.real_count),
           std::to_string(r.fake_count), std::to_string(r.k),
           CsvWriter::num(r.bandwidth)});
}

void write_metric_report_json(const std::string& path, const MetricReport& r) {
  nlohmann::json j;
  j["density"] = r.density;
  j["coverage"] = r.coverage;
  j["mmd"] = r.mmd;
  j["real_count"] = r.real_count;
  j["fake_count"] = r.fake_count;
  j["k"] = r.k;
  j["bandwidth"] = r.bandwidth;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("json: cannot open '" + path + "' for write");
  out << j.dump(2) << "\n";
}

void write_trace_summary_csv(const std::string& path, const TraceSummary& s) {
  CsvWriter csv(path,
                {"step", "mean_logp", "mean_delta_logp", "p10_delta_logp",
                 "p50_delta_logp", "p90_delta_logp", "mean_grad_norm",
                 "p10_grad_norm", "p50_grad_norm", "p90_grad_norm"});
  for (std::size_t t = 0; t < s.mean_logp.size(); ++t) {
    csv.row({std::to_string(t), CsvWriter::num(s.mean_logp[t]),
             CsvWriter::num(s.mean_delta_logp[t]),
             CsvWriter::num(s.p10_delta_logp[t]),
             CsvWriter::num(s.p50_delta_logp[t]),
             CsvWriter::num(s.p90_delta_logp[t]),
             CsvWriter::num(s.mean_grad_norm[t]),
             CsvWriter::num(s.p10_grad_norm[t]),
             CsvWriter::num(s.p50_grad_norm[t]),
             CsvWriter::num(s.p90_grad_norm[t])});
  }
}

void write_projection_csv(const std::string& grid_path,
                          const std::string& traj_path,
                          const TrajectoryProjection& p) {
  {
    std::ofstream out(grid_path, std::ios::trunc);
    if (!out) throw IoError("csv: cannot open '" + grid_path + "' for write");
    // extents on a comment-style first row, then the raw matrix
    out << "# x_lo=" << CsvWriter::num(p.x_lo) << " x_hi="
        << CsvWriter::num(p.x_hi) << " y_lo=" << CsvWriter::num(p.y_lo)
        << " y_hi=" << CsvWriter::num(p.y_hi) << "\n";
    for (std::int64_t i = 0; i < p.grid.rows; ++i) {
      for (std::int64_t j = 0; j < p.grid.cols; ++j) {
        if (j) out << ',';
        out << CsvWriter::num(p.grid.at(i, j));
      }
      out << '\n';
    }
  }
  CsvWriter traj(traj_path, {"step", "pc1", "pc2"});
  for (std::int64_t t = 0; t < p.points.rows; ++t) {
    traj.row({std::to_string(t), CsvWriter::num(p.points.at(t, 0)),
              CsvWriter::num(p.points.at(t, 1))});
  }
}

void write_projection_pgm(const std::string& path,
                          const TrajectoryProjection& p) {
  double lo = p.grid.a.empty() ? 0.0 : p.grid.a.front();
  double hi = lo;
  for (double v : p.grid.a) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  write_pgm(path, p.grid, lo, hi);
}

}  // namespace lpc
