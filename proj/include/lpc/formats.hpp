#ifndef LPC_FORMATS_HPP
#define LPC_FORMATS_HPP

#include <fstream>
#include <string>
#include <vector>

#include "lpc/eval.hpp"
#include "lpc/mat.hpp"

namespace lpc {

// Minimal RFC-4180-style CSV: header row, comma separators, quoting only
// when a cell contains a comma, quote or newline. Numbers print as %.17g,
// so files round-trip doubles exactly.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            bool append = false);
  void row(const std::vector<std::string>& cells);
  void flush() { out_.flush(); }
  static std::string num(double v);

 private:
  std::ofstream out_;
  std::size_t width_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

// Binary P5 PGM, one byte per pixel. Values are clamped to [lo, hi] and
// mapped linearly to 0..255.
void write_pgm(const std::string& path, const Mat& image, double lo,
               double hi);

// A strip of samples rendered side by side (for image datasets).
void write_sample_grid_pgm(const std::string& path, const Mat& samples,
                           std::int64_t image_rows, std::int64_t image_cols,
                           std::int64_t per_row);

void write_metric_report_csv(const std::string& path, const MetricReport& r);
void write_metric_report_json(const std::string& path, const MetricReport& r);

void write_trace_summary_csv(const std::string& path, const TraceSummary& s);

// Projection artifacts: the grid as a CSV matrix, the projected trajectory,
// and a PGM heat map of the negative log joint.
void write_projection_csv(const std::string& grid_path,
                          const std::string& traj_path,
                          const TrajectoryProjection& p);
void write_projection_pgm(const std::string& path,
                          const TrajectoryProjection& p);

}  // namespace lpc

#endif  // LPC_FORMATS_HPP
