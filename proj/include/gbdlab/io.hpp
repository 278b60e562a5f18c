#pragma once

// File formats: fields and partitions (one-line JSON header followed by a
// payload), CSV reports and PGM images.

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "gbdlab/field.hpp"

namespace gbd {

inline constexpr std::string_view kFieldSchema = "gbdlab-field/1";
inline constexpr std::string_view kPartitionSchema = "gbdlab-partition/1";

enum class Payload { Binary, Csv };

/// Values and facets only; an analytic sampler is not stored.
void write_field(const std::filesystem::path& path, const DisplacementField& field, Payload payload = Payload::Binary);
DisplacementField read_field(const std::filesystem::path& path);

void write_partition(const std::filesystem::path& path, const CaccioppoliPartition& partition);
CaccioppoliPartition read_partition(const std::filesystem::path& path);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);

  CsvWriter& operator<<(double v);
  CsvWriter& operator<<(long long v);
  CsvWriter& operator<<(int v) { return *this << static_cast<long long>(v); }
  CsvWriter& operator<<(std::size_t v) { return *this << static_cast<long long>(v); }
  CsvWriter& operator<<(bool v) { return *this << std::string(v ? "true" : "false"); }
  CsvWriter& operator<<(const std::string& v);
  CsvWriter& operator<<(const char* v) { return *this << std::string(v); }
  void end_row();

 private:
  void separator();
  std::ofstream out_;
  std::size_t columns_;
  std::size_t written_ = 0;
};

/// 8-bit binary PGM of a 2D grid (row 0 at the top is the highest axis-1 index).
/// Values are scaled linearly from [lo, hi] to [0, 255].
void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<double>& values,
               double lo, double hi);

/// Scalar cell grid as an image; 3D domains use the middle slice along axis 2.
void write_cell_image(const std::filesystem::path& path, const Domain& domain, const std::vector<double>& values);

}  // namespace gbd
