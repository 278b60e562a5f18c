#include "gbdlab/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <sstream>

#include "json.hpp"

namespace gbd {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "binary payloads assume a little-endian host");

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec json_vec(const json& a, int d, const char* what) {
  if (!a.is_array() || static_cast<int>(a.size()) != d) throw FormatError(std::string("bad vector for ") + what);
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json domain_json(const Domain& dom) {
  return json{{"dim", dom.dim()}, {"lo", vec_json(dom.lo())}, {"hi", vec_json(dom.hi())}, {"h", dom.h()}};
}

Domain json_domain(const json& j) {
  const int d = j.at("dim").get<int>();
  if (d < 2 || d > 3) throw FormatError("dimension must be 2 or 3");
  return Domain(d, json_vec(j.at("lo"), d, "lo"), json_vec(j.at("hi"), d, "hi"), j.at("h").get<double>());
}

std::pair<json, std::string> read_header(std::ifstream& in, std::string_view schema) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing header line");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || header.value("schema", "") != schema)
    throw FormatError("unexpected schema tag, expected " + std::string(schema));
  return {header, line};
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_field(const std::filesystem::path& path, const DisplacementField& field, Payload payload) {
  const Domain& dom = field.domain();
  json header = domain_json(dom);
  header["schema"] = kFieldSchema;
  header["layout"] = "cell-centered, axis 0 fastest, components interleaved";
  header["payload"] = payload == Payload::Binary ? "binary" : "csv";
  json facets = json::array();
  for (const auto& f : field.jumps())
    facets.push_back({{"axis", f.axis},
                      {"position", f.position},
                      {"lo", vec_json(f.lo)},
                      {"hi", vec_json(f.hi)},
                      {"jump", vec_json(f.jump)},
                      {"orientation", f.orientation}});
  header["facets"] = facets;
  std::ofstream out = open_out(path);
  out << header.dump() << '\n';
  const auto& v = field.values();
  if (payload == Payload::Binary) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    const std::size_t d = static_cast<std::size_t>(dom.dim());
    for (std::size_t c = 0; c < dom.cell_count(); ++c) {
      for (std::size_t i = 0; i < d; ++i) out << (i ? "," : "") << format_double(v[c * d + i]);
      out << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

DisplacementField read_field(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  auto [header, line] = read_header(in, kFieldSchema);
  try {
    const Domain dom = json_domain(header);
    const int d = dom.dim();
    std::vector<JumpFacet> facets;
    for (const auto& f : header.at("facets"))
      facets.push_back(JumpFacet::axis_aligned(f.at("axis").get<int>(), f.at("position").get<double>(),
                                               json_vec(f.at("lo"), d, "facet lo"), json_vec(f.at("hi"), d, "facet hi"),
                                               json_vec(f.at("jump"), d, "facet jump"),
                                               f.at("orientation").get<int>()));
    const std::size_t n = dom.cell_count() * static_cast<std::size_t>(d);
    std::vector<double> values(n);
    const std::string payload = header.at("payload").get<std::string>();
    if (payload == "binary") {
      in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(n * sizeof(double)));
      if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) throw FormatError("truncated binary payload");
    } else if (payload == "csv") {
      std::string row;
      std::size_t i = 0;
      while (std::getline(in, row)) {
        if (row.empty()) continue;
        std::size_t pos = 0;
        while (pos <= row.size()) {
          const std::size_t comma = std::min(row.find(',', pos), row.size());
          if (i >= n) throw FormatError("too many values in csv payload");
          const auto res = std::from_chars(row.data() + pos, row.data() + comma, values[i]);
          if (res.ec != std::errc() || res.ptr != row.data() + comma) throw FormatError("bad number in csv payload");
          ++i;
          pos = comma + 1;
        }
      }
      if (i != n) throw FormatError("wrong number of values in csv payload");
    } else {
      throw FormatError("unknown payload kind: " + payload);
    }
    return DisplacementField(dom, std::move(values), std::move(facets));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed field header: ") + e.what());
  }
}

void write_partition(const std::filesystem::path& path, const CaccioppoliPartition& partition) {
  json header = domain_json(partition.domain());
  header["schema"] = kPartitionSchema;
  header["layout"] = "int32 label per cell, axis 0 fastest";
  header["pieces"] = partition.pieces();
  header["perimeter"] = partition.perimeter();
  std::ofstream out = open_out(path);
  out << header.dump() << '\n';
  std::vector<std::int32_t> labels(partition.labels().begin(), partition.labels().end());
  out.write(reinterpret_cast<const char*>(labels.data()),
            static_cast<std::streamsize>(labels.size() * sizeof(std::int32_t)));
  if (!out) throw Error("failed writing " + path.string());
}

CaccioppoliPartition read_partition(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  auto [header, line] = read_header(in, kPartitionSchema);
  try {
    const Domain dom = json_domain(header);
    std::vector<std::int32_t> raw(dom.cell_count());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * sizeof(std::int32_t)));
    if (static_cast<std::size_t>(in.gcount()) != raw.size() * sizeof(std::int32_t))
      throw FormatError("truncated label payload");
    return CaccioppoliPartition(dom, std::vector<int>(raw.begin(), raw.end()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed partition header: ") + e.what());
  }
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(open_out(path)), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::separator() {
  if (written_ > 0) out_ << ',';
  ++written_;
}

CsvWriter& CsvWriter::operator<<(double v) {
  separator();
  out_ << format_double(v);
  return *this;
}

CsvWriter& CsvWriter::operator<<(long long v) {
  separator();
  out_ << v;
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& v) {
  separator();
  if (v.find_first_of(",\"\n") != std::string::npos) {
    out_ << '"';
    for (char ch : v) out_ << (ch == '"' ? std::string("\"\"") : std::string(1, ch));
    out_ << '"';
  } else {
    out_ << v;
  }
  return *this;
}

void CsvWriter::end_row() {
  if (written_ != columns_) throw Error("csv row has the wrong number of columns");
  out_ << '\n';
  written_ = 0;
}

void write_pgm(const std::filesystem::path& path, int width, int height, const std::vector<double>& values,
               double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw ParameterError("image size does not match the value count");
  std::ofstream out = open_out(path);
  out << "P5\n" << width << ' ' << height << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  std::vector<unsigned char> row(static_cast<std::size_t>(width));
  for (int y = height - 1; y >= 0; --y) {
    for (int x = 0; x < width; ++x) {
      const double v = values[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
      const double s = std::clamp((v - lo) / span, 0.0, 1.0);
      row[static_cast<std::size_t>(x)] = static_cast<unsigned char>(std::lround(255 * s));
    }
    out.write(reinterpret_cast<const char*>(row.data()), width);
  }
}

void write_cell_image(const std::filesystem::path& path, const Domain& domain, const std::vector<double>& values) {
  const int w = domain.count(0);
  const int hgt = domain.count(1);
  std::vector<double> img(static_cast<std::size_t>(w) * static_cast<std::size_t>(hgt));
  const int z = domain.dim() > 2 ? domain.count(2) / 2 : 0;
  for (int y = 0; y < hgt; ++y)
    for (int x = 0; x < w; ++x)
      img[static_cast<std::size_t>(y * w + x)] = values[domain.cell_index({x, y, z})];
  double lo = 0, hi = 0;
  if (!img.empty()) {
    const auto [mn, mx] = std::minmax_element(img.begin(), img.end());
    lo = *mn;
    hi = *mx;
  }
  write_pgm(path, w, hgt, img, lo, hi);
}

}  // namespace gbd
