#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "crl/scores.hpp"
#include "json.hpp"

namespace crl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void write_binary(const fs::path& path, const Mat& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = m(r, c);
      unsigned char bytes[8];
      std::memcpy(bytes, &v, 8);
      if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 8);
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
}

Mat read_binary(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) {
      unsigned char bytes[8];
      if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw std::runtime_error("truncated matrix file " + path.string());
      if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + 8);
      double v;
      std::memcpy(&v, bytes, 8);
      m(r, c) = v;
    }
  return m;
}

void write_csv(const fs::path& path, const Mat& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << m(r, c);
    }
    out << '\n';
  }
}

Mat read_csv(const fs::path& path, Eigen::Index rows, Eigen::Index cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Mat m(rows, cols);
  std::string line;
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw std::runtime_error("truncated matrix file " + path.string());
    std::stringstream ss(line);
    std::string cell;
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!std::getline(ss, cell, ',')) throw std::runtime_error("short row in " + path.string());
      m(r, c) = std::stod(cell);
    }
  }
  return m;
}

}  // namespace

void write_dataset(const std::string& dir, const ScoreDiffDataset& ds, DumpFormat format) {
  ds.validate();
  fs::create_directories(dir);
  const bool bin = format == DumpFormat::binary;
  const std::string ext = bin ? ".bin" : ".csv";
  auto put = [&](const std::string& name, const Mat& m) {
    if (bin)
      write_binary(fs::path(dir) / name, m);
    else
      write_csv(fs::path(dir) / name, m);
  };
  json manifest;
  manifest["format"] = bin ? "f64le" : "csv";
  manifest["rows"] = ds.x.rows();
  manifest["cols"] = ds.x.cols();
  manifest["x"] = "x" + ext;
  put("x" + ext, ds.x);
  manifest["pairs"] = json::array();
  for (std::size_t k = 0; k < ds.pairs.size(); ++k) {
    std::string file = "diff_" + std::to_string(ds.pairs[k].a) + "_" + std::to_string(ds.pairs[k].b) + ext;
    put(file, ds.diffs[k]);
    manifest["pairs"].push_back({{"a", ds.pairs[k].a}, {"b", ds.pairs[k].b}, {"file", file}});
  }
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << '\n';
}

ScoreDiffDataset read_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("read_dataset: missing manifest.json in " + dir);
  json manifest = json::parse(in);
  const bool bin = manifest.at("format").get<std::string>() == "f64le";
  const auto rows = manifest.at("rows").get<Eigen::Index>();
  const auto cols = manifest.at("cols").get<Eigen::Index>();
  auto get = [&](const std::string& name) {
    return bin ? read_binary(fs::path(dir) / name, rows, cols) : read_csv(fs::path(dir) / name, rows, cols);
  };
  ScoreDiffDataset ds;
  ds.x = get(manifest.at("x").get<std::string>());
  for (const auto& p : manifest.at("pairs")) {
    ds.pairs.push_back({p.at("a").get<int>(), p.at("b").get<int>()});
    ds.diffs.push_back(get(p.at("file").get<std::string>()));
  }
  ds.validate();
  return ds;
}

}  // namespace crl
