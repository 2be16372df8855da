#include "tstiefel/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace tstiefel {

namespace {

constexpr std::array<char, 4> kMagic{'T', 'T', '3', 'D'};

static_assert(std::endian::native == std::endian::little,
              "TT3D I/O assumes a little-endian host");

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw InvalidArgument("TT3D: truncated header");
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("tensor csv: bad number '" + s + "'");
  }
  if (s.find_first_not_of(" \t\r", used) != std::string::npos)
    throw InvalidArgument("tensor csv: bad number '" + s + "'");
  return v;
}

}  // namespace

void write_tt3d(std::ostream& os, const Tensor3d& a) {
  os.write(kMagic.data(), kMagic.size());
  write_u64(os, static_cast<std::uint64_t>(a.rows()));
  write_u64(os, static_cast<std::uint64_t>(a.cols()));
  write_u64(os, static_cast<std::uint64_t>(a.slices()));
  os.write(reinterpret_cast<const char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double)));
  if (!os) throw Error("TT3D: write failed");
}

Tensor3d read_tt3d(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw InvalidArgument("TT3D: bad magic");
  const auto n = read_u64(is), p = read_u64(is), l = read_u64(is);
  constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 32;
  if (n != 0 && p != 0 && l != 0 && (n > kMaxEntries / p || n * p > kMaxEntries / l))
    throw SizeGuardExceeded("TT3D: declared size too large");
  Tensor3d a(static_cast<Index>(n), static_cast<Index>(p), static_cast<Index>(l));
  if (!is.read(reinterpret_cast<char*>(a.data()), static_cast<std::streamsize>(a.size() * sizeof(double))))
    throw InvalidArgument("TT3D: truncated payload");
  return a;
}

void save_tt3d(const std::string& path, const Tensor3d& a) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  write_tt3d(os, a);
}

Tensor3d load_tt3d(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  return read_tt3d(is);
}

Tensor3d parse_tensor_csv(std::istream& is) {
  std::string line;
  std::vector<std::vector<std::string>> records;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    records.push_back(split_fields(line));
  }
  if (records.empty() || records.front().size() != 3) throw InvalidArgument("tensor csv: missing n,p,l header");
  const auto dim = [&](int i) {
    const double v = to_double(records.front()[i]);
    if (v < 1 || v != static_cast<double>(static_cast<Index>(v))) throw InvalidArgument("tensor csv: bad dimension");
    return static_cast<Index>(v);
  };
  const Index n = dim(0), p = dim(1), l = dim(2);
  if (static_cast<Index>(records.size()) != 1 + n * l)
    throw DimensionMismatch("tensor csv: expected " + std::to_string(n * l) + " data rows");
  Tensor3d a(n, p, l);
  for (Index r = 0; r < n * l; ++r) {
    const auto& rec = records[r + 1];
    if (static_cast<Index>(rec.size()) != p)
      throw DimensionMismatch("tensor csv: row " + std::to_string(r + 1) + " has wrong width");
    for (Index j = 0; j < p; ++j) a(r % n, j, r / n) = to_double(rec[j]);
  }
  return a;
}

Tensor3d load_tensor_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  return parse_tensor_csv(is);
}

void write_tensor_csv(std::ostream& os, const Tensor3d& a) {
  os << a.rows() << ',' << a.cols() << ',' << a.slices() << '\n' << std::setprecision(17);
  for (Index k = 0; k < a.slices(); ++k)
    for (Index i = 0; i < a.rows(); ++i)
      for (Index j = 0; j < a.cols(); ++j) os << a(i, j, k) << (j + 1 < a.cols() ? ',' : '\n');
}

}  // namespace tstiefel
