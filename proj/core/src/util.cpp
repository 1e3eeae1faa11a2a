#include "hmiway/util.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hmiway/errors.hpp"
#include "hmiway/rng.hpp"

namespace hmiway {

std::string repr(double x) {
  char buf[40];
  // Try increasing precision until the value round-trips.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_atomic(const std::string& path, const std::string& data) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + tmp);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("rename failed: " + tmp + " -> " + path + ": " + ec.message());
}

std::uint64_t fnv1a64_file(const std::string& path) { return fnv1a64(read_file(path)); }

std::string hex16(std::uint64_t x) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

void append_one_hot(std::vector<double>& out, int index, int n) {
  for (int k = 0; k < n; ++k) out.push_back(k == index ? 1.0 : 0.0);
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

double welch_p_value(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ContractError("welch_p_value: need >= 2 samples per side");
  double ma = mean(a), mb = mean(b);
  double va = sample_std(a), vb = sample_std(b);
  double se = std::sqrt(va * va / static_cast<double>(a.size()) +
                        vb * vb / static_cast<double>(b.size()));
  if (se == 0.0) return ma == mb ? 1.0 : 0.0;
  double z = (ma - mb) / se;
  // Normal approximation; sample sizes here are in the hundreds.
  double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return p;
}

}  // namespace hmiway
