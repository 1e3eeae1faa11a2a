#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hmiway {

inline constexpr const char* kVersionString = "1.0.0";

// Shortest decimal form that parses back to the same double bits.
std::string repr(double x);

std::string read_file(const std::string& path);

// Write via a temp file in the same directory, then rename.
void write_file_atomic(const std::string& path, const std::string& data);

std::uint64_t fnv1a64_file(const std::string& path);

std::string hex16(std::uint64_t x);

// One-hot helper used for action encodings.
void append_one_hot(std::vector<double>& out, int index, int n);

double mean(std::span<const double> xs);
// Sample standard deviation (n-1); 0 for n < 2.
double sample_std(std::span<const double> xs);

// Two-sided Welch z-test p-value for mean(a) != mean(b). Sizes must be >= 2.
double welch_p_value(std::span<const double> a, std::span<const double> b);

}  // namespace hmiway
