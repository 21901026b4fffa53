#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace gsyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy mirrored by the CLI exit codes: DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent input: malformed files, label mismatches, empty data.
struct DataError : Error {
  using Error::Error;
};

// Numerical failure: non-PD covariance after regularization, degenerate solves.
struct NumericError : Error {
  using Error::Error;
};

enum class Region { kHead, kHand };

inline int motion_dim(Region r) { return r == Region::kHead ? 3 : 10; }

inline std::string region_name(Region r) { return r == Region::kHead ? "head" : "hand"; }

inline Region region_from_name(const std::string& s) {
  if (s == "head") return Region::kHead;
  if (s == "hand") return Region::kHand;
  throw DataError("unknown region '" + s + "' (expected head|hand)");
}

// FNV-1a, used as the content checksum on persisted artifacts.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string to_hex(std::uint64_t v);

}  // namespace gsyn
