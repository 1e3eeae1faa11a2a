#include "hmiway/rng.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "hmiway/errors.hpp"

namespace hmiway {

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

std::string Rng::state() const {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &spare_, sizeof(bits));
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_ ? 1 : 0) << ' ' << bits;
  return os.str();
}

void Rng::set_state(const std::string& text) {
  std::istringstream is(text);
  int spare_flag = 0;
  std::uint64_t bits = 0;
  is >> engine_ >> spare_flag >> bits;
  if (is.fail()) throw ContractError("invalid rng state string");
  has_spare_ = spare_flag != 0;
  std::memcpy(&spare_, &bits, sizeof(bits));
}

}  // namespace hmiway
