#ifndef LEAKYWIRE_CONSTANTS_HPP
#define LEAKYWIRE_CONSTANTS_HPP

#include <numbers>

namespace leakywire {

inline constexpr double pi = std::numbers::pi;

/// Digamma at one. Equals minus the Euler-Mascheroni constant.
inline constexpr double psi_one = -0.5772156649015329;

inline constexpr double ln_two = std::numbers::ln2;

} // namespace leakywire

#endif
