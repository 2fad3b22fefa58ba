#pragma once

// Unit conventions used throughout the library:
//   time      fs
//   length    um
//   frequency rad/fs
//   field     atomic units (complex circular amplitudes, see field_synthesis.hpp)
//   intensity W/cm^2 at the interfaces, 1e14 W/cm^2 inside the response models

#include <numbers>

namespace tkam::units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// speed of light in um/fs
inline constexpr double c_um_per_fs = 0.299792458;

// intensity of a linearly polarized field of peak amplitude 1 a.u.
inline constexpr double atomic_intensity_wcm2 = 3.50944506e16;

inline constexpr double intensity_unit_wcm2 = 1e14;

inline constexpr double au_time_fs = 0.02418884326585747;
inline constexpr double hartree_ev = 27.211386245988;

inline constexpr double argon_ip_ev = 15.7596;

inline constexpr double omega_from_wavelength_nm(double lambda_nm) {
  return two_pi * c_um_per_fs / (lambda_nm * 1e-3);
}

inline constexpr double deg(double radians) { return radians * 180.0 / pi; }
inline constexpr double rad(double degrees) { return degrees * pi / 180.0; }

} // namespace tkam::units
