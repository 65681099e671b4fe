#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace tclsafe::reference {

/// Raw (unscaled) regulation signal sampled on the control grid.
struct Signal {
  double dt_seconds = 60.0;
  std::vector<double> values;
};

/// Two-column CSV (time_s, value). A non-numeric first line is treated as a
/// header. Sample k is the last row with time <= start + k * dt (zero-order
/// hold); every sample instant must lie inside the file's time span.
Signal load_csv(const std::filesystem::path& path, double dt_seconds, int steps, double start_seconds = 0.0);

/// Synthetic RegD-like signal in [-1, 1]: a mean-reverting random walk with
/// occasional slow ramps, sampled every dt.
Signal synthetic_regd(int steps, double dt_seconds, std::uint64_t seed);

void save_csv(const Signal& signal, const std::filesystem::path& path);

}  // namespace tclsafe::reference
