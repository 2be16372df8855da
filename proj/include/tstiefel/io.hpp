#pragma once

#include <iosfwd>
#include <string>

#include "tstiefel/tensor3.hpp"

namespace tstiefel {

/// Binary container: "TT3D", little-endian u64 n, p, l, then n*p*l doubles in
/// slice-major order (entry (i, j, k) at i + n*j + n*p*k).
void write_tt3d(std::ostream& os, const Tensor3d& a);
Tensor3d read_tt3d(std::istream& is);
void save_tt3d(const std::string& path, const Tensor3d& a);
Tensor3d load_tt3d(const std::string& path);

/// Text fixture: first record "n,p,l", then n*l rows of p comma-separated
/// values giving slice 1 rows, slice 2 rows, ... (the unfolded tensor).
/// Blank lines and lines starting with '#' are skipped.
Tensor3d parse_tensor_csv(std::istream& is);
Tensor3d load_tensor_csv(const std::string& path);
void write_tensor_csv(std::ostream& os, const Tensor3d& a);

}  // namespace tstiefel
