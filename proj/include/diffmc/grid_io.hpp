#pragma once

#include <filesystem>
#include <string_view>

#include "diffmc/field.hpp"

namespace dmc {

enum class Precision { Float32, Float64 };

std::string_view to_string(Precision p);
Precision precision_from_string(std::string_view s);

/// Writes a JSON header at `header` and raw little-endian blocks next to it:
/// `<stem>.values.raw` (x-fastest node order) and, when the grid carries
/// displacements, `<stem>.disp.raw` (xyz per node).
///
/// Header keys: format, version, dims, origin, spacing, precision, semantics,
/// layout, endianness, values, displacement (optional).
void write_grid(const DeformableGrid& grid, const std::filesystem::path& header,
                Precision precision = Precision::Float64);

DeformableGrid read_grid(const std::filesystem::path& header);

}  // namespace dmc
