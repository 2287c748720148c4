#pragma once

#include "mosaic/tape.hpp"

#include <span>
#include <string>

namespace mosaic {

// Exact count of trainable scalars.
long long count_parameters(std::span<const Parameter* const> params);

// Flat coordinate views over a parameter list, in list order, row-major
// within each block. Used by the finite-difference gradient checks.
Vector flatten_values(std::span<const Parameter* const> params);
Vector flatten_grads(std::span<const Parameter* const> params);
void set_values(std::span<Parameter* const> params, const Vector& flat);

// Binary checkpoint, format "MOSAICK1": a parameter count followed by
// (name, rows, cols, row-major 64-bit values) records. Round-trips are
// bit-exact; loading requires the same names and shapes in the same order.
void save_checkpoint(const std::string& path,
                     std::span<const Parameter* const> params);
void load_checkpoint(const std::string& path,
                     std::span<Parameter* const> params);

}  // namespace mosaic
