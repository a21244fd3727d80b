#pragma once

#include <string>

#include "qdlab/fields.hpp"

namespace qdlab {

// Single-file field container: magic "QDF1", a 4-byte little-endian header
// length, a JSON header {"n","dims","h","origin","kind","name"}, then the
// row-major little-endian float64 payload (components fastest for vector and
// tensor kinds; tensors store the full square).
void write_field(const std::string& path, const ScalarField& f, const std::string& name);
void write_field(const std::string& path, const VectorField& f, const std::string& name);

struct LoadedField {
    std::string kind;   // "scalar" | "vector"
    std::string name;
    ScalarField scalar;
    VectorField vector;
};

LoadedField read_field(const std::string& path);

// Plain-text export: one node per row, coordinates then values.  The header
// line carries column names and an optional tag comment for run bookkeeping.
void export_csv(const std::string& path, const ScalarField& f, const std::string& name,
                const std::string& tag = "");

}  // namespace qdlab
