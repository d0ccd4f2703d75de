#pragma once

#include "cardiostrain/strain.hpp"

#include <iosfwd>

namespace cardiostrain {

/// Strain of a tetrahedral unit from the map of its three reference edge vectors onto the
/// deformed ones. Throws NumericalError when |volume| < 1e-9 * (longest edge)^3.
StrainTensor tetra_strain(const std::array<Vec3, 4>& ref, const std::array<Vec3, 4>& def);

/// True when the four points span a non-degenerate tetrahedron.
bool tetra_nondegenerate(const std::array<Vec3, 4>& pts);

enum class Zone { Infarct, Border, Remote };

const char* to_string(Zone z);
Zone parse_zone(const std::string& s);

/// Eight crystals tracked through a cycle; frame 0 is the reference.
struct CrystalCube {
  std::vector<std::array<Vec3, 8>> frames;  // mm
  Zone zone = Zone::Remote;

  void validate() const;
};

/// Vertex index quadruples forming non-degenerate tetrahedra at the reference frame.
std::vector<std::array<int, 4>> cube_tetrahedra(const CrystalCube& cube);

/// Componentwise median of all non-degenerate tetrahedral strains (frame 0 -> frame t),
/// symmetrized. Throws NumericalError with fewer than four usable tetrahedra.
StrainTensor cube_strain(const CrystalCube& cube, int t);

/// Point at distances `dist` from three reference points. Of the two mirror solutions the
/// one on the side of the reference plane that `side_hint` points to is returned. Throws
/// ConfigError for collinear references and NumericalError (with the residual) when the
/// spheres miss each other by more than `tolerance` mm.
Vec3 trilaterate(const std::array<Vec3, 3>& refs, const Vec3& dist, const Vec3& side_hint,
                 double tolerance = 0.5);

/// Crystal positions as CSV rows (frame, crystal, x, y, z).
void write_crystals_csv(std::ostream& os, const CrystalCube& cube);
CrystalCube read_crystals_csv(std::istream& is);

/// Pairwise distances as CSV rows (frame, pair, distance) with pair labelled "i-j".
void write_distances_csv(std::ostream& os, const CrystalCube& cube);

}  // namespace cardiostrain
