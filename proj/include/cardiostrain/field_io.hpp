#pragma once

#include "cardiostrain/field.hpp"

#include <filesystem>
#include <iosfwd>

namespace cardiostrain::io {

// Binary layouts (all little-endian, 64-byte header):
//
//   .dsp4  "DSP4" u32 version, u32 nx ny nz T, f32 dx dy dz, u8 frame_kind, zero pad; f32 payload
//   .vol3  "VOL3" same header with T = 1 and frame_kind = 0; f32 payload, one value per voxel
//   .msk3  "MSK3" u32 version, u32 nx ny nz, f32 dx dy dz, zero pad; u8 payload
//
// The grid origin is not stored; loaded grids have origin (0, 0, 0).

inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 64;

void write_field(std::ostream& os, const DisplacementField4D& field);
DisplacementField4D read_field(std::istream& is);
void save_field(const std::filesystem::path& path, const DisplacementField4D& field);
DisplacementField4D load_field(const std::filesystem::path& path);

void write_volume(std::ostream& os, const ScalarVolume& vol);
ScalarVolume read_volume(std::istream& is);
void save_volume(const std::filesystem::path& path, const ScalarVolume& vol);
ScalarVolume load_volume(const std::filesystem::path& path);

void write_mask(std::ostream& os, const VoxelMask& mask);
VoxelMask read_mask(std::istream& is);
void save_mask(const std::filesystem::path& path, const VoxelMask& mask);
VoxelMask load_mask(const std::filesystem::path& path);

}  // namespace cardiostrain::io
