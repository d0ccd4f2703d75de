#include "cardiostrain/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace cardiostrain::io {

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

class HeaderWriter {
 public:
  explicit HeaderWriter(const char* magic) { std::memcpy(buf_.data(), magic, 4); }
  void u32(std::uint32_t v) { put(&v, 4); }
  void f32(float v) { put(&v, 4); }
  void u8(std::uint8_t v) { put(&v, 1); }
  void flush(std::ostream& os) const {
    os.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  }

 private:
  void put(const void* p, std::size_t n) {
    std::memcpy(buf_.data() + pos_, p, n);
    pos_ += n;
  }
  std::array<char, kHeaderBytes> buf_{};
  std::size_t pos_ = 4;
};

class HeaderReader {
 public:
  HeaderReader(std::istream& is, const char* magic) {
    is.read(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!is) throw FormatError("truncated header");
    if (std::memcmp(buf_.data(), magic, 4) != 0)
      throw FormatError(std::string("bad magic, expected ") + magic);
    if (u32() != kFormatVersion) throw FormatError("unsupported format version");
  }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  float f32() { return get<float>(); }
  std::uint8_t u8() { return get<std::uint8_t>(); }

 private:
  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::array<char, kHeaderBytes> buf_{};
  std::size_t pos_ = 4;
};

void write_f32_payload(std::ostream& os, const std::vector<double>& data) {
  std::vector<float> tmp(data.begin(), data.end());
  os.write(reinterpret_cast<const char*>(tmp.data()),
           static_cast<std::streamsize>(tmp.size() * sizeof(float)));
  if (!os) throw FormatError("write failed");
}

void read_f32_payload(std::istream& is, std::vector<double>& data) {
  std::vector<float> tmp(data.size());
  is.read(reinterpret_cast<char*>(tmp.data()),
          static_cast<std::streamsize>(tmp.size() * sizeof(float)));
  if (!is) throw FormatError("truncated payload");
  std::copy(tmp.begin(), tmp.end(), data.begin());
}

Grid3 read_grid(HeaderReader& h, std::uint32_t& frames, bool has_frames) {
  Grid3 g;
  for (int a = 0; a < 3; ++a) g.dims[a] = static_cast<int>(h.u32());
  frames = has_frames ? h.u32() : 1;
  for (int a = 0; a < 3; ++a) g.spacing[a] = h.f32();
  try {
    g.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid grid in header: ") + e.what());
  }
  return g;
}

template <typename Fn>
auto with_ifstream(const std::filesystem::path& path, Fn fn) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return fn(is);
}

template <typename Fn>
void with_ofstream(const std::filesystem::path& path, Fn fn) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot create " + path.string());
  fn(os);
  if (!os) throw FormatError("write failed: " + path.string());
}

}  // namespace

void write_field(std::ostream& os, const DisplacementField4D& field) {
  HeaderWriter h("DSP4");
  h.u32(kFormatVersion);
  const auto& g = field.grid();
  for (int a = 0; a < 3; ++a) h.u32(static_cast<std::uint32_t>(g.dims[a]));
  h.u32(static_cast<std::uint32_t>(field.frames()));
  for (int a = 0; a < 3; ++a) h.f32(static_cast<float>(g.spacing[a]));
  h.u8(static_cast<std::uint8_t>(field.kind()));
  h.flush(os);
  write_f32_payload(os, field.data());
}

DisplacementField4D read_field(std::istream& is) {
  HeaderReader h(is, "DSP4");
  std::uint32_t frames = 0;
  const Grid3 g = read_grid(h, frames, true);
  const auto kind = h.u8();
  if (kind > static_cast<std::uint8_t>(FrameKind::StrainTensor)) throw FormatError("bad frame kind");
  if (frames < 1) throw FormatError("frame count must be >= 1");
  DisplacementField4D field(g, static_cast<int>(frames), static_cast<FrameKind>(kind));
  read_f32_payload(is, field.data());
  return field;
}

void save_field(const std::filesystem::path& path, const DisplacementField4D& field) {
  with_ofstream(path, [&](std::ostream& os) { write_field(os, field); });
}

DisplacementField4D load_field(const std::filesystem::path& path) {
  return with_ifstream(path, [](std::istream& is) { return read_field(is); });
}

void write_volume(std::ostream& os, const ScalarVolume& vol) {
  HeaderWriter h("VOL3");
  h.u32(kFormatVersion);
  for (int a = 0; a < 3; ++a) h.u32(static_cast<std::uint32_t>(vol.grid.dims[a]));
  h.u32(1);
  for (int a = 0; a < 3; ++a) h.f32(static_cast<float>(vol.grid.spacing[a]));
  h.u8(0);
  h.flush(os);
  write_f32_payload(os, vol.data);
}

ScalarVolume read_volume(std::istream& is) {
  HeaderReader h(is, "VOL3");
  std::uint32_t frames = 0;
  ScalarVolume vol(read_grid(h, frames, true));
  if (frames != 1) throw FormatError("volume must have exactly one frame");
  read_f32_payload(is, vol.data);
  return vol;
}

void save_volume(const std::filesystem::path& path, const ScalarVolume& vol) {
  with_ofstream(path, [&](std::ostream& os) { write_volume(os, vol); });
}

ScalarVolume load_volume(const std::filesystem::path& path) {
  return with_ifstream(path, [](std::istream& is) { return read_volume(is); });
}

void write_mask(std::ostream& os, const VoxelMask& mask) {
  HeaderWriter h("MSK3");
  h.u32(kFormatVersion);
  for (int a = 0; a < 3; ++a) h.u32(static_cast<std::uint32_t>(mask.grid.dims[a]));
  for (int a = 0; a < 3; ++a) h.f32(static_cast<float>(mask.grid.spacing[a]));
  h.flush(os);
  os.write(reinterpret_cast<const char*>(mask.data.data()),
           static_cast<std::streamsize>(mask.data.size()));
}

VoxelMask read_mask(std::istream& is) {
  HeaderReader h(is, "MSK3");
  std::uint32_t frames = 0;
  VoxelMask mask(read_grid(h, frames, false));
  is.read(reinterpret_cast<char*>(mask.data.data()), static_cast<std::streamsize>(mask.data.size()));
  if (!is) throw FormatError("truncated mask payload");
  return mask;
}

void save_mask(const std::filesystem::path& path, const VoxelMask& mask) {
  with_ofstream(path, [&](std::ostream& os) { write_mask(os, mask); });
}

VoxelMask load_mask(const std::filesystem::path& path) {
  return with_ifstream(path, [](std::istream& is) { return read_mask(is); });
}

}  // namespace cardiostrain::io
