#include "cardiostrain/crystals.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace cardiostrain {

namespace {

double longest_edge(const std::array<Vec3, 4>& p) {
  double e = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) e = std::max(e, (p[i] - p[j]).norm());
  return e;
}

Mat3 edges(const std::array<Vec3, 4>& p) {
  Mat3 m;
  for (int i = 0; i < 3; ++i) m.col(i) = p[i + 1] - p[0];
  return m;
}

}  // namespace

bool tetra_nondegenerate(const std::array<Vec3, 4>& pts) {
  const double e = longest_edge(pts);
  const double vol = std::abs(edges(pts).determinant()) / 6.0;
  return e > 0.0 && vol >= 1e-9 * e * e * e;
}

StrainTensor tetra_strain(const std::array<Vec3, 4>& ref, const std::array<Vec3, 4>& def) {
  if (!tetra_nondegenerate(ref)) throw NumericalError("degenerate reference tetrahedron");
  const Mat3 F = edges(def) * edges(ref).inverse();
  const Mat3 E = 0.5 * (F.transpose() * F - Mat3::Identity());
  return 0.5 * (E + E.transpose());
}

const char* to_string(Zone z) {
  switch (z) {
    case Zone::Infarct: return "infarct";
    case Zone::Border: return "border";
    case Zone::Remote: return "remote";
  }
  return "remote";
}

Zone parse_zone(const std::string& s) {
  if (s == "infarct") return Zone::Infarct;
  if (s == "border") return Zone::Border;
  if (s == "remote") return Zone::Remote;
  throw ConfigError("unknown zone: " + s);
}

void CrystalCube::validate() const {
  if (frames.empty()) throw ConfigError("crystal cube has no frames");
  for (const auto& f : frames)
    for (int i = 0; i < 8; ++i) {
      if (!f[i].allFinite()) throw NumericalError("non-finite crystal position");
      for (int j = i + 1; j < 8; ++j)
        if ((f[i] - f[j]).norm() < 1e-9) throw ConfigError("crystal positions must be distinct");
    }
}

std::vector<std::array<int, 4>> cube_tetrahedra(const CrystalCube& cube) {
  cube.validate();
  std::vector<std::array<int, 4>> out;
  const auto& r = cube.frames.front();
  for (int a = 0; a < 8; ++a)
    for (int b = a + 1; b < 8; ++b)
      for (int c = b + 1; c < 8; ++c)
        for (int d = c + 1; d < 8; ++d)
          if (tetra_nondegenerate({r[a], r[b], r[c], r[d]})) out.push_back({a, b, c, d});
  return out;
}

StrainTensor cube_strain(const CrystalCube& cube, int t) {
  if (t < 0 || t >= static_cast<int>(cube.frames.size())) throw DimensionError("frame out of range");
  const auto tets = cube_tetrahedra(cube);
  if (tets.size() < 4) throw NumericalError("fewer than four non-degenerate tetrahedra");
  const auto& r = cube.frames.front();
  const auto& f = cube.frames[static_cast<std::size_t>(t)];
  std::array<std::vector<double>, 9> comp;
  for (const auto& q : tets) {
    const Mat3 E = tetra_strain({r[q[0]], r[q[1]], r[q[2]], r[q[3]]}, {f[q[0]], f[q[1]], f[q[2]], f[q[3]]});
    for (int i = 0; i < 9; ++i) comp[static_cast<std::size_t>(i)].push_back(E.data()[i]);
  }
  Mat3 M;
  for (int i = 0; i < 9; ++i) {
    auto& v = comp[static_cast<std::size_t>(i)];
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    double m = *mid;
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
    M.data()[i] = m;
  }
  return 0.5 * (M + M.transpose());
}

Vec3 trilaterate(const std::array<Vec3, 3>& refs, const Vec3& dist, const Vec3& side_hint, double tolerance) {
  const Vec3 p1 = refs[0];
  const Vec3 d21 = refs[1] - p1, d31 = refs[2] - p1;
  const double d = d21.norm();
  const Vec3 normal = d21.cross(d31);
  if (d == 0.0 || normal.norm() < 1e-9 * d * d31.norm()) throw ConfigError("reference crystals are collinear");
  if ((dist.array() < 0.0).any()) throw ConfigError("distances must be non-negative");

  const Vec3 ex = d21 / d;
  const double i = ex.dot(d31);
  const Vec3 ey = (d31 - i * ex).normalized();
  const Vec3 ez = ex.cross(ey);
  const double j = ey.dot(d31);
  const double r1 = dist[0], r2 = dist[1], r3 = dist[2];
  const double x = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
  const double y = (r1 * r1 - r3 * r3 + i * i + j * j) / (2.0 * j) - (i / j) * x;
  const double z2 = r1 * r1 - x * x - y * y;
  const double z = z2 > 0.0 ? std::sqrt(z2) : 0.0;
  const double sign = ez.dot(side_hint) >= 0.0 ? 1.0 : -1.0;
  const Vec3 p = p1 + x * ex + y * ey + sign * z * ez;

  double residual = 0.0;
  for (int k = 0; k < 3; ++k) residual = std::max(residual, std::abs((p - refs[k]).norm() - dist[k]));
  if (residual > tolerance) {
    std::ostringstream msg;
    msg << "inconsistent crystal distances (residual " << residual << " mm)";
    throw NumericalError(msg.str());
  }
  return p;
}

void write_crystals_csv(std::ostream& os, const CrystalCube& cube) {
  os << "frame,crystal,x,y,z\n";
  os.precision(17);
  for (std::size_t t = 0; t < cube.frames.size(); ++t)
    for (int c = 0; c < 8; ++c) {
      const Vec3& p = cube.frames[t][c];
      os << t << ',' << c << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
    }
}

CrystalCube read_crystals_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("empty crystal CSV");
  CrystalCube cube;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::size_t t = 0;
    int c = 0;
    double x = 0, y = 0, z = 0;
    char sep = 0;
    if (!(ss >> t >> sep >> c >> sep >> x >> sep >> y >> sep >> z) || c < 0 || c > 7)
      throw FormatError("bad crystal CSV row: " + line);
    if (t >= cube.frames.size()) cube.frames.resize(t + 1);
    cube.frames[t][static_cast<std::size_t>(c)] = Vec3(x, y, z);
  }
  cube.validate();
  return cube;
}

void write_distances_csv(std::ostream& os, const CrystalCube& cube) {
  os << "frame,pair,distance\n";
  os.precision(17);
  for (std::size_t t = 0; t < cube.frames.size(); ++t)
    for (int a = 0; a < 8; ++a)
      for (int b = a + 1; b < 8; ++b)
        os << t << ',' << a << '-' << b << ',' << (cube.frames[t][a] - cube.frames[t][b]).norm() << '\n';
}

}  // namespace cardiostrain
