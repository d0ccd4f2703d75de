#include "cardiostrain/blockmatch.hpp"

#include "cardiostrain/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace cardiostrain {

namespace {

constexpr double kFlatFloor = 1e-12;
constexpr double kPerfectMatch = 1.0 - 1e-12;

using Kernel = std::vector<double>;

Kernel window_taps(int size, BlockWindow w) {
  const int h = size / 2;
  Kernel k(static_cast<std::size_t>(size), 1.0);
  if (w == BlockWindow::Triangular)
    for (int i = -h; i <= h; ++i) k[static_cast<std::size_t>(i + h)] = 1.0 - std::abs(i) / (h + 1.0);
  return k;
}

// out(x) = sum_i k[i] v(x + i - h) along one axis, zero outside.
void correlate_axis(const std::vector<double>& in, std::vector<double>& out, const Index3& dims,
                    int axis, const Kernel& k) {
  const int h = static_cast<int>(k.size()) / 2;
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(dims[0])
                                                       : static_cast<std::size_t>(dims[0]) * dims[1];
  const int n = dims[axis];
  out.assign(in.size(), 0.0);
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        const int p = axis == 0 ? x : axis == 1 ? y : z;
        const std::size_t v = (static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x;
        const int lo = std::max(-h, -p), hi = std::min(h, n - 1 - p);
        double s = 0.0;
        for (int i = lo; i <= hi; ++i)
          s += k[static_cast<std::size_t>(i + h)] * in[v + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(stride)];
        out[v] = s;
      }
}

std::vector<double> window_sum(std::vector<double> v, const Index3& dims, const std::array<Kernel, 3>& k) {
  std::vector<double> tmp;
  for (int a = 0; a < 3; ++a) {
    correlate_axis(v, tmp, dims, a, k[static_cast<std::size_t>(a)]);
    v.swap(tmp);
  }
  return v;
}

double correlation(double sab, double sa, double sb, double saa, double sbb, double wsum) {
  const double cov = sab - sa * sb / wsum;
  const double va = saa - sa * sa / wsum;
  const double vb = sbb - sb * sb / wsum;
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  const double den = std::sqrt(va * vb);
  if (den < kFlatFloor) return 0.0;
  return std::clamp(cov / den, -1.0, 1.0);
}

}  // namespace

BlockWindow parse_block_window(const std::string& s) {
  if (s == "uniform") return BlockWindow::Uniform;
  if (s == "triangular") return BlockWindow::Triangular;
  throw ConfigError("unknown block window: " + s);
}

void BlockMatchConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (block[a] < 1 || block[a] % 2 == 0) throw ConfigError("block dims must be odd and positive");
    if (search[a] < 0) throw ConfigError("search range must be >= 0");
  }
  if (!(ncc_smooth_sigma >= 0.0)) throw ConfigError("ncc smoothing sigma must be >= 0");
}

NccValue ncc(const ScalarVolume& a, const ScalarVolume& b, const Index3& center, const Index3& shift,
             const BlockMatchConfig& config) {
  config.validate();
  if (!a.grid.same_shape(b.grid)) throw DimensionError("ncc: volume grids differ");
  std::array<Kernel, 3> k;
  for (int ax = 0; ax < 3; ++ax) k[static_cast<std::size_t>(ax)] = window_taps(config.block[ax], config.window);
  const Index3 h{config.block[0] / 2, config.block[1] / 2, config.block[2] / 2};

  NccValue out;
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, ws = 0;
  for (int k2 = -h[2]; k2 <= h[2]; ++k2)
    for (int k1 = -h[1]; k1 <= h[1]; ++k1)
      for (int k0 = -h[0]; k0 <= h[0]; ++k0) {
        const double w = k[0][static_cast<std::size_t>(k0 + h[0])] * k[1][static_cast<std::size_t>(k1 + h[1])] *
                         k[2][static_cast<std::size_t>(k2 + h[2])];
        const Index3 pa{center[0] + k0, center[1] + k1, center[2] + k2};
        const Index3 pb{pa[0] + shift[0], pa[1] + shift[1], pa[2] + shift[2]};
        double va = 0.0, vb = 0.0;
        if (a.grid.contains(pa[0], pa[1], pa[2])) va = a.at(pa[0], pa[1], pa[2]);
        else out.padded = true;
        if (b.grid.contains(pb[0], pb[1], pb[2])) vb = b.at(pb[0], pb[1], pb[2]);
        else out.padded = true;
        ws += w;
        sa += w * va;
        sb += w * vb;
        saa += w * va * va;
        sbb += w * vb * vb;
        sab += w * va * vb;
      }
  out.rho = correlation(sab, sa, sb, saa, sbb, ws);
  return out;
}

FrameTrack track_frame(const ScalarVolume& a, const ScalarVolume& b, const VoxelMask* mask,
                       const BlockMatchConfig& config) {
  config.validate();
  a.grid.validate();
  if (!a.grid.same_shape(b.grid)) throw DimensionError("track_frame: volume grids differ");
  if (mask && !mask->grid.same_shape(a.grid)) throw DimensionError("track_frame: mask grid differs");

  const Grid3& g = a.grid;
  const Index3 dims = g.dims;
  const Index3 S = config.search;
  const std::size_t nvox = g.voxel_count();
  std::array<Kernel, 3> k;
  double wsum = 1.0;
  for (int ax = 0; ax < 3; ++ax) {
    k[static_cast<std::size_t>(ax)] = window_taps(config.block[ax], config.window);
    double s = 0.0;
    for (double w : k[static_cast<std::size_t>(ax)]) s += w;
    wsum *= s;
  }

  // B on a grid padded by the search range so shifted window sums are plain lookups.
  const Index3 pd{dims[0] + 2 * S[0], dims[1] + 2 * S[1], dims[2] + 2 * S[2]};
  const std::size_t npad = static_cast<std::size_t>(pd[0]) * pd[1] * pd[2];
  std::vector<double> bp(npad, 0.0), bp2(npad, 0.0);
  const auto pidx = [&](int i, int j, int l) {
    return (static_cast<std::size_t>(l) * pd[1] + j) * pd[0] + i;
  };
  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        const double v = b.at(x, y, z);
        bp[pidx(x + S[0], y + S[1], z + S[2])] = v;
        bp2[pidx(x + S[0], y + S[1], z + S[2])] = v * v;
      }
  std::vector<double> a2(nvox);
  for (std::size_t v = 0; v < nvox; ++v) a2[v] = a.data[v] * a.data[v];
  const std::vector<double> SA = window_sum(a.data, dims, k), SAA = window_sum(a2, dims, k);
  const std::vector<double> SB = window_sum(bp, pd, k), SBB = window_sum(bp2, pd, k);

  std::vector<std::uint8_t> active(nvox, 1);
  if (mask) active = mask->data;

  // Smoothed correlation map for one shift over the whole grid.
  std::vector<double> prod(nvox);
  const auto ncc_map = [&](const Index3& l) {
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x)
          prod[g.index(x, y, z)] = a.at(x, y, z) * bp[pidx(x + l[0] + S[0], y + l[1] + S[1], z + l[2] + S[2])];
    const std::vector<double> SAB = window_sum(prod, dims, k);
    ScalarVolume map(g);
    for (int z = 0; z < dims[2]; ++z)
      for (int y = 0; y < dims[1]; ++y)
        for (int x = 0; x < dims[0]; ++x) {
          const std::size_t v = g.index(x, y, z);
          const std::size_t q = pidx(x + l[0] + S[0], y + l[1] + S[1], z + l[2] + S[2]);
          map.data[v] = correlation(SAB[v], SA[v], SB[q], SAA[v], SBB[q], wsum);
        }
    return config.ncc_smooth_sigma > 0.0 ? gaussian_smooth(map, config.ncc_smooth_sigma) : map;
  };

  std::vector<Index3> shifts;
  for (int l2 = -S[2]; l2 <= S[2]; ++l2)
    for (int l1 = -S[1]; l1 <= S[1]; ++l1)
      for (int l0 = -S[0]; l0 <= S[0]; ++l0) shifts.push_back({l0, l1, l2});

  // Pass 1: argmax per voxel. Ties keep the first shift in scan order.
  std::vector<double> best(nvox, -2.0);
  std::vector<int> best_shift(nvox, 0);
  for (std::size_t s = 0; s < shifts.size(); ++s) {
    const ScalarVolume m = ncc_map(shifts[s]);
    parallel_for(nvox, [&](std::size_t b0, std::size_t b1) {
      for (std::size_t v = b0; v < b1; ++v)
        if (active[v] && m.data[v] > best[v]) {
          best[v] = m.data[v];
          best_shift[v] = static_cast<int>(s);
        }
    });
  }

  // Pass 2: correlation at the axis neighbours of each peak for the parabola fit.
  std::vector<std::array<double, 6>> nb(config.subvoxel ? nvox : 0, std::array<double, 6>{});
  const auto shift_id = [&](const Index3& l) {
    return ((l[2] + S[2]) * (2 * S[1] + 1) + (l[1] + S[1])) * (2 * S[0] + 1) + (l[0] + S[0]);
  };
  if (config.subvoxel) {
    std::vector<std::array<int, 6>> want(nvox);
    for (std::size_t v = 0; v < nvox; ++v) {
      const Index3& pk = shifts[static_cast<std::size_t>(best_shift[v])];
      for (int ax = 0; ax < 3; ++ax)
        for (int side = 0; side < 2; ++side) {
          Index3 q = pk;
          q[ax] += side == 0 ? -1 : 1;
          want[v][static_cast<std::size_t>(2 * ax + side)] = std::abs(q[ax]) <= S[ax] ? shift_id(q) : -1;
        }
    }
    for (std::size_t s = 0; s < shifts.size(); ++s) {
      const ScalarVolume m = ncc_map(shifts[s]);
      const int si = static_cast<int>(s);
      for (std::size_t v = 0; v < nvox; ++v) {
        if (!active[v]) continue;
        for (std::size_t q = 0; q < 6; ++q)
          if (want[v][q] == si) nb[v][q] = m.data[v];
      }
    }
  }

  FrameTrack out{DisplacementField4D(g, 1, FrameKind::Eulerian), ScalarVolume(g)};
  for (std::size_t v = 0; v < nvox; ++v) {
    if (!active[v]) continue;
    const Index3& pk = shifts[static_cast<std::size_t>(best_shift[v])];
    bool on_boundary = false;
    Vec3 d;
    for (int ax = 0; ax < 3; ++ax) {
      d[ax] = pk[ax];
      if (S[ax] > 0 && std::abs(pk[ax]) == S[ax]) {
        on_boundary = true;
        continue;
      }
      // A perfect match is already exact; the parabola would only pick up texture asymmetry.
      if (!config.subvoxel || S[ax] == 0 || best[v] >= kPerfectMatch) continue;
      const double fm = nb[v][static_cast<std::size_t>(2 * ax)], fp = nb[v][static_cast<std::size_t>(2 * ax + 1)];
      const double curv = fm - 2.0 * best[v] + fp;
      if (curv < 0.0) d[ax] += std::clamp(0.5 * (fm - fp) / curv, -0.5, 0.5);
    }
    out.displacement.vec(0, v) = d.cwiseProduct(g.spacing);
    out.confidence.data[v] = on_boundary ? 0.0 : best[v];
  }
  return out;
}

SequenceTrack track_sequence(const std::vector<ScalarVolume>& volumes, const VoxelMask* mask,
                             const BlockMatchConfig& config) {
  if (volumes.size() < 2) throw DimensionError("track_sequence needs at least two volumes");
  for (const auto& v : volumes)
    if (!v.grid.same_shape(volumes.front().grid)) throw DimensionError("track_sequence: grids differ");
  const int T = static_cast<int>(volumes.size());
  SequenceTrack out{DisplacementField4D(volumes.front().grid, T, FrameKind::Eulerian), {}};
  out.confidence.emplace_back(volumes.front().grid);
  for (int t = 1; t < T; ++t) {
    FrameTrack ft = track_frame(volumes[static_cast<std::size_t>(t - 1)], volumes[static_cast<std::size_t>(t)], mask, config);
    std::copy(ft.displacement.frame(0).begin(), ft.displacement.frame(0).end(), out.field.frame(t).begin());
    out.confidence.push_back(std::move(ft.confidence));
  }
  return out;
}

}  // namespace cardiostrain
