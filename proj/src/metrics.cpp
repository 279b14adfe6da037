#include "ctsynth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <tuple>

#include "ctsynth/rng.hpp"

namespace ctsynth {

double dice(const MaskVolume& a, const MaskVolume& b) {
  require_same_dims(a, b, "dice");
  int64_t inter = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    na += x;
    nb += y;
    inter += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

// ---------------------------------------------------------------------------
// Connected components

namespace {

struct UnionFind {
  std::vector<uint32_t> parent;

  uint32_t make() {
    parent.push_back(static_cast<uint32_t>(parent.size()));
    return parent.back();
  }
  uint32_t find(uint32_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(uint32_t a, uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent[a] = b;
  }
};

bool neighbour_allowed(int dx, int dy, int dz, Connectivity conn) {
  const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
  switch (conn) {
    case Connectivity::c6: return manhattan == 1;
    case Connectivity::c18: return manhattan >= 1 && manhattan <= 2;
    case Connectivity::c26: return manhattan >= 1;
  }
  return false;
}

}  // namespace

ComponentLabels connected_components(const MaskVolume& mask, Connectivity conn) {
  const Dims& d = mask.dims();
  ComponentLabels out;
  out.dims = d;
  out.labels.assign(mask.size(), 0);

  // Backward half of the neighbourhood: offsets already visited in a
  // linear x-fastest scan.
  std::vector<std::array<int, 3>> back;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        if (neighbour_allowed(dx, dy, dz, conn)) back.push_back({dx, dy, dz});
      }

  UnionFind uf;
  std::vector<uint32_t> provisional(mask.size(), 0);  // 0 = none, else uf id + 1
  for (int64_t z = 0; z < d.z; ++z)
    for (int64_t y = 0; y < d.y; ++y)
      for (int64_t x = 0; x < d.x; ++x) {
        const auto i = static_cast<size_t>(mask.index(x, y, z));
        if (!mask[i]) continue;
        uint32_t current = 0;
        for (const auto& o : back) {
          const int64_t nx = x + o[0], ny = y + o[1], nz = z + o[2];
          if (!mask.contains(nx, ny, nz)) continue;
          const uint32_t p = provisional[static_cast<size_t>(mask.index(nx, ny, nz))];
          if (p == 0) continue;
          if (current == 0) {
            current = p;
          } else {
            uf.unite(current - 1, p - 1);
          }
        }
        provisional[i] = current == 0 ? uf.make() + 1 : current;
      }

  std::vector<uint32_t> final_label(uf.parent.size(), 0);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (provisional[i] == 0) continue;
    const uint32_t root = uf.find(provisional[i] - 1);
    if (final_label[root] == 0) {
      final_label[root] = ++out.count;
      out.sizes.push_back(0);
    }
    out.labels[i] = final_label[root];
    out.sizes[final_label[root] - 1]++;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lesion matching

DetectionScores match_lesions(const MaskVolume& pred, const MaskVolume& gt, int64_t min_overlap) {
  require_same_dims(pred, gt, "match_lesions");
  const ComponentLabels lp = connected_components(pred);
  const ComponentLabels lg = connected_components(gt);

  std::vector<std::tuple<uint32_t, uint32_t, int64_t>> overlaps;  // (gt, pred, voxels)
  {
    std::vector<int64_t> table(static_cast<size_t>(lp.count + 1) * (lg.count + 1), 0);
    for (size_t i = 0; i < pred.size(); ++i) {
      if (lp.labels[i] && lg.labels[i]) table[static_cast<size_t>(lg.labels[i]) * (lp.count + 1) + lp.labels[i]]++;
    }
    for (uint32_t g = 1; g <= lg.count; ++g)
      for (uint32_t p = 1; p <= lp.count; ++p) {
        const int64_t v = table[static_cast<size_t>(g) * (lp.count + 1) + p];
        if (v > min_overlap) overlaps.emplace_back(g, p, v);
      }
  }
  std::sort(overlaps.begin(), overlaps.end(), [](const auto& a, const auto& b) {
    if (std::get<2>(a) != std::get<2>(b)) return std::get<2>(a) > std::get<2>(b);
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });

  DetectionScores s;
  s.n_pred = lp.count;
  s.n_gt = lg.count;
  std::vector<bool> used_p(lp.count + 1, false), used_g(lg.count + 1, false);
  for (const auto& [g, p, v] : overlaps) {
    if (used_g[g] || used_p[p]) continue;
    used_g[g] = used_p[p] = true;
    s.matched_pairs.push_back({p, g, v});
  }
  const auto matched = static_cast<double>(s.matched_pairs.size());
  if (s.n_pred == 0 && s.n_gt == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = s.n_pred ? matched / s.n_pred : 0.0;
  s.recall = s.n_gt ? matched / s.n_gt : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Skeletonization

bool is_simple_point(const std::array<uint8_t, 27>& n) {
  auto at = [](int x, int y, int z) { return x + 3 * y + 9 * z; };

  // Foreground: exactly one 26-component among the 26 neighbours.
  {
    std::array<uint8_t, 27> seen{};
    int components = 0;
    for (int s = 0; s < 27; ++s) {
      if (s == 13 || !n[s] || seen[s]) continue;
      ++components;
      if (components > 1) return false;
      int stack[27];
      int top = 0;
      stack[top++] = s;
      seen[s] = 1;
      while (top) {
        const int c = stack[--top];
        const int cx = c % 3, cy = (c / 3) % 3, cz = c / 9;
        for (int dz = -1; dz <= 1; ++dz)
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int x = cx + dx, y = cy + dy, z = cz + dz;
              if (x < 0 || y < 0 || z < 0 || x > 2 || y > 2 || z > 2) continue;
              const int k = at(x, y, z);
              if (k == 13 || !n[k] || seen[k]) continue;
              seen[k] = 1;
              stack[top++] = k;
            }
      }
    }
    if (components != 1) return false;
  }

  // Background: exactly one 6-component inside the 18-neighbourhood that
  // touches a face neighbour of the center.
  {
    auto in18 = [](int k) {
      const int x = k % 3, y = (k / 3) % 3, z = k / 9;
      return k != 13 && (std::abs(x - 1) + std::abs(y - 1) + std::abs(z - 1)) <= 2;
    };
    constexpr int faces[6] = {4, 10, 12, 14, 16, 22};
    std::array<uint8_t, 27> seen{};
    int components = 0;
    for (int s : faces) {
      if (n[s] || seen[s]) continue;
      ++components;
      if (components > 1) return false;
      int stack[27];
      int top = 0;
      stack[top++] = s;
      seen[s] = 1;
      while (top) {
        const int c = stack[--top];
        const int cx = c % 3, cy = (c / 3) % 3, cz = c / 9;
        const int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
        for (const auto& st : steps) {
          const int x = cx + st[0], y = cy + st[1], z = cz + st[2];
          if (x < 0 || y < 0 || z < 0 || x > 2 || y > 2 || z > 2) continue;
          const int k = at(x, y, z);
          if (!in18(k) || n[k] || seen[k]) continue;
          seen[k] = 1;
          stack[top++] = k;
        }
      }
    }
    return components == 1;
  }
}

namespace {

std::array<uint8_t, 27> neighbourhood(const MaskVolume& m, int64_t x, int64_t y, int64_t z) {
  std::array<uint8_t, 27> n{};
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int64_t nx = x + dx, ny = y + dy, nz = z + dz;
        n[(dx + 1) + 3 * (dy + 1) + 9 * (dz + 1)] = m.contains(nx, ny, nz) && m(nx, ny, nz) ? 1 : 0;
      }
  return n;
}

bool deletable(const MaskVolume& m, int64_t x, int64_t y, int64_t z) {
  const auto n = neighbourhood(m, x, y, z);
  int fg = 0;
  for (int k = 0; k < 27; ++k) fg += (k != 13 && n[k]);
  if (fg <= 1) return false;  // isolated voxel or curve endpoint
  return is_simple_point(n);
}

}  // namespace

MaskVolume skeletonize3d(const MaskVolume& mask) {
  MaskVolume m = mask;
  for (auto& v : m.voxels()) v = v ? 1 : 0;
  const Dims& d = m.dims();
  // Border directions swept in fixed order: +z, -z, +y, -y, +x, -x.
  constexpr int dirs[6][3] = {{0, 0, 1}, {0, 0, -1}, {0, 1, 0}, {0, -1, 0}, {1, 0, 0}, {-1, 0, 0}};
  std::vector<Index3> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& dir : dirs) {
      candidates.clear();
      for (int64_t z = 0; z < d.z; ++z)
        for (int64_t y = 0; y < d.y; ++y)
          for (int64_t x = 0; x < d.x; ++x) {
            if (!m(x, y, z)) continue;
            const int64_t nx = x + dir[0], ny = y + dir[1], nz = z + dir[2];
            if (m.contains(nx, ny, nz) && m(nx, ny, nz)) continue;
            if (deletable(m, x, y, z)) candidates.push_back({x, y, z});
          }
      for (const auto& c : candidates) {
        if (deletable(m, c[0], c[1], c[2])) {
          m(c[0], c[1], c[2]) = 0;
          changed = true;
        }
      }
    }
  }
  return m;
}

double cldice(const MaskVolume& pred, const MaskVolume& gt) {
  require_same_dims(pred, gt, "cldice");
  const int64_t np = count_foreground(pred), ng = count_foreground(gt);
  if (np == 0 && ng == 0) return 1.0;
  if (np == 0 || ng == 0) return 0.0;
  const MaskVolume sp = skeletonize3d(pred);
  const MaskVolume sg = skeletonize3d(gt);
  int64_t sp_n = 0, sp_in = 0, sg_n = 0, sg_in = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (sp[i]) {
      ++sp_n;
      sp_in += gt[i] != 0;
    }
    if (sg[i]) {
      ++sg_n;
      sg_in += pred[i] != 0;
    }
  }
  const double tprec = static_cast<double>(sp_in) / static_cast<double>(sp_n);
  const double tsens = static_cast<double>(sg_in) / static_cast<double>(sg_n);
  if (tprec + tsens == 0.0) return 0.0;
  return 2.0 * tprec * tsens / (tprec + tsens);
}

// ---------------------------------------------------------------------------
// Distance transform and surface distance

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb-Huttenlocher) over the finite
// entries of f; entries with no finite site stay infinite.
void edt_1d(std::span<double> f, std::vector<int64_t>& v, std::vector<double>& zb, std::vector<double>& out) {
  const auto n = static_cast<int64_t>(f.size());
  v.resize(static_cast<size_t>(n));
  zb.resize(static_cast<size_t>(n) + 1);
  out.resize(static_cast<size_t>(n));
  int64_t k = -1;
  for (int64_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      zb[0] = -kInf;
      zb[1] = kInf;
      continue;
    }
    double s;
    for (;;) {
      const int64_t p = v[k];
      s = ((f[q] + static_cast<double>(q * q)) - (f[p] + static_cast<double>(p * p))) / (2.0 * static_cast<double>(q - p));
      if (s > zb[k]) break;
      if (--k < 0) break;
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      zb[0] = -kInf;
      zb[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    zb[k] = s;
    zb[k + 1] = kInf;
  }
  if (k < 0) return;  // no sites: row stays infinite
  int64_t j = 0;
  for (int64_t q = 0; q < n; ++q) {
    while (zb[j + 1] < static_cast<double>(q)) ++j;
    const double dq = static_cast<double>(q - v[j]);
    out[q] = dq * dq + f[v[j]];
  }
  for (int64_t q = 0; q < n; ++q) f[q] = out[q];
}

}  // namespace

Grid<double> edt_sq(const MaskVolume& mask) {
  if (count_foreground(mask) == 0) fail(Errc::invalid_argument, "edt_sq needs a non-empty mask");
  const Dims& d = mask.dims();
  Grid<double> g(d, mask.spacing(), kInf);
  for (size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) g[i] = 0.0;
  }
  std::vector<int64_t> v;
  std::vector<double> zb, out, line;
  for (int axis = 0; axis < 3; ++axis) {
    const int64_t n = d[axis];
    line.resize(static_cast<size_t>(n));
    const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
    for (int64_t j = 0; j < d[a2]; ++j)
      for (int64_t i = 0; i < d[a1]; ++i) {
        Index3 p{};
        p[a1] = i;
        p[a2] = j;
        for (int64_t q = 0; q < n; ++q) {
          p[axis] = q;
          line[static_cast<size_t>(q)] = g(p[0], p[1], p[2]);
        }
        edt_1d(line, v, zb, out);
        for (int64_t q = 0; q < n; ++q) {
          p[axis] = q;
          g(p[0], p[1], p[2]) = line[static_cast<size_t>(q)];
        }
      }
  }
  return g;
}

MaskVolume surface_voxels(const MaskVolume& mask) {
  MaskVolume s(mask.dims(), mask.spacing(), 0);
  const Dims& d = mask.dims();
  constexpr int steps[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int64_t z = 0; z < d.z; ++z)
    for (int64_t y = 0; y < d.y; ++y)
      for (int64_t x = 0; x < d.x; ++x) {
        if (!mask(x, y, z)) continue;
        for (const auto& st : steps) {
          const int64_t nx = x + st[0], ny = y + st[1], nz = z + st[2];
          if (!mask.contains(nx, ny, nz) || !mask(nx, ny, nz)) {
            s(x, y, z) = 1;
            break;
          }
        }
      }
  return s;
}

double msd(const MaskVolume& pred, const MaskVolume& gt) {
  require_same_dims(pred, gt, "msd");
  if (count_foreground(pred) == 0 || count_foreground(gt) == 0) {
    fail(Errc::invalid_argument, "msd needs two non-empty masks");
  }
  const MaskVolume sp = surface_voxels(pred);
  const MaskVolume sg = surface_voxels(gt);
  const Grid<double> to_gt = edt_sq(sg);
  const Grid<double> to_pred = edt_sq(sp);
  double sum = 0.0;
  int64_t n = 0;
  for (size_t i = 0; i < sp.size(); ++i) {
    if (sp[i]) {
      sum += std::sqrt(to_gt[i]);
      ++n;
    }
    if (sg[i]) {
      sum += std::sqrt(to_pred[i]);
      ++n;
    }
  }
  return sum / static_cast<double>(n);
}

SegScores score_segmentation(const MaskVolume& pred, const MaskVolume& gt) {
  SegScores s;
  s.dice = dice(pred, gt);
  s.cldice = cldice(pred, gt);
  s.msd_voxels = (count_foreground(pred) && count_foreground(gt)) ? msd(pred, gt)
                                                                  : std::numeric_limits<double>::quiet_NaN();
  return s;
}

// ---------------------------------------------------------------------------
// ROC

double auroc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) fail(Errc::invalid_argument, "scores/labels length mismatch");
  int64_t n_pos = 0;
  for (auto l : labels) {
    if (l > 1) fail(Errc::invalid_argument, "labels must be 0 or 1");
    n_pos += l;
  }
  const int64_t n_neg = static_cast<int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) fail(Errc::undefined_metric, "AUROC needs at least one positive and one negative");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives, kept doubled so
  // half ranks stay integral.
  int64_t rank_sum2 = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const auto twice_avg = static_cast<int64_t>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum2 += twice_avg;
    }
    i = j + 1;
  }
  const int64_t u2 = rank_sum2 - n_pos * (n_pos + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) fail(Errc::invalid_argument, "percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

RocResult bootstrap_auc_ci(std::span<const double> scores, std::span<const uint8_t> labels, int n_resamples,
                           uint64_t seed) {
  RocResult r;
  r.auc = auroc(scores, labels);
  r.n_resamples = n_resamples;
  if (n_resamples <= 0) fail(Errc::invalid_argument, "bootstrap needs at least one resample");

  Rng rng = derive_rng(seed, "bootstrap", 0);
  const size_t n = scores.size();
  std::vector<double> s(n), aucs;
  std::vector<uint8_t> l(n);
  aucs.reserve(static_cast<size_t>(n_resamples));
  for (int b = 0; b < n_resamples; ++b) {
    bool ok = false;
    for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
      size_t pos = 0;
      for (size_t k = 0; k < n; ++k) {
        const auto pick = static_cast<size_t>(rng.below(n));
        s[k] = scores[pick];
        l[k] = labels[pick];
        pos += l[k];
      }
      ok = pos > 0 && pos < n;
    }
    if (!ok) fail(Errc::undefined_metric, "bootstrap resample " + std::to_string(b) + " stayed single-class");
    aucs.push_back(auroc(s, l));
  }
  r.ci_lo = percentile(aucs, 0.025);
  r.ci_hi = percentile(aucs, 0.975);
  return r;
}

}  // namespace ctsynth
