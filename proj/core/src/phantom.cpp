#include "mret/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "mret/errors.hpp"
#include "mret/manifest.hpp"
#include "mret/rng.hpp"
#include "mret/version.hpp"

namespace mret {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr float kBackgroundHu = -1000.0f;
constexpr float kShellHu = 900.0f;
constexpr float kInteriorHu = 30.0f;
constexpr double kShellInnerRho = 0.82;  // shell occupies rho in [0.82, 1]

struct HeadGeometry {
  double cx, cy, cz;
  double rx, ry, rz;
  double tex_fx, tex_fy, tex_fz;  // texture frequencies (cycles over the axis)
  double tex_px, tex_py, tex_pz;  // phases
};

HeadGeometry draw_head(Rng& rng, int x, int y, int z) {
  HeadGeometry g;
  g.cx = (x - 1) / 2.0 + rng.uniform(-0.02, 0.02) * x;
  g.cy = (y - 1) / 2.0 + rng.uniform(-0.02, 0.02) * y;
  g.cz = (z - 1) / 2.0 + rng.uniform(-0.02, 0.02) * z;
  g.rx = rng.uniform(0.28, 0.36) * x;
  g.ry = rng.uniform(0.30, 0.38) * y;
  g.rz = rng.uniform(0.45, 0.48) * z;  // head spans most of z
  g.tex_fx = rng.uniform(1.0, 3.0);
  g.tex_fy = rng.uniform(1.0, 3.0);
  g.tex_fz = rng.uniform(0.5, 2.0);
  g.tex_px = rng.uniform(0.0, 1.0);
  g.tex_py = rng.uniform(0.0, 1.0);
  g.tex_pz = rng.uniform(0.0, 1.0);
  return g;
}

float head_value(const HeadGeometry& g, int ix, int iy, int iz, int x, int y, int z) {
  const double dx = (ix - g.cx) / g.rx;
  const double dy = (iy - g.cy) / g.ry;
  const double dz = (iz - g.cz) / g.rz;
  const double rho2 = dx * dx + dy * dy + dz * dz;
  if (rho2 > 1.0) return kBackgroundHu;
  if (rho2 >= kShellInnerRho * kShellInnerRho) return kShellHu;
  const double tex = std::sin(2.0 * kPi * (g.tex_fx * ix / x + g.tex_px)) *
                     std::sin(2.0 * kPi * (g.tex_fy * iy / y + g.tex_py)) *
                     std::sin(2.0 * kPi * (g.tex_fz * iz / z + g.tex_pz));
  return kInteriorHu + static_cast<float>(25.0 * tex);
}

struct SoftShape {
  bool cylinder;         // else ellipsoid blob
  double cx, cy, cz;
  double rx, ry, rz;     // rz doubles as the half z-extent for cylinders
  float hu;
};

std::vector<SoftShape> draw_soft_shapes(Rng& rng, int x, int y, int z) {
  const int n = static_cast<int>(rng.uniform_int(2, 4));
  std::vector<SoftShape> shapes(n);
  for (auto& s : shapes) {
    s.cylinder = rng.uniform() < 0.5;
    s.cx = rng.uniform(0.25, 0.75) * x;
    s.cy = rng.uniform(0.25, 0.75) * y;
    s.cz = rng.uniform(0.30, 0.70) * z;
    s.rx = rng.uniform(0.10, 0.22) * x;
    s.ry = rng.uniform(0.10, 0.22) * y;
    s.rz = rng.uniform(0.25, 0.50) * z;
    s.hu = static_cast<float>(rng.uniform(-50.0, 250.0));
  }
  return shapes;
}

float soft_value(const std::vector<SoftShape>& shapes, int ix, int iy, int iz) {
  float v = kBackgroundHu;
  for (const auto& s : shapes) {
    const double dx = (ix - s.cx) / s.rx;
    const double dy = (iy - s.cy) / s.ry;
    const double dz = (iz - s.cz) / s.rz;
    const bool inside = s.cylinder ? (dx * dx + dy * dy <= 1.0 && std::fabs(dz) <= 1.0)
                                   : (dx * dx + dy * dy + dz * dz <= 1.0);
    if (inside) v = std::max(v, s.hu);
  }
  return v;
}

}  // namespace

int phantom_label(PhantomClass c) { return c == PhantomClass::WholeBrain ? 1 : 0; }

const char* phantom_class_name(PhantomClass c) {
  switch (c) {
    case PhantomClass::WholeBrain: return "whole_brain";
    case PhantomClass::PartialBrain: return "partial_brain";
    default: return "non_brain";
  }
}

PhantomClass phantom_class_from_name(const std::string& name) {
  if (name == "whole_brain") return PhantomClass::WholeBrain;
  if (name == "partial_brain") return PhantomClass::PartialBrain;
  if (name == "non_brain") return PhantomClass::NonBrain;
  throw InvalidDescriptor("unknown phantom class: " + name);
}

Volume3D gen_volume(PhantomClass c, std::uint64_t seed, std::array<int, 3> size) {
  const auto [x, y, z] = size;
  if (x < 16 || y < 16 || z < 4) {
    throw InvalidSize("gen_volume: need x,y >= 16 and z >= 4, got " + std::to_string(x) + "x" +
                      std::to_string(y) + "x" + std::to_string(z));
  }
  std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(c) + 1);
  s = mix_seed(s, static_cast<std::uint64_t>(x));
  s = mix_seed(s, static_cast<std::uint64_t>(y));
  s = mix_seed(s, static_cast<std::uint64_t>(z));
  Rng rng(s);

  Volume3D vol;
  vol.dims = size;
  vol.voxel_size = {256.0f / x, 256.0f / y, 450.0f / z};
  vol.data.resize(vol.voxel_count());

  HeadGeometry head{};
  std::vector<SoftShape> shapes;
  int brain_top = z;  // first slice index with no head content
  if (c == PhantomClass::WholeBrain || c == PhantomClass::PartialBrain) {
    head = draw_head(rng, x, y, z);
    if (c == PhantomClass::PartialBrain) {
      // keep only the lower 40-70% of z; the top of the head is cut away
      brain_top = static_cast<int>(std::floor(rng.uniform(0.40, 0.70) * (z - 1))) + 1;
    }
  } else {
    shapes = draw_soft_shapes(rng, x, y, z);
  }

  std::size_t i = 0;
  for (int iz = 0; iz < z; ++iz) {
    for (int iy = 0; iy < y; ++iy) {
      for (int ix = 0; ix < x; ++ix, ++i) {
        float v;
        if (c == PhantomClass::NonBrain) {
          v = soft_value(shapes, ix, iy, iz);
        } else if (iz < brain_top) {
          v = head_value(head, ix, iy, iz, x, y, z);
        } else {
          v = kBackgroundHu;
        }
        vol.data[i] = v + static_cast<float>(rng.normal(0.0, 12.0));
      }
    }
  }
  return vol;
}

SplitCounts counts_from_ratios(int count, const std::array<double, 3>& ratios) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (!(sum > 0.0)) throw InvalidSize("split ratios must have a positive sum");
  std::array<double, 3> exact{};
  std::array<int, 3> n{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    exact[i] = count * ratios[i] / sum;
    n[i] = static_cast<int>(std::floor(exact[i]));
    assigned += n[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
  });
  for (int k = 0; assigned < count; ++k, ++assigned) n[order[k % 3]] += 1;
  return SplitCounts{n[0], n[1], n[2]};
}

std::vector<CorpusEntry> gen_corpus(const CorpusOptions& opt) {
  if (opt.count < 10) throw InvalidSize("gen_corpus: count must be >= 10");
  if (!(opt.usable_fraction > 0.0 && opt.usable_fraction < 1.0)) {
    throw InvalidSize("gen_corpus: usable_fraction must lie in (0, 1)");
  }
  if (opt.splits.total() != opt.count) {
    throw InvalidSize("gen_corpus: split counts must sum to count");
  }
  if (opt.z_range[0] < 4 || opt.z_range[0] > opt.z_range[1]) {
    throw InvalidSize("gen_corpus: bad z range");
  }
  std::error_code ec;
  std::filesystem::create_directories(opt.out_dir, ec);
  if (ec) throw IoFailure("cannot create " + opt.out_dir.string());

  Rng rng(mix_seed(opt.seed, 0x636f7270ull));  // corpus-level stream

  const std::array<std::pair<const char*, int>, 3> split_sizes{{
      {"train", opt.splits.train}, {"val", opt.splits.val}, {"test", opt.splits.test}}};

  // Subjects are created per split so no subject straddles splits.
  struct Slot { std::string subject; std::string split; };
  std::vector<Slot> slots;
  slots.reserve(opt.count);
  int subject_counter = 0;
  for (const auto& [split_name, split_n] : split_sizes) {
    int remaining = split_n;
    while (remaining > 0) {
      int take = static_cast<int>(rng.uniform_int(2, 5));
      if (take > remaining) take = remaining;
      if (remaining - take == 1) take += 1;  // avoid a trailing 1-scan subject
      char buf[16];
      std::snprintf(buf, sizeof(buf), "subj%03d", subject_counter++);
      for (int k = 0; k < take; ++k) slots.push_back({buf, split_name});
      remaining -= take;
    }
  }

  // Global usable count is exact; per-split counts by largest remainder.
  const int global_usable = static_cast<int>(std::lround(opt.count * opt.usable_fraction));
  std::array<int, 3> usable_per_split{};
  {
    std::array<double, 3> exact{};
    int assigned = 0;
    for (int i = 0; i < 3; ++i) {
      exact[i] = split_sizes[i].second * opt.usable_fraction;
      usable_per_split[i] = static_cast<int>(std::floor(exact[i]));
      assigned += usable_per_split[i];
    }
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return exact[a] - std::floor(exact[a]) > exact[b] - std::floor(exact[b]);
    });
    for (int k = 0; assigned < global_usable; ++k, ++assigned) usable_per_split[order[k % 3]] += 1;
  }

  // Assign classes within each split: seeded shuffle, first k slots usable,
  // the rest alternating partial/non-brain.
  std::vector<PhantomClass> classes(opt.count, PhantomClass::NonBrain);
  std::size_t base = 0;
  for (int si = 0; si < 3; ++si) {
    const int n = split_sizes[si].second;
    std::vector<int> order(n);
    for (int k = 0; k < n; ++k) order[k] = k;
    rng.shuffle(order);
    for (int k = 0; k < n; ++k) {
      PhantomClass c;
      if (k < usable_per_split[si]) {
        c = PhantomClass::WholeBrain;
      } else {
        c = (k % 2 == 0) ? PhantomClass::PartialBrain : PhantomClass::NonBrain;
      }
      classes[base + order[k]] = c;
    }
    base += n;
  }

  // Slice counts; force both montage branches to occur in every corpus.
  std::vector<int> zs(opt.count);
  for (auto& zv : zs) zv = static_cast<int>(rng.uniform_int(opt.z_range[0], opt.z_range[1]));
  const bool any_below = std::any_of(zs.begin(), zs.end(), [](int v) { return v < 36; });
  const bool any_above = std::any_of(zs.begin(), zs.end(), [](int v) { return v > 36; });
  if (!any_below && opt.z_range[0] < 36) zs[0] = std::min(opt.z_range[1], 35);
  if (!any_above && opt.z_range[1] > 36) zs[1] = std::max(opt.z_range[0], 37);

  std::vector<CorpusEntry> entries(opt.count);
  std::vector<int> scan_within_subject(opt.count, 0);
  {
    int counter = 0;
    std::string prev;
    for (int i = 0; i < opt.count; ++i) {
      if (slots[i].subject != prev) {
        counter = 0;
        prev = slots[i].subject;
      }
      scan_within_subject[i] = counter++;
    }
  }
  for (int i = 0; i < opt.count; ++i) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s_%02d.nii", slots[i].subject.c_str(),
                  scan_within_subject[i]);
    const std::uint64_t scan_seed = mix_seed(opt.seed, 0x7363616eull + static_cast<std::uint64_t>(i));
    const auto path = std::filesystem::weakly_canonical(opt.out_dir) / buf;

    const Volume3D vol = gen_volume(classes[i], scan_seed, {opt.inplane[0], opt.inplane[1], zs[i]});
    write_nifti(vol, path);

    entries[i] = CorpusEntry{path.string(), slots[i].subject, classes[i],
                             phantom_label(classes[i]), slots[i].split, scan_seed};
  }

  std::map<std::string, std::string> header;
  header["tool"] = std::string("mret ") + version();
  header["seed"] = std::to_string(opt.seed);
  header["count"] = std::to_string(opt.count);
  char frac[32];
  std::snprintf(frac, sizeof(frac), "%.6f", opt.usable_fraction);
  header["usable_fraction"] = frac;
  header["splits"] = std::to_string(opt.splits.train) + "/" + std::to_string(opt.splits.val) +
                     "/" + std::to_string(opt.splits.test);
  header["inplane"] = std::to_string(opt.inplane[0]) + "x" + std::to_string(opt.inplane[1]);
  header["z_range"] = std::to_string(opt.z_range[0]) + ".." + std::to_string(opt.z_range[1]);
  write_corpus_manifest(opt.out_dir / "manifest.csv", entries, header);
  return entries;
}

}  // namespace mret
