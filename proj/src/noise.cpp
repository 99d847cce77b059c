#include "bdsde/noise.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <memory>

#include "bdsde/errors.hpp"
#include "bdsde/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "noise file format assumes a little-endian host");
static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);

namespace bdsde {

double NoiseGrid::b_value(std::size_t p, std::size_t i, std::size_t k) const {
  double b = 0.0;
  for (std::size_t j = 1; j <= i; ++j) b += db_row(p, j)[k];
  return b;
}

NoiseGrid sample_noise(const Partition& partition, std::size_t paths, std::size_t d,
                       std::size_t l, BMode mode, std::uint64_t seed, ExecMode exec) {
  if (paths == 0) throw_error(ErrorCode::invalid_argument, "sample_noise: paths must be positive");
  if (d == 0 || l == 0)
    throw_error(ErrorCode::invalid_argument, "sample_noise: dimensions must be positive");
  const std::size_t n = partition.steps();

  NoiseGrid grid;
  grid.partition = partition;
  grid.d = d;
  grid.l = l;
  grid.paths = paths;
  grid.mode = mode;
  grid.seed = seed;
  grid.dW.resize(paths * n * d);
  grid.dB.resize((mode == BMode::frozen ? 1 : paths) * n * l);

  std::vector<double> sqrt_dt(n);
  for (std::size_t i = 1; i <= n; ++i) sqrt_dt[i - 1] = std::sqrt(partition.dt(i));

  const StreamKey wkey{seed, stream_purpose::forward_w};
  run_indexed(paths, exec, [&](std::size_t p) {
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < d; ++k)
        grid.dW[(p * n + (i - 1)) * d + k] =
            sqrt_dt[i - 1] * normal_draw(wkey, p, i, k, 0);
  });

  const StreamKey bkey{seed, stream_purpose::backward_b};
  if (mode == BMode::frozen) {
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t k = 0; k < l; ++k)
        grid.dB[(i - 1) * l + k] = sqrt_dt[i - 1] * normal_draw(bkey, 0, i, k, 0);
  } else {
    run_indexed(paths, exec, [&](std::size_t p) {
      for (std::size_t i = 1; i <= n; ++i)
        for (std::size_t k = 0; k < l; ++k)
          grid.dB[(p * n + (i - 1)) * l + k] = sqrt_dt[i - 1] * normal_draw(bkey, p, i, k, 0);
    });
  }
  return grid;
}

namespace {

// Fills fine increments for one coarse interval of one scalar component.
// Interior points are sampled sequentially from the bridge conditional law;
// the final increment is the remainder, nudged by a few ulp toward the value
// that makes the left-to-right sum reproduce the coarse increment bit-for-bit.
// Exactness is usually achievable, but not always: when the coarse increment
// is far smaller than the partial sums, every candidate last increment moves
// the rounded sum in steps wider than the target's rounding interval, so the
// best reachable sum is within one ulp of the increment scale (relative
// 2^-52 of the step size, invisible to every consumer).
void refine_interval(const Partition& fine, std::size_t f_lo, std::size_t f_hi,
                     double t_lo, double t_hi, double coarse_inc, const StreamKey& key,
                     std::uint64_t path, std::size_t component, double* out) {
  const std::size_t m = f_hi - f_lo;
  if (m == 1) {
    out[0] = coarse_inc;
    return;
  }
  double w = 0.0;       // bridge value relative to the coarse-left endpoint
  double s_prev = t_lo;
  double running = 0.0; // left-to-right sum of emitted increments
  for (std::size_t j = 1; j < m; ++j) {
    const double s = fine.time(f_lo + j);
    const double remain = t_hi - s_prev;
    const double mean = w + (coarse_inc - w) * (s - s_prev) / remain;
    const double var = (s - s_prev) * (t_hi - s) / remain;
    const double w_next =
        mean + std::sqrt(var) * normal_draw(key, path, f_lo + j, component, 0);
    out[j - 1] = w_next - w;
    running += out[j - 1];
    w = w_next;
    s_prev = s;
  }
  double last = coarse_inc - running;
  for (int iter = 0; iter < 64; ++iter) {
    const double gap = coarse_inc - (running + last);
    if (gap == 0.0) break;
    const double next = last + gap;
    if (next == last) {
      // Residual below one ulp of the increment: a single-ulp step either
      // lands on the target or proves it unreachable from this lattice.
      const double bumped = std::nextafter(
          last, gap > 0.0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity());
      if (running + bumped == coarse_inc) last = bumped;
      break;
    }
    last = next;
  }
  out[m - 1] = last;
}

}  // namespace

NoiseGrid brownian_bridge_refine(const NoiseGrid& source, const Partition& fine,
                                 std::uint64_t bridge_seed, ExecMode exec) {
  const Partition& coarse = source.partition;
  if (!fine.refines(coarse))
    throw_error(ErrorCode::invalid_argument,
                "brownian_bridge_refine: target partition does not refine the source");
  const std::size_t nc = coarse.steps();
  const std::size_t nf = fine.steps();

  // Map each coarse node to its (exact) position in the fine partition.
  std::vector<std::size_t> anchor(nc + 1);
  for (std::size_t i = 0; i <= nc; ++i) anchor[i] = fine.index_of(coarse.time(i));

  NoiseGrid grid;
  grid.partition = fine;
  grid.d = source.d;
  grid.l = source.l;
  grid.paths = source.paths;
  grid.mode = source.mode;
  grid.seed = bridge_seed;
  grid.dW.resize(source.paths * nf * source.d);
  grid.dB.resize((source.mode == BMode::frozen ? 1 : source.paths) * nf * source.l);

  const StreamKey wkey{bridge_seed, stream_purpose::bridge_w};
  run_indexed(source.paths, exec, [&](std::size_t p) {
    std::vector<double> buf(nf);
    for (std::size_t k = 0; k < source.d; ++k) {
      for (std::size_t i = 1; i <= nc; ++i)
        refine_interval(fine, anchor[i - 1], anchor[i], coarse.time(i - 1), coarse.time(i),
                        source.dw(p, i, k), wkey, p, k, buf.data() + anchor[i - 1]);
      for (std::size_t j = 1; j <= nf; ++j)
        grid.dW[(p * nf + (j - 1)) * source.d + k] = buf[j - 1];
    }
  });

  const StreamKey bkey{bridge_seed, stream_purpose::bridge_b};
  const std::size_t b_paths = source.mode == BMode::frozen ? 1 : source.paths;
  run_indexed(b_paths, exec, [&](std::size_t p) {
    std::vector<double> buf(nf);
    for (std::size_t k = 0; k < source.l; ++k) {
      for (std::size_t i = 1; i <= nc; ++i)
        refine_interval(fine, anchor[i - 1], anchor[i], coarse.time(i - 1), coarse.time(i),
                        source.db_row(p, i)[k], bkey, p, k, buf.data() + anchor[i - 1]);
      for (std::size_t j = 1; j <= nf; ++j)
        grid.dB[(p * nf + (j - 1)) * source.l + k] = buf[j - 1];
    }
  });
  return grid;
}

namespace {

void write_bytes(std::FILE* fp, const void* data, std::size_t bytes, const std::string& path) {
  if (std::fwrite(data, 1, bytes, fp) != bytes)
    throw_error(ErrorCode::io_error, "short write to " + path);
}

void read_bytes(std::FILE* fp, void* data, std::size_t bytes, const std::string& path) {
  if (std::fread(data, 1, bytes, fp) != bytes)
    throw_error(ErrorCode::io_error, "short read from " + path);
}

struct FileCloser {
  void operator()(std::FILE* fp) const {
    if (fp) std::fclose(fp);
  }
};

}  // namespace

void save_noise(const NoiseGrid& grid, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw_error(ErrorCode::io_error, "cannot open " + path + " for writing");
  const char magic[4] = {'B', 'D', 'S', 'N'};
  const std::uint32_t version = 1;
  const std::uint32_t d = static_cast<std::uint32_t>(grid.d);
  const std::uint32_t l = static_cast<std::uint32_t>(grid.l);
  const std::uint32_t n = static_cast<std::uint32_t>(grid.partition.steps());
  const std::uint64_t paths = grid.paths;
  const std::uint32_t mode = static_cast<std::uint32_t>(grid.mode);
  const std::uint64_t seed = grid.seed;
  write_bytes(fp.get(), magic, 4, path);
  write_bytes(fp.get(), &version, 4, path);
  write_bytes(fp.get(), &d, 4, path);
  write_bytes(fp.get(), &l, 4, path);
  write_bytes(fp.get(), &n, 4, path);
  write_bytes(fp.get(), &paths, 8, path);
  write_bytes(fp.get(), &mode, 4, path);
  write_bytes(fp.get(), &seed, 8, path);
  write_bytes(fp.get(), grid.partition.times().data(), (n + 1) * sizeof(double), path);
  write_bytes(fp.get(), grid.dW.data(), grid.dW.size() * sizeof(double), path);
  write_bytes(fp.get(), grid.dB.data(), grid.dB.size() * sizeof(double), path);
}

NoiseGrid load_noise(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw_error(ErrorCode::io_error, "cannot open " + path + " for reading");
  char magic[4];
  read_bytes(fp.get(), magic, 4, path);
  if (std::memcmp(magic, "BDSN", 4) != 0)
    throw_error(ErrorCode::invalid_input, path + ": not a noise file (bad magic)");
  std::uint32_t version = 0, d = 0, l = 0, n = 0, mode = 0;
  std::uint64_t paths = 0, seed = 0;
  read_bytes(fp.get(), &version, 4, path);
  if (version != 1)
    throw_error(ErrorCode::invalid_input, path + ": unsupported noise file version");
  read_bytes(fp.get(), &d, 4, path);
  read_bytes(fp.get(), &l, 4, path);
  read_bytes(fp.get(), &n, 4, path);
  read_bytes(fp.get(), &paths, 8, path);
  read_bytes(fp.get(), &mode, 4, path);
  read_bytes(fp.get(), &seed, 8, path);
  if (d == 0 || l == 0 || n == 0 || paths == 0 || mode > 1)
    throw_error(ErrorCode::invalid_input, path + ": malformed noise file header");
  const std::size_t total =
      paths * static_cast<std::size_t>(n) * (d + l) + n + 1;
  if (total > (std::size_t{1} << 33))
    throw_error(ErrorCode::resource_limit, path + ": noise file too large to load");

  std::vector<double> times(n + 1);
  read_bytes(fp.get(), times.data(), times.size() * sizeof(double), path);

  NoiseGrid grid;
  grid.partition = Partition::from_times(times);
  grid.d = d;
  grid.l = l;
  grid.paths = paths;
  grid.mode = static_cast<BMode>(mode);
  grid.seed = seed;
  grid.dW.resize(paths * static_cast<std::size_t>(n) * d);
  grid.dB.resize((grid.mode == BMode::frozen ? 1 : paths) * static_cast<std::size_t>(n) * l);
  read_bytes(fp.get(), grid.dW.data(), grid.dW.size() * sizeof(double), path);
  read_bytes(fp.get(), grid.dB.data(), grid.dB.size() * sizeof(double), path);
  return grid;
}

}  // namespace bdsde
