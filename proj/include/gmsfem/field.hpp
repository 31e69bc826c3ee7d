#pragma once

/** @file field.hpp
    @brief Per-element coefficient fields, the plain-text grid format, and a
    seeded high-contrast channel generator.

    File format: a header line `nx ny`, then `nx*ny` whitespace-separated values,
    row-major with the bottom row first. Element fields use element counts,
    nodal (solution) fields use node counts.
*/

#include "error.hpp"
#include "grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace gmsfem {

/// Strictly positive, finite value per fine element.
class CoefficientField
{
public:
  CoefficientField(int nx, int ny, std::vector<double> values)
    : nx_(nx)
    , ny_(ny)
    , values_(std::move(values))
  {
    if (nx < 1 || ny < 1) throw ConfigError("field dimensions must be positive");
    if (values_.size() != static_cast<std::size_t>(nx) * ny)
      throw ConfigError("field has " + std::to_string(values_.size()) + " values, expected " +
                        std::to_string(static_cast<std::size_t>(nx) * ny));
    for (std::size_t e = 0; e < values_.size(); ++e)
      if (!(values_[e] > 0.0) || !std::isfinite(values_[e]))
        throw ConfigError("field value at element " + std::to_string(e) + " is not strictly positive and finite");
  }

  static CoefficientField uniform(const GridGeometry& geom, double value)
  {
    return {geom.elements_x(), geom.elements_y(), std::vector<double>(geom.element_count(), value)};
  }

  [[nodiscard]] int nx() const { return nx_; }
  [[nodiscard]] int ny() const { return ny_; }
  [[nodiscard]] double operator()(int i, int j) const { return values_[static_cast<std::size_t>(j) * nx_ + i]; }
  [[nodiscard]] double operator[](std::size_t e) const { return values_[e]; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  [[nodiscard]] bool matches(const GridGeometry& geom) const
  {
    return nx_ == geom.elements_x() && ny_ == geom.elements_y();
  }
  void check_matches(const GridGeometry& geom) const
  {
    if (!matches(geom))
      throw ConfigError("field is " + std::to_string(nx_) + "x" + std::to_string(ny_) + ", grid has " +
                        std::to_string(geom.elements_x()) + "x" + std::to_string(geom.elements_y()) + " elements");
  }

  [[nodiscard]] CoefficientField scaled(double factor) const
  {
    auto v = values_;
    for (auto& x : v) x *= factor;
    return {nx_, ny_, std::move(v)};
  }

  [[nodiscard]] double contrast() const
  {
    const auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    return *hi / *lo;
  }

  friend bool operator==(const CoefficientField&, const CoefficientField&) = default;

private:
  int nx_;
  int ny_;
  std::vector<double> values_;
};

// --- plain-text grid values -------------------------------------------------

struct GridValues
{
  int nx = 0;
  int ny = 0;
  std::vector<double> values;
};

inline void write_grid_values(std::ostream& out, int nx, int ny, std::span<const double> values)
{
  if (values.size() != static_cast<std::size_t>(nx) * ny) throw ConfigError("grid value count mismatch");
  out << nx << ' ' << ny << '\n';
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i) out << ' ';
      out << values[static_cast<std::size_t>(j) * nx + i];
    }
    out << '\n';
  }
  out.precision(old);
}

inline GridValues read_grid_values(std::istream& in)
{
  GridValues g;
  if (!(in >> g.nx >> g.ny) || g.nx < 1 || g.ny < 1) throw ConfigError("grid file: malformed header");
  const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
  g.values.reserve(n);
  std::string token;
  while (in >> token) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      throw ConfigError("grid file: cannot parse value '" + token + "'");
    }
    if (used != token.size()) throw ConfigError("grid file: cannot parse value '" + token + "'");
    g.values.push_back(v);
  }
  if (g.values.size() != n)
    throw ConfigError("grid file: expected " + std::to_string(n) + " values, found " + std::to_string(g.values.size()));
  return g;
}

inline CoefficientField read_field(std::istream& in, const GridGeometry& geom)
{
  auto g = read_grid_values(in);
  if (g.nx != geom.elements_x() || g.ny != geom.elements_y())
    throw ConfigError("field file is " + std::to_string(g.nx) + "x" + std::to_string(g.ny) + ", grid has " +
                      std::to_string(geom.elements_x()) + "x" + std::to_string(geom.elements_y()) + " elements");
  return {g.nx, g.ny, std::move(g.values)};
}

inline CoefficientField load_field(const std::string& path, const GridGeometry& geom)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open field file '" + path + "'");
  return read_field(in, geom);
}

inline void save_field(const std::string& path, const CoefficientField& field)
{
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write field file '" + path + "'");
  write_grid_values(out, field.nx(), field.ny(), field.values());
}

/// Nodal values on the full fine grid.
inline void save_nodal(const std::string& path, const GridGeometry& geom, std::span<const double> values)
{
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write solution file '" + path + "'");
  write_grid_values(out, geom.nodes_x(), geom.nodes_y(), values);
}

// --- generator ----------------------------------------------------------------

struct ChannelParams
{
  int min_channels = 8;
  int max_channels = 20;
  int min_width = 1;
  int max_width = 3;
  double min_length = 0.3; ///< fraction of the domain extent
  double max_length = 1.0;
  /// Band of fine cells along ∂D left at background value; negative means one
  /// coarse block. Boundary coarse nodes carry only their constrained constant,
  /// so high-contrast features in that band set an error floor that no amount
  /// of interior enrichment removes.
  int margin = -1;
};

/// Background 1 with `contrast`-valued straight channels (horizontal, vertical,
/// or diagonal). Deterministic in `(geom, contrast, seed, params)`.
inline CoefficientField generate_channels(const GridGeometry& geom, double contrast, std::uint64_t seed,
                                          const ChannelParams& params = {})
{
  if (!(contrast >= 1.0) || !std::isfinite(contrast)) throw ConfigError("contrast must be >= 1");
  const int nx = geom.elements_x();
  const int ny = geom.elements_y();
  std::vector<double> v(geom.element_count(), 1.0);

  std::mt19937_64 rng(seed);
  auto uniform_int = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto uniform_real = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  const int margin = params.margin < 0 ? geom.fine_per_coarse() : params.margin;
  auto paint = [&](int i, int j) {
    if (i >= margin && i < nx - margin && j >= margin && j < ny - margin) v[static_cast<std::size_t>(j) * nx + i] = contrast;
  };

  const int channels = uniform_int(params.min_channels, params.max_channels);
  for (int c = 0; c < channels; ++c) {
    const int orientation = uniform_int(0, 3);
    const int width = uniform_int(params.min_width, params.max_width);
    const double frac = uniform_real(params.min_length, params.max_length);
    const int i0 = uniform_int(0, nx - 1);
    const int j0 = uniform_int(0, ny - 1);
    switch (orientation) {
    case 0: { // horizontal
      const int len = std::max(1, static_cast<int>(frac * nx));
      for (int s = 0; s < len; ++s)
        for (int w = 0; w < width; ++w) paint(i0 + s - len / 2, j0 + w);
      break;
    }
    case 1: { // vertical
      const int len = std::max(1, static_cast<int>(frac * ny));
      for (int s = 0; s < len; ++s)
        for (int w = 0; w < width; ++w) paint(i0 + w, j0 + s - len / 2);
      break;
    }
    default: { // diagonal; one extra cell of thickness keeps the strip edge-connected
      const int len = std::max(1, static_cast<int>(frac * std::min(nx, ny)));
      const int dir = orientation == 2 ? 1 : -1;
      for (int s = 0; s < len; ++s)
        for (int w = 0; w <= width; ++w) paint(i0 + s - len / 2 + w, j0 + dir * (s - len / 2));
      break;
    }
    }
  }
  return {nx, ny, std::move(v)};
}

/// Fraction of elements above the field's minimum value; 0 for a uniform field.
inline double high_value_fraction(const CoefficientField& field)
{
  const double lo = *std::min_element(field.values().begin(), field.values().end());
  std::size_t count = 0;
  for (double x : field.values()) count += (x > lo);
  return static_cast<double>(count) / static_cast<double>(field.size());
}

} // namespace gmsfem
