#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "apt/errors.hpp"

namespace apt {

struct Site {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Site&, const Site&) = default;
};

/// Row-major {0,1} image.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(std::size_t rows, std::size_t cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), pixels_(rows * cols, fill ? 1 : 0) {
    if (rows == 0 || cols == 0) throw ConfigError("image: rows and cols must be positive");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return pixels_.size(); }

  std::uint8_t operator()(std::size_t r, std::size_t c) const { return pixels_[r * cols_ + c]; }
  void set(std::size_t r, std::size_t c, bool v) { pixels_[r * cols_ + c] = v ? 1 : 0; }
  void flip(Site s) { pixels_[s.row * cols_ + s.col] ^= 1; }
  bool in_bounds(Site s) const { return s.row < rows_ && s.col < cols_; }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> pixels_;
};

inline BinaryImage flipped(BinaryImage x, Site s) {
  x.flip(s);
  return x;
}

// Forward half of the 8-neighbourhood: each unordered pair is reached once.
inline constexpr std::array<std::pair<int, int>, 4> kForwardNeighbours{{{0, 1}, {1, -1}, {1, 0}, {1, 1}}};
inline constexpr std::array<std::pair<int, int>, 8> kAllNeighbours{
    {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

/// Number of unordered 8-neighbour pairs on an r x c grid.
constexpr std::size_t neighbour_pair_count(std::size_t r, std::size_t c) {
  if (r == 0 || c == 0) return 0;
  return (r - 1) * c + r * (c - 1) + 2 * (r - 1) * (c - 1);
}

/// Integer sufficient statistics of the Ising posterior.
struct IsingStats {
  std::int64_t matches = 0;     // #{(i,j): x_ij == y_ij}
  std::int64_t agreements = 0;  // #{neighbour pairs with equal values}
  friend bool operator==(const IsingStats&, const IsingStats&) = default;
};

struct IsingPosteriorSpec {
  BinaryImage observed;
  double alpha = 1.0;
  double beta = 0.7;

  void validate() const {
    if (observed.size() == 0) throw ConfigError("ising: observed image is empty");
    if (!(alpha >= 0.0)) throw ConfigError("ising: alpha must be >= 0");
    if (!(beta >= 0.0)) throw ConfigError("ising: beta must be >= 0");
  }

  void check_shape(const BinaryImage& x) const {
    if (x.rows() != observed.rows() || x.cols() != observed.cols())
      throw ConfigError("ising: state shape does not match observed image");
  }

  /// The log density as a function of its sufficient statistics. Both the
  /// full evaluation and the single-site delta go through this expression,
  /// which makes the delta bit-identical to a difference of full evaluations.
  double value(const IsingStats& s) const {
    return alpha * static_cast<double>(s.matches) + beta * static_cast<double>(s.agreements);
  }
};

inline IsingStats ising_stats(const IsingPosteriorSpec& spec, const BinaryImage& x) {
  spec.check_shape(x);
  IsingStats s;
  const auto rows = static_cast<long>(x.rows());
  const auto cols = static_cast<long>(x.cols());
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) {
      const auto v = x(i, j);
      if (v == spec.observed(i, j)) ++s.matches;
      for (auto [di, dj] : kForwardNeighbours) {
        const long ni = i + di, nj = j + dj;
        if (ni < 0 || ni >= rows || nj < 0 || nj >= cols) continue;
        if (x(ni, nj) == v) ++s.agreements;
      }
    }
  }
  return s;
}

/// Change of the statistics when pixel `site` is flipped; reads only the
/// site and its neighbours.
inline IsingStats ising_stats_delta(const IsingPosteriorSpec& spec, const BinaryImage& x, Site site) {
  if (!x.in_bounds(site)) throw ConfigError("ising: site out of bounds");
  const auto rows = static_cast<long>(x.rows());
  const auto cols = static_cast<long>(x.cols());
  const long i = static_cast<long>(site.row), j = static_cast<long>(site.col);
  const auto v = x(site.row, site.col);
  IsingStats d;
  d.matches = (v == spec.observed(site.row, site.col)) ? -1 : 1;
  for (auto [di, dj] : kAllNeighbours) {
    const long ni = i + di, nj = j + dj;
    if (ni < 0 || ni >= rows || nj < 0 || nj >= cols) continue;
    d.agreements += (x(ni, nj) == v) ? -1 : 1;
  }
  return d;
}

/// Binary image with its statistics cached so that the log density and
/// single-flip deltas are O(1) in the image size.
class IsingState {
 public:
  IsingState() = default;
  IsingState(const IsingPosteriorSpec& spec, BinaryImage image)
      : image_(std::move(image)), stats_(ising_stats(spec, image_)) {}

  const BinaryImage& image() const { return image_; }
  const IsingStats& stats() const { return stats_; }

  void flip(Site s, const IsingStats& delta) {
    image_.flip(s);
    stats_.matches += delta.matches;
    stats_.agreements += delta.agreements;
  }

  friend bool operator==(const IsingState&, const IsingState&) = default;

 private:
  BinaryImage image_;
  IsingStats stats_;
};

inline double ising_log_density(const IsingPosteriorSpec& spec, const BinaryImage& x) {
  return spec.value(ising_stats(spec, x));
}

inline double ising_log_density_delta(const IsingPosteriorSpec& spec, const IsingState& x, Site site) {
  const auto d = ising_stats_delta(spec, x.image(), site);
  const IsingStats after{x.stats().matches + d.matches, x.stats().agreements + d.agreements};
  return spec.value(after) - spec.value(x.stats());
}

inline double ising_log_density_delta(const IsingPosteriorSpec& spec, const BinaryImage& x, Site site) {
  return ising_log_density_delta(spec, IsingState(spec, x), site);
}

/// Ising posterior target over {0,1}^{rows x cols}.
class IsingPosterior {
 public:
  using state_type = IsingState;

  explicit IsingPosterior(IsingPosteriorSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

  std::size_t rows() const { return spec_.observed.rows(); }
  std::size_t cols() const { return spec_.observed.cols(); }
  std::size_t sites() const { return spec_.observed.size(); }
  const IsingPosteriorSpec& spec() const { return spec_; }

  IsingState make_state(BinaryImage x) const { return IsingState(spec_, std::move(x)); }
  double log_density(const IsingState& x) const { return spec_.value(x.stats()); }
  double log_density(const BinaryImage& x) const { return ising_log_density(spec_, x); }
  IsingStats delta_stats(const IsingState& x, Site s) const { return ising_stats_delta(spec_, x.image(), s); }
  double log_density_delta(const IsingState& x, Site s) const { return ising_log_density_delta(spec_, x, s); }

 private:
  IsingPosteriorSpec spec_;
};

// Image I/O. Accepted inputs: a plain grid of '0'/'1' characters (one row per
// line, whitespace ignored, '#' comments), or a PBM bitmap (P1 plain or P4 raw,
// where 1 = black).

inline BinaryImage parse_image(std::istream& in) {
  std::string first;
  {
    std::streampos start = in.tellg();
    in >> first;
    in.clear();
    in.seekg(start);
  }
  auto next_token = [&in]() {
    std::string tok;
    while (in >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return tok;
    }
    throw ConfigError("image: unexpected end of file");
  };
  if (first == "P1" || first == "P4") {
    next_token();
    const auto cols = static_cast<std::size_t>(std::stoul(next_token()));
    const auto rows = static_cast<std::size_t>(std::stoul(next_token()));
    BinaryImage img(rows, cols);
    if (first == "P1") {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
          char ch;
          do {
            if (!in.get(ch)) throw ConfigError("image: truncated P1 data");
          } while (ch != '0' && ch != '1');
          img.set(r, c, ch == '1');
        }
    } else {
      in.get();  // single whitespace after header
      const std::size_t row_bytes = (cols + 7) / 8;
      std::vector<char> buf(row_bytes);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!in.read(buf.data(), static_cast<std::streamsize>(row_bytes)))
          throw ConfigError("image: truncated P4 data");
        for (std::size_t c = 0; c < cols; ++c)
          img.set(r, c, (static_cast<unsigned char>(buf[c / 8]) >> (7 - c % 8)) & 1);
      }
    }
    return img;
  }
  std::vector<std::vector<std::uint8_t>> grid;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::vector<std::uint8_t> row;
    for (char ch : line) {
      if (ch == '0' || ch == '1') row.push_back(ch == '1');
      else if (ch != ' ' && ch != '\t' && ch != '\r')
        throw ConfigError(std::string("image: unexpected character '") + ch + "'");
    }
    if (!row.empty()) grid.push_back(std::move(row));
  }
  if (grid.empty()) throw ConfigError("image: no pixels");
  BinaryImage img(grid.size(), grid.front().size());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (grid[r].size() != img.cols()) throw ConfigError("image: ragged rows");
    for (std::size_t c = 0; c < img.cols(); ++c) img.set(r, c, grid[r][c]);
  }
  return img;
}

inline BinaryImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("image file not found: " + path.string());
  return parse_image(in);
}

inline void write_image_ascii(std::ostream& out, const BinaryImage& img) {
  for (std::size_t r = 0; r < img.rows(); ++r) {
    for (std::size_t c = 0; c < img.cols(); ++c) out << static_cast<int>(img(r, c));
    out << '\n';
  }
}

/// Plain-text graymap (P2) of values in [0,1], 255 = 1.
inline void write_graymap(std::ostream& out, std::size_t rows, std::size_t cols,
                          const std::vector<double>& values) {
  out << "P2\n" << cols << ' ' << rows << "\n255\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = values[r * cols + c];
      v = v < 0 ? 0 : (v > 1 ? 1 : v);
      out << static_cast<int>(v * 255.0 + 0.5) << (c + 1 == cols ? '\n' : ' ');
    }
  }
}

/// Synthetic test image, invariant under the 8 symmetries of the square:
/// a centred disc with a square hole, plus four blobs on the diagonals.
inline BinaryImage synthetic_image(std::size_t n = 40) {
  BinaryImage img(n, n);
  const double c = (static_cast<double>(n) - 1.0) / 2.0;
  const double scale = static_cast<double>(n) / 40.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < n; ++k) {
      const double dr = static_cast<double>(r) - c, dc = static_cast<double>(k) - c;
      const double rad2 = dr * dr + dc * dc;
      bool on = rad2 <= (11.0 * scale) * (11.0 * scale);
      if (std::abs(dr) <= 3.0 * scale && std::abs(dc) <= 3.0 * scale) on = false;
      const double br = std::abs(dr) - 15.0 * scale, bc = std::abs(dc) - 15.0 * scale;
      if (br * br + bc * bc <= (2.5 * scale) * (2.5 * scale)) on = true;
      img.set(r, k, on);
    }
  }
  return img;
}

}  // namespace apt
