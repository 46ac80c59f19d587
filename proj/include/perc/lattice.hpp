#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace perc {

// Compile-time bound on the lattice dimension. Experiments fix d in [2, kMaxDim];
// coordinates beyond the active dimension stay zero, so hashing and comparison of
// sites never depend on d.
inline constexpr int kMaxDim = 6;

using Coord = std::int32_t;

struct Site {
  std::array<Coord, kMaxDim> c{};

  static Site of(std::initializer_list<Coord> coords) {
    Site s;
    int i = 0;
    for (Coord v : coords) s.c[i++] = v;
    return s;
  }
  static Site unit(int axis) {
    Site s;
    s.c[axis] = 1;
    return s;
  }

  Coord operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  Coord& operator[](int i) { return c[static_cast<std::size_t>(i)]; }

  friend Site operator+(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] += b.c[i];
    return a;
  }
  friend Site operator-(Site a, const Site& b) {
    for (int i = 0; i < kMaxDim; ++i) a.c[i] -= b.c[i];
    return a;
  }
  Site operator-() const {
    Site s;
    for (int i = 0; i < kMaxDim; ++i) s.c[i] = -c[i];
    return s;
  }
  auto operator<=>(const Site&) const = default;
};

// L^inf norm over the first dim coordinates.
int cheb_norm(const Site& s, int dim);

std::string to_string(const Site& s, int dim);

// Canonical edge of Z^d: the base is the lexicographically smaller endpoint and
// the axis points in the positive direction, so every unordered neighbour pair
// has exactly one representation.
struct Edge {
  Site base;
  std::int8_t axis = 0;

  Site other() const {
    Site s = base;
    s.c[axis] += 1;
    return s;
  }
  auto operator<=>(const Edge&) const = default;
};

struct SiteHash {
  std::size_t operator()(const Site& s) const noexcept;
};

enum class RegionKind : std::uint8_t {
  box,           // {-n..n}^d
  boundary,      // box(n) \ box(n-1)
  annulus,       // box(n) \ box(m)
  slab,          // {-R..R}^2 x {-n..n}^{d-2}, d >= 3
  quarter_face,  // {x in boundary(N) : x_axis = sign*N, tsign_j * x_j >= 0 for j != axis}
  rectangle,     // {0..dims_i-1} per axis, corner-anchored
  custom,        // explicit site list
};

// Finite site set with a geometry role. Membership is pure and total; the offset
// translates the whole set, so translated copies never rebuild site lists.
class Region {
 public:
  static Region box(int dim, int n);
  static Region boundary(int dim, int n);
  static Region annulus(int dim, int m, int n);
  static Region truncated_slab(int dim, int n, int radius);
  static Region quarter_face(int dim, int n, int axis, int face_sign,
                             std::span<const int> transverse_signs);
  static Region rectangle(int dim, std::span<const int> dims);
  static Region custom(int dim, std::vector<Site> sites);

  int dim() const { return dim_; }
  RegionKind kind() const { return kind_; }
  const Site& offset() const { return offset_; }
  int param_n() const { return n_; }
  int param_m() const { return m_; }
  int param_radius() const { return radius_; }

  bool contains(const Site& x) const;

  // All sites in ascending lexicographic order of the local (offset-free)
  // representation, then shifted by the offset.
  std::vector<Site> sites() const;
  std::uint64_t site_count() const;

  Region translated(const Site& v) const;

  // Inner vertex boundary: members with at least one lattice neighbour outside
  // the region. For box(n) this is exactly boundary(n).
  bool on_inner_boundary(const Site& x) const;

  bool operator==(const Region& o) const;

  // Canonical text form used in experiment manifests, e.g. "box(n=3)@(0,0)".
  std::string to_text() const;
  static Region from_text(std::string_view text, int dim);

 private:
  Region() = default;
  void bounding(Site& lo, Site& hi) const;  // local coordinates
  bool contains_local(const Site& x) const;

  int dim_ = 2;
  RegionKind kind_ = RegionKind::box;
  int n_ = 0;
  int m_ = 0;
  int radius_ = 0;
  int axis_ = 0;
  int face_sign_ = 1;
  std::array<std::int8_t, kMaxDim> tsigns_{};
  std::array<int, kMaxDim> dims_{};
  std::vector<Site> sites_;  // custom only, sorted and deduplicated
  Site offset_{};
};

// All canonical edges with both endpoints in the region, deduplicated, in
// deterministic (lexicographic base, ascending axis) order.
std::vector<Edge> edges_in(const Region& region);

// The d*2^d quarter-faces whose union is boundary(N).
std::vector<Region> quarter_faces(int dim, int N);

Region translate(const Region& region, const Site& v);

}  // namespace perc
