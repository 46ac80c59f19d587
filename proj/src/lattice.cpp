#include "perc/lattice.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace perc {

namespace {

constexpr std::uint64_t kHashMul1 = 0xbf58476d1ce4e5b9ull;
constexpr std::uint64_t kHashMul2 = 0x94d049bb133111ebull;

inline std::uint64_t mix(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * kHashMul1;
  x = (x ^ (x >> 27)) * kHashMul2;
  return x ^ (x >> 31);
}

void check_dim(int dim) {
  if (dim < 2 || dim > kMaxDim)
    throw std::invalid_argument("dimension must be in [2, " + std::to_string(kMaxDim) + "]");
}

// Reject site sets too large to enumerate; all region kinds are finite by
// construction, this guards against effectively unbounded requests.
constexpr std::uint64_t kMaxEnumerableSites = 1ull << 28;

}  // namespace

int cheb_norm(const Site& s, int dim) {
  int r = 0;
  for (int i = 0; i < dim; ++i) r = std::max(r, std::abs(s.c[i]));
  return r;
}

std::string to_string(const Site& s, int dim) {
  std::string out = "(";
  for (int i = 0; i < dim; ++i) {
    if (i) out += ',';
    out += std::to_string(s.c[i]);
  }
  out += ')';
  return out;
}

std::size_t SiteHash::operator()(const Site& s) const noexcept {
  auto pack = [](Coord a, Coord b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  std::uint64_t h = 0x736974ull;
  h = mix(h ^ pack(s.c[0], s.c[1]));
  h = mix(h ^ pack(s.c[2], s.c[3]));
  h = mix(h ^ pack(s.c[4], s.c[5]));
  return static_cast<std::size_t>(h);
}

Region Region::box(int dim, int n) {
  check_dim(dim);
  if (n < 0) throw std::invalid_argument("box radius must be >= 0");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::box;
  r.n_ = n;
  return r;
}

Region Region::boundary(int dim, int n) {
  check_dim(dim);
  if (n < 1) throw std::invalid_argument("boundary radius must be >= 1");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::boundary;
  r.n_ = n;
  return r;
}

Region Region::annulus(int dim, int m, int n) {
  check_dim(dim);
  if (m < 0 || m >= n) throw std::invalid_argument("annulus requires 0 <= m < n");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::annulus;
  r.m_ = m;
  r.n_ = n;
  return r;
}

Region Region::truncated_slab(int dim, int n, int radius) {
  check_dim(dim);
  if (dim < 3) throw std::invalid_argument("slab requires d >= 3");
  if (n < 0 || radius < n) throw std::invalid_argument("slab requires radius >= n >= 0");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::slab;
  r.n_ = n;
  r.radius_ = radius;
  return r;
}

Region Region::quarter_face(int dim, int n, int axis, int face_sign,
                            std::span<const int> transverse_signs) {
  check_dim(dim);
  if (n < 1) throw std::invalid_argument("quarter_face requires N >= 1");
  if (axis < 0 || axis >= dim) throw std::invalid_argument("quarter_face axis out of range");
  if (face_sign != 1 && face_sign != -1)
    throw std::invalid_argument("quarter_face face_sign must be +-1");
  if (transverse_signs.size() != static_cast<std::size_t>(dim - 1))
    throw std::invalid_argument("quarter_face needs d-1 transverse signs");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::quarter_face;
  r.n_ = n;
  r.axis_ = axis;
  r.face_sign_ = face_sign;
  int k = 0;
  for (int i = 0; i < dim; ++i) {
    if (i == axis) continue;
    int s = transverse_signs[k++];
    if (s != 1 && s != -1) throw std::invalid_argument("transverse signs must be +-1");
    r.tsigns_[i] = static_cast<std::int8_t>(s);
  }
  return r;
}

Region Region::rectangle(int dim, std::span<const int> dims) {
  check_dim(dim);
  if (dims.size() != static_cast<std::size_t>(dim))
    throw std::invalid_argument("rectangle needs one extent per axis");
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::rectangle;
  for (int i = 0; i < dim; ++i) {
    if (dims[i] < 1) throw std::invalid_argument("rectangle extents must be >= 1");
    r.dims_[i] = dims[i];
  }
  return r;
}

Region Region::custom(int dim, std::vector<Site> sites) {
  check_dim(dim);
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::custom;
  r.sites_ = std::move(sites);
  return r;
}

bool Region::contains(const Site& x) const { return contains_local(x - offset_); }

bool Region::contains_local(const Site& x) const {
  // Trailing coordinates beyond dim_ must be zero for membership.
  for (int i = dim_; i < kMaxDim; ++i)
    if (x.c[i] != 0) return false;
  switch (kind_) {
    case RegionKind::box:
      return cheb_norm(x, dim_) <= n_;
    case RegionKind::boundary:
      return cheb_norm(x, dim_) == n_;
    case RegionKind::annulus: {
      int r = cheb_norm(x, dim_);
      return r > m_ && r <= n_;
    }
    case RegionKind::slab:
      for (int i = 0; i < dim_; ++i) {
        int bound = (i < 2) ? radius_ : n_;
        if (std::abs(x.c[i]) > bound) return false;
      }
      return true;
    case RegionKind::quarter_face:
      if (x.c[axis_] != face_sign_ * n_) return false;
      for (int i = 0; i < dim_; ++i) {
        if (i == axis_) continue;
        if (std::abs(x.c[i]) > n_) return false;
        if (tsigns_[i] * x.c[i] < 0) return false;
      }
      return true;
    case RegionKind::rectangle:
      for (int i = 0; i < dim_; ++i)
        if (x.c[i] < 0 || x.c[i] >= dims_[i]) return false;
      return true;
    case RegionKind::custom:
      return std::binary_search(sites_.begin(), sites_.end(), x);
  }
  return false;
}

void Region::bounding(Site& lo, Site& hi) const {
  lo = Site{};
  hi = Site{};
  switch (kind_) {
    case RegionKind::box:
    case RegionKind::boundary:
    case RegionKind::annulus:
      for (int i = 0; i < dim_; ++i) {
        lo.c[i] = -n_;
        hi.c[i] = n_;
      }
      break;
    case RegionKind::slab:
      for (int i = 0; i < dim_; ++i) {
        int b = (i < 2) ? radius_ : n_;
        lo.c[i] = -b;
        hi.c[i] = b;
      }
      break;
    case RegionKind::quarter_face:
      for (int i = 0; i < dim_; ++i) {
        if (i == axis_) {
          lo.c[i] = hi.c[i] = face_sign_ * n_;
        } else if (tsigns_[i] > 0) {
          lo.c[i] = 0;
          hi.c[i] = n_;
        } else {
          lo.c[i] = -n_;
          hi.c[i] = 0;
        }
      }
      break;
    case RegionKind::rectangle:
      for (int i = 0; i < dim_; ++i) {
        lo.c[i] = 0;
        hi.c[i] = dims_[i] - 1;
      }
      break;
    case RegionKind::custom:
      if (!sites_.empty()) {
        lo = hi = sites_.front();
        for (const Site& s : sites_)
          for (int i = 0; i < dim_; ++i) {
            lo.c[i] = std::min(lo.c[i], s.c[i]);
            hi.c[i] = std::max(hi.c[i], s.c[i]);
          }
      }
      break;
  }
}

std::uint64_t Region::site_count() const {
  auto box_sites = [this](std::int64_t r) {
    std::uint64_t t = 1;
    for (int i = 0; i < dim_; ++i) t *= static_cast<std::uint64_t>(2 * r + 1);
    return t;
  };
  switch (kind_) {
    case RegionKind::box:
      return box_sites(n_);
    case RegionKind::boundary:
      return box_sites(n_) - box_sites(n_ - 1);
    case RegionKind::annulus:
      return box_sites(n_) - box_sites(m_);
    case RegionKind::slab: {
      std::uint64_t t = 1;
      for (int i = 0; i < dim_; ++i) t *= static_cast<std::uint64_t>(2 * ((i < 2) ? radius_ : n_) + 1);
      return t;
    }
    case RegionKind::quarter_face: {
      std::uint64_t t = 1;
      for (int i = 0; i < dim_; ++i)
        if (i != axis_) t *= static_cast<std::uint64_t>(n_ + 1);
      return t;
    }
    case RegionKind::rectangle: {
      std::uint64_t t = 1;
      for (int i = 0; i < dim_; ++i) t *= static_cast<std::uint64_t>(dims_[i]);
      return t;
    }
    case RegionKind::custom:
      return sites_.size();
  }
  return 0;
}

std::vector<Site> Region::sites() const {
  if (site_count() > kMaxEnumerableSites)
    throw std::invalid_argument("region too large to enumerate: " + to_text());
  std::vector<Site> out;
  if (kind_ == RegionKind::custom) {
    out = sites_;
    for (Site& s : out) s = s + offset_;
    return out;
  }
  Site lo, hi;
  bounding(lo, hi);
  out.reserve(static_cast<std::size_t>(site_count()));
  Site cur = lo;
  while (true) {
    if (contains_local(cur)) out.push_back(cur + offset_);
    int i = dim_ - 1;
    for (; i >= 0; --i) {
      if (cur.c[i] < hi.c[i]) {
        ++cur.c[i];
        break;
      }
      cur.c[i] = lo.c[i];
    }
    if (i < 0) break;
  }
  // Row-major scan above increments the last axis fastest; re-sort so the
  // published order is plain lexicographic.
  std::sort(out.begin(), out.end());
  return out;
}

Region Region::translated(const Site& v) const {
  Region r = *this;
  r.offset_ = r.offset_ + v;
  return r;
}

bool Region::on_inner_boundary(const Site& x) const {
  if (!contains(x)) return false;
  for (int i = 0; i < dim_; ++i) {
    Site u = Site::unit(i);
    if (!contains(x + u) || !contains(x - u)) return true;
  }
  return false;
}

bool Region::operator==(const Region& o) const {
  return dim_ == o.dim_ && kind_ == o.kind_ && n_ == o.n_ && m_ == o.m_ &&
         radius_ == o.radius_ && axis_ == o.axis_ && face_sign_ == o.face_sign_ &&
         tsigns_ == o.tsigns_ && dims_ == o.dims_ && sites_ == o.sites_ &&
         offset_ == o.offset_;
}

std::string Region::to_text() const {
  std::ostringstream os;
  switch (kind_) {
    case RegionKind::box:
      os << "box(n=" << n_ << ")";
      break;
    case RegionKind::boundary:
      os << "boundary(n=" << n_ << ")";
      break;
    case RegionKind::annulus:
      os << "annulus(m=" << m_ << ",n=" << n_ << ")";
      break;
    case RegionKind::slab:
      os << "slab(n=" << n_ << ",r=" << radius_ << ")";
      break;
    case RegionKind::quarter_face: {
      os << "qface(n=" << n_ << ",axis=" << axis_ << ",face=" << (face_sign_ > 0 ? '+' : '-')
         << ",t=";
      for (int i = 0; i < dim_; ++i)
        if (i != axis_) os << (tsigns_[i] > 0 ? '+' : '-');
      os << ")";
      break;
    }
    case RegionKind::rectangle: {
      os << "rect(dims=";
      for (int i = 0; i < dim_; ++i) {
        if (i) os << 'x';
        os << dims_[i];
      }
      os << ")";
      break;
    }
    case RegionKind::custom: {
      os << "custom(sites=";
      for (std::size_t i = 0; i < sites_.size(); ++i) {
        if (i) os << ';';
        os << to_string(sites_[i], dim_);
      }
      os << ")";
      break;
    }
  }
  bool shifted = false;
  for (int i = 0; i < dim_; ++i) shifted |= offset_.c[i] != 0;
  if (shifted) os << '@' << to_string(offset_, dim_);
  return os.str();
}

namespace {

int parse_int(std::string_view s) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument("bad integer in region text: " + std::string(s));
  return v;
}

Site parse_site(std::string_view s, int dim) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')')
    throw std::invalid_argument("bad site in region text: " + std::string(s));
  s = s.substr(1, s.size() - 2);
  Site out;
  int i = 0;
  while (!s.empty()) {
    auto pos = s.find(',');
    std::string_view tok = s.substr(0, pos);
    if (i >= dim) throw std::invalid_argument("too many coordinates");
    out.c[i++] = parse_int(tok);
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  if (i != dim) throw std::invalid_argument("wrong coordinate count");
  return out;
}

// key=value list split on commas, values must not contain commas except sites.
std::string_view field(std::string_view body, std::string_view key) {
  std::string pat = std::string(key) + "=";
  auto pos = body.find(pat);
  if (pos == std::string_view::npos)
    throw std::invalid_argument("missing field '" + std::string(key) + "'");
  auto start = pos + pat.size();
  auto end = body.find(',', start);
  if (end == std::string_view::npos) end = body.size();
  return body.substr(start, end - start);
}

}  // namespace

Region Region::from_text(std::string_view text, int dim) {
  Site offset{};
  auto at = text.rfind('@');
  if (at != std::string_view::npos && text.find(')', at) != std::string_view::npos &&
      text.rfind(')') > at) {
    offset = parse_site(text.substr(at + 1), dim);
    text = text.substr(0, at);
  }
  auto open = text.find('(');
  if (open == std::string_view::npos || text.back() != ')')
    throw std::invalid_argument("bad region text: " + std::string(text));
  std::string_view name = text.substr(0, open);
  std::string_view body = text.substr(open + 1, text.size() - open - 2);

  Region r;
  if (name == "box") {
    r = Region::box(dim, parse_int(field(body, "n")));
  } else if (name == "boundary") {
    r = Region::boundary(dim, parse_int(field(body, "n")));
  } else if (name == "annulus") {
    r = Region::annulus(dim, parse_int(field(body, "m")), parse_int(field(body, "n")));
  } else if (name == "slab") {
    r = Region::truncated_slab(dim, parse_int(field(body, "n")), parse_int(field(body, "r")));
  } else if (name == "qface") {
    int n = parse_int(field(body, "n"));
    int axis = parse_int(field(body, "axis"));
    auto face = field(body, "face");
    auto t = field(body, "t");
    std::vector<int> signs;
    for (char ch : t) signs.push_back(ch == '+' ? 1 : -1);
    r = Region::quarter_face(dim, n, axis, face == "+" ? 1 : -1, signs);
  } else if (name == "rect") {
    auto dims_text = field(body, "dims");
    std::vector<int> dims;
    while (!dims_text.empty()) {
      auto pos = dims_text.find('x');
      dims.push_back(parse_int(dims_text.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      dims_text.remove_prefix(pos + 1);
    }
    r = Region::rectangle(dim, dims);
  } else if (name == "custom") {
    auto key_pos = body.find("sites=");
    if (key_pos == std::string_view::npos) throw std::invalid_argument("custom needs sites=");
    auto sites_text = body.substr(key_pos + 6);  // site tuples contain commas
    std::vector<Site> sites;
    while (!sites_text.empty()) {
      auto pos = sites_text.find(';');
      sites.push_back(parse_site(sites_text.substr(0, pos), dim));
      if (pos == std::string_view::npos) break;
      sites_text.remove_prefix(pos + 1);
    }
    r = Region::custom(dim, std::move(sites));
  } else {
    throw std::invalid_argument("unknown region kind: " + std::string(name));
  }
  return r.translated(offset);
}

std::vector<Edge> edges_in(const Region& region) {
  std::vector<Edge> out;
  std::vector<Site> pts = region.sites();
  out.reserve(pts.size() * static_cast<std::size_t>(region.dim()));
  for (const Site& s : pts) {
    for (int axis = 0; axis < region.dim(); ++axis) {
      Edge e{s, static_cast<std::int8_t>(axis)};
      if (region.contains(e.other())) out.push_back(e);
    }
  }
  return out;  // sites are lexicographically sorted, so edges already are
}

std::vector<Region> quarter_faces(int dim, int N) {
  if (N < 1) throw std::invalid_argument("quarter_faces requires N >= 1");
  std::vector<Region> out;
  out.reserve(static_cast<std::size_t>(dim) << dim);
  for (int axis = 0; axis < dim; ++axis) {
    for (int face = -1; face <= 1; face += 2) {
      for (int bits = 0; bits < (1 << (dim - 1)); ++bits) {
        std::vector<int> signs(static_cast<std::size_t>(dim - 1));
        for (int j = 0; j < dim - 1; ++j) signs[j] = (bits >> j) & 1 ? 1 : -1;
        out.push_back(Region::quarter_face(dim, N, axis, face, signs));
      }
    }
  }
  return out;
}

Region translate(const Region& region, const Site& v) { return region.translated(v); }

}  // namespace perc
