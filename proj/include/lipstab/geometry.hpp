#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace lipstab {

inline constexpr int kMaxDim = 3;

using Vec = std::array<double, kMaxDim>;
using Index3 = std::array<int, kMaxDim>;

/// Raised for malformed geometry: incommensurate spacing, bad Sigma, broken chains.
class GeometryError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Box {
  Vec lo{};
  Vec hi{};
};

/// Accessible boundary portion: a rectangle on one face of Omega.
struct SigmaSpec {
  int axis = 0;
  bool upper = false;  // face at omega.hi[axis] instead of omega.lo[axis]
  bool whole_face = true;
  Box footprint;  // lateral extent, ignored when whole_face; axis coordinate unused
};

struct DomainSpec {
  int dim = 3;
  Box omega;
  std::vector<Box> subdomains;  // D_1 .. D_N, must partition omega
  SigmaSpec sigma;
  double r0 = 1.0;
  double d0_thickness = 0.0;  // <= 0 selects r0 / 2
};

enum class NodeClass : std::uint8_t {
  interior,
  dirichlet_boundary,
  impedance_boundary,
  accessible_boundary,
  exterior,
};

const char* to_string(NodeClass c);

/// Uniform grid over the bounding box of the augmented domain Omega_0 = Omega u D_0.
///
/// Cells carry a region label (1..N for D_j, 0 for D_0, -1 outside). Node labels
/// derive from the adjacent cells: a node touching several subdomains of Omega takes
/// the smallest index; D_0 only labels nodes that touch no cell of Omega.
class GridDomain {
 public:
  int dim() const { return dim_; }
  double h() const { return h_; }
  double r0() const { return spec_.r0; }
  double d0_thickness() const { return d0_thickness_; }
  const DomainSpec& spec() const { return spec_; }
  const Index3& counts() const { return counts_; }
  const Vec& origin() const { return origin_; }

  std::size_t node_count() const { return node_class_.size(); }
  std::size_t node(const Index3& ijk) const {
    return static_cast<std::size_t>(ijk[0]) +
           static_cast<std::size_t>(counts_[0]) *
               (static_cast<std::size_t>(ijk[1]) + static_cast<std::size_t>(counts_[1]) * static_cast<std::size_t>(ijk[2]));
  }
  Index3 ijk(std::size_t node) const;
  bool in_grid(const Index3& ijk) const;
  Vec coords(std::size_t node) const;
  Vec coords(const Index3& ijk) const;
  /// Nearest node to a point (clamped to the grid).
  std::size_t nearest_node(const Vec& x) const;
  /// Grid index along `axis` of a coordinate that is known to be commensurate with h.
  int plane_index(int axis, double x) const;

  NodeClass node_class(std::size_t n) const { return node_class_[n]; }
  int subdomain(std::size_t n) const { return node_label_[n]; }
  int cell_label(const Index3& cell) const;
  bool cell_in_grid(const Index3& cell) const;

  /// Unknown of the mixed problem on Omega_0 (Dirichlet on dOmega_0 \ Sigma_0).
  bool active_augmented(std::size_t n) const { return active_aug_[n] != 0; }
  /// Unknown of the impedance generation problem on Omega (Dirichlet on dOmega \ Sigma).
  bool active_physical(std::size_t n) const { return active_phys_[n] != 0; }
  bool in_omega_closure(std::size_t n) const { return omega_closure_[n] != 0; }

  int normal_axis() const { return spec_.sigma.axis; }
  /// +1 when Omega lies on the positive side of Sigma along the normal axis.
  int inward_sign() const { return spec_.sigma.upper ? -1 : 1; }
  int sigma_plane() const { return sigma_plane_; }
  int sigma0_plane() const { return sigma0_plane_; }
  const Box& d0_box() const { return d0_box_; }
  const Box& sigma_box() const { return sigma_box_; }

  /// Sigma nodes in lexicographic order of their lateral grid indices.
  const std::vector<std::size_t>& sigma_nodes() const { return sigma_nodes_; }
  std::size_t count(NodeClass c) const;

  bool out_of_paper_regime() const { return dim_ < 3; }

  friend GridDomain build_augmented_domain(const DomainSpec& spec, double h);

 private:
  DomainSpec spec_;
  int dim_ = 3;
  double h_ = 0.0;
  double d0_thickness_ = 0.0;
  Vec origin_{};
  Index3 counts_{1, 1, 1};
  Box d0_box_;
  Box sigma_box_;
  int sigma_plane_ = 0;
  int sigma0_plane_ = 0;
  std::vector<int> cell_label_;
  std::vector<NodeClass> node_class_;
  std::vector<int> node_label_;
  std::vector<std::uint8_t> active_aug_;
  std::vector<std::uint8_t> active_phys_;
  std::vector<std::uint8_t> omega_closure_;
  std::vector<std::size_t> sigma_nodes_;
};

using DomainPtr = std::shared_ptr<const GridDomain>;

GridDomain build_augmented_domain(const DomainSpec& spec, double h);

inline DomainPtr make_domain(const DomainSpec& spec, double h) {
  return std::make_shared<const GridDomain>(build_augmented_domain(spec, h));
}

/// Flat interface between consecutive members of a chain.
struct InterfaceRecord {
  std::vector<std::size_t> nodes;  // open interface patch
  Vec center{};                    // centroid of the patch
  std::size_t center_node = 0;     // P_k snapped to the grid
  int axis = 0;
  int normal_sign = 1;  // nu_k = normal_sign * e_axis, from D_{j_{k-1}} into D_{j_k}
  double flat_radius = 0.0;

  Vec normal() const {
    Vec n{};
    n[static_cast<std::size_t>(axis)] = normal_sign;
    return n;
  }
};

struct Chain {
  std::vector<int> order;  // subdomain indices j_1..j_K (D_0 implicit in front)
  std::vector<InterfaceRecord> interfaces;  // link k = 1..K stored at k - 1
};

/// Checks the chain assumptions and fills the interface records.
/// Link 1 joins D_0 to D_{j_1} across Sigma_1; link k joins D_{j_{k-1}} to D_{j_k}.
Chain validate_chain(const GridDomain& domain, const Chain& chain);

/// FNV-1a of the domain spec and spacing.
std::uint64_t domain_hash(const GridDomain& domain);

/// One node per line: index, coordinates, class, subdomain.
void dump_nodes(const GridDomain& domain, std::ostream& out);

}  // namespace lipstab
