#pragma once

#include <string>

#include "lipstab/geometry.hpp"
#include "lipstab/potential.hpp"

namespace lipstab::fixtures {

/// Unit box split at the midplane of the last axis; Sigma is the bottom face.
DomainSpec two_half_cube(int dim = 3, double r0 = 1.5);
/// Unit box, one subdomain, Sigma the bottom face.
DomainSpec unit_box(int dim = 3, double r0 = 1.5);
/// Unit square cut into four quarters numbered counter-clockwise from the bottom left.
DomainSpec quad_2x2(double r0 = 0.75);

/// Fixture by name: "two_half_cube", "unit_box", "quad_2x2".
DomainSpec by_name(const std::string& name, int dim);

/// Chain D_1, D_2, ..., D_N in index order.
Chain natural_chain(const DomainSpec& spec);

}  // namespace lipstab::fixtures
