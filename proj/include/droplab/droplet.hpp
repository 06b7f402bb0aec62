#pragma once

// The two-parameter droplet family: fields u^xi(x) = U(|x-xi|/eps, rho_a/eps)
// sampled from the solved radial table, with the additive radius shift a^xi
// chosen so the mass matches the reference droplet at xi0.  Derivatives with
// respect to the center come from the radial chain rule plus the
// mass-constraint term obtained from the implicit function theorem, so the
// sampled family conserves mass along xi to roundoff.

#include <array>
#include <optional>

#include "droplab/field.hpp"
#include "droplab/radial.hpp"

namespace droplab::droplet {

struct DropletState {
    Vec2 xi;
    double a = 0.0;             // mass-correction radius shift (physical units)
    double rho_resc = 0.0;      // (rho_phys - a)/eps actually sampled
    double eps = 0.0;
    double rho_phys = 0.0;
    double clearance = 0.0;     // dist(xi, boundary) - rho_phys
    double mass = 0.0;
    Vec2 da;                    // d a^xi / d xi
    Field field;
    std::array<Field, 2> tangent;     // d u^xi / d xi_i
    bool has_second = false;
    std::array<Field, 3> second;      // d2 u^xi/dxi_i dxi_j as (xx, xy, yy)

    const Field& second_deriv(int i, int j) const {
        return second[(i == 0 && j == 0) ? 0 : (i == 1 && j == 1) ? 2 : 1];
    }
};

struct DropletFamily {
    radial::RadialProfile profile;  // solved at rho_phys/eps
    Grid grid;
    double eps = 0.0;
    double rho_phys = 0.0;
    double delta = 0.1;             // boundary clearance margin
    Vec2 xi0{0.5, 0.5};
    double mass0 = 0.0;             // reference mass, a = 0 at xi0
    bool mass_chain_term = true;    // include the a^xi term in tangents

    static DropletFamily create(Grid g, double eps, double rho_phys,
                                double delta = 0.1, Vec2 xi0 = {0.5, 0.5},
                                const radial::RadialOptions& opt = {});

    // Field only (no derivatives); the projection hot path.
    Field sample_field(Vec2 xi, double a) const;

    // One-pass sampling with the mass correction solved inline (the sampled
    // mass is affine in a); returns the corrected field and a^xi.
    Field sample_mass_corrected(Vec2 xi, double mass_target, double* a_out) const;

    // Full state: clearance check, mass correction, tangents and (optionally)
    // second derivatives.  mass_target defaults to the family reference;
    // passing nullopt disables the correction (a = 0).
    DropletState build(Vec2 xi, std::optional<double> mass_target,
                       bool with_second = false) const;
    DropletState build(Vec2 xi, bool with_second = false) const {
        return build(xi, mass0, with_second);
    }

    double min_clearance() const { return rho_phys + delta; }
};

}  // namespace droplab::droplet
