//! Kinetic zooms, oscillation ladders and Hölder fits.

mod fit;
mod oscillation;
mod scaling;
mod zoom;

pub use fit::{holder_fit, modulus_from_constants, HolderFit, ModulusDenominator};
pub use oscillation::{
    isoperimetric_probe, normalize, oscillation, oscillation_ladder, theta_sequence, IsoperimetricProbe, LadderConfig,
    LemmaConstants, OscillationLadder, ThetaSequence,
};
pub use scaling::ScalingMap;
pub use zoom::{composition_defect, pullback_boundary, zoom, zoom_field, Sample, Sampler, ZoomResidual, ZoomTarget, ZoomedTriple};
