//! Simulation toolkit for dynamic Voronoi point processes and the
//! area-interaction point process, with the spatial statistics needed to
//! characterise their stationary regimes (Thiel's redundancy, nearest
//! neighbour counts, J-function estimates).

pub mod aipp;
pub mod dynamics;
pub mod geometry;
pub mod harness;
pub mod stats;
