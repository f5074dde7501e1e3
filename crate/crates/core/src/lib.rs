//! Return-map dynamics near a homoclinic cycle to a bifocus: local and global
//! transition maps, horseshoe verification, tangency-unfolding families, and
//! a Denjoy-type wandering-domain construction.

pub mod denjoy;
pub mod eig3;
pub mod error;
pub mod horseshoe;
pub mod local_flow;
pub mod return_map;
pub mod section;
pub mod tangency;

pub use error::{LabError, Result};
pub use section::{BifocusParams, InSectionPoint, OutSectionPoint, RectPoint, SectionNeighbourhood};
