//! Mid-surface patches, thickness profiles, the shell grid and the
//! admissibility validators.

mod admissibility;
mod grid;
mod surface;
mod thickness;

pub use admissibility::{validate_admissibility, AdmissibilityReport, AdmissibilityRow, BoundKind};
pub use grid::{offset_map, Column, GridDims, OffsetNode, ShellGrid};
pub use surface::{
    make_builtin_surface, DomainDescriptors, PatchDomain, SurfaceKind, SurfacePatch, SurfacePoint, Vec3,
    ZBound, METRIC_FLOOR,
};
pub use thickness::{ThicknessPoint, ThicknessProfile, ThicknessSample, ThicknessShape};

pub(crate) use surface::{cross, dot, linspace};
