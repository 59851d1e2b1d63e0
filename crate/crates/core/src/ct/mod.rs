//! Desk-scale parallel-beam CT: projector, phantoms and the ADMM reconstruction
//! whose x-update consumes a majorizer of `gamma A^T A`.

mod admm;
mod geometry;
mod phantom;

use std::sync::Arc;

pub use admm::{
    admm_dual_update, admm_u_update, admm_x_update, ct_reconstruct, differences, differences_adjoint, fbp,
    AdmmOptions, AdmmState, CtProblem, CtTrace, CtTraceRecord, Reconstruction, Regularizer, XUpdate,
};
pub use geometry::{Geometry, Projector};
pub use phantom::{disk, rasterize, shepp_logan, Ellipse, SHEPP_LOGAN};

use crate::error::Result;
use crate::operator::LinearOperator;

pub fn build_projector(geometry: &Geometry) -> Result<Arc<Projector>> {
    Ok(Arc::new(Projector::new(geometry)?))
}

/// `K = [c A_down; I]` where `A_down` covers the same angles and detector with
/// `floor(views / vf)` views and `floor(channels / cf)` channels.
///
/// `block_scale` (`c`) only rebalances the two blocks for the dual ascent: any
/// `d` for `c = 1` maps to `d / c^2` on the first block.
pub fn downsampled_k(full: &Geometry, view_factor: f64, channel_factor: f64, block_scale: f64) -> Result<LinearOperator> {
    let coarse = full.downsampled(view_factor, channel_factor)?;
    let a = LinearOperator::projector(Projector::new(&coarse)?);
    let a = if block_scale == 1.0 { a } else { LinearOperator::scaled(block_scale, a)? };
    LinearOperator::stacked(vec![a, LinearOperator::identity(full.pixels())?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsampled_k_shapes() {
        let g = Geometry::new(16, 24, 24).unwrap();
        let k = downsampled_k(&g, 12.0, 7.0, 1.0).unwrap();
        assert_eq!(k.rows(), 2 * 3 + 256);
        assert_eq!(k.cols(), 256);
        let same = downsampled_k(&g, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(same.rows(), 24 * 24 + 256);
        assert!(downsampled_k(&g, 30.0, 1.0, 1.0).is_err());
    }
}
