//! Convenience pipeline from a level set and background mesh to an assembled system.

use crate::assembly::{assemble, compute_scalings, AssembledSystem, PenaltyParameters, ProblemData, ScalingConstants};
use crate::error::Result;
use crate::geometry::{GeometryOptions, SurfaceGeometry};
use crate::levelset::LevelSet;
use crate::mesh::BackgroundMesh;
use crate::scalar::Real;
use crate::space::DgSpace;

#[derive(Clone, Debug)]
pub struct Discretization<T> {
    pub space: DgSpace<T>,
    pub data: ProblemData<T>,
    pub scalings: ScalingConstants<T>,
    pub system: AssembledSystem<T>,
}

impl<T: Real> Discretization<T> {
    pub fn build(
        levelset: LevelSet<T>,
        mesh: BackgroundMesh<T>,
        degree: usize,
        data: ProblemData<T>,
        penalties: PenaltyParameters<T>,
        options: GeometryOptions,
    ) -> Result<Self> {
        let geometry = SurfaceGeometry::build(levelset, mesh, options)?;
        let space = DgSpace::new(geometry, degree)?;
        let scalings = compute_scalings(&data, space.geometry())?;
        let system = assemble(&space, &data, penalties, &scalings)?;
        Ok(Self {
            space,
            data,
            scalings,
            system,
        })
    }

    pub fn h(&self) -> T {
        self.scalings.h
    }

    pub fn ndofs(&self) -> usize {
        self.space.ndofs()
    }
}
