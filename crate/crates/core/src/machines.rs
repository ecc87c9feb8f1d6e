//! Machines and maps shipped with the crate, embedded from `assets/`.

use crate::cra::{Cra, CraError};
use crate::pdrm::{Pdrm, PdrmError};

pub const MAZE_PDRM: &str = include_str!("../assets/machines/maze.pdrm");
pub const MULTIMAZE_PDRM: &str = include_str!("../assets/machines/multimaze.pdrm");
pub const PAINTWORLD_PDRM: &str = include_str!("../assets/machines/paintworld.pdrm");
pub const LETTERENV_PDRM: &str = include_str!("../assets/machines/letterenv.pdrm");
pub const LETTERENV_CRA: &str = include_str!("../assets/machines/letterenv.cra");
pub const DELIVER4_PDRM: &str = include_str!("../assets/machines/deliver4.pdrm");
pub const DELIVER8_PDRM: &str = include_str!("../assets/machines/deliver8.pdrm");
pub const DELIVER4_8_PDRM: &str = include_str!("../assets/machines/deliver4-8.pdrm");

pub fn maze() -> Result<Pdrm, PdrmError> {
    Pdrm::from_text(MAZE_PDRM)
}

pub fn multimaze() -> Result<Pdrm, PdrmError> {
    Pdrm::from_text(MULTIMAZE_PDRM)
}

pub fn paintworld() -> Result<Pdrm, PdrmError> {
    Pdrm::from_text(PAINTWORLD_PDRM)
}

pub fn letterenv() -> Result<Pdrm, PdrmError> {
    Pdrm::from_text(LETTERENV_PDRM)
}

pub fn letterenv_cra() -> Result<Cra, CraError> {
    Cra::from_text(LETTERENV_CRA)
}

pub const MAZE5_MAP: &str = include_str!("../assets/maps/maze5.map");
pub const MAZE10_MAP: &str = include_str!("../assets/maps/maze10.map");
pub const MAZE20_MAP: &str = include_str!("../assets/maps/maze20.map");
pub const MULTIMAZE10_MAP: &str = include_str!("../assets/maps/multimaze10.map");
pub const MULTIMAZE20_MAP: &str = include_str!("../assets/maps/multimaze20.map");
pub const DELIVER10_MAP: &str = include_str!("../assets/maps/deliver10.map");
pub const DELIVER20_MAP: &str = include_str!("../assets/maps/deliver20.map");
