//! Offspring and step laws, samplers, log-MGFs and exponential tilting.

mod offspring;
mod step;
mod tilt;

pub use offspring::{multinomial, OffspringLaw};
pub use step::{Lattice, LogMgf, MgfDomain, StepFamily, StepLaw, TailClass};
pub use tilt::TiltedStep;
