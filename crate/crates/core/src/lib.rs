//! Models and planning tools for a milling cell built from two serial
//! 6-DOF robots coupled at their flanges through a spring module.
//!
//! * [`kinematics`]: DH arm model, forward/inverse kinematics, Jacobian.
//! * [`stiffness`]: joint-compliance stiffness, coupled tool stiffness and
//!   the tension offset for the second robot.
//! * [`modal`]: tension-dependent lumped modal model, FRFs and shift fits.
//! * [`pathplan`]: tool paths, a G-code subset and synchronized setpoints.
//! * [`compensation`]: deformation under tension and rigid compensation.

pub mod compensation;
pub mod config;
pub mod error;
pub mod io;
pub mod kinematics;
pub mod modal;
pub mod par;
pub mod pathplan;
pub mod pose;
pub mod stiffness;

pub use error::{Error, Result};
pub use kinematics::{ArmModel, DhRow, IkOptions, JointConfig};
pub use pose::Pose;
pub use stiffness::{CoupledSystem, JointStiffness, SpringModel, Wrench};
