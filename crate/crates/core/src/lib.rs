pub mod dynamics;
pub mod energy;
pub mod evans;
pub mod io;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod profile;
pub mod stencil;
pub mod sweep;
