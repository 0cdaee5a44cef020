pub mod coeff;
pub mod deriv;
pub mod experiments;
pub mod multiindex;
pub mod qmc;
pub mod solver;
pub mod spatial;
pub mod util;
