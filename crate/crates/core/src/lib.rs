pub mod autodiff;
pub mod cli;
pub mod graphs;
pub mod model;
pub mod structures;
pub mod toy;
pub mod training;
