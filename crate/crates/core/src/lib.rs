pub mod alt_t;
pub mod cli;
pub mod data;
pub mod error;
pub mod glasso;
pub mod linalg;
pub mod rng;
pub mod sim;
pub mod t_model;
pub mod tlasso;
