pub mod config;
pub mod control;
pub mod model;
pub mod observables;
pub mod oracle;
pub mod output;
pub mod propagator;
pub mod scenario;
pub mod special;
pub mod timebins;
