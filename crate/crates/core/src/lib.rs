pub mod dynamics;
pub mod experiments;
pub mod model;
pub mod pipeline;
pub mod signals;
