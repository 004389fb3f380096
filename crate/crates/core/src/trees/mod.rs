mod cart;
mod forest;
mod pruning;

pub use cart::*;
pub use forest::*;
pub use pruning::*;
