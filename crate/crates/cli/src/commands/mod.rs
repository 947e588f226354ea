pub mod align;
pub mod evaluate;
pub mod fit;
pub mod misalign;
pub mod tools;
