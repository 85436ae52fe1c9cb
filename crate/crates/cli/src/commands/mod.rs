pub mod check;
pub mod dpbm;
pub mod simulate;
pub mod tree;
pub mod value;
