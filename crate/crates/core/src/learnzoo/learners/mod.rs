pub mod bayes;
pub mod boosting;
pub mod ensemble;
pub mod forest;
pub mod knn;
pub mod linear;
pub mod regtree;
pub mod tree;
