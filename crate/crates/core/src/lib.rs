pub mod datastore;
pub mod diffcore;
pub mod evaluation;
pub mod geodesy;
pub mod graphnet;
pub mod normstats;
pub mod training;
