pub mod bpdual;
pub mod cli;
pub mod lattice;
pub mod markovnet;
pub mod med;
pub mod opalg;
pub mod oracle;
