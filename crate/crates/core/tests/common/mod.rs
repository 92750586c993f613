pub mod montecarlo;
pub mod oracle;
